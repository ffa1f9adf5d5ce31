import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dcsampling.cover import DiscreteCover, LinkedCover, Region, disperse_cover, quantile_breakpoints
from dcsampling.diagnostics import autocorrelation, ks_distance, tv_discrete
from dcsampling.merge import merge, merge_weighted, merge_with_reuse
from dcsampling.proportion import FailureError, estimate_proportions, failure_bound, normalize_proportions
from dcsampling.samplers import SubsetSample

finite = st.floats(-100, 100, allow_nan=False)
prob = st.floats(0, 1)


@st.composite
def regions(draw, ndim=2):
    lo = draw(st.lists(finite, min_size=ndim, max_size=ndim))
    hi = draw(st.lists(finite, min_size=ndim, max_size=ndim))
    return Region(lo, hi)


@given(regions(), regions(), st.lists(finite, min_size=2, max_size=2))
def test_intersection_is_pointwise_and(a, b, p):
    assert a.intersect(b) == b.intersect(a)
    assert a.intersect(b).contains(p) == (a.contains(p) and b.contains(p))


@given(st.integers(1, 200), st.integers(1, 4))
def test_disperse_cover_factorizes(W, d):
    f = disperse_cover(W, d)
    assert len(f) == d and int(np.prod(f)) == W and f == sorted(f, reverse=True)


@given(arrays(float, st.integers(1, 200), elements=finite), st.integers(1, 8), st.floats(0, 0.1))
def test_breakpoints_are_ordered(x, parts, delta):
    bp = quantile_breakpoints(x, parts, delta)
    assert bp.shape == (parts - 1, 2)
    assert np.all(bp[:, 0] <= bp[:, 1])
    assert np.all(np.diff(bp[:, 0]) >= 0)


@given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=6).flatmap(
    lambda raw: st.tuples(st.just(raw), st.lists(st.floats(0, 0.9), min_size=len(raw), max_size=len(raw)))),
    st.floats(1e-3, 1e3))
def test_normalization_identity(args, c):
    raw, frac = np.array(args[0]), np.array(args[1])
    frac[0] = 0.0
    pi, ex = normalize_proportions(raw, frac)
    assert np.isclose(np.sum(pi * (1 - frac)), 1.0)
    assert np.isclose(ex.sum(), 1.0) and np.all(ex >= 0)
    pi2, _ = normalize_proportions(raw * c, frac)
    np.testing.assert_allclose(pi, pi2, rtol=1e-9)


@given(prob, st.integers(1, 50), st.integers(1, 10))
def test_failure_bound_range_and_monotonicity(p, M, W):
    b = failure_bound(p, M, W)
    assert 0.0 <= b <= 1.0
    assert failure_bound(p, M + 1, W) <= b + 1e-15
    assert failure_bound(p, M, W + 1) >= b - 1e-15
    if W == 1:
        assert b == 0.0


@given(arrays(np.int64, st.integers(1, 300), elements=st.integers(0, 4)),
       st.lists(st.floats(0.01, 1), min_size=5, max_size=5))
def test_tv_in_unit_interval(chain, w):
    lam = np.array(w) / np.sum(w)
    rep = tv_discrete(chain, lam)
    assert 0.0 <= rep.tv <= 1.0
    assert rep.tv <= tv_discrete(chain, lam, norm="l1").tv + 1e-12


@given(arrays(float, st.integers(1, 300), elements=finite))
def test_ks_in_unit_interval(x):
    from scipy import stats

    d = ks_distance(x, stats.norm.cdf)
    assert 0.0 <= d <= 1.0


@given(arrays(float, st.integers(3, 200), elements=finite), st.integers(0, 2))
def test_acf_bounded(x, lag):
    try:
        ac = autocorrelation(x, lag)
    except ValueError:
        assert np.var(x) < 1e-300
        return
    assert ac[0] == 1.0 and np.all(np.abs(ac) <= 1 + 1e-9)


COVER = DiscreteCover(6, [[0, 1, 2], [2, 3, 4], [4, 5]])
PARTS = [[0, 1, 2], [2, 3, 4], [4, 5]]


@st.composite
def part_samples(draw):
    M = draw(st.integers(1, 40))
    out = []
    for j, states in enumerate(PARTS):
        x = draw(arrays(np.int64, M, elements=st.sampled_from(states)))
        out.append(SubsetSample.from_draws(COVER, j, x[:, None]))
    return out


@settings(max_examples=60, deadline=None)
@given(part_samples(), st.integers(0, 2**32 - 1))
def test_merge_invariants(samples, seed):
    for s in samples:
        lower, upper = s.overlap_hits
        x = s.draws[:, 0]
        assert lower == int(np.isin(x, list(COVER.adjacent_overlap(s.j - 1))).sum())
        assert upper == int(np.isin(x, list(COVER.adjacent_overlap(s.j))).sum())
    try:
        props = estimate_proportions(samples, COVER)
    except FailureError:
        return
    assert np.isclose(props.normalization(), 1.0)
    M = samples[0].M
    merged = [merge(samples, props, seed=seed)]
    if all(s.eligible.any() for s in samples):
        merged += [merge_weighted(samples, props, M, seed=seed), merge_with_reuse(samples, props, M, seed=seed)]
    for m in merged:
        for j in range(3):
            x = m.draws[m.source == j]
            assert COVER.part_mask(j, x).all()
            assert not COVER.prior_overlap_mask(j, x).any()
    d = merged[0]
    assert d.N <= sum(int(s.eligible.sum()) for s in samples)
    top = int(np.argmax(props.pi))
    assert d.kept_counts(3)[top] == int(samples[top].eligible.sum())
