import math

import numpy as np
import pytest
from scipy import stats

from dcsampling.cover import Region
from dcsampling.pmmh import (
    FALLBACK_COV,
    PFConfig,
    PMMHChain,
    ParticleFilterError,
    SVParams,
    SVPrior,
    default_init,
    pf_loglik,
    pilot_covariance,
    pmmh_chain,
    read_returns,
    simulate_sv,
    sv_cover,
    write_returns,
)

from oracles import sv_exact_loglik, sv_one_step_loglik

TRUTH = SVParams(0.9, 0.7, -0.3, 0.3)
ONE_STEP = -0.8290500639252789  # log p(y_1 = 0.5) at TRUTH, 2-d quadrature
Y5 = np.array([0.3, -1.1, 0.2, 0.9, -0.4])
T5 = -5.508565761169665  # grid forward recursion at TRUTH


def test_param_validation():
    for bad in [(1.0, 1, 0, 1), (0.5, 0, 0, 1), (0.5, 1, 1.0, 1), (0.5, 1, 0, 0)]:
        with pytest.raises(ValueError):
            SVParams(*bad)
    np.testing.assert_array_equal(SVParams.from_array([0.1, 2, 0.3, 0.4]).to_array(), [0.1, 2, 0.3, 0.4])


def test_pf_config_validation():
    with pytest.raises(ValueError):
        PFConfig(0)
    with pytest.raises(ValueError):
        PFConfig(10, resampling="multinomial")


def test_degenerate_state_gives_scaled_noise():
    x, y = simulate_sv(SVParams(0.0, 0.7, 0.0, 1e-9), 20_000, seed=1)
    assert np.abs(x).max() < 1e-7
    assert abs(y.var() / 0.49 - 1) < 0.05


@pytest.mark.parametrize("rho", [0.0, -0.3])
def test_innovation_correlation(rho):
    p = SVParams(0.9, 0.7, rho, 0.3)
    x, y = simulate_sv(p, 50_000, seed=2)
    w = (x[1:] - p.phi * x[:-1]) / p.sigma
    u = y / (p.beta * np.exp(x[1:] / 2))
    assert abs(np.corrcoef(u, w)[0, 1] - rho) < 3 / math.sqrt(50_000) + 0.005


def test_heavy_tails():
    _, y = simulate_sv(TRUTH, 10_000, seed=3)
    assert stats.kurtosis(y, fisher=False) > 3


def test_oracles_agree():
    assert math.isclose(sv_one_step_loglik(*TRUTH.to_array(), 0.5), ONE_STEP, abs_tol=1e-9)
    assert math.isclose(sv_exact_loglik(*TRUTH.to_array(), [0.5]), ONE_STEP, abs_tol=1e-9)
    assert math.isclose(sv_exact_loglik(*TRUTH.to_array(), Y5), T5, abs_tol=1e-9)


def test_collapsed_filter_is_exact():
    p = SVParams(0.0, 0.7, 0.0, 1e-12)
    y = np.array([0.2, -0.5, 1.3, 0.0])
    ll = pf_loglik(p, y, PFConfig(1, seed=4))
    assert math.isclose(ll, stats.norm(0, 0.7).logpdf(y).sum(), rel_tol=1e-9)


def test_one_step_estimate_is_unbiased():
    est = np.exp([pf_loglik(TRUTH, [0.5], PFConfig(200, seed=s)) for s in range(300)])
    assert abs(est.mean() - math.exp(ONE_STEP)) < 3 * est.std(ddof=1) / math.sqrt(len(est))


def test_variance_shrinks_with_particles():
    _, y = simulate_sv(TRUTH, 100, seed=5)
    var = [np.var([pf_loglik(TRUTH, y, PFConfig(n, seed=s)) for s in range(100)]) for n in (50, 100, 200)]
    assert var[0] > var[1] > var[2]


def test_filter_is_seeded():
    _, y = simulate_sv(TRUTH, 50, seed=6)
    assert pf_loglik(TRUTH, y, PFConfig(64, seed=3)) == pf_loglik(TRUTH, y, PFConfig(64, seed=3))


def test_weight_collapse_raises():
    with pytest.raises(ParticleFilterError) as err:
        pf_loglik(SVParams(0.5, 1.0, 0.0, 1e6), [0.1, 0.2], PFConfig(10))
    assert err.value.step == 1


def test_filter_rejects_bad_data():
    with pytest.raises(ValueError):
        pf_loglik(TRUTH, [0.1, np.nan])


def test_prior():
    prior = SVPrior()
    assert prior.logpdf([1.2, 1, 0, 1]) == -math.inf
    assert math.isclose(prior.logpdf([0.5, 2.0, 0.1, 1.0]), -2.0 - 2.0)
    draws = np.array([prior.sample(np.random.default_rng(s)) for s in range(500)])
    assert np.all((draws[:, 0] >= 0) & (draws[:, 0] <= 1) & (np.abs(draws[:, 2]) <= 1))


def test_zero_covariance_never_moves():
    _, y = simulate_sv(TRUTH, 50, seed=7)
    ch = pmmh_chain(y, cov=np.zeros((4, 4)), steps=50, config=PFConfig(50), seed=1)
    assert np.all(ch.theta == ch.theta[0])
    assert np.all(ch.loglik == ch.loglik[0])
    assert ch.acceptance_rate == 0.0


def test_restricted_chain_stays_in_part():
    _, y = simulate_sv(TRUTH, 100, seed=8)
    c1 = sv_cover().parts[0]
    ch = pmmh_chain(y, steps=400, restriction=c1, config=PFConfig(50), seed=2)
    assert ch.param("phi").max() <= 0.56


def test_sv_cover():
    cover = sv_cover()
    ov = cover.adjacent_overlap(0)
    assert (ov.lo[0], ov.hi[0]) == (0.54, 0.56)
    assert cover.contains(0, [0.55, 1, 0, 1]) and cover.contains(1, [0.55, 1, 0, 1])
    assert cover.contains(0, [0.3, 1, 0, 1]) and not cover.contains(1, [0.3, 1, 0, 1])


def test_default_init_inside_restriction():
    for part in sv_cover().parts:
        assert part.contains(default_init(part))


def test_posterior_covers_truth():
    _, y = simulate_sv(TRUTH, 200, seed=9)
    pilot = pmmh_chain(y, steps=1000, seed=3)
    ch = pmmh_chain(y, cov=pilot_covariance(pilot), steps=3000, seed=4)
    phi = ch.param("phi")[300:]
    lo, hi = np.percentile(phi, [2.5, 97.5])
    assert lo <= TRUTH.phi <= hi
    assert lo <= phi.mean() <= hi


def test_pilot_covariance_fallback():
    ch = PMMHChain(np.ones((10, 4)), np.zeros(10), np.zeros(10, bool))
    np.testing.assert_array_equal(pilot_covariance(ch), FALLBACK_COV)


def test_chain_round_trip(tmp_path):
    _, y = simulate_sv(TRUTH, 30, seed=10)
    ch = pmmh_chain(y, steps=20, config=PFConfig(20), seed=5)
    ch.save(tmp_path / "c.csv")
    back = PMMHChain.load(tmp_path / "c.csv")
    np.testing.assert_array_equal(back.theta, ch.theta)
    np.testing.assert_array_equal(back.accepted, ch.accepted)


def test_returns_round_trip(tmp_path):
    y = np.array([0.01, -0.02, 0.003])
    write_returns(tmp_path / "r.csv", y)
    np.testing.assert_array_equal(read_returns(tmp_path / "r.csv"), y)
    (tmp_path / "bad.csv").write_text("log_return\n")
    with pytest.raises(ValueError):
        read_returns(tmp_path / "bad.csv")
