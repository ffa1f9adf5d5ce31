import math

import numpy as np
import pytest

from dcsampling.cover import LinkedCover, Region
from dcsampling.expectation import Integrand, estimate_expectation
from dcsampling.proportion import ProportionEstimate, estimate_proportions, true_proportions
from dcsampling.samplers import Envelope, SubsetSample, subset_rejection

UNIT = LinkedCover([Region([0.0], [0.55]), Region([0.45], [1.0])])


def _gamma_samples(gamma, cover, M, seed):
    env = Envelope.from_target(gamma)
    return [subset_rejection(gamma, env, cover, j, M, seed=seed) for j in range(cover.n_parts)]


def test_constant_integrand_gives_one(gamma, gamma_cover):
    s = _gamma_samples(gamma, gamma_cover, 2000, 0)
    res = estimate_expectation(Integrand.constant(1.0), s, estimate_proportions(s, gamma_cover))
    assert math.isclose(res.estimate, 1.0, rel_tol=1e-12)
    assert res.stderr == 0.0


def test_single_part_is_plain_mean():
    cover = LinkedCover([Region([0.0], [1.0])])
    x = np.random.default_rng(0).random(1000)
    s = SubsetSample.from_draws(cover, 0, x)
    res = estimate_expectation(Integrand.coordinate(0), [s], ProportionEstimate.exact([1.0], [1.0]))
    assert math.isclose(res.estimate, x.mean())


def test_gamma_mean(gamma, gamma_cover):
    s = _gamma_samples(gamma, gamma_cover, 100_000, 1)
    res = estimate_expectation(Integrand.coordinate(), s, estimate_proportions(s, gamma_cover))
    # proportion noise dominates; its spread across seeds is about 0.016 here
    assert abs(res.estimate - 4.0) < 0.05
    assert res.weight_uncertainty_ignored
    assert len(res.per_part) == 3


def test_literal_form_is_biased_low_with_overlap(gamma, gamma_cover):
    s = _gamma_samples(gamma, gamma_cover, 20_000, 2)
    props = estimate_proportions(s, gamma_cover)
    cond = estimate_expectation(Integrand.constant(), s, props)
    lit = estimate_expectation(Integrand.constant(), s, props, form="literal")
    assert lit.estimate < cond.estimate
    expected = sum(w * (1 - f) for w, f in zip(props.exclusive, props.prior_fraction))
    assert math.isclose(lit.estimate, expected)


def test_exact_weights_discrete(chain_target, chain_cover):
    from conftest import finite_target

    lam = chain_target.stationary
    t = finite_target(lam)
    props = true_proportions(t, chain_cover)
    env = Envelope.from_target(t)
    s = [subset_rejection(t, env, chain_cover, j, 20_000, seed=3) for j in range(2)]
    for h, truth in ((Integrand.coordinate(), lam @ np.arange(7)), (Integrand.indicator(4), lam[4])):
        res = estimate_expectation(h, s, props)
        assert abs(res.estimate - truth) < 3 * res.stderr + 1e-12


def test_importance_weights_reweight_chains():
    rng = np.random.default_rng(4)
    a = SubsetSample.from_draws(UNIT, 0, rng.uniform(0, 0.55, 20_000))
    b = SubsetSample.from_draws(UNIT, 1, rng.uniform(0.45, 1.0, 20_000))
    props = ProportionEstimate.exact([0.55, 0.55], [0.55, 0.45])
    flat = estimate_expectation(Integrand.coordinate(), [a, b], props)
    # weights proportional to 2x turn the uniform into the density 2x on [0, 1]
    lw = [np.log(2 * s.draws[:, 0]) for s in (a, b)]
    res = estimate_expectation(Integrand.coordinate(), [a, b], props, log_weights=lw)
    assert abs(flat.estimate - 0.5) < 0.01
    assert res.estimate > flat.estimate


def test_validation(gamma, gamma_cover):
    s = _gamma_samples(gamma, gamma_cover, 200, 0)
    props = estimate_proportions(s, gamma_cover)
    with pytest.raises(ValueError):
        estimate_expectation(Integrand.constant(), s, props, form="other")
    with pytest.raises(ValueError):
        estimate_expectation(Integrand.constant(), s[:2], props)


def test_result_serializes():
    cover = LinkedCover([Region([0.0], [1.0])])
    s = SubsetSample.from_draws(cover, 0, np.linspace(0, 1, 40))
    res = estimate_expectation(Integrand.indicator(1.0), [s], ProportionEstimate.exact([1.0], [1.0]))
    assert '"h": "1[x0=1]"' in res.dumps()
