import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dcsampling.cover import DiscreteCover, LinkedCover, Region  # noqa: E402
from dcsampling.experiments import discrete_cover, reference_gamma_cover  # noqa: E402
from dcsampling.samplers import SubsetSample  # noqa: E402
from dcsampling.targets import TargetModel, discrete_chain_target, gamma_target  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running statistical check")
    config.addinivalue_line("markers", "acceptance: one acceptance criterion at its stated tolerance")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(results):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}: {detail}")


@pytest.fixture
def gamma():
    return gamma_target(4.0, 1.0)


@pytest.fixture
def gamma_cover():
    return reference_gamma_cover()


@pytest.fixture
def chain_cover():
    return discrete_cover()


@pytest.fixture
def chain_target():
    return discrete_chain_target(0.03)


def uniform_target() -> TargetModel:
    from scipy import stats

    return TargetModel(
        name="uniform",
        dim=1,
        logpdf=lambda x: np.zeros(len(x)),
        support=Region([0.0], [1.0]),
        cdf=stats.uniform.cdf,
        ppf=stats.uniform.ppf,
        sampler=lambda rng, n: rng.random((n, 1)),
        scale=np.array([0.3]),
        init=np.array([0.5]),
    )


def finite_target(lam) -> TargetModel:
    """Target on states ``0..K-1`` with exact law ``lam`` and an i.i.d. sampler."""
    lam = np.asarray(lam, float)
    K = len(lam)
    log_lam = np.log(lam)
    return TargetModel(
        name="finite",
        dim=1,
        logpdf=lambda x: log_lam[x[:, 0].astype(np.int64)],
        support=Region([0.0], [K - 1.0]),
        lattice=True,
        sampler=lambda rng, n: rng.choice(K, size=(n, 1), p=lam).astype(float),
        stationary=lam,
    )


def sample_with_hits(cover, j, draws) -> SubsetSample:
    return SubsetSample.from_draws(cover, j, np.asarray(draws, float))
