"""Accuracy and mixing diagnostics."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

__all__ = [
    "TVReport",
    "stationary_distribution",
    "tv_discrete",
    "tv_lattice",
    "empirical_pmf",
    "ks_distance",
    "ks_two_sample",
    "autocorrelation",
    "batch_means_se",
]


@dataclass(frozen=True)
class TVReport:
    """Empirical total-variation error of ``N`` draws against a known law.

    ``tv`` is the largest absolute deviation between empirical and exact
    state probabilities; ``norm="l1"`` reports half the L1 distance instead.
    """

    tv: float
    N: int
    label: str = ""
    norm: str = "max"

    def __post_init__(self):
        if not 0.0 <= self.tv <= 1.0:
            raise ValueError(f"TV value {self.tv} outside [0, 1]")

    @property
    def tv_times_n(self) -> float:
        return self.tv * self.N

    def to_json(self) -> dict:
        d = asdict(self)
        d["tv_times_n"] = self.tv_times_n
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def stationary_distribution(P, tol: float = 1e-12) -> np.ndarray:
    """Unique stationary law of an irreducible row-stochastic matrix.

    Solves ``lam (P - I) = 0`` with ``sum(lam) = 1`` by least squares and
    checks the residual against ``tol``.
    """
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("transition matrix must be square")
    if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-12):
        raise ValueError("transition matrix is not row-stochastic")
    K = len(P)
    reach = (P > 0) | np.eye(K, dtype=bool)
    for _ in range(int(np.ceil(np.log2(max(K, 2)))) + 1):
        reach = (reach.astype(int) @ reach.astype(int)) > 0
    if not reach.all():
        raise ValueError("transition matrix is not irreducible")
    A = np.vstack([(P - np.eye(K)).T, np.ones(K)])
    b = np.zeros(K + 1)
    b[-1] = 1.0
    lam, *_ = np.linalg.lstsq(A, b, rcond=None)
    lam = np.clip(lam, 0.0, None)
    lam /= lam.sum()
    resid = np.abs(lam @ P - lam).max()
    if resid > tol:
        raise ValueError(f"stationary solve residual {resid:.2e} exceeds {tol:.0e}")
    return lam


def empirical_pmf(draws, n_states: int) -> np.ndarray:
    x = np.asarray(draws).ravel().astype(np.int64)
    if x.size == 0:
        raise ValueError("no draws")
    if x.min() < 0 or x.max() >= n_states:
        raise ValueError("draw outside the state space")
    return np.bincount(x, minlength=n_states) / x.size


def _deviation(diff: np.ndarray, norm: str) -> float:
    if norm == "max":
        return float(np.abs(diff).max())
    if norm == "l1":
        return 0.5 * float(np.abs(diff).sum())
    raise ValueError(f"unknown norm {norm!r}")


def tv_discrete(chain, pmf, label: str = "", norm: str = "max") -> TVReport:
    """TV error of a state sequence on ``0..K-1``: ``max_j |freq_j - pmf_j|`` by default."""
    pmf = np.asarray(pmf, dtype=float)
    if np.any(pmf < 0) or not np.isclose(pmf.sum(), 1.0, atol=1e-9):
        raise ValueError("pmf is not a probability vector")
    x = np.asarray(chain).ravel()
    tv = _deviation(empirical_pmf(x, len(pmf)) - pmf, norm)
    return TVReport(min(tv, 1.0), int(x.size), label, norm)


def tv_lattice(draws, pmf_fn, upper: int, label: str = "", norm: str = "max") -> TVReport:
    """TV error on the nonnegative integers.

    States ``0..max(upper, max draw)`` are compared; choose ``upper`` so the
    target mass beyond it is negligible (e.g. a far quantile).
    """
    x = np.asarray(draws).ravel().astype(np.int64)
    if x.size == 0:
        raise ValueError("no draws")
    if x.min() < 0:
        raise ValueError("lattice draws must be nonnegative")
    top = max(int(x.max()), int(upper))
    emp = np.bincount(x, minlength=top + 1) / x.size
    ref = np.asarray(pmf_fn(np.arange(top + 1)), dtype=float)
    tv = _deviation(emp - ref, norm)
    return TVReport(min(tv, 1.0), int(x.size), label, norm)


def ks_distance(draws, cdf) -> float:
    """Kolmogorov-Smirnov distance ``sup |F_n - F|``, exact for discontinuous ``F``.

    Both sides of each jump are checked: the empirical CDF at a draw against
    ``F`` there, and the empirical left limit against ``F`` just below.
    """
    x = np.sort(np.asarray(draws, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("no draws")
    u, idx = np.unique(x, return_index=True)
    counts_below = idx
    counts_upto = np.append(idx[1:], n)
    F = np.asarray(cdf(u), dtype=float)
    F_left = np.asarray(cdf(np.nextafter(u, -np.inf)), dtype=float)
    d_up = np.abs(counts_upto / n - F).max()
    d_low = np.abs(counts_below / n - F_left).max()
    return float(max(d_up, d_low))


def ks_two_sample(a, b) -> float:
    """Two-sample KS statistic; ties handled through right-continuous ECDFs."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("no draws")
    grid = np.union1d(a, b)
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.abs(fa - fb).max())


def autocorrelation(x, max_lag: int) -> np.ndarray:
    """Sample autocorrelation at lags ``0..max_lag`` (biased estimator, FFT)."""
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if n < 2:
        raise ValueError("need at least two values")
    if not 0 <= max_lag < n:
        raise ValueError("max_lag must lie in [0, n)")
    y = x - x.mean()
    m = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(y, m)
    ac = np.fft.irfft(f * np.conj(f), m)[: max_lag + 1]
    if not ac[0] > 0:
        raise ValueError("series is (numerically) constant; autocorrelation is undefined")
    return ac / ac[0]


def batch_means_se(x, n_batches: int = 20) -> float:
    """Standard error of the mean from non-overlapping batch means."""
    x = np.asarray(x, dtype=float).ravel()
    b = min(n_batches, x.size)
    if b < 2:
        return float("nan")
    size = x.size // b
    means = x[: size * b].reshape(b, size).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(b))
