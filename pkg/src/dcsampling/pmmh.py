"""Particle marginal Metropolis-Hastings for a stochastic volatility model.

The model, with ``corr(u_k, w_k) = rho``::

    X_k = phi X_{k-1} + sigma w_k,     Y_k = beta exp(X_k / 2) u_k

A bootstrap particle filter gives an unbiased likelihood estimate, which
drives a random-walk Metropolis chain over ``(phi, beta, rho, sigma)``,
optionally restricted to one part of a cover of the parameter space.
"""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass
from typing import Optional

import numba
import numpy as np

from .cover import LinkedCover, Region
from .rng import derive_seed, stream

__all__ = [
    "SVParams",
    "SVPrior",
    "PFConfig",
    "PMMHChain",
    "ParticleFilterError",
    "PARAM_NAMES",
    "PARAM_SPACE",
    "simulate_sv",
    "pf_loglik",
    "pmmh_chain",
    "pilot_covariance",
    "default_init",
    "FALLBACK_COV",
    "sv_cover",
    "read_returns",
    "write_returns",
]

PARAM_NAMES = ("phi", "beta", "rho", "sigma")
# phi = 1 has no stationary initial law and |rho| = 1 a degenerate observation density
PARAM_SPACE = Region([0.0, 0.0, -1.0, 0.0], [1.0, np.inf, 1.0, np.inf])
FALLBACK_COV = np.diag([0.02, 0.05, 0.05, 0.02]) ** 2


class ParticleFilterError(RuntimeError):
    """All particle weights underflowed at step ``step`` (1-based)."""

    def __init__(self, step: int):
        self.step = step
        super().__init__(f"all particle weights are zero at step {step}")


@dataclass(frozen=True)
class SVParams:
    phi: float
    beta: float
    rho: float
    sigma: float

    def __post_init__(self):
        if not 0.0 <= self.phi < 1.0:
            raise ValueError(f"phi must lie in [0, 1), got {self.phi}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @classmethod
    def from_array(cls, theta) -> "SVParams":
        return cls(*(float(v) for v in theta))

    def to_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


def in_param_space(theta) -> bool:
    phi, beta, rho, sigma = theta
    return 0.0 <= phi < 1.0 and beta > 0 and -1.0 < rho < 1.0 and sigma > 0


@dataclass(frozen=True)
class PFConfig:
    """Bootstrap filter settings. Only systematic resampling is implemented."""

    n_particles: int = 100
    resampling: str = "systematic"
    seed: int = 0

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("need at least one particle")
        if self.resampling != "systematic":
            raise ValueError(f"unsupported resampling scheme {self.resampling!r}")


def simulate_sv(params: SVParams, T: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Hidden path ``X_0..X_T`` (stationary start) and returns ``Y_1..Y_T``."""
    if T < 1:
        raise ValueError("T must be >= 1")
    rng = stream(seed, "sv", "simulate")
    phi, beta, rho, sigma = astuple(params)
    x = np.empty(T + 1)
    x[0] = rng.normal(0.0, sigma / math.sqrt(1.0 - phi * phi))
    w = rng.standard_normal(T)
    e = rng.standard_normal(T)
    u = rho * w + math.sqrt(1.0 - rho * rho) * e
    for k in range(T):
        x[k + 1] = phi * x[k] + sigma * w[k]
    y = beta * np.exp(x[1:] / 2) * u
    return x, y


@numba.njit(cache=True, error_model="numpy")
def _pf_kernel(y, phi, beta, rho, sigma, x0_noise, w_noise, u_resample):
    T = y.shape[0]
    n = x0_noise.shape[0]
    x = x0_noise * (sigma / math.sqrt(1.0 - phi * phi))
    xn = np.empty(n)
    lw = np.empty(n)
    cum = np.empty(n)
    one_m_r2 = 1.0 - rho * rho
    log_norm = 0.5 * math.log(2.0 * math.pi * beta * beta * one_m_r2)
    loglik = 0.0
    for k in range(T):
        top = -np.inf
        for i in range(n):
            w = w_noise[k, i]
            xi = phi * x[i] + sigma * w
            xn[i] = xi
            sd_fac = math.exp(xi / 2.0)
            r = (y[k] - beta * sd_fac * rho * w) / (beta * sd_fac)
            lw[i] = -log_norm - 0.5 * xi - 0.5 * r * r / one_m_r2
            if math.isnan(lw[i]):
                lw[i] = -np.inf
            if lw[i] > top:
                top = lw[i]
        if not top > -np.inf:
            return loglik, k + 1
        s = 0.0
        for i in range(n):
            s += math.exp(lw[i] - top)
            cum[i] = s
        if s == 0.0 or not math.isfinite(s):
            return loglik, k + 1
        loglik += top + math.log(s / n)
        # systematic resampling
        j = 0
        for i in range(n):
            pos = (i + u_resample[k]) / n * s
            while j < n - 1 and cum[j] < pos:
                j += 1
            x[i] = xn[j]
    return loglik, 0


def pf_loglik(params: SVParams, data, config: PFConfig = PFConfig()) -> float:
    """Log of the bootstrap filter's unbiased likelihood estimate."""
    y = np.ascontiguousarray(data, dtype=float)
    if y.ndim != 1 or y.size == 0 or not np.isfinite(y).all():
        raise ValueError("returns must be a nonempty finite 1-d series")
    rng = stream(config.seed, "pf")
    n = config.n_particles
    x0 = rng.standard_normal(n)
    w = rng.standard_normal((y.size, n))
    u = rng.random(y.size)
    ll, fail = _pf_kernel(y, params.phi, params.beta, params.rho, params.sigma, x0, w, u)
    if fail:
        raise ParticleFilterError(int(fail))
    return float(ll)


@dataclass(frozen=True)
class SVPrior:
    """Independent priors: uniform phi and rho, exponential beta and sigma with the given means."""

    beta_mean: float = 1.0
    sigma_mean: float = 0.5

    def logpdf(self, theta) -> float:
        if not in_param_space(theta):
            return -math.inf
        _, beta, _, sigma = theta
        return -beta / self.beta_mean - sigma / self.sigma_mean

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return np.array(
            [rng.random(), rng.exponential(self.beta_mean), rng.uniform(-1, 1), rng.exponential(self.sigma_mean)]
        )


@dataclass(frozen=True, eq=False)
class PMMHChain:
    theta: np.ndarray
    loglik: np.ndarray
    accepted: np.ndarray
    seed: Optional[int] = None

    @property
    def acceptance_rate(self) -> float:
        return float(self.accepted.mean())

    def param(self, name: str) -> np.ndarray:
        return self.theta[:, PARAM_NAMES.index(name)]

    def save(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(list(PARAM_NAMES) + ["loglik", "accepted"])
            for th, ll, a in zip(self.theta, self.loglik, self.accepted):
                wr.writerow([repr(float(v)) for v in th] + [repr(float(ll)), int(a)])

    @classmethod
    def load(cls, path) -> "PMMHChain":
        arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(arr[:, :4], arr[:, 4], arr[:, 5].astype(bool))


def default_init(restriction: Region) -> np.ndarray:
    """Midpoint of bounded ranges, a fixed guess clipped into unbounded ones."""
    box = restriction.intersect(PARAM_SPACE)
    guess = np.array([0.5, 1.0, 0.0, 0.5])
    lo, hi = box.lo, box.hi
    mid = np.where(np.isfinite(hi), (lo + hi) / 2, np.maximum(lo, guess))
    return np.where(np.isfinite(lo) & np.isfinite(hi), mid, np.clip(guess, lo, hi))


def pmmh_chain(
    data,
    prior: SVPrior = SVPrior(),
    cov: Optional[np.ndarray] = None,
    steps: int = 1000,
    restriction: Optional[Region] = None,
    config: PFConfig = PFConfig(),
    seed: int = 0,
    init=None,
) -> PMMHChain:
    """Random-walk PMMH over ``(phi, beta, rho, sigma)``.

    Proposals outside ``restriction`` (or the parameter space) are rejected
    without running the filter. The current state's likelihood estimate is
    stored and reused, never re-estimated.
    """
    y = np.asarray(data, dtype=float)
    restriction = PARAM_SPACE if restriction is None else restriction
    cov = FALLBACK_COV if cov is None else np.asarray(cov, dtype=float)
    chol = np.linalg.cholesky(cov) if np.any(cov) else np.zeros((4, 4))
    rng = stream(seed, "pmmh")

    def allowed(th):
        return in_param_space(th) and restriction.contains(th)

    def loglik(th, k):
        cfg = PFConfig(config.n_particles, config.resampling, seed=derive_seed(seed, "pf", k))
        try:
            return pf_loglik(SVParams.from_array(th), y, cfg)
        except ParticleFilterError:
            return -math.inf

    theta = default_init(restriction) if init is None else np.asarray(init, dtype=float)
    ll = loglik(theta, 0) if allowed(theta) else -math.inf
    if not math.isfinite(ll):
        init_rng = stream(seed, "pmmh", "init")
        for _ in range(10_000):
            cand = prior.sample(init_rng)
            if allowed(cand):
                theta, ll = cand, loglik(cand, 0)
                if math.isfinite(ll):
                    break
        else:
            raise RuntimeError("no initial parameter with finite likelihood inside the restriction")
    lp = prior.logpdf(theta)
    out = np.empty((steps, 4))
    lls = np.empty(steps)
    acc = np.zeros(steps, dtype=bool)
    z = rng.standard_normal((steps, 4))
    log_u = np.log(rng.random(steps))
    for k in range(steps):
        prop = theta + chol @ z[k]
        if allowed(prop) and np.any(prop != theta):
            lp_new = prior.logpdf(prop)
            ll_new = loglik(prop, k + 1)
            if log_u[k] < ll_new + lp_new - ll - lp:
                theta, ll, lp = prop, ll_new, lp_new
                acc[k] = True
        out[k] = theta
        lls[k] = ll
    return PMMHChain(out, lls, acc, seed)


def pilot_covariance(chain: PMMHChain, burn_in: float = 0.1, scale: float = 2.38**2 / 4) -> np.ndarray:
    """Scaled empirical covariance of a pilot chain, or the fallback when degenerate."""
    th = chain.theta[int(burn_in * len(chain.theta)):]
    if len(th) < 2:
        return FALLBACK_COV.copy()
    c = np.cov(th, rowvar=False) * scale
    if not np.all(np.isfinite(c)) or np.any(np.diag(c) <= 0):
        return FALLBACK_COV.copy()
    try:
        np.linalg.cholesky(c)
    except np.linalg.LinAlgError:
        return FALLBACK_COV.copy()
    return c


def sv_cover(split: float = 0.55, half_width: float = 0.01) -> LinkedCover:
    """Two parts split in ``phi`` with overlap ``[split - hw, split + hw]``; other parameters unrestricted."""
    lo, hi = PARAM_SPACE.lo, PARAM_SPACE.hi
    c1 = Region(lo, [split + half_width, *hi[1:]])
    c2 = Region([split - half_width, *lo[1:]], hi)
    return LinkedCover([c1, c2], PARAM_SPACE)


def read_returns(path) -> np.ndarray:
    """Return series from a one-column CSV, header ``log_return`` optional."""
    with open(path) as fh:
        rows = [r for r in csv.reader(fh) if r and r[0].strip()]
    if rows and rows[0][0].strip() == "log_return":
        rows = rows[1:]
    y = np.array([float(r[0]) for r in rows])
    if y.size == 0 or not np.isfinite(y).all():
        raise ValueError(f"{path}: no finite returns")
    return y


def write_returns(path, y) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("log_return\n")
        for v in np.asarray(y, dtype=float):
            fh.write(f"{float(v)!r}\n")
