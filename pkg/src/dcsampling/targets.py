"""Target distributions: the model type and the built-in catalog."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special, stats

from .cover import Region

__all__ = [
    "TargetModel",
    "gamma_target",
    "poisson_target",
    "discrete_chain_target",
    "chain_matrix",
    "gaussian_mixture_target",
    "gmm2d",
    "gmm5d",
    "builtin_targets",
]


@dataclass(frozen=True, eq=False)
class TargetModel:
    """Unnormalized log-density on a box support.

    ``logpdf`` maps an ``(n, dim)`` array to ``(n,)`` log-densities and is only
    called on points inside the support; use :meth:`log_density` from outside.
    Optional members feed oracles and exact samplers: ``cdf``/``ppf`` for 1-d
    targets, ``stationary``/``transition`` for finite chains, ``sampler(rng, n)``
    for exact i.i.d. draws.
    """

    name: str
    dim: int
    logpdf: Callable[[np.ndarray], np.ndarray]
    support: Region
    lattice: bool = False
    cdf: Optional[Callable] = None
    ppf: Optional[Callable] = None
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None
    stationary: Optional[np.ndarray] = None
    transition: Optional[np.ndarray] = None
    scale: Optional[np.ndarray] = None
    init: Optional[np.ndarray] = None
    params: dict = field(default_factory=dict)

    def in_support(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, self.dim)
        ok = self.support.contains_many(x)
        if self.lattice:
            ok &= np.all(x == np.round(x), axis=1)
        return ok

    def log_density(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, self.dim)
        out = np.full(len(x), -np.inf)
        ok = self.in_support(x)
        if ok.any():
            with np.errstate(divide="ignore", invalid="ignore"):
                out[ok] = self.logpdf(x[ok])
        return out


def gamma_target(shape: float = 4.0, scale: float = 1.0) -> TargetModel:
    if shape <= 0 or scale <= 0:
        raise ValueError("gamma shape and scale must be positive")
    dist = stats.gamma(shape, scale=scale)
    const = math.lgamma(shape) + shape * math.log(scale)

    def logpdf(x):
        x = x[:, 0]
        return special.xlogy(shape - 1, x) - x / scale - const

    return TargetModel(
        name=f"gamma({shape:g},{scale:g})",
        dim=1,
        logpdf=logpdf,
        support=Region([0.0], [np.inf]),
        cdf=dist.cdf,
        ppf=dist.ppf,
        sampler=lambda rng, n: rng.gamma(shape, scale, size=(n, 1)),
        scale=np.array([math.sqrt(shape) * scale]),
        init=np.array([shape * scale]),
        params={"shape": shape, "scale": scale},
    )


def poisson_target(lam: float = 14.0) -> TargetModel:
    if lam <= 0:
        raise ValueError("Poisson intensity must be positive")
    dist = stats.poisson(lam)
    log_lam = math.log(lam)

    def logpdf(x):
        x = x[:, 0]
        return x * log_lam - lam - special.gammaln(x + 1)

    return TargetModel(
        name=f"poisson({lam:g})",
        dim=1,
        logpdf=logpdf,
        support=Region([0.0], [np.inf]),
        lattice=True,
        cdf=dist.cdf,
        ppf=dist.ppf,
        sampler=lambda rng, n: rng.poisson(lam, size=(n, 1)).astype(float),
        scale=np.array([1.0]),
        init=np.array([float(math.floor(lam))]),
        params={"lam": lam},
    )


def chain_matrix(a: float) -> np.ndarray:
    """Seven-state transition matrix with bottleneck probability ``a`` around state 3."""
    if not 0 < a <= 0.5:
        raise ValueError("a must lie in (0, 0.5]")
    t, b = 1 / 3, 1 - a
    return np.array(
        [
            [t, t, t, 0, 0, 0, 0],
            [t, t, t, 0, 0, 0, 0],
            [b / 3, b / 3, b / 3, a, 0, 0, 0],
            [0, 0, b / 2, b / 2, a, 0, 0],
            [0, 0, 0, a, b / 3, b / 3, b / 3],
            [0, 0, 0, 0, t, t, t],
            [0, 0, 0, 0, a, a, 1 - 2 * a],
        ]
    )


def discrete_chain_target(a: float = 0.003) -> TargetModel:
    """Stationary law of :func:`chain_matrix` as a target on states 0..6."""
    from .diagnostics import stationary_distribution

    P = chain_matrix(a)
    lam = stationary_distribution(P)
    log_lam = np.log(lam)
    cum = np.cumsum(lam)

    def logpdf(x):
        return log_lam[x[:, 0].astype(np.int64)]

    def cdf(x):
        idx = np.floor(np.asarray(x, dtype=float))
        return np.where(idx < 0, 0.0, cum[np.clip(idx, 0, 6).astype(np.int64)])

    return TargetModel(
        name=f"chain7(a={a:g})",
        dim=1,
        logpdf=logpdf,
        support=Region([0.0], [6.0]),
        lattice=True,
        cdf=cdf,
        sampler=lambda rng, n: rng.choice(7, size=(n, 1), p=lam).astype(float),
        stationary=lam,
        transition=P,
        scale=np.array([1.0]),
        init=np.array([0.0]),
        params={"a": a},
    )


def gaussian_mixture_target(means, covs, weights) -> TargetModel:
    means = np.atleast_2d(np.asarray(means, dtype=float))
    k, d = means.shape
    covs = np.asarray(covs, dtype=float)
    if covs.ndim == 1:
        covs = np.array([np.eye(d) * c for c in covs])
    weights = np.asarray(weights, dtype=float)
    if covs.shape != (k, d, d) or weights.shape != (k,):
        raise ValueError("means, covs and weights disagree in shape")
    if np.any(weights < 0) or not np.isclose(weights.sum(), 1.0):
        raise ValueError("mixture weights must be nonnegative and sum to 1")
    comps = [stats.multivariate_normal(m, c) for m, c in zip(means, covs)]
    chols = [np.linalg.cholesky(c) for c in covs]
    log_w = np.log(weights)

    def logpdf(x):
        return special.logsumexp([lw + c.logpdf(x).reshape(-1) for lw, c in zip(log_w, comps)], axis=0)

    def sampler(rng, n):
        z = rng.choice(k, size=n, p=weights)
        eps = rng.standard_normal((n, d))
        out = np.empty((n, d))
        for i in range(k):
            sel = z == i
            out[sel] = means[i] + eps[sel] @ chols[i].T
        return out

    mean = weights @ means
    second = sum(w * (c + np.outer(m, m)) for w, c, m in zip(weights, covs, means))
    sd = np.sqrt(np.diag(second - np.outer(mean, mean)))

    def marginal_cdf(x, dim=0):
        x = np.asarray(x, dtype=float)[..., None]
        return np.sum(weights * stats.norm.cdf(x, means[:, dim], np.sqrt(covs[:, dim, dim])), axis=-1)

    return TargetModel(
        name=f"gmm(k={k},d={d})",
        dim=d,
        logpdf=logpdf,
        support=Region.full(d),
        cdf=marginal_cdf if d == 1 else None,
        sampler=sampler,
        scale=sd,
        init=mean,
        params={
            "means": means.tolist(),
            "covs": covs.tolist(),
            "weights": weights.tolist(),
            "marginal_cdf": marginal_cdf,
        },
    )


def gmm2d() -> TargetModel:
    """Two-dimensional three-component mixture with well separated modes."""
    return gaussian_mixture_target(
        [[-3.0, -2.0], [0.0, 3.0], [3.5, -1.0]],
        [np.diag([0.6, 0.8]), np.array([[1.0, 0.4], [0.4, 0.7]]), np.diag([0.5, 1.2])],
        [0.3, 0.45, 0.25],
    )


def gmm5d() -> TargetModel:
    """Five-dimensional four-component mixture."""
    means = np.array(
        [
            [0.0, 0.0, 0.0, 0.0, 0.0],
            [4.0, 1.0, -2.0, 0.5, 3.0],
            [-3.0, 3.0, 2.0, -1.0, -2.0],
            [2.0, -4.0, 1.0, 2.0, -1.0],
        ]
    )
    return gaussian_mixture_target(means, [1.0, 0.7, 1.3, 0.5], [0.45, 0.25, 0.2, 0.1])


def builtin_targets() -> dict[str, Callable[..., TargetModel]]:
    return {
        "gamma": gamma_target,
        "poisson": poisson_target,
        "discrete": discrete_chain_target,
        "gmm": gaussian_mixture_target,
        "gmm2d": gmm2d,
        "gmm5d": gmm5d,
    }
