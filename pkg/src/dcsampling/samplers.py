"""Samplers restricted to one part of a linked cover.

Restricting a sampler to ``C_j`` only needs the indicator: Metropolis chains
reject proposals that leave the part, rejection samplers discard envelope
draws outside it. Every sampler returns a :class:`SubsetSample`, which also
records which draws fall in the overlaps with neighbouring parts.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .cover import DiscreteCover, LinkedCover, Region, _finite_box
from .rng import stream
from .targets import TargetModel

__all__ = [
    "SubsetChainConfig",
    "SubsetSample",
    "Envelope",
    "BoundViolation",
    "InitializationError",
    "subset_mh",
    "subset_mh_batch",
    "subset_rejection",
    "discrete_chain_step",
    "run_discrete_chain",
    "initial_point",
    "default_scale",
    "pilot_mh",
    "part_region",
]

Cover = LinkedCover | DiscreteCover


class InitializationError(RuntimeError):
    pass


class BoundViolation(RuntimeError):
    """The target density exceeded the rejection envelope at a sampled point."""


@dataclass(frozen=True)
class SubsetChainConfig:
    """Settings for one subset Metropolis chain.

    ``proposal`` is ``"normal"`` (Gaussian random walk with per-dimension
    ``scale``), ``"lattice"`` (a +-1 step in one random coordinate) or
    ``"kernel"`` (the target's transition matrix). ``None`` picks by target.
    """

    j: int
    M: int
    burn_in: int = 0
    scale: Optional[Sequence[float]] = None
    proposal: Optional[str] = None
    seed: int = 0
    init: Optional[Sequence[float]] = None

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("chain length M must be >= 1")
        if not 0 <= self.burn_in < self.M:
            raise ValueError("burn-in must satisfy 0 <= burn_in < M")
        if self.proposal not in (None, "normal", "lattice", "kernel"):
            raise ValueError(f"unknown proposal {self.proposal!r}")


@dataclass(frozen=True, eq=False)
class SubsetSample:
    """Draws from ``pi(. | C_j)`` with their overlap memberships.

    ``lower`` marks draws in ``C_{j-1} & C_j``, ``upper`` draws in
    ``C_j & C_{j+1}``, and ``prior`` draws in any ``C_k & C_j`` with ``k < j``.
    """

    j: int
    draws: np.ndarray
    prior: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    acceptance_rate: float = 1.0
    seed: Optional[int] = None

    @classmethod
    def from_draws(
        cls, cover: Cover, j: int, draws, acceptance_rate: float = 1.0, seed: Optional[int] = None
    ) -> "SubsetSample":
        x = np.asarray(draws)
        if x.ndim == 1:
            x = x[:, None]
        inside = cover.part_mask(j, x)
        if not inside.all():
            raise ValueError(f"{int((~inside).sum())} draws lie outside part {j}")
        return cls(
            j=j,
            draws=x,
            prior=cover.prior_overlap_mask(j, x),
            lower=cover.adjacent_overlap_mask(j - 1, x),
            upper=cover.adjacent_overlap_mask(j, x),
            acceptance_rate=float(acceptance_rate),
            seed=seed,
        )

    @property
    def M(self) -> int:
        return len(self.draws)

    @property
    def overlap_hits(self) -> tuple[int, int]:
        return int(self.lower.sum()), int(self.upper.sum())

    @property
    def eligible(self) -> np.ndarray:
        return ~self.prior

    def meta(self) -> dict:
        return {
            "j": self.j,
            "M": self.M,
            "seed": self.seed,
            "acceptance_rate": self.acceptance_rate,
            "overlap_hits": list(self.overlap_hits),
            "integer": bool(self.draws.dtype.kind in "iu"),
        }

    def save(self, stem) -> None:
        """Write ``<stem>.csv`` (draws and flags) and ``<stem>.json`` (metadata)."""
        stem = Path(stem)
        d = self.draws.shape[1]
        header = ",".join([f"x{i}" for i in range(d)] + ["in_prior_overlap", "in_lower", "in_upper"])
        flags = np.column_stack([self.prior, self.lower, self.upper]).astype(int)
        fmt = ["%d" if self.draws.dtype.kind in "iu" else "%.17g"] * d + ["%d"] * 3
        np.savetxt(stem.with_suffix(".csv"), np.column_stack([self.draws, flags]), fmt=fmt, delimiter=",",
                   header=header, comments="")
        stem.with_suffix(".json").write_text(json.dumps(self.meta(), indent=2) + "\n")

    @classmethod
    def load(cls, stem) -> "SubsetSample":
        stem = Path(stem)
        meta = json.loads(stem.with_suffix(".json").read_text())
        arr = np.loadtxt(stem.with_suffix(".csv"), delimiter=",", skiprows=1, ndmin=2)
        draws = arr[:, :-3]
        if meta.get("integer"):
            draws = draws.astype(np.int64)
        flags = arr[:, -3:].astype(bool)
        return cls(meta["j"], draws, flags[:, 0], flags[:, 1], flags[:, 2], meta["acceptance_rate"], meta["seed"])


# --- helpers ---------------------------------------------------------------


def part_region(target: TargetModel, cover: Cover, j: int) -> Region:
    """Bounding box of part ``j`` intersected with the target support."""
    if isinstance(cover, DiscreteCover):
        states = sorted(cover.parts[j])
        return Region([states[0]], [states[-1]]).intersect(target.support)
    return cover.parts[j].intersect(target.support)


def default_scale(target: TargetModel, region: Region) -> np.ndarray:
    """Random-walk step: 0.2 of the part width, the target's spread on infinite sides."""
    spread = target.scale if target.scale is not None else np.ones(target.dim)
    w = region.width
    return np.where(np.isfinite(w), 0.2 * w, spread).astype(float)


def initial_point(
    target: TargetModel, cover: Cover, j: int, scale=None, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Deterministic start inside ``C_j``, with a bounded uniform search as fallback.

    Bounded dimensions start at the midpoint, half-infinite ones one scale unit
    inside the finite bound. If the density is zero there, up to 10^4 uniform
    points of a bounding box are tried.
    """
    region = part_region(target, cover, j)
    if region.is_empty:
        raise InitializationError(f"part {j} does not meet the target support")
    scale = default_scale(target, region) if scale is None else np.asarray(scale, float)
    lo, hi = region.lo, region.hi
    x = np.where(
        np.isfinite(lo) & np.isfinite(hi),
        (lo + hi) / 2,
        np.where(np.isfinite(lo), lo + scale, np.where(np.isfinite(hi), hi - scale, 0.0)),
    )
    x = np.minimum(np.maximum(x, lo), hi)
    if isinstance(cover, DiscreteCover):
        states = sorted(cover.parts[j])
        x = np.array([float(states[len(states) // 2])])
    elif target.lattice:
        x = np.floor(x + 0.5)
        x = np.minimum(np.maximum(x, np.ceil(lo)), np.floor(hi))

    def ok(p):
        return cover.part_mask(j, p[None, :])[0] and np.isfinite(target.log_density(p[None, :])[0])

    if ok(x):
        return x
    rng = stream(0, "init", j) if rng is None else rng
    box = _finite_box(region, cover if isinstance(cover, LinkedCover) else None)
    for _ in range(10):
        cand = box.lo + rng.random((1000, target.dim)) * box.width
        if target.lattice:
            cand = np.round(cand)
        good = cover.part_mask(j, cand) & np.isfinite(target.log_density(cand))
        if good.any():
            return cand[np.argmax(good)]
    raise InitializationError(f"no point of positive density found in part {j} after 10^4 tries")


def _proposal_kind(target: TargetModel, config: SubsetChainConfig) -> str:
    if config.proposal is not None:
        return config.proposal
    if target.transition is not None:
        return "kernel"
    return "lattice" if target.lattice else "normal"


# --- Metropolis chains -----------------------------------------------------


def _metropolis(target, inside, x0, n_steps, kind, scale, rng):
    """Random-walk Metropolis run in lockstep for ``len(x0)`` independent chains."""
    x = np.array(x0, dtype=float)
    c, d = x.shape
    lp = target.log_density(x)
    out = np.empty((n_steps, c, d))
    accepted = np.zeros(c, dtype=np.int64)
    for t in range(n_steps):
        if kind == "normal":
            y = x + scale * rng.standard_normal((c, d))
        else:
            y = x.copy()
            step = np.where(rng.random(c) < 0.5, -1.0, 1.0)
            if d == 1:
                y[:, 0] += step
            else:
                y[np.arange(c), rng.integers(d, size=c)] += step
        log_u = np.log(rng.random(c))
        ok = inside(y)
        lpy = np.full(c, -np.inf)
        if ok.any():
            lpy[ok] = target.log_density(y[ok])
        acc = log_u < lpy - lp
        x[acc] = y[acc]
        lp[acc] = lpy[acc]
        accepted += acc
        out[t] = x
    return out, accepted


def discrete_chain_step(P: np.ndarray, state: int, restriction, rng: np.random.Generator) -> int:
    """One step of the chain with kernel ``P`` restricted to the state set ``restriction``.

    The kernel row is the proposal; a proposal outside the restriction leaves
    the chain where it is. For a reversible kernel this is exactly Metropolis
    with acceptance probability one inside the restriction.
    """
    row = np.asarray(P[state], dtype=float)
    if np.any(row < 0) or not math.isclose(row.sum(), 1.0, abs_tol=1e-9):
        raise ValueError(f"row {state} of the transition matrix is not stochastic")
    allowed = _allowed_mask(restriction, len(row))
    if not allowed[state]:
        raise ValueError(f"state {state} is outside the restriction")
    cum = np.cumsum(row)
    cum[-1] = 1.0
    y = int(np.searchsorted(cum, rng.random(), side="right"))
    return y if allowed[y] else int(state)


def _allowed_mask(restriction, K: int) -> np.ndarray:
    r = np.asarray(restriction)
    if r.dtype == bool and r.shape == (K,):
        return r
    mask = np.zeros(K, dtype=bool)
    mask[list(int(s) for s in restriction)] = True
    return mask


def run_discrete_chain(P: np.ndarray, x0: int, M: int, restriction, rng: np.random.Generator) -> np.ndarray:
    """``M`` consecutive :func:`discrete_chain_step` moves (same random stream), vectorized draws."""
    P = np.asarray(P, dtype=float)
    K = len(P)
    if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-9):
        raise ValueError("transition matrix is not row-stochastic")
    allowed = _allowed_mask(restriction, K).tolist()
    if not allowed[x0]:
        raise ValueError(f"state {x0} is outside the restriction")
    cum = np.cumsum(P, axis=1)
    cum[:, -1] = 1.0
    rows = cum.tolist()
    us = rng.random(M).tolist()
    out = [0] * M
    x = int(x0)
    br = bisect.bisect_right
    for k in range(M):
        y = br(rows[x], us[k])
        if allowed[y]:
            x = y
        out[k] = x
    return np.array(out, dtype=np.int64)


def _kernel_restriction(target: TargetModel, cover: Cover, j: int) -> np.ndarray:
    K = len(target.transition)
    return cover.part_mask(j, np.arange(K)[:, None]) & target.in_support(np.arange(K)[:, None])


def subset_mh(target: TargetModel, cover: Cover, j: int, config: SubsetChainConfig) -> SubsetSample:
    """Metropolis chain targeting ``pi(. | C_j)``; deterministic given ``config.seed``."""
    if config.j != j:
        raise ValueError("config.j does not match j")
    return subset_mh_batch(target, cover, j, config, n_chains=1)[0]


def subset_mh_batch(
    target: TargetModel, cover: Cover, j: int, config: SubsetChainConfig, n_chains: int
) -> list[SubsetSample]:
    """``n_chains`` independent subset chains sharing one seeded stream, run in lockstep."""
    if not 0 <= j < cover.n_parts:
        raise IndexError(f"part index {j} out of range")
    rng = stream(config.seed, "mh", j)
    kind = _proposal_kind(target, config)
    region = part_region(target, cover, j)
    scale = default_scale(target, region) if config.scale is None else np.asarray(config.scale, float)
    x0 = np.asarray(config.init, float) if config.init is not None else initial_point(target, cover, j, scale)
    if not cover.part_mask(j, x0[None, :])[0]:
        raise InitializationError(f"initial point {x0} is outside part {j}")
    n = config.M + config.burn_in
    if kind == "kernel":
        if target.transition is None:
            raise ValueError("kernel proposals need a target with a transition matrix")
        allowed = _kernel_restriction(target, cover, j)
        res = []
        for _ in range(n_chains):
            path = run_discrete_chain(target.transition, int(x0[0]), n, allowed, rng)
            moves = np.count_nonzero(np.diff(np.concatenate([[int(x0[0])], path])))
            draws = path[config.burn_in:, None]
            res.append(SubsetSample.from_draws(cover, j, draws, moves / n, config.seed))
        return res

    def inside(y):
        return cover.part_mask(j, y)

    out, acc = _metropolis(target, inside, np.tile(x0, (n_chains, 1)), n, kind, scale, rng)
    res = []
    for c in range(n_chains):
        draws = out[config.burn_in:, c, :]
        if target.lattice:
            draws = draws.astype(np.int64)
        res.append(SubsetSample.from_draws(cover, j, draws, acc[c] / n, config.seed))
    return res


def pilot_mh(target: TargetModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """Full-space random-walk pilot; the step is re-set to the warm-up spread after 10%."""
    x0 = target.init if target.init is not None else np.zeros(target.dim)
    x0 = np.asarray(x0, float)[None, :]
    step = target.scale if target.scale is not None else np.ones(target.dim)
    kind = "lattice" if target.lattice else "normal"
    inside = target.in_support
    warm = max(1, n // 10)
    out, _ = _metropolis(target, inside, x0, warm, kind, np.asarray(step, float), rng)
    sd = out[:, 0, :].std(axis=0)
    step = np.where(sd > 0, sd, step)
    out, _ = _metropolis(target, inside, out[-1], n, kind, step, rng)
    return out[:, 0, :]


# --- rejection sampling ----------------------------------------------------


@dataclass(frozen=True)
class Envelope:
    """Proposal ``q`` with ``log pi(x) <= log_bound + log q(x)``."""

    sample: Callable[[np.random.Generator, int], np.ndarray]
    logpdf: Callable[[np.ndarray], np.ndarray]
    log_bound: float

    @classmethod
    def from_target(cls, target: TargetModel) -> "Envelope":
        """The target as its own envelope (bound 1); needs an exact sampler."""
        if target.sampler is None:
            raise ValueError(f"{target.name} has no exact sampler")
        return cls(target.sampler, target.log_density, 0.0)


def subset_rejection(
    target: TargetModel,
    envelope: Envelope,
    cover: Cover,
    j: int,
    M: int,
    seed: int = 0,
    max_proposals: int = 10**9,
) -> SubsetSample:
    """``M`` i.i.d. draws from ``pi(. | C_j)`` by rejection from ``envelope``."""
    if M < 1:
        raise ValueError("M must be >= 1")
    rng = stream(seed, "rejection", j)
    kept: list[np.ndarray] = []
    n_kept = proposed = 0
    rate = 0.5
    while n_kept < M:
        if proposed >= max_proposals:
            raise RuntimeError(f"part {j}: gave up after {proposed} proposals")
        batch = int(min(max(1024, 1.2 * (M - n_kept) / max(rate, 1e-4)), 4_000_000))
        x = np.asarray(envelope.sample(rng, batch), dtype=float).reshape(batch, -1)
        log_u = np.log(rng.random(batch))
        proposed += batch
        inside = cover.part_mask(j, x)
        lt = np.full(batch, -np.inf)
        if inside.any():
            lt[inside] = target.log_density(x[inside])
        le = np.asarray(envelope.logpdf(x), float) + envelope.log_bound
        over = inside & (lt > le + 1e-9)
        if over.any():
            raise BoundViolation(f"target exceeds envelope at {x[over][0]}")
        with np.errstate(invalid="ignore"):
            acc = inside & (log_u < lt - le)
        kept.append(x[acc])
        n_kept += int(acc.sum())
        rate = max(n_kept / proposed, 1e-6)
    draws = np.concatenate(kept)[:M]
    if target.lattice:
        draws = draws.astype(np.int64)
    return SubsetSample.from_draws(cover, j, draws, n_kept / proposed, seed)
