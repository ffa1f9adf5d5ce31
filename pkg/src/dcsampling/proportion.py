"""Part probabilities ``pi(C_j)`` estimated from overlap hit counts.

Consecutive parts share an overlap, and the fraction of each chain's draws
that land in it pins down the ratio of the two part probabilities. Chaining
the ratios from the first part gives every ``pi(C_j)`` up to a constant,
which is fixed by requiring the exclusive masses ``pi(C_j minus earlier
parts)`` to sum to one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .cover import DiscreteCover, LinkedCover, Region
from .samplers import SubsetSample
from .targets import TargetModel

__all__ = [
    "FailureError",
    "ProportionEstimate",
    "estimate_proportions",
    "estimate_proportions_unequal",
    "normalize_proportions",
    "failure_bound",
    "true_proportions",
    "p_worst",
    "region_mass",
]

Cover = LinkedCover | DiscreteCover


class FailureError(RuntimeError):
    """Some adjacent overlap received no draws from one of its two chains.

    ``overlap`` is the index ``j`` of the first empty overlap ``C_j & C_{j+1}``
    and ``hits`` the two chains' counts there.
    """

    def __init__(self, overlap: int, hits: tuple[int, int], bound: float | None = None):
        self.overlap = overlap
        self.hits = hits
        self.bound = bound
        msg = f"overlap {overlap} has hit counts {hits}; proportions cannot be estimated"
        if bound is not None:
            msg += f" (failure probability bound at this M: {bound:.3g})"
        super().__init__(msg)


@dataclass(frozen=True)
class ProportionEstimate:
    """Normalized part probabilities and exclusive weights.

    ``pi[j]`` estimates ``pi(C_j)``, ``exclusive[j]`` estimates the mass of
    ``C_j`` outside all earlier parts (these sum to one). ``hits[j]`` holds
    the counts of chains ``j`` and ``j+1`` inside overlap ``j``.
    """

    pi: np.ndarray
    exclusive: np.ndarray
    hits: list[tuple[int, int]] = field(default_factory=list)
    M: list[int] = field(default_factory=list)
    prior_fraction: np.ndarray | None = None
    raw: np.ndarray | None = None

    @property
    def W(self) -> int:
        return len(self.pi)

    @classmethod
    def exact(cls, pi, exclusive) -> "ProportionEstimate":
        """Wrap known probabilities, e.g. from :func:`true_proportions`."""
        pi = np.asarray(pi, dtype=float)
        ex = np.asarray(exclusive, dtype=float)
        if pi.shape != ex.shape:
            raise ValueError("pi and exclusive differ in length")
        if np.any(ex < 0):
            raise ValueError("exclusive weights must be nonnegative")
        return cls(pi, ex / ex.sum(), prior_fraction=1.0 - np.divide(ex, pi, out=np.zeros_like(ex), where=pi > 0))

    def normalization(self) -> float:
        """``sum_j pi[j] * (1 - prior_fraction[j])``; one after estimation."""
        if self.prior_fraction is None:
            raise ValueError("no prior-overlap fractions recorded")
        return float(np.sum(self.pi * (1.0 - self.prior_fraction)))

    def to_json(self) -> dict:
        return {
            "pi": self.pi.tolist(),
            "exclusive": self.exclusive.tolist(),
            "hits": [list(h) for h in self.hits],
            "M": list(self.M),
        }

    @classmethod
    def from_json(cls, d: dict) -> "ProportionEstimate":
        return cls(
            np.asarray(d["pi"], float),
            np.asarray(d["exclusive"], float),
            [tuple(h) for h in d.get("hits", [])],
            list(d.get("M", [])),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "ProportionEstimate":
        return cls.from_json(json.loads(Path(path).read_text()))


def _check_samples(samples: Sequence[SubsetSample], cover: Cover) -> None:
    if len(samples) != cover.n_parts:
        raise ValueError(f"got {len(samples)} samples for {cover.n_parts} parts")
    for j, s in enumerate(samples):
        if s.j != j:
            raise ValueError(f"sample {j} is tagged with part {s.j}")


def _estimate(samples: Sequence[SubsetSample], cover: Cover, length_corrected: bool) -> ProportionEstimate:
    _check_samples(samples, cover)
    W = len(samples)
    Ms = [s.M for s in samples]
    raw = np.ones(W)
    hits = []
    for j in range(1, W):
        prev = int(samples[j - 1].upper.sum())
        cur = int(samples[j].lower.sum())
        hits.append((prev, cur))
        if prev == 0 or cur == 0:
            raise FailureError(j - 1, (prev, cur))
        ratio = prev / cur
        if length_corrected:
            ratio *= Ms[j] / Ms[j - 1]
        raw[j] = raw[j - 1] * ratio
    frac = np.array([s.prior.mean() for s in samples])
    pi, ex = normalize_proportions(raw, frac)
    return ProportionEstimate(pi, ex, hits, Ms, frac, raw)


def normalize_proportions(raw, prior_fraction) -> tuple[np.ndarray, np.ndarray]:
    """Scale ``raw`` so exclusive masses sum to one; returns ``(pi, exclusive)``.

    ``prior_fraction[j]`` is the share of chain ``j``'s draws lying in an
    earlier part. The result does not depend on the scale of ``raw``.
    """
    raw = np.asarray(raw, float)
    frac = np.asarray(prior_fraction, float)
    if raw.shape != frac.shape:
        raise ValueError("raw and prior_fraction differ in length")
    if np.any(raw <= 0) or np.any((frac < 0) | (frac > 1)):
        raise ValueError("raw must be positive and prior fractions in [0, 1]")
    z = np.sum(raw * (1.0 - frac))
    if z <= 0:
        raise ValueError("every chain lies entirely in earlier parts")
    pi = raw / z
    ex = pi * (1.0 - frac)
    return pi, ex / ex.sum()


def estimate_proportions(samples: Sequence[SubsetSample], cover: Cover) -> ProportionEstimate:
    """Hit-count ratio estimate for chains of equal length.

    Raises :class:`FailureError` when an adjacent overlap has no draws from
    one of its chains.
    """
    if len({s.M for s in samples}) > 1:
        raise ValueError("chains differ in length; use estimate_proportions_unequal")
    return _estimate(samples, cover, length_corrected=False)


def estimate_proportions_unequal(samples: Sequence[SubsetSample], cover: Cover) -> ProportionEstimate:
    """As :func:`estimate_proportions`, with each ratio corrected for chain lengths."""
    return _estimate(samples, cover, length_corrected=True)


def failure_bound(p_worst: float, M: int, W: int) -> float:
    """``1 - (1 - p_worst**M) ** (2 (W - 1))``: chance some overlap count is zero."""
    if not 0.0 <= p_worst <= 1.0:
        raise ValueError("p_worst must lie in [0, 1]")
    if M < 1 or W < 1:
        raise ValueError("M and W must be >= 1")
    return 1.0 - (1.0 - p_worst**M) ** (2 * (W - 1))


# --- exact oracles ---------------------------------------------------------


def _intervals_mass(target: TargetModel, intervals: list[tuple[float, float]]) -> float:
    """Mass of a union of closed intervals under a 1-d target with exact CDF."""
    if target.cdf is None:
        raise ValueError(f"{target.name} has no exact CDF")
    ivs = sorted((a, b) for a, b in intervals if a <= b)
    merged: list[list[float]] = []
    for a, b in ivs:
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    total = 0.0
    for a, b in merged:
        # closed on the left: a lattice point at a belongs to the interval
        left = float(target.cdf(math.nextafter(a, -math.inf))) if math.isfinite(a) else 0.0
        right = float(target.cdf(b)) if math.isfinite(b) else 1.0
        total += right - left
    return total


def region_mass(target: TargetModel, region) -> float:
    """Exact target mass of a 1-d region, or of a state set for finite targets."""
    if isinstance(region, (frozenset, set)):
        if target.stationary is None:
            raise ValueError(f"{target.name} has no exact stationary vector")
        return float(sum(target.stationary[s] for s in region))
    if region.ndim != 1:
        raise ValueError("exact masses are only available for 1-d targets")
    if region.is_empty:
        return 0.0
    return _intervals_mass(target, [(region.lo[0], region.hi[0])])


def _exclusive_mass(target: TargetModel, cover: Cover, j: int) -> float:
    if isinstance(cover, DiscreteCover):
        earlier = frozenset().union(*cover.parts[:j]) if j else frozenset()
        return region_mass(target, cover.parts[j] - earlier)
    part = cover.parts[j]
    claimed = [cover.overlap(k, j) for k in range(j)]
    claimed = [(r.lo[0], r.hi[0]) for r in claimed if not r.is_empty]
    return region_mass(target, part) - _intervals_mass(target, claimed) if claimed else region_mass(target, part)


def true_proportions(target: TargetModel, cover: Cover) -> ProportionEstimate:
    """Exact ``pi(C_j)`` (unnormalized, summing to one plus overlap masses) and exclusive weights."""
    if isinstance(cover, DiscreteCover):
        if target.stationary is None:
            raise ValueError(f"{target.name} has no exact stationary vector")
    elif target.cdf is None or cover.ndim != 1:
        raise ValueError("true proportions need a 1-d target with an exact CDF")
    pi = np.array([region_mass(target, p) for p in cover.parts])
    ex = np.array([_exclusive_mass(target, cover, j) for j in range(cover.n_parts)])
    return ProportionEstimate.exact(pi, np.clip(ex, 0.0, None))


def p_worst(target: TargetModel, cover: Cover) -> float:
    """Largest chance that one draw of a neighbouring chain misses an adjacent overlap."""
    worst = 0.0
    for j in range(cover.n_parts - 1):
        ov = region_mass(target, cover.adjacent_overlap(j))
        for part in (cover.parts[j], cover.parts[j + 1]):
            worst = max(worst, 1.0 - ov / region_mass(target, part))
    return float(min(max(worst, 0.0), 1.0))
