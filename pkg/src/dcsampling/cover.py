"""Linked covers of a sample space.

A linked cover is an ordered list of overlapping parts ``C_0, ..., C_{W-1}``
where each consecutive pair shares a nonempty overlap ``C_j & C_{j+1}``.
Parts are closed axis-aligned boxes (``Region``) for real/lattice spaces, or
explicit state sets (``DiscreteCover``) for finite chains. Parts are indexed
from zero.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np

from .rng import stream

if TYPE_CHECKING:  # pragma: no cover
    from .targets import TargetModel

__all__ = [
    "CoverError",
    "Region",
    "LinkedCover",
    "DiscreteCover",
    "SaturationReport",
    "contains",
    "in_prior_overlap",
    "validate_saturated",
    "disperse_cover",
    "quantile_breakpoints",
    "ppf_breakpoints",
    "merge_cover",
    "snake_order",
    "estimate_cover",
    "load_cover",
]


class CoverError(ValueError):
    """Raised when a cover violates the linked-cover invariants."""


def _as_points(x, ndim: int) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim == 1 and ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[1] != ndim:
        raise ValueError(f"expected points of dimension {ndim}, got shape {x.shape}")
    return x


class Region:
    """Closed box ``[lo, hi]`` with extended-real bounds.

    Any dimension with ``lo > hi`` makes the region the empty set.
    """

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(hi, dtype=float)).copy()
        if lo.ndim != 1 or lo.shape != hi.shape or lo.size == 0:
            raise ValueError(f"bounds must be matching nonempty vectors, got {lo.shape} and {hi.shape}")
        if np.isnan(lo).any() or np.isnan(hi).any():
            raise ValueError("region bounds may not be NaN")
        lo.flags.writeable = False
        hi.flags.writeable = False
        self.lo = lo
        self.hi = hi

    @classmethod
    def empty(cls, ndim: int = 1) -> "Region":
        return cls(np.full(ndim, np.inf), np.full(ndim, -np.inf))

    @classmethod
    def full(cls, ndim: int = 1) -> "Region":
        return cls(np.full(ndim, -np.inf), np.full(ndim, np.inf))

    @property
    def ndim(self) -> int:
        return self.lo.size

    @property
    def is_empty(self) -> bool:
        return bool(np.any(self.lo > self.hi))

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    def contains(self, point) -> bool:
        p = np.atleast_1d(np.asarray(point, dtype=float))
        if p.shape != (self.ndim,):
            raise ValueError(f"point has dimension {p.size}, region has {self.ndim}")
        return bool(np.all(self.lo <= p) and np.all(p <= self.hi))

    def contains_many(self, points) -> np.ndarray:
        x = _as_points(points, self.ndim)
        return np.all((x >= self.lo) & (x <= self.hi), axis=1)

    def intersect(self, other: "Region") -> "Region":
        if other.ndim != self.ndim:
            raise ValueError("dimension mismatch")
        return Region(np.maximum(self.lo, other.lo), np.minimum(self.hi, other.hi))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Region):
            return NotImplemented
        if self.is_empty and other.is_empty:
            return self.ndim == other.ndim
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __hash__(self):
        return hash((self.lo.tobytes(), self.hi.tobytes()))

    def __repr__(self) -> str:
        if self.ndim == 1:
            return f"Region([{self.lo[0]:g}, {self.hi[0]:g}])"
        return f"Region(lo={self.lo.tolist()}, hi={self.hi.tolist()})"

    def to_json(self) -> dict:
        return {"lo": [_enc(v) for v in self.lo], "hi": [_enc(v) for v in self.hi]}

    @classmethod
    def from_json(cls, d: dict) -> "Region":
        return cls([_dec(v) for v in d["lo"]], [_dec(v) for v in d["hi"]])


def _enc(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


def _dec(v) -> float:
    return float(v)  # float("inf") and float("-inf") parse the sentinels


def contains(region: Region, point) -> bool:
    return region.contains(point)


class LinkedCover:
    """Ordered overlapping boxes ``C_0..C_{W-1}`` covering ``support``.

    With ``strict=True`` (the default) an empty adjacent overlap raises
    ``CoverError``; pass ``strict=False`` to build a broken cover for
    inspection with :func:`validate_saturated`.
    """

    def __init__(self, parts: Sequence[Region], support: Region | None = None, strict: bool = True):
        parts = tuple(parts)
        if not parts:
            raise CoverError("a cover needs at least one part")
        ndim = parts[0].ndim
        if any(p.ndim != ndim for p in parts):
            raise CoverError("all parts must share one dimension")
        if support is None:
            support = Region(np.min([p.lo for p in parts], axis=0), np.max([p.hi for p in parts], axis=0))
        if support.ndim != ndim:
            raise CoverError("support dimension differs from the parts")
        self.parts = parts
        self.support = support
        self.overlaps: dict[tuple[int, int], Region] = {}
        for j, k in itertools.combinations(range(len(parts)), 2):
            ov = parts[j].intersect(parts[k])
            if not ov.is_empty:
                self.overlaps[(j, k)] = ov
        if strict:
            empty = self.empty_adjacent_overlaps()
            if empty:
                raise CoverError(f"adjacent overlaps {empty} are empty; the cover is not linked")

    @property
    def n_parts(self) -> int:
        return len(self.parts)

    @property
    def ndim(self) -> int:
        return self.support.ndim

    def __len__(self) -> int:
        return len(self.parts)

    def __repr__(self) -> str:
        return f"LinkedCover({list(self.parts)!r})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, LinkedCover):
            return NotImplemented
        return self.parts == other.parts and self.support == other.support

    def overlap(self, j: int, k: int) -> Region:
        if j == k:
            return self.parts[j]
        a, b = min(j, k), max(j, k)
        return self.overlaps.get((a, b), Region.empty(self.ndim))

    def adjacent_overlap(self, j: int) -> Region:
        """``C_j & C_{j+1}``; empty for ``j < 0`` or ``j >= W-1``."""
        if j < 0 or j >= self.n_parts - 1:
            return Region.empty(self.ndim)
        return self.overlap(j, j + 1)

    def empty_adjacent_overlaps(self) -> list[int]:
        return [j for j in range(self.n_parts - 1) if self.adjacent_overlap(j).is_empty]

    @property
    def adjacent_only(self) -> bool:
        """True when the only nonempty overlaps are between consecutive parts."""
        return all(k == j + 1 for j, k in self.overlaps)

    def _check_index(self, j: int) -> None:
        if not 0 <= j < self.n_parts:
            raise IndexError(f"part index {j} out of range for {self.n_parts} parts")

    def contains(self, j: int, point) -> bool:
        self._check_index(j)
        return self.parts[j].contains(point)

    def in_prior_overlap(self, j: int, point) -> bool:
        self._check_index(j)
        return any(self.overlap(k, j).contains(point) for k in range(j))

    def part_mask(self, j: int, draws) -> np.ndarray:
        self._check_index(j)
        return self.parts[j].contains_many(draws)

    def adjacent_overlap_mask(self, j: int, draws) -> np.ndarray:
        x = _as_points(draws, self.ndim)
        ov = self.adjacent_overlap(j)
        if ov.is_empty:
            return np.zeros(len(x), dtype=bool)
        return ov.contains_many(x)

    def prior_overlap_mask(self, j: int, draws) -> np.ndarray:
        self._check_index(j)
        x = _as_points(draws, self.ndim)
        out = np.zeros(len(x), dtype=bool)
        for k in range(j):
            ov = self.overlap(k, j)
            if not ov.is_empty:
                out |= ov.contains_many(x)
        return out

    def covers_support(self, n_probes: int = 10_000, seed: int = 0) -> bool:
        """Monte Carlo check that the parts' union covers the support box."""
        box = _finite_box(self.support, self)
        rng = stream(seed, "coverage")
        probes = box.lo + rng.random((n_probes, self.ndim)) * box.width
        hit = np.zeros(n_probes, dtype=bool)
        for p in self.parts:
            hit |= p.contains_many(probes)
        return bool(hit.all())

    def to_json(self) -> dict:
        return {
            "dims": self.ndim,
            "support": self.support.to_json(),
            "parts": [p.to_json() for p in self.parts],
        }

    @classmethod
    def from_json(cls, d: dict) -> "LinkedCover":
        parts = [Region.from_json(p) for p in d["parts"]]
        cover = cls(parts, Region.from_json(d["support"]))
        if cover.ndim != int(d["dims"]):
            raise CoverError("'dims' does not match the part bounds")
        return cover

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")


class DiscreteCover:
    """Linked cover of the finite state space ``{0, ..., n_states-1}``."""

    ndim = 1

    def __init__(self, n_states: int, parts: Sequence[Sequence[int]], strict: bool = True):
        if n_states < 1:
            raise CoverError("need at least one state")
        self.n_states = int(n_states)
        self.parts = tuple(frozenset(int(s) for s in p) for p in parts)
        if not self.parts:
            raise CoverError("a cover needs at least one part")
        for p in self.parts:
            if any(not 0 <= s < n_states for s in p):
                raise CoverError(f"part {sorted(p)} has states outside 0..{n_states - 1}")
        self._masks = np.zeros((len(self.parts), n_states), dtype=bool)
        for j, p in enumerate(self.parts):
            self._masks[j, sorted(p)] = True
        if strict:
            empty = self.empty_adjacent_overlaps()
            if empty:
                raise CoverError(f"adjacent overlaps {empty} are empty; the cover is not linked")

    @property
    def n_parts(self) -> int:
        return len(self.parts)

    def __len__(self) -> int:
        return len(self.parts)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiscreteCover):
            return NotImplemented
        return self.n_states == other.n_states and self.parts == other.parts

    def __repr__(self) -> str:
        return f"DiscreteCover({self.n_states}, {[sorted(p) for p in self.parts]})"

    def overlap(self, j: int, k: int) -> frozenset:
        return self.parts[j] & self.parts[k]

    def adjacent_overlap(self, j: int) -> frozenset:
        if j < 0 or j >= self.n_parts - 1:
            return frozenset()
        return self.overlap(j, j + 1)

    def empty_adjacent_overlaps(self) -> list[int]:
        return [j for j in range(self.n_parts - 1) if not self.adjacent_overlap(j)]

    @property
    def adjacent_only(self) -> bool:
        return all(
            not self.overlap(j, k) for j, k in itertools.combinations(range(self.n_parts), 2) if k != j + 1
        )

    def _states(self, draws) -> np.ndarray:
        x = np.asarray(draws)
        if x.ndim == 2:
            x = x[:, 0]
        x = x.astype(np.int64)
        if x.size and (x.min() < 0 or x.max() >= self.n_states):
            raise IndexError("state index out of range")
        return x

    def _check_index(self, j: int) -> None:
        if not 0 <= j < self.n_parts:
            raise IndexError(f"part index {j} out of range for {self.n_parts} parts")

    def contains(self, j: int, state) -> bool:
        self._check_index(j)
        return int(np.asarray(state).ravel()[0]) in self.parts[j]

    def in_prior_overlap(self, j: int, state) -> bool:
        self._check_index(j)
        s = int(np.asarray(state).ravel()[0])
        return any(s in self.overlap(k, j) for k in range(j))

    def part_mask(self, j: int, draws) -> np.ndarray:
        self._check_index(j)
        return self._masks[j][self._states(draws)]

    def adjacent_overlap_mask(self, j: int, draws) -> np.ndarray:
        x = self._states(draws)
        if j < 0 or j >= self.n_parts - 1:
            return np.zeros(len(x), dtype=bool)
        return (self._masks[j] & self._masks[j + 1])[x]

    def prior_overlap_mask(self, j: int, draws) -> np.ndarray:
        self._check_index(j)
        prior = self._masks[:j].any(axis=0) & self._masks[j]
        return prior[self._states(draws)]

    def state_mask(self, j: int) -> np.ndarray:
        return self._masks[j].copy()

    def to_json(self) -> dict:
        return {"states": self.n_states, "parts": [sorted(p) for p in self.parts]}

    @classmethod
    def from_json(cls, d: dict) -> "DiscreteCover":
        return cls(int(d["states"]), d["parts"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")


def load_cover(path) -> LinkedCover | DiscreteCover:
    d = json.loads(Path(path).read_text())
    if "states" in d:
        return DiscreteCover.from_json(d)
    return LinkedCover.from_json(d)


def in_prior_overlap(cover: LinkedCover | DiscreteCover, j: int, point) -> bool:
    return cover.in_prior_overlap(j, point)


# --- saturation ------------------------------------------------------------


@dataclass
class SaturationReport:
    part_saturated: list[bool]
    overlap_saturated: list[bool]
    empty_overlaps: list[int] = field(default_factory=list)

    @property
    def hard_failures(self) -> list[str]:
        return [f"adjacent overlap {j} is empty" for j in self.empty_overlaps]

    @property
    def saturated(self) -> bool:
        return not self.empty_overlaps and all(self.part_saturated) and all(self.overlap_saturated)


def _finite_box(region: Region, cover: LinkedCover | None = None) -> Region:
    """Replace infinite bounds by finite ones a little beyond the cover's finite bounds."""
    ref = [region] + (list(cover.parts) if cover is not None else [])
    lo, hi = region.lo.copy(), region.hi.copy()
    for d in range(region.ndim):
        finite = [v for r in ref for v in (r.lo[d], r.hi[d]) if math.isfinite(v)]
        a, b = (min(finite), max(finite)) if finite else (-1.0, 1.0)
        pad = max(1.0, b - a)
        if not math.isfinite(lo[d]):
            lo[d] = min(a, hi[d] if math.isfinite(hi[d]) else a) - pad
        if not math.isfinite(hi[d]):
            hi[d] = max(b, lo[d]) + pad
    return Region(lo, hi)


def _probe_mass(target: "TargetModel", box: Region, region: Region, n: int, rng) -> bool:
    mid = (box.lo + box.hi) / 2
    pts = np.vstack([mid, box.lo + rng.random((max(n - 1, 0), box.ndim)) * box.width])
    if target.lattice:
        pts = np.round(pts)
        # lattice regions narrower than one step still hold their integer points
        grid = [np.arange(math.ceil(l), math.floor(h) + 1) for l, h in zip(box.lo, box.hi)]
        if all(0 < g.size <= 64 for g in grid) and np.prod([g.size for g in grid]) <= 4096:
            pts = np.vstack([pts, np.array(list(itertools.product(*grid)), dtype=float)])
    pts = pts[region.contains_many(pts)]
    if not len(pts):
        return False
    return bool(np.isfinite(target.log_density(pts)).any())


def validate_saturated(
    cover: LinkedCover | DiscreteCover, target: "TargetModel", probe_count: int = 64, seed: int = 0
) -> SaturationReport:
    """Probe every part and adjacent overlap for positive target density."""
    if probe_count < 1:
        raise ValueError("probe_count must be >= 1")
    if isinstance(cover, DiscreteCover):
        dens = np.isfinite(target.log_density(np.arange(cover.n_states)[:, None]))
        parts = [bool(dens[sorted(p)].any()) for p in cover.parts]
        ovs = [bool(dens[sorted(cover.adjacent_overlap(j))].any()) for j in range(cover.n_parts - 1)]
        return SaturationReport(parts, ovs, cover.empty_adjacent_overlaps())
    rng = stream(seed, "saturation")
    parts, ovs = [], []
    for p in cover.parts:
        parts.append(_probe_mass(target, _finite_box(p, cover), p, probe_count, rng))
    for j in range(cover.n_parts - 1):
        ov = cover.adjacent_overlap(j)
        ovs.append(False if ov.is_empty else _probe_mass(target, _finite_box(ov, cover), ov, probe_count, rng))
    return SaturationReport(parts, ovs, cover.empty_adjacent_overlaps())


# --- automatic construction ------------------------------------------------


def disperse_cover(W: int, n_dims: int) -> list[int]:
    """Most balanced factorization of ``W`` into ``n_dims`` part counts.

    Balance is the ratio of the largest to the smallest factor. Factors are
    returned in non-increasing order, so earlier dimensions get more parts.
    """
    if W < 1 or n_dims < 1:
        raise ValueError("W and n_dims must be >= 1")

    best: tuple[int, ...] | None = None

    def rec(rem: int, k: int, cap: int, acc: tuple[int, ...]):
        nonlocal best
        if k == 1:
            if rem <= cap:
                cand = acc + (rem,)
                if best is None or _better(cand, best):
                    best = cand
            return
        for f in range(min(rem, cap), 0, -1):
            if rem % f == 0:
                rec(rem // f, k - 1, f, acc + (f,))

    rec(W, n_dims, W, ())
    assert best is not None
    return list(best)


def _better(a: tuple[int, ...], b: tuple[int, ...]) -> bool:
    ra, rb = a[0] / a[-1], b[0] / b[-1]
    if ra != rb:
        return ra < rb
    return a > b


def quantile_breakpoints(pilot, parts: int, delta: float = 0.0) -> np.ndarray:
    """Overlap intervals between ``parts`` equal-mass slabs of a 1-d pilot.

    Returns an array of shape ``(parts - 1, 2)``; row ``i`` holds the empirical
    quantiles at ``(i+1)/parts - delta/2`` and ``(i+1)/parts + delta/2``
    (mid-point interpolation). With ``delta=0`` both columns are the plain
    breakpoint.
    """
    x = np.asarray(pilot, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("pilot sample is empty")
    if parts < 1:
        raise ValueError("parts must be >= 1")
    q = np.arange(1, parts) / parts
    lo = np.clip(q - delta / 2, 0.0, 1.0)
    hi = np.clip(q + delta / 2, 0.0, 1.0)
    if q.size == 0:
        return np.empty((0, 2))
    return np.column_stack([np.quantile(x, lo, method="midpoint"), np.quantile(x, hi, method="midpoint")])


def ppf_breakpoints(ppf: Callable, parts: int, delta: float = 0.0) -> np.ndarray:
    """Same as :func:`quantile_breakpoints` but from an exact quantile function."""
    if parts < 1:
        raise ValueError("parts must be >= 1")
    q = np.arange(1, parts) / parts
    if q.size == 0:
        return np.empty((0, 2))
    lo = np.clip(q - delta / 2, 0.0, 1.0)
    hi = np.clip(q + delta / 2, 0.0, 1.0)
    return np.column_stack([np.asarray(ppf(lo), float), np.asarray(ppf(hi), float)])


def snake_order(counts: Sequence[int]) -> list[tuple[int, ...]]:
    """Boustrophedon ordering of a grid; consecutive cells differ by one step in one coordinate."""
    if not counts:
        return [()]
    head, rest = counts[0], counts[1:]
    inner = snake_order(rest)
    out = []
    for i in range(head):
        seq = inner if i % 2 == 0 else inner[::-1]
        out.extend((i,) + cell for cell in seq)
    return out


def merge_cover(breakpoints: Sequence[np.ndarray], support: Region) -> LinkedCover:
    """Build the grid cover from per-dimension overlap intervals.

    ``breakpoints[d]`` has one ``[lo, hi]`` row per interior boundary of
    dimension ``d`` (an empty array leaves the dimension unsplit). Cells are
    ordered in snake order, which makes consecutive cells grid neighbours.
    """
    if len(breakpoints) != support.ndim:
        raise CoverError("need one breakpoint array per dimension")
    slabs = []
    for d, bp in enumerate(breakpoints):
        bp = np.asarray(bp, dtype=float).reshape(-1, 2)
        if np.any(bp[:, 0] > bp[:, 1]):
            raise CoverError(f"dimension {d}: overlap interval with lo > hi")
        if len(bp) > 1 and np.any(bp[:-1, 1] >= bp[1:, 0]):
            raise CoverError(f"dimension {d}: overlaps touch each other; delta is too large")
        edges_lo = np.concatenate([[support.lo[d]], bp[:, 0]])
        edges_hi = np.concatenate([bp[:, 1], [support.hi[d]]])
        if np.any(edges_hi <= edges_lo):
            raise CoverError(f"dimension {d}: zero-width slab")
        slabs.append(list(zip(edges_lo, edges_hi)))
    parts = []
    for cell in snake_order([len(s) for s in slabs]):
        lo = [slabs[d][i][0] for d, i in enumerate(cell)]
        hi = [slabs[d][i][1] for d, i in enumerate(cell)]
        parts.append(Region(lo, hi))
    return LinkedCover(parts, support)


def estimate_cover(
    target: "TargetModel",
    pilot_size: int,
    W: int,
    delta: float | None = None,
    seed: int = 0,
    sampler: Callable[[np.random.Generator, int], np.ndarray] | None = None,
    dims: Sequence[int] | None = None,
) -> LinkedCover:
    """Pilot run, then quantile slabs per dimension merged into a grid cover.

    ``sampler(rng, n)`` overrides the default pilot, a full-space random-walk
    Metropolis chain. ``dims`` selects the dimensions to split (all by default).
    """
    if pilot_size < 1:
        raise ValueError("pilot_size must be >= 1")
    if W == 1:
        return LinkedCover([target.support], target.support)
    delta = 0.1 / W if delta is None else float(delta)
    if delta <= 0:
        raise ValueError("delta must be positive")
    rng = stream(seed, "pilot")
    if sampler is not None:
        pilot = np.asarray(sampler(rng, pilot_size), dtype=float).reshape(pilot_size, -1)
    else:
        from .samplers import pilot_mh

        pilot = pilot_mh(target, pilot_size, rng)
    dims = list(range(target.dim)) if dims is None else list(dims)
    counts = disperse_cover(W, len(dims))
    bps = [np.empty((0, 2)) for _ in range(target.dim)]
    for d, c in zip(dims, counts):
        bps[d] = quantile_breakpoints(pilot[:, d], c, delta)
    return merge_cover(bps, target.support)
