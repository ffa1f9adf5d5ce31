"""Combine per-part samples into one sample of the full target.

Three variants share the same inputs:

* :func:`merge` thins each chain in proportion to its part probability and
  drops draws already claimed by an earlier part. The sample size is random.
* :func:`merge_weighted` picks a part by exclusive weight, then a uniform
  eligible draw of that chain.
* :func:`merge_with_reuse` is the weighted scheme that also recycles the
  overlap draws the next chain would otherwise discard.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numba
import numpy as np

from .cover import DiscreteCover, LinkedCover
from .proportion import ProportionEstimate
from .rng import stream
from .samplers import SubsetSample

__all__ = ["MergedSample", "merge", "merge_weighted", "merge_with_reuse"]


@dataclass(frozen=True, eq=False)
class MergedSample:
    """Draws from the full target with the part each came from."""

    draws: np.ndarray
    source: np.ndarray
    seed: Optional[int] = None
    method: str = "downsample"

    @property
    def N(self) -> int:
        return len(self.draws)

    def kept_counts(self, W: int) -> list[int]:
        return np.bincount(self.source, minlength=W).tolist()

    def meta(self, W: Optional[int] = None) -> dict:
        if W is None:
            W = int(self.source.max()) + 1 if self.N else 0
        return {
            "N": self.N,
            "kept": self.kept_counts(W),
            "seed": self.seed,
            "method": self.method,
            "integer": bool(self.draws.dtype.kind in "iu"),
        }

    def save(self, stem, W: Optional[int] = None) -> None:
        """Write ``<stem>.csv`` (draw columns and ``source``) and ``<stem>.json``."""
        stem = Path(stem)
        d = self.draws.shape[1]
        header = ",".join([f"x{i}" for i in range(d)] + ["source"])
        fmt = ["%d" if self.draws.dtype.kind in "iu" else "%.17g"] * d + ["%d"]
        np.savetxt(stem.with_suffix(".csv"), np.column_stack([self.draws, self.source]), fmt=fmt,
                   delimiter=",", header=header, comments="")
        stem.with_suffix(".json").write_text(json.dumps(self.meta(W), indent=2) + "\n")

    @classmethod
    def load(cls, stem) -> "MergedSample":
        stem = Path(stem)
        meta = json.loads(stem.with_suffix(".json").read_text())
        arr = np.loadtxt(stem.with_suffix(".csv"), delimiter=",", skiprows=1, ndmin=2)
        draws = arr[:, :-1].astype(np.int64) if meta.get("integer") else arr[:, :-1]
        return cls(draws, arr[:, -1].astype(np.int64), meta["seed"], meta["method"])


def _check(samples: Sequence[SubsetSample], props: ProportionEstimate) -> None:
    if len(samples) != props.W:
        raise ValueError(f"{len(samples)} samples but {props.W} proportions")
    for j, s in enumerate(samples):
        if s.j != j:
            raise ValueError(f"sample {j} is tagged with part {s.j}")


def _stack(samples: Sequence[SubsetSample]) -> tuple[np.ndarray, np.ndarray]:
    """All draws in one array plus the chain-start offsets."""
    draws = np.concatenate([s.draws for s in samples])
    offsets = np.cumsum([0] + [s.M for s in samples])
    return draws, offsets


def merge(
    samples: Sequence[SubsetSample],
    props: ProportionEstimate,
    seed: int = 0,
    shuffle_seed: Optional[int] = None,
) -> MergedSample:
    """Downsampling merge: one pass over iterations, shuffling the kept draws of each.

    Draw ``k`` of chain ``j`` is kept with probability ``pi[j] / max(pi)``
    unless it lies in an overlap with an earlier part. Keep decisions and the
    within-iteration shuffle use separate streams; ``shuffle_seed`` (default
    ``seed``) only changes the order.
    """
    _check(samples, props)
    Ms = {s.M for s in samples}
    if len(Ms) != 1:
        raise ValueError(f"chains differ in length: {sorted(Ms)}")
    M, W = Ms.pop(), len(samples)
    p = np.asarray(props.pi, float) / np.max(props.pi)
    # columns with p == 1 keep every eligible draw and need no uniform
    thinned = np.flatnonzero(p < 1.0)
    keep_col = np.full(W, -1, dtype=np.int64)
    keep_col[thinned] = np.arange(len(thinned))
    u_keep = stream(seed, "merge", "keep").random((M, len(thinned)))
    u_shuf = stream(seed if shuffle_seed is None else shuffle_seed, "merge", "shuffle").random((M, max(W - 1, 0)))
    eligible = np.column_stack([s.eligible for s in samples])
    draws, offsets = _stack(samples)
    idx, src = _keep_shuffle(eligible, p, u_keep, keep_col, u_shuf, offsets)
    return MergedSample(np.take(draws, idx, axis=0), src, seed, "downsample")


@numba.njit(cache=True)
def _keep_shuffle(eligible, p, u_keep, keep_col, u_shuf, offsets):
    """Stacked-row indices and chains of kept draws, Fisher-Yates shuffled within each iteration."""
    M, W = eligible.shape
    idx = np.empty(M * W, np.int64)
    src = np.empty(M * W, np.int64)
    n = 0
    for k in range(M):
        start = n
        for j in range(W):
            if eligible[k, j]:
                c = keep_col[j]
                if c < 0 or u_keep[k, c] < p[j]:
                    idx[n] = offsets[j] + k
                    src[n] = j
                    n += 1
        for i in range(n - start - 1, 0, -1):
            r = start + min(int(u_shuf[k, i - 1] * (i + 1)), i)
            t = start + i
            idx[t], idx[r] = idx[r], idx[t]
            src[t], src[r] = src[r], src[t]
    return idx[:n], src[:n]


def _pick(rng: np.random.Generator, pools: list[np.ndarray], which: np.ndarray) -> np.ndarray:
    """For each entry of ``which``, a uniform element of ``pools[which]``."""
    out = np.empty(len(which), dtype=np.int64)
    u = rng.random(len(which))
    for i, pool in enumerate(pools):
        sel = which == i
        if not sel.any():
            continue
        if len(pool) == 0:
            raise ValueError(f"selected pool {i} is empty")
        out[sel] = pool[np.minimum((u[sel] * len(pool)).astype(np.int64), len(pool) - 1)]
    return out


def merge_weighted(
    samples: Sequence[SubsetSample], props: ProportionEstimate, N_out: int, seed: int = 0
) -> MergedSample:
    """``N_out`` draws: a part by exclusive weight, then a uniform eligible draw of its chain."""
    _check(samples, props)
    if N_out < 0:
        raise ValueError("N_out must be nonnegative")
    rng = stream(seed, "merge", "weighted")
    W = len(samples)
    J = rng.choice(W, size=N_out, p=props.exclusive)
    draws, offsets = _stack(samples)
    pools = [offsets[j] + np.flatnonzero(s.eligible) for j, s in enumerate(samples)]
    for j in np.unique(J):
        if len(pools[j]) == 0:
            raise ValueError(f"chain {j} has no draws outside earlier parts")
    return MergedSample(draws[_pick(rng, pools, J)], J.astype(np.int64), seed, "weighted")


def merge_with_reuse(
    samples: Sequence[SubsetSample],
    props: ProportionEstimate,
    N_out: int,
    seed: int = 0,
    cover: LinkedCover | DiscreteCover | None = None,
) -> MergedSample:
    """Weighted merge that also draws from the overlap copies chain ``s+1`` discards.

    After picking part ``s`` by exclusive weight, the draw comes from the
    overlap ``C_s & C_{s+1}`` with the chain's empirical probability of that
    overlap among its eligible draws, and from the rest of the eligible draws
    otherwise. The overlap pool pools chain ``s``'s overlap draws with chain
    ``s+1``'s (all ineligible there). This needs overlaps only between
    consecutive parts; pass ``cover`` to have that checked.
    """
    _check(samples, props)
    if N_out < 0:
        raise ValueError("N_out must be nonnegative")
    if cover is not None and not cover.adjacent_only:
        raise ValueError("reuse merging needs a cover whose only overlaps are between consecutive parts")
    rng = stream(seed, "merge", "reuse")
    W = len(samples)
    draws, offsets = _stack(samples)
    core, shared, q = [], [], np.zeros(W)
    for j, s in enumerate(samples):
        elig = s.eligible
        n_elig = int(elig.sum())
        in_ov = elig & s.upper
        core.append(offsets[j] + np.flatnonzero(elig & ~s.upper))
        pool = offsets[j] + np.flatnonzero(in_ov)
        if j + 1 < W:
            nxt = samples[j + 1]
            pool = np.concatenate([pool, offsets[j + 1] + np.flatnonzero(nxt.lower)])
        shared.append(pool)
        q[j] = in_ov.sum() / n_elig if n_elig else 0.0
    J = rng.choice(W, size=N_out, p=props.exclusive)
    from_overlap = rng.random(N_out) < q[J]
    pools = core + shared
    which = np.where(from_overlap, J + W, J)
    return MergedSample(draws[_pick(rng, pools, which)], J.astype(np.int64), seed, "reuse")
