"""Expectations of the full target from per-part samples.

Each chain contributes the mean of ``h`` over its eligible draws (those not
in an earlier part), weighted by its exclusive weight. The standard error
combines per-chain batch-means errors and treats the weights as fixed.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .diagnostics import batch_means_se
from .proportion import ProportionEstimate
from .samplers import SubsetSample

__all__ = ["Integrand", "ExpectationResult", "estimate_expectation"]


@dataclass(frozen=True)
class Integrand:
    """Real function on points of the support; ``fn`` maps ``(n, d)`` to ``(n,)``."""

    fn: Callable[[np.ndarray], np.ndarray]
    name: str = "h"

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        return np.asarray(self.fn(x), dtype=float).reshape(len(x))

    @classmethod
    def coordinate(cls, i: int = 0) -> "Integrand":
        return cls(lambda x: x[:, i], f"x{i}")

    @classmethod
    def constant(cls, c: float = 1.0) -> "Integrand":
        return cls(lambda x: np.full(len(x), float(c)), f"{c:g}")

    @classmethod
    def indicator(cls, state: float, i: int = 0) -> "Integrand":
        return cls(lambda x: (x[:, i] == state).astype(float), f"1[x{i}={state:g}]")


@dataclass(frozen=True)
class ExpectationResult:
    h: str
    estimate: float
    stderr: float
    per_part: list[dict] = field(default_factory=list)
    form: str = "conditional"
    weight_uncertainty_ignored: bool = True

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def estimate_expectation(
    h: Integrand,
    samples: Sequence[SubsetSample],
    props: ProportionEstimate,
    form: str = "conditional",
    n_batches: int = 20,
    log_weights: Optional[Sequence[np.ndarray]] = None,
) -> ExpectationResult:
    """Estimate ``E[h(X)]``.

    ``form="conditional"`` averages ``h`` over each chain's eligible draws;
    ``form="literal"`` averages ``h * eligible`` over all draws, which is
    biased low by each chain's eligible fraction and exists for comparison.
    ``log_weights`` turns each chain into a self-normalized importance sample.
    """
    if form not in ("conditional", "literal"):
        raise ValueError(f"unknown form {form!r}")
    if len(samples) != props.W:
        raise ValueError(f"{len(samples)} samples but {props.W} proportions")
    total, var = 0.0, 0.0
    parts = []
    for j, s in enumerate(samples):
        elig = s.eligible
        if not elig.any():
            raise ValueError(f"chain {j} has no draws outside earlier parts")
        w_j = float(props.exclusive[j])
        vals = h(s.draws)
        if form == "literal":
            contrib = np.where(elig, vals, 0.0)
            mean, se = float(contrib.mean()), batch_means_se(contrib, n_batches)
        elif log_weights is not None:
            lw = np.asarray(log_weights[j], float)[elig]
            w = np.exp(lw - lw.max())
            w /= w.sum()
            v = vals[elig]
            mean = float(w @ v)
            se = float(np.sqrt(np.sum(w**2 * (v - mean) ** 2)))
        else:
            v = vals[elig]
            mean, se = float(v.mean()), batch_means_se(v, n_batches)
        total += w_j * mean
        if np.isfinite(se):
            var += (w_j * se) ** 2
        parts.append({"j": j, "mean": mean, "stderr": se, "weight": w_j, "n_eligible": int(elig.sum())})
    return ExpectationResult(h.name, float(total), float(np.sqrt(var)), parts, form)
