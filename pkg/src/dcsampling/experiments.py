"""Experiment harness: cover, per-part sampling, proportions, merge, diagnostics.

Parallel workers are emulated by default: parts are sampled one after the
other and each is timed on its own. The reported runtime of a DC run is the
slowest worker's wall time; proportion estimation and merging are timed
separately as overhead. ``workers > 1`` runs parts in a thread pool with
identical results.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .cover import DiscreteCover, LinkedCover, Region, estimate_cover, load_cover
from .diagnostics import autocorrelation, ks_distance, tv_discrete, tv_lattice
from .merge import MergedSample, merge, merge_weighted, merge_with_reuse
from .pmmh import PARAM_NAMES, PFConfig, SVParams, default_init, pilot_covariance, pmmh_chain, simulate_sv, sv_cover
from .proportion import FailureError, ProportionEstimate, estimate_proportions, failure_bound, p_worst
from .rng import derive_seed, stream
from .samplers import (
    Envelope,
    SubsetChainConfig,
    SubsetSample,
    initial_point,
    run_discrete_chain,
    subset_mh,
    subset_mh_batch,
    subset_rejection,
)
from .targets import (
    TargetModel,
    discrete_chain_target,
    gamma_target,
    gmm2d,
    gmm5d,
    poisson_target,
)

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "DCRun",
    "OUT_DIR_ENV",
    "SUMMARY_COLUMNS",
    "reference_gamma_cover",
    "discrete_cover",
    "poisson_cover",
    "run_dc",
    "run_experiment",
    "emit_summary",
    "load_result",
]

OUT_DIR_ENV = "DCSAMPLING_OUT"
SUMMARY_COLUMNS = ("method", "N", "runtime_s", "tv", "tv_times_n")
EXPERIMENTS = ("gamma", "discrete", "poisson", "sv", "gmm")
METHODS = ("dc", "standard", "rosenthal")
ROSENTHAL_BURN_IN = 0.1


@dataclass
class ExperimentConfig:
    """One experiment run.

    ``M`` is the chain length per worker. ``N`` is the total draw count of the
    single-chain baseline (default ``W * M``). For ``poisson``, ``batches``
    independent repetitions of ``M`` iterations are run. ``sampler`` is
    ``"mh"`` or ``"rejection"`` (continuous targets with exact samplers).
    """

    experiment: str
    method: str = "dc"
    W: int = 2
    M: int = 10_000
    N: Optional[int] = None
    delta: Optional[float] = None
    seed: int = 0
    params: dict = field(default_factory=dict)
    out_dir: Optional[str] = None
    cover: Optional[str] = None
    pilot_size: int = 1000
    batches: int = 1
    sampler: str = "mh"
    merge: str = "downsample"
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.W < 1 or self.M < 1:
            raise ValueError("W and M must be >= 1")
        if self.N is not None and self.N < 1:
            raise ValueError("N must be >= 1")
        if self.delta is not None and self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.batches < 1 or self.workers < 1:
            raise ValueError("batches and workers must be >= 1")
        if self.sampler not in ("mh", "rejection"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.merge not in ("downsample", "weighted", "reuse"):
            raise ValueError(f"unknown merge variant {self.merge!r}")

    @property
    def total_draws(self) -> int:
        return self.N if self.N is not None else self.W * self.M

    @classmethod
    def from_json(cls, d: dict, **overrides) -> "ExperimentConfig":
        merged = {**d, **{k: v for k, v in overrides.items() if v is not None}}
        return cls(**merged)

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentResult:
    """Summary row plus details; ``timing`` holds every wall-clock field."""

    config: ExperimentConfig
    N: float
    tv: float
    runtime_s: float
    timing: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def row(self) -> dict:
        tv_n = self.tv * self.N if math.isfinite(self.tv) else float("nan")
        return {"method": self.config.method, "N": self.N, "runtime_s": self.runtime_s, "tv": self.tv,
                "tv_times_n": tv_n}

    def to_json(self) -> dict:
        return {"config": self.config.to_json(), "N": self.N, "tv": self.tv, "details": self.details}


# --- covers ----------------------------------------------------------------


def reference_gamma_cover() -> LinkedCover:
    """Three-part interval cover of the half line with overlaps of width 0.1."""
    parts = [Region([0.0], [3.55]), Region([3.45], [7.55]), Region([7.45], [np.inf])]
    return LinkedCover(parts, Region([0.0], [np.inf]))


def discrete_cover() -> DiscreteCover:
    """States 0-3 and 3-6 of the seven-state chain, sharing state 3."""
    return DiscreteCover(7, [[0, 1, 2, 3], [3, 4, 5, 6]])


def poisson_cover(lam: float) -> LinkedCover:
    """Split at the upper mode ``floor(lam)``, which both parts contain."""
    mode = float(math.floor(lam))
    return LinkedCover([Region([0.0], [mode]), Region([mode], [np.inf])], Region([0.0], [np.inf]))


# --- the DC pipeline -------------------------------------------------------


@dataclass
class DCRun:
    samples: list[SubsetSample]
    props: ProportionEstimate
    merged: MergedSample
    worker_times: list[float]
    overhead_s: float

    @property
    def runtime_s(self) -> float:
        return max(self.worker_times)


def _timed(fn: Callable[[int], SubsetSample], j: int) -> tuple[SubsetSample, float]:
    t0 = time.perf_counter()
    s = fn(j)
    return s, time.perf_counter() - t0


def run_dc(
    cover,
    sample_part: Callable[[int], SubsetSample],
    seed: int = 0,
    variant: str = "downsample",
    workers: int = 1,
    n_out: Optional[int] = None,
    target: Optional[TargetModel] = None,
) -> DCRun:
    """Sample every part, estimate proportions and merge.

    ``sample_part(j)`` must be deterministic in ``j``. A proportion failure
    is re-raised with the failure bound attached when ``target`` admits the
    exact oracle.
    """
    W = cover.n_parts
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(lambda j: _timed(sample_part, j), range(W)))
    else:
        out = [_timed(sample_part, j) for j in range(W)]
    samples = [s for s, _ in out]
    times = [t for _, t in out]
    t0 = time.perf_counter()
    try:
        props = estimate_proportions(samples, cover)
    except FailureError as err:
        bound = None
        if target is not None:
            try:
                bound = failure_bound(p_worst(target, cover), min(s.M for s in samples), W)
            except ValueError:
                pass
        raise FailureError(err.overlap, err.hits, bound) from None
    if variant == "downsample":
        merged = merge(samples, props, seed=derive_seed(seed, "merge"))
    else:
        n = n_out if n_out is not None else sum(s.M for s in samples) // W
        fn = merge_weighted if variant == "weighted" else merge_with_reuse
        merged = fn(samples, props, n, seed=derive_seed(seed, "merge"))
    return DCRun(samples, props, merged, times, time.perf_counter() - t0)


def _part_sampler(target: TargetModel, cover, config: ExperimentConfig) -> Callable[[int], SubsetSample]:
    if config.sampler == "rejection":
        env = Envelope.from_target(target)
        return lambda j: subset_rejection(target, env, cover, j, config.M, seed=derive_seed(config.seed, "part", j))
    return lambda j: subset_mh(
        target, cover, j, SubsetChainConfig(j, config.M, seed=derive_seed(config.seed, "part", j))
    )


def _full_chain(target: TargetModel, n: int, seed: int, init=None) -> tuple[np.ndarray, float]:
    """Single full-space chain of length ``n`` and its wall time."""
    t0 = time.perf_counter()
    if target.transition is not None:
        x0 = int(target.init[0]) if init is None else int(np.asarray(init).ravel()[0])
        draws = run_discrete_chain(target.transition, x0, n, np.ones(len(target.transition), bool),
                                   stream(seed, "standard"))[:, None]
    else:
        full = LinkedCover([target.support], target.support)
        cfg = SubsetChainConfig(0, n, seed=seed, init=target.init if init is None else init)
        draws = subset_mh(target, full, 0, cfg).draws
    return draws, time.perf_counter() - t0


def _rosenthal(target: TargetModel, cover, config: ExperimentConfig) -> tuple[np.ndarray, list[float]]:
    """W full-space chains started in distinct parts, burn-in dropped, concatenated."""
    burn = int(ROSENTHAL_BURN_IN * config.M)
    draws, times = [], []
    for j in range(cover.n_parts):
        x0 = initial_point(target, cover, j)
        d, t = _full_chain(target, config.M, derive_seed(config.seed, "rosenthal", j), init=x0)
        draws.append(d[burn:])
        times.append(t)
    return np.concatenate(draws), times


# --- metrics ---------------------------------------------------------------


def _metric(target: TargetModel, draws: np.ndarray) -> float:
    if target.stationary is not None:
        return tv_discrete(draws, target.stationary).tv
    if target.cdf is not None:
        return ks_distance(draws, target.cdf)
    marginal = target.params.get("marginal_cdf")
    if marginal is not None:
        return ks_distance(draws[:, 0], lambda x: marginal(x, 0))
    return float("nan")


# --- experiments -----------------------------------------------------------


def _make_target(config: ExperimentConfig) -> TargetModel:
    p = dict(config.params)
    if config.experiment == "gamma":
        return gamma_target(p.get("shape", 4.0), p.get("scale", 1.0))
    if config.experiment == "discrete":
        return discrete_chain_target(p.get("a", 0.003))
    if config.experiment == "poisson":
        return poisson_target(p.get("lam", 14.0))
    if config.experiment == "gmm":
        return gmm5d() if int(p.get("dims", 2)) == 5 else gmm2d()
    raise ValueError(f"no target for {config.experiment!r}")


def _make_cover(target: TargetModel, config: ExperimentConfig):
    if config.cover is not None:
        return load_cover(config.cover)
    if config.experiment == "discrete":
        return discrete_cover()
    if config.experiment == "poisson":
        return poisson_cover(target.params["lam"])
    if config.experiment == "gamma" and config.W == 3 and config.delta is None:
        return reference_gamma_cover()
    return estimate_cover(target, config.pilot_size, config.W, config.delta, seed=derive_seed(config.seed, "cover"),
                          sampler=target.sampler if config.sampler == "rejection" else None)


def _run_single(config: ExperimentConfig) -> tuple[ExperimentResult, dict]:
    target = _make_target(config)
    cover = _make_cover(target, config)
    files: dict = {"cover.json": json.dumps(cover.to_json(), indent=2) + "\n"}
    if config.method == "standard":
        draws, t = _full_chain(target, config.total_draws, derive_seed(config.seed, "standard"))
        tv = _metric(target, draws)
        res = ExperimentResult(config, len(draws), tv, t, {"worker_s": [t]})
        files["draws"] = MergedSample(draws, np.zeros(len(draws), np.int64), config.seed, "standard")
        return res, files
    if config.method == "rosenthal":
        draws, times = _rosenthal(target, cover, config)
        tv = _metric(target, draws)
        res = ExperimentResult(config, len(draws), tv, max(times), {"worker_s": times})
        files["draws"] = MergedSample(draws, np.repeat(np.arange(cover.n_parts), len(draws) // cover.n_parts),
                                      config.seed, "rosenthal")
        return res, files
    run = run_dc(cover, _part_sampler(target, cover, config), config.seed, config.merge, config.workers,
                 target=target)
    tv = _metric(target, run.merged.draws)
    timing = {"worker_s": run.worker_times, "overhead_s": run.overhead_s,
              "overhead_fraction": run.overhead_s / max(run.worker_times)}
    details = {"pi": run.props.pi.tolist(), "exclusive": run.props.exclusive.tolist(),
               "hits": [list(h) for h in run.props.hits],
               "acceptance": [s.acceptance_rate for s in run.samples]}
    res = ExperimentResult(config, run.merged.N, tv, run.runtime_s + run.overhead_s, timing, details)
    files["proportions.json"] = json.dumps(run.props.to_json(), indent=2) + "\n"
    files["draws"] = run.merged
    return res, files


def _run_poisson(config: ExperimentConfig) -> tuple[ExperimentResult, dict]:
    """``batches`` independent short runs; rows report mean TV and mean N."""
    target = _make_target(config)
    cover = _make_cover(target, config)
    lam = target.params["lam"]
    upper = int(stats.poisson.ppf(1 - 1e-12, lam))

    def pmf(k):
        return stats.poisson.pmf(k, lam)

    B = config.batches
    if config.method == "standard":
        full = LinkedCover([target.support], target.support)
        cfg = SubsetChainConfig(0, config.total_draws if config.N else config.M,
                                seed=derive_seed(config.seed, "standard"), init=target.init)
        t0 = time.perf_counter()
        chains = subset_mh_batch(target, full, 0, cfg, B)
        times = [(time.perf_counter() - t0) / B]
        draws = [c.draws for c in chains]
        overhead = 0.0
        failures = 0
    else:
        t_parts, per_part = [], []
        for j in range(cover.n_parts):
            t0 = time.perf_counter()
            cfg = SubsetChainConfig(j, config.M, seed=derive_seed(config.seed, "part", j))
            per_part.append(subset_mh_batch(target, cover, j, cfg, B))
            t_parts.append((time.perf_counter() - t0) / B)
        times = t_parts
        t0 = time.perf_counter()
        draws, failures = [], 0
        for b in range(B):
            samples = [per_part[j][b] for j in range(cover.n_parts)]
            try:
                props = estimate_proportions(samples, cover)
            except FailureError:
                failures += 1
                continue
            draws.append(merge(samples, props, seed=derive_seed(config.seed, "merge", b)).draws)
        overhead = (time.perf_counter() - t0) / B
    tvs = np.array([tv_lattice(d, pmf, upper).tv for d in draws])
    Ns = np.array([len(d) for d in draws])
    details = {"tv_mean": float(tvs.mean()), "tv_se": float(tvs.std(ddof=1) / math.sqrt(len(tvs))) if len(tvs) > 1
               else float("nan"), "failures": failures, "batches": B, "tv": tvs.tolist()}
    res = ExperimentResult(config, float(Ns.mean()), float(tvs.mean()), max(times) + overhead,
                           {"worker_s": times, "overhead_s": overhead}, details)
    return res, {"cover.json": json.dumps(cover.to_json(), indent=2) + "\n"}


# phi near the 0.55 split so the posterior straddles both parts
SV_TRUTH = SVParams(phi=0.6, beta=0.7, rho=-0.3, sigma=0.3)


def _run_sv(config: ExperimentConfig) -> tuple[ExperimentResult, dict]:
    p = dict(config.params)
    truth = SVParams(**{k: p.get(k, getattr(SV_TRUTH, k)) for k in PARAM_NAMES})
    T = int(p.get("T", 200))
    pf = PFConfig(int(p.get("n_particles", 100)))
    _, y = simulate_sv(truth, T, seed=derive_seed(config.seed, "data"))
    pilot = pmmh_chain(y, steps=config.pilot_size, config=pf, seed=derive_seed(config.seed, "pilot"))
    cov = pilot_covariance(pilot)
    cover = sv_cover()
    if config.method == "dc":

        def part(j):
            ch = pmmh_chain(y, cov=cov, steps=config.M, restriction=cover.parts[j], config=pf,
                            seed=derive_seed(config.seed, "part", j))
            return SubsetSample.from_draws(cover, j, ch.theta, ch.acceptance_rate)

        run = run_dc(cover, part, config.seed, config.merge, config.workers)
        chains = [s.draws for s in run.samples]
        draws = run.merged.draws
        times, overhead = run.worker_times, run.overhead_s
        extra = {"pi": run.props.pi.tolist(), "acceptance": [s.acceptance_rate for s in run.samples]}
    else:
        n = config.total_draws if config.method == "standard" else config.M
        starts = [None] if config.method == "standard" else [default_init(p) for p in cover.parts]
        chains, times = [], []
        for j, x0 in enumerate(starts):
            t0 = time.perf_counter()
            ch = pmmh_chain(y, cov=cov, steps=n, config=pf, seed=derive_seed(config.seed, config.method, j), init=x0)
            times.append(time.perf_counter() - t0)
            burn = int(ROSENTHAL_BURN_IN * n) if config.method == "rosenthal" else 0
            chains.append(ch.theta[burn:])
        draws = np.concatenate(chains)
        overhead = 0.0
        extra = {}
    lag = min(100, min(len(c) for c in chains) - 1)
    acf = {name: [float(_acf_or_one(c[:, i], lag)) for c in chains] for i, name in enumerate(PARAM_NAMES)}
    lo, hi = np.percentile(draws, [2.5, 97.5], axis=0)
    details = {
        "truth": asdict(truth),
        "posterior_mean": dict(zip(PARAM_NAMES, draws.mean(axis=0).tolist())),
        "interval_95": {n: [float(a), float(b)] for n, a, b in zip(PARAM_NAMES, lo, hi)},
        "acf_lag": lag,
        "acf": acf,
        **extra,
    }
    res = ExperimentResult(config, len(draws), float("nan"), max(times) + overhead,
                           {"worker_s": times, "overhead_s": overhead}, details)
    return res, {"cover.json": json.dumps(cover.to_json(), indent=2) + "\n",
                 "draws": MergedSample(draws, np.zeros(len(draws), np.int64), config.seed, config.method)}


def _acf_or_one(x: np.ndarray, lag: int) -> float:
    # a chain that never moved is perfectly correlated
    if np.all(x == x[0]):
        return 1.0
    return autocorrelation(x, lag)[lag]


def run_experiment(config: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Run one experiment; with ``write`` the outputs go to ``config.out_dir``.

    Files: ``result.json`` (deterministic), ``timing.json``, ``summary.csv``,
    ``cover.json``, ``proportions.json`` (DC only) and ``draws.csv/json``.
    """
    if config.experiment == "poisson":
        res, files = _run_poisson(config)
    elif config.experiment == "sv":
        res, files = _run_sv(config)
    else:
        res, files = _run_single(config)
    if write:
        out = Path(config.out_dir or os.environ.get(OUT_DIR_ENV, "results"))
        out.mkdir(parents=True, exist_ok=True)
        for name, content in files.items():
            if name == "draws":
                content.save(out / "draws")
            else:
                (out / name).write_text(content)
        (out / "result.json").write_text(json.dumps(res.to_json(), indent=2, default=_json_default) + "\n")
        (out / "timing.json").write_text(json.dumps({"runtime_s": res.runtime_s, **res.timing}, indent=2) + "\n")
        emit_summary([res], out / "summary.csv")
    return res


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _order_key(res: ExperimentResult):
    # harder (smaller a) settings first, then dc, rosenthal, standard
    a = res.config.params.get("a", math.inf)
    return (res.config.experiment, a, {"dc": 0, "rosenthal": 1, "standard": 2}[res.config.method])


def emit_summary(results: Sequence[ExperimentResult], path) -> None:
    """CSV with one row per result; an empty input writes the header only."""
    rows = sorted(results, key=_order_key)
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        wr.writeheader()
        for r in rows:
            wr.writerow({k: _fmt(v) for k, v in r.row.items()})


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def load_result(out_dir) -> ExperimentResult:
    """Rebuild a result from ``result.json`` and ``timing.json`` in ``out_dir``."""
    out = Path(out_dir)
    d = json.loads((out / "result.json").read_text())
    timing = json.loads((out / "timing.json").read_text()) if (out / "timing.json").exists() else {}
    cfg = ExperimentConfig(**d["config"])
    return ExperimentResult(cfg, d["N"], d["tv"], timing.pop("runtime_s", float("nan")), timing, d["details"])
