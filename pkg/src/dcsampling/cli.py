"""Command-line entry point: ``dcsampling <command> ...``.

Commands: ``cover``, ``sample``, ``merge``, ``expect``, ``bench`` and
``report``. ``bench`` reads an optional JSON config whose keys match
:class:`~dcsampling.experiments.ExperimentConfig`; flags given on the command
line override it. Outputs default to ``$DCSAMPLING_OUT`` (or ``results``).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .cover import estimate_cover, load_cover
from .expectation import Integrand, estimate_expectation
from .experiments import (
    EXPERIMENTS,
    OUT_DIR_ENV,
    ExperimentConfig,
    discrete_cover,
    emit_summary,
    load_result,
    reference_gamma_cover,
    run_experiment,
)
from .merge import merge, merge_weighted, merge_with_reuse
from .proportion import FailureError, estimate_proportions
from .samplers import Envelope, SubsetChainConfig, SubsetSample, subset_mh, subset_rejection
from .targets import builtin_targets

log = logging.getLogger("dcsampling")


def _out_dir(arg: str | None) -> Path:
    return Path(arg or os.environ.get(OUT_DIR_ENV, "results"))


def _parse_params(items: list[str] | None) -> dict:
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected key=value, got {item!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def _target(name: str, params: dict):
    catalog = builtin_targets()
    if name not in catalog:
        raise SystemExit(f"unknown target {name!r}; choose from {sorted(catalog)}")
    return catalog[name](**params)


def _integrand(spec: str) -> Integrand:
    """``x`` / ``x<i>`` for a coordinate, ``1`` for the constant, ``eq:<v>`` for an indicator."""
    if spec == "1":
        return Integrand.constant(1.0)
    if spec.startswith("eq:"):
        return Integrand.indicator(float(spec[3:]))
    if spec.startswith("x"):
        return Integrand.coordinate(int(spec[1:] or 0))
    raise SystemExit(f"unknown integrand {spec!r}")


def cmd_cover(args) -> int:
    target = _target(args.target, _parse_params(args.param))
    if args.reference:
        cover = discrete_cover() if args.target == "discrete" else reference_gamma_cover()
    else:
        cover = estimate_cover(target, args.pilot_size, args.W, args.delta, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    cover.save(out)
    print(out)
    return 0


def cmd_sample(args) -> int:
    target = _target(args.target, _parse_params(args.param))
    cover = load_cover(args.cover)
    if args.sampler == "rejection":
        sample = subset_rejection(target, Envelope.from_target(target), cover, args.part, args.M, seed=args.seed)
    else:
        cfg = SubsetChainConfig(args.part, args.M, burn_in=args.burn_in, seed=args.seed)
        sample = subset_mh(target, cover, args.part, cfg)
    stem = Path(args.out)
    stem.parent.mkdir(parents=True, exist_ok=True)
    sample.save(stem)
    print(json.dumps(sample.meta()))
    return 0


def _load_samples(stems: list[str]) -> list[SubsetSample]:
    samples = [SubsetSample.load(s) for s in stems]
    return sorted(samples, key=lambda s: s.j)


def cmd_merge(args) -> int:
    cover = load_cover(args.cover)
    samples = _load_samples(args.samples)
    try:
        props = estimate_proportions(samples, cover)
    except FailureError as err:
        log.error("%s", err)
        return 2
    if args.variant == "downsample":
        merged = merge(samples, props, seed=args.seed)
    else:
        n = args.N or samples[0].M
        fn = merge_weighted if args.variant == "weighted" else merge_with_reuse
        kwargs = {"cover": cover} if args.variant == "reuse" else {}
        merged = fn(samples, props, n, seed=args.seed, **kwargs)
    stem = Path(args.out)
    stem.parent.mkdir(parents=True, exist_ok=True)
    merged.save(stem, W=cover.n_parts)
    props.save(stem.with_name(stem.name + "_proportions.json"))
    print(json.dumps(merged.meta(cover.n_parts)))
    return 0


def cmd_expect(args) -> int:
    cover = load_cover(args.cover)
    samples = _load_samples(args.samples)
    try:
        props = estimate_proportions(samples, cover)
    except FailureError as err:
        log.error("%s", err)
        return 2
    res = estimate_expectation(_integrand(args.h), samples, props, form=args.form)
    print(res.dumps())
    return 0


_BENCH_FLAGS = ("method", "W", "M", "N", "delta", "seed", "pilot_size", "batches", "sampler", "merge", "workers",
                "cover")


def cmd_bench(args) -> int:
    base = json.loads(Path(args.config).read_text()) if args.config else {}
    base["experiment"] = args.experiment
    overrides = {k: getattr(args, k) for k in _BENCH_FLAGS}
    params = {**base.get("params", {}), **_parse_params(args.param)}
    overrides["params"] = params or None
    overrides["out_dir"] = str(_out_dir(args.out_dir or base.get("out_dir")))
    cfg = ExperimentConfig.from_json(base, **overrides)
    try:
        res = run_experiment(cfg)
    except FailureError as err:
        log.error("%s", err)
        return 2
    print(json.dumps(res.row))
    return 0


def cmd_report(args) -> int:
    results = []
    for d in args.results:
        for path in sorted(Path(d).rglob("result.json")):
            results.append(load_result(path.parent))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    emit_summary(results, out)
    print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dcsampling", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("cover", help="estimate a linked cover and write it as JSON")
    c.add_argument("--target", required=True)
    c.add_argument("--param", action="append", metavar="KEY=VALUE")
    c.add_argument("--W", type=int, default=3)
    c.add_argument("--pilot-size", type=int, default=1000)
    c.add_argument("--delta", type=float)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--reference", action="store_true", help="fixed cover for the gamma or discrete target")
    c.add_argument("--out", default="cover.json")
    c.set_defaults(fn=cmd_cover)

    s = sub.add_parser("sample", help="sample one part of a cover")
    s.add_argument("--target", required=True)
    s.add_argument("--param", action="append", metavar="KEY=VALUE")
    s.add_argument("--cover", required=True)
    s.add_argument("--part", type=int, required=True)
    s.add_argument("--M", type=int, default=10_000)
    s.add_argument("--burn-in", type=int, default=0)
    s.add_argument("--sampler", choices=("mh", "rejection"), default="mh")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output stem; writes .csv and .json")
    s.set_defaults(fn=cmd_sample)

    m = sub.add_parser("merge", help="estimate proportions and merge part samples")
    m.add_argument("--cover", required=True)
    m.add_argument("--samples", nargs="+", required=True, help="sample stems")
    m.add_argument("--variant", choices=("downsample", "weighted", "reuse"), default="downsample")
    m.add_argument("--N", type=int)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", required=True)
    m.set_defaults(fn=cmd_merge)

    e = sub.add_parser("expect", help="estimate E[h(X)] from part samples")
    e.add_argument("--cover", required=True)
    e.add_argument("--samples", nargs="+", required=True)
    e.add_argument("--h", default="x0", help="x<i>, 1 or eq:<value>")
    e.add_argument("--form", choices=("conditional", "literal"), default="conditional")
    e.set_defaults(fn=cmd_expect)

    b = sub.add_parser("bench", help="run one experiment")
    b.add_argument("experiment", choices=EXPERIMENTS)
    b.add_argument("--config", help="JSON file with ExperimentConfig fields")
    b.add_argument("--method", choices=("dc", "standard", "rosenthal"))
    b.add_argument("--W", type=int)
    b.add_argument("--M", type=int)
    b.add_argument("--N", type=int)
    b.add_argument("--delta", type=float)
    b.add_argument("--seed", type=int)
    b.add_argument("--pilot-size", type=int)
    b.add_argument("--batches", type=int)
    b.add_argument("--sampler", choices=("mh", "rejection"))
    b.add_argument("--merge", choices=("downsample", "weighted", "reuse"))
    b.add_argument("--workers", type=int)
    b.add_argument("--cover", help="cover JSON to use instead of the default")
    b.add_argument("--param", action="append", metavar="KEY=VALUE")
    b.add_argument("--out-dir")
    b.set_defaults(fn=cmd_bench)

    r = sub.add_parser("report", help="collect result directories into one summary CSV")
    r.add_argument("results", nargs="+")
    r.add_argument("--out", default="summary.csv")
    r.set_defaults(fn=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
