"""Poisson(14) split at the mode: mean TV over many short batches."""

from pathlib import Path

from _common import base_parser, run_grid

from dcsampling.experiments import ExperimentConfig


def main() -> None:
    p = base_parser(__doc__)
    p.add_argument("--batches", type=int, default=10_000)
    p.add_argument("--M", type=int, default=1000, help="iterations per batch")
    args = p.parse_args()
    common = dict(W=2, M=args.M, batches=args.batches, params={"lam": 14.0})
    configs = [ExperimentConfig("poisson", m, seed=s, **common) for s in range(args.seeds) for m in ("dc", "standard")]
    results = run_grid(configs, Path(args.out) / "poisson")
    for r in results:
        print(f"{r.config.method:9s} seed {r.config.seed}: mean TV {r.details['tv_mean']:.5f} "
              f"+- {r.details['tv_se']:.5f}")


if __name__ == "__main__":
    main()
