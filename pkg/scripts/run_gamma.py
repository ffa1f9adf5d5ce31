"""Gamma target on the fixed three-part cover, every merge variant."""

from pathlib import Path

from _common import base_parser, run_grid

from dcsampling.experiments import ExperimentConfig


def main() -> None:
    p = base_parser(__doc__)
    p.add_argument("--M", type=int, default=10_000)
    p.add_argument("--sampler", choices=("mh", "rejection"), default="mh")
    args = p.parse_args()
    configs = [ExperimentConfig("gamma", "dc", W=3, M=args.M, seed=s, sampler=args.sampler, merge=v)
               for s in range(args.seeds) for v in ("downsample", "weighted", "reuse")]
    configs += [ExperimentConfig("gamma", "standard", W=3, M=args.M, seed=s) for s in range(args.seeds)]
    run_grid(configs, Path(args.out) / "gamma")


if __name__ == "__main__":
    main()
