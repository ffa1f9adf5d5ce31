"""Seven-state chain: DC against a single chain and Rosenthal chains."""

from pathlib import Path

from _common import base_parser, run_grid

from dcsampling.experiments import ExperimentConfig


def main() -> None:
    p = base_parser(__doc__)
    p.add_argument("--a", type=float, default=0.003, help="bottleneck probability")
    p.add_argument("--M", type=int, default=10_000)
    p.add_argument("--standard-N", type=int, nargs="+", default=[20_000, 10**6])
    args = p.parse_args()
    params = {"a": args.a}
    configs = []
    for s in range(args.seeds):
        configs.append(ExperimentConfig("discrete", "dc", W=2, M=args.M, seed=s, params=params))
        configs.append(ExperimentConfig("discrete", "rosenthal", W=2, M=args.M, seed=s, params=params))
        configs += [ExperimentConfig("discrete", "standard", W=2, M=args.M, N=n, seed=s, params=params)
                    for n in args.standard_N]
    run_grid(configs, Path(args.out) / f"discrete_a{args.a:g}")


if __name__ == "__main__":
    main()
