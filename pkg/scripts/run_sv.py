"""Stochastic volatility PMMH on simulated returns: DC against a full-space chain."""

from pathlib import Path

from _common import base_parser, run_grid

from dcsampling.experiments import ExperimentConfig


def main() -> None:
    p = base_parser(__doc__)
    p.add_argument("--M", type=int, default=10_000, help="PMMH iterations per chain")
    p.add_argument("--T", type=int, default=200, help="length of the simulated return series")
    p.add_argument("--particles", type=int, default=100)
    args = p.parse_args()
    params = {"T": args.T, "n_particles": args.particles}
    configs = []
    for s in range(args.seeds):
        configs.append(ExperimentConfig("sv", "dc", W=2, M=args.M, seed=s, params=params))
        configs.append(ExperimentConfig("sv", "standard", W=2, M=args.M, N=args.M, seed=s, params=params))
    for r in run_grid(configs, Path(args.out) / "sv"):
        acf = {k: round(sum(v) / len(v), 3) for k, v in r.details["acf"].items()}
        print(f"{r.config.method:9s} seed {r.config.seed}: lag-{r.details['acf_lag']} ACF {acf}")


if __name__ == "__main__":
    main()
