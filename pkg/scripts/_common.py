"""Shared helpers for the experiment scripts."""

from __future__ import annotations

import argparse
import json
import logging
from pathlib import Path

from dcsampling.experiments import ExperimentConfig, ExperimentResult, emit_summary, run_experiment
from dcsampling.proportion import FailureError

log = logging.getLogger("dcsampling.scripts")


def base_parser(description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--out", default="results", help="output root; one subdirectory per run")
    p.add_argument("--seeds", type=int, default=5, help="number of seeds, starting at 0")
    return p


def run_grid(configs: list[ExperimentConfig], out: Path) -> list[ExperimentResult]:
    """Run each config into ``out/<experiment>_<method>_M<M>_s<seed>`` and write one summary."""
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    results = []
    for cfg in configs:
        cfg.out_dir = str(out / f"{cfg.experiment}_{cfg.method}_{cfg.merge}_M{cfg.M}_N{cfg.N}_s{cfg.seed}")
        try:
            res = run_experiment(cfg)
        except FailureError as err:
            log.info("%s seed %d: %s", cfg.method, cfg.seed, err)
            continue
        log.info("%s", json.dumps(res.row))
        results.append(res)
    out.mkdir(parents=True, exist_ok=True)
    emit_summary(results, out / "summary.csv")
    return results
