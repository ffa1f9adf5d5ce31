import csv
import json
import math

import numpy as np
import pytest

from dcsampling.experiments import (
    ExperimentConfig,
    ExperimentResult,
    emit_summary,
    load_result,
    poisson_cover,
    reference_gamma_cover,
    run_dc,
    run_experiment,
)
from dcsampling.proportion import FailureError
from dcsampling.samplers import SubsetSample


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig("unknown")
    with pytest.raises(ValueError):
        ExperimentConfig("gamma", method="parallel")
    with pytest.raises(ValueError):
        ExperimentConfig("gamma", M=0)
    with pytest.raises(ValueError):
        ExperimentConfig("gamma", merge="best")
    assert ExperimentConfig("gamma", W=3, M=10).total_draws == 30
    assert ExperimentConfig("gamma", N=7).total_draws == 7


def test_config_overrides():
    cfg = ExperimentConfig.from_json({"experiment": "discrete", "M": 5, "seed": 1}, M=50, seed=None)
    assert cfg.M == 50 and cfg.seed == 1


def test_poisson_cover_split_at_mode():
    c = poisson_cover(14.0)
    assert c.adjacent_overlap(0).lo[0] == 14.0 == c.adjacent_overlap(0).hi[0]


def test_discrete_dc_run(tmp_path):
    cfg = ExperimentConfig("discrete", "dc", W=2, M=5000, seed=1, params={"a": 0.03}, out_dir=str(tmp_path))
    res = run_experiment(cfg)
    assert 0 <= res.tv < 0.2
    for name in ("cover.json", "proportions.json", "draws.csv", "draws.json", "result.json", "timing.json",
                 "summary.csv"):
        assert (tmp_path / name).exists()
    t = json.loads((tmp_path / "timing.json").read_text())
    assert math.isclose(t["runtime_s"], max(t["worker_s"]) + t["overhead_s"])


def test_outputs_are_byte_identical(tmp_path):
    cfg = ExperimentConfig("gamma", "dc", W=3, M=500, seed=4, out_dir=str(tmp_path))
    names = ("result.json", "draws.csv", "draws.json", "proportions.json", "cover.json")
    run_experiment(cfg)
    first = {n: (tmp_path / n).read_bytes() for n in names}
    run_experiment(cfg)
    assert first == {n: (tmp_path / n).read_bytes() for n in names}


def test_thread_pool_gives_identical_output(tmp_path):
    a = run_experiment(ExperimentConfig("gamma", "dc", W=3, M=500, seed=2, workers=1), write=False)
    b = run_experiment(ExperimentConfig("gamma", "dc", W=3, M=500, seed=2, workers=3), write=False)
    assert a.tv == b.tv and a.details == b.details


@pytest.mark.parametrize("method", ["standard", "rosenthal"])
def test_baselines(method):
    res = run_experiment(ExperimentConfig("discrete", method, W=2, M=2000, seed=0, params={"a": 0.03}),
                         write=False)
    assert res.N == (4000 if method == "standard" else 2 * 1800)
    assert 0 <= res.tv <= 1


@pytest.mark.parametrize("merge", ["weighted", "reuse"])
def test_gamma_merge_variants(merge):
    res = run_experiment(ExperimentConfig("gamma", "dc", W=3, M=2000, seed=0, sampler="rejection", merge=merge),
                         write=False)
    assert res.N == 2000
    assert res.tv < 0.08


def test_estimated_cover_path():
    res = run_experiment(ExperimentConfig("gamma", "dc", W=2, M=1000, seed=0), write=False)
    assert res.details["pi"][0] > 0


def test_gmm_run():
    res = run_experiment(ExperimentConfig("gmm", "dc", W=4, M=1000, seed=0, sampler="rejection"), write=False)
    assert res.tv < 0.1


def test_poisson_batches():
    dc = run_experiment(ExperimentConfig("poisson", "dc", M=300, batches=20, seed=0), write=False)
    std = run_experiment(ExperimentConfig("poisson", "standard", M=300, batches=20, seed=0), write=False)
    assert len(dc.details["tv"]) + dc.details["failures"] == 20
    assert len(std.details["tv"]) == 20


def test_sv_run_small():
    cfg = ExperimentConfig("sv", "dc", M=1000, pilot_size=200, seed=0, params={"T": 50, "n_particles": 30})
    res = run_experiment(cfg, write=False)
    assert set(res.details["acf"]) == {"phi", "beta", "rho", "sigma"}
    assert len(res.details["acf"]["phi"]) == 2


def test_failure_carries_bound(gamma, gamma_cover):
    def part(j):
        x = {0: 1.0, 1: 5.0, 2: 9.0}[j]
        return SubsetSample.from_draws(gamma_cover, j, np.full(10, x))

    with pytest.raises(FailureError) as err:
        run_dc(gamma_cover, part, target=gamma)
    assert err.value.bound is not None and 0.0 < err.value.bound <= 1.0


def _result(method, a):
    return ExperimentResult(ExperimentConfig("discrete", method, params={"a": a}), 10, 0.1, 1.0)


def test_summary_ordering(tmp_path):
    rows = [_result("standard", 0.03), _result("dc", 0.03), _result("standard", 0.003), _result("dc", 0.003),
            _result("rosenthal", 0.003)]
    emit_summary(rows, tmp_path / "s.csv")
    got = list(csv.DictReader(open(tmp_path / "s.csv")))
    assert [r["method"] for r in got] == ["dc", "rosenthal", "standard", "dc", "standard"]
    assert math.isclose(float(got[0]["tv_times_n"]), 1.0)


def test_summary_single_and_empty(tmp_path):
    emit_summary([_result("dc", 0.03)], tmp_path / "one.csv")
    assert len(open(tmp_path / "one.csv").read().splitlines()) == 2
    emit_summary([], tmp_path / "none.csv")
    assert open(tmp_path / "none.csv").read().strip() == "method,N,runtime_s,tv,tv_times_n"


def test_load_result(tmp_path):
    res = run_experiment(ExperimentConfig("discrete", "dc", M=5000, seed=3, params={"a": 0.03},
                                          out_dir=str(tmp_path)))
    back = load_result(tmp_path)
    assert back.tv == res.tv and back.config == res.config
