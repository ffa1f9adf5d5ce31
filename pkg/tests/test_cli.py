import csv
import json

import pytest

from dcsampling.cli import build_parser, main


def test_parser_lists_commands():
    p = build_parser()
    for cmd in ("cover", "sample", "merge", "expect", "bench", "report"):
        assert p.parse_args([cmd] + {"cover": ["--target", "gamma"],
                                     "sample": ["--target", "gamma", "--cover", "c", "--part", "0", "--out", "o"],
                                     "merge": ["--cover", "c", "--samples", "s", "--out", "o"],
                                     "expect": ["--cover", "c", "--samples", "s"],
                                     "bench": ["discrete"],
                                     "report": ["r"]}[cmd]).command == cmd


def test_pipeline(tmp_path, capsys):
    cover = tmp_path / "cover.json"
    assert main(["cover", "--target", "gamma", "--reference", "--out", str(cover)]) == 0
    stems = []
    for j in range(3):
        stem = tmp_path / f"part{j}"
        assert main(["sample", "--target", "gamma", "--cover", str(cover), "--part", str(j), "--M", "2000",
                     "--sampler", "rejection", "--seed", "1", "--out", str(stem)]) == 0
        stems.append(str(stem))
    out = tmp_path / "merged"
    assert main(["merge", "--cover", str(cover), "--samples", *stems, "--out", str(out)]) == 0
    assert (tmp_path / "merged.csv").exists() and (tmp_path / "merged_proportions.json").exists()
    capsys.readouterr()
    assert main(["expect", "--cover", str(cover), "--samples", *stems, "--h", "1"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert abs(res["estimate"] - 1.0) < 1e-12


def test_merge_variants_cli(tmp_path):
    cover = tmp_path / "c.json"
    main(["cover", "--target", "discrete", "--reference", "--out", str(cover)])
    stems = []
    for j in range(2):
        stem = tmp_path / f"p{j}"
        main(["sample", "--target", "discrete", "--param", "a=0.03", "--cover", str(cover), "--part", str(j),
              "--M", "3000", "--out", str(stem)])
        stems.append(str(stem))
    for variant in ("weighted", "reuse"):
        out = tmp_path / variant
        assert main(["merge", "--cover", str(cover), "--samples", *stems, "--variant", variant, "--N", "500",
                     "--out", str(out)]) == 0
        assert json.loads((tmp_path / f"{variant}.json").read_text())["N"] == 500


def test_estimated_cover(tmp_path):
    out = tmp_path / "c.json"
    assert main(["cover", "--target", "gamma", "--W", "3", "--pilot-size", "300", "--out", str(out)]) == 0
    assert len(json.loads(out.read_text())["parts"]) == 3


def test_failure_exit_code(tmp_path):
    cover = tmp_path / "c.json"
    main(["cover", "--target", "gamma", "--reference", "--out", str(cover)])
    stems = []
    for j in range(3):
        stem = tmp_path / f"p{j}"
        main(["sample", "--target", "gamma", "--cover", str(cover), "--part", str(j), "--M", "3",
              "--sampler", "rejection", "--out", str(stem)])
        stems.append(str(stem))
    assert main(["merge", "--cover", str(cover), "--samples", *stems, "--out", str(tmp_path / "m")]) == 2


def test_bench_config_and_overrides(tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"experiment": "gamma", "M": 99999, "seed": 1, "params": {"a": 0.03}}))
    out = tmp_path / "run"
    assert main(["bench", "discrete", "--config", str(cfg), "--M", "5000", "--out-dir", str(out)]) == 0
    res = json.loads((out / "result.json").read_text())
    assert res["config"]["experiment"] == "discrete"
    assert res["config"]["M"] == 5000 and res["config"]["seed"] == 1
    assert res["config"]["params"] == {"a": 0.03}


def test_bench_env_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("DCSAMPLING_OUT", str(tmp_path / "env"))
    assert main(["bench", "discrete", "--M", "5000", "--seed", "1", "--param", "a=0.03"]) == 0
    assert (tmp_path / "env" / "summary.csv").exists()


def test_report(tmp_path):
    for m in ("dc", "standard"):
        main(["bench", "discrete", "--method", m, "--M", "5000", "--seed", "1", "--param", "a=0.03", "--out-dir",
              str(tmp_path / m)])
    out = tmp_path / "summary.csv"
    assert main(["report", str(tmp_path), "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert [r["method"] for r in rows] == ["dc", "standard"]


def test_unknown_target():
    with pytest.raises(SystemExit):
        main(["cover", "--target", "nope"])
