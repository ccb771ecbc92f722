"""Command line: config handling, exit codes, artifacts and determinism."""

import json
from pathlib import Path

import pytest

from divext.cli import ConfigError, load_config, main

DATA = Path(__file__).parent / "data"
SMALL = DATA / "small_extend.json"


def write(tmp_path, payload, name="cfg.json"):
    p = tmp_path / name
    p.write_text(payload if isinstance(payload, str) else json.dumps(payload))
    return str(p)


def test_malformed_json_exits_2(tmp_path, capsys):
    assert main(["cover", "--config", write(tmp_path, "{not json"), "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_unknown_key_and_field(tmp_path):
    assert main(["cover", "--config", write(tmp_path, {"colour": 1}), "--out", str(tmp_path)]) == 2
    assert main(["cover", "--config", write(tmp_path, {"field": "nonsense"}), "--out", str(tmp_path)]) == 2
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, {"max_level": "ten"}))


def test_monte_carlo_needs_seed(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, {"mc_samples": 100, "seed": None}))


def test_overrides_apply(tmp_path):
    cfg = load_config(str(SMALL), {"quad_order": 3, "seed": None, "out": str(tmp_path)})
    assert load_config(str(SMALL), {"out": str(tmp_path)}).digest() == load_config(str(SMALL)).digest()
    assert cfg.quad_order == 3 and cfg.seed == 3 and cfg.out == str(tmp_path)
    assert cfg.digest() != load_config(str(SMALL)).digest()


def test_cover_writes_report(tmp_path):
    cfg = write(tmp_path, {"max_level": 8, "cover_depth": 5})
    assert main(["cover", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["cover", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "cover_report.json").read_bytes()
    assert a == (tmp_path / "b" / "cover_report.json").read_bytes()
    assert (tmp_path / "a" / "cover.csv").read_bytes() == (tmp_path / "b" / "cover.csv").read_bytes()
    report = json.loads(a)
    assert report["pass"]


def test_extend_matches_golden_and_repeats(tmp_path):
    for run in ("one", "two"):
        assert main(["extend", "--config", str(SMALL), "--out", str(tmp_path / run)]) == 0
    one = (tmp_path / "one" / "extension.csv").read_bytes()
    assert one == (tmp_path / "two" / "extension.csv").read_bytes()
    assert one == (DATA / "small_extend_golden.csv").read_bytes()
    summary = json.loads((tmp_path / "one" / "summary.json").read_text())
    assert summary["restriction_exact"] and summary["zero_beyond_support"]
    assert summary["norm_ratios"]["1"] >= 1


def test_counterexample_reports_window(tmp_path):
    assert main(["counterexample", "--gamma", "0.5", "--out", str(tmp_path)]) == 0
    out = json.loads((tmp_path / "counterexample.json").read_text())
    assert out["window"]["alpha_interval"] == [2.0, 3.0]
    assert out["flux_max_error"] <= 1e-8
    assert out["control"]["converges"]


def test_counterexample_outside_window(tmp_path):
    assert main(["counterexample", "--gamma", "0.5", "--alpha", "3.5", "--out", str(tmp_path)]) == 1
    assert main(["counterexample", "--gamma", "1.5", "--out", str(tmp_path)]) == 2


def test_verify_cusp_suite(tmp_path):
    assert main(["verify", "cusp", "--out", str(tmp_path)]) == 0
    out = json.loads((tmp_path / "verify_cusp.json").read_text())
    assert out["pass"]
