import csv
import json
import subprocess
import sys

import pytest

from stubmatch.cli import SWEEP_COLUMNS, build_parser, main


def spec(**over):
    data = {"sim": {"window": {"dimension": 2, "side": 12.0, "boundary": "torus"},
                    "lambda_red": 1.0, "lambda_blue": 1.0,
                    "red_law": {"type": "deterministic", "k": 3}, "blue_law": {"type": "deterministic", "k": 3},
                    "seed": 11},
            "replicas": 3}
    data.update(over)
    return data


def write(tmp_path, data, name="exp.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def snapshot(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_generate_match_pipeline_is_reproducible(tmp_path):
    cfg = write(tmp_path, spec())
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        assert main(["generate", "--config", cfg, "--out", str(out)]) == 0
        assert main(["match", "--config", cfg, "--out", str(out)]) == 0
    assert sorted(p.name for p in (out1 / "configs").iterdir()) == [
        "replica_0000.csv", "replica_0001.csv", "replica_0002.csv"]
    assert snapshot(out1) == snapshot(out2)
    rows = {r["metric"]: r for r in csv.DictReader((out1 / "aggregate.csv").open())}
    frac = float(rows["unmatched_fraction"]["mean"])
    assert 0.0 <= frac < 1.0
    report = json.loads((out1 / "reports" / "replica_0001.json").read_text())
    assert report["seed"] == 12
    assert report["matched_red_stubs"] == report["matched_blue_stubs"] == report["edge_count"]


def test_rerun_from_manifest(tmp_path):
    cfg = write(tmp_path, spec())
    out = tmp_path / "a"
    assert main(["generate", "--config", cfg, "--out", str(out), "--seed", "40"]) == 0
    first = snapshot(out)
    manifest = json.loads((out / "manifest.generate.json").read_text())
    assert manifest["spec"]["sim"]["seed"] == 40 and manifest["version"]
    assert main(["generate", "--config", str(out / "manifest.generate.json")]) == 0
    assert snapshot(out) == first
    other = tmp_path / "b"
    assert main(["generate", "--config", str(out / "manifest.generate.json"), "--out", str(other)]) == 0
    assert snapshot(other) == first


def test_engines_write_identical_matchings(tmp_path):
    cfg = write(tmp_path, spec())
    outs = {}
    for engine in ("greedy", "rounds"):
        out = tmp_path / engine
        assert main(["generate", "--config", cfg, "--out", str(out)]) == 0
        assert main(["match", "--config", cfg, "--out", str(out), "--engine", engine]) == 0
        outs[engine] = snapshot(out / "matchings")
    assert outs["greedy"] == outs["rounds"]


def test_saturated_color_flag(tmp_path):
    data = spec()
    data["sim"]["blue_law"] = {"type": "deterministic", "k": 5}
    cfg = write(tmp_path, data)
    out = tmp_path / "o"
    assert main(["generate", "--config", cfg, "--out", str(out)]) == 0
    assert main(["match", "--config", cfg, "--out", str(out)]) == 0
    for i in range(3):
        report = json.loads((out / "reports" / f"replica_{i:04d}.json").read_text())
        red_total, blue_total = report["stub_total_red"], report["stub_total_blue"]
        assert report["expected_saturated"] == ("red" if red_total < blue_total else "blue")
        assert report["saturated"] == "red"
        assert report["unmatched_red_stubs"] == 0


def test_scheme_and_analyze(tmp_path):
    cfg = write(tmp_path, spec(replicas=2))
    out = tmp_path / "o"
    assert main(["generate", "--config", cfg, "--out", str(out)]) == 0
    for scheme in ("finite", "percolating"):
        assert main(["scheme", "--config", cfg, "--out", str(out), "--scheme", scheme]) == 0
        assert main(["analyze", "--config", cfg, "--out", str(out), "--scheme", scheme]) == 0
    payload = json.loads((out / "schemes" / "percolating" / "replica_0000.json").read_text())
    assert payload["tree"] == "euclidean-mst-dfs" and payload["path"]
    groups = json.loads((out / "schemes" / "finite" / "replica_0001.json").read_text())["groups"]
    assert all(len(g) == 6 for g in groups)
    hist = list(csv.reader((out / "analysis" / "finite" / "replica_0000.hist.csv").open()))
    assert hist[0] == ["size", "count"]
    assert (out / "analysis.percolating.csv").exists()
    assert main(["match", "--config", cfg, "--out", str(out)]) == 0
    assert main(["analyze", "--config", cfg, "--out", str(out)]) == 0
    record = json.loads((out / "analysis" / "replica_0000.json").read_text())
    assert set(record) >= {"components", "intensities", "edge_length"}


def test_truncation_scheme(tmp_path):
    data = spec(replicas=1, stages=3)
    data["sim"]["red_law"] = data["sim"]["blue_law"] = {"type": "zipf", "s": 2.0}
    cfg = write(tmp_path, data)
    out = tmp_path / "o"
    assert main(["generate", "--config", cfg, "--out", str(out)]) == 0
    assert main(["scheme", "--config", cfg, "--out", str(out), "--scheme", "truncation"]) == 0
    payload = json.loads((out / "schemes" / "truncation" / "replica_0000.json").read_text())
    assert payload["caps"] == [[2, 2], [3, 3], [4, 4]]
    assert [s["stage"] for s in payload["stages"]] == [1, 2, 3]


def test_sweep_schema_and_conflicts(tmp_path):
    cfg = write(tmp_path, spec(replicas=1, grid={"k": [2]}))
    out = tmp_path / "o"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    rows = list(csv.reader((out / "sweep.csv").open()))
    assert rows[0] == ["k"] + SWEEP_COLUMNS
    assert len(rows) == 2
    cfg = write(tmp_path, spec(replicas=2, grid={"side": [8.0, 10.0], "lambda_red": [1.0, 2.0]}), "g.json")
    assert main(["sweep", "--config", cfg, "--out", str(out), "--threads", "2"]) == 0
    assert len(list(csv.reader((out / "sweep.csv").open()))) == 1 + 8
    for grid in ({"lambda": [1.0], "lambda_red": [1.0]}, {"k": [1], "zipf_s": [2.0]}, {"bogus": [1]}, {}):
        bad = write(tmp_path, spec(grid=grid), "bad.json")
        assert main(["sweep", "--config", bad, "--out", str(out)]) == 2


def test_validate_command(tmp_path):
    cfg = write(tmp_path, spec(replicas=2))
    out = tmp_path / "o"
    assert main(["validate", "--config", cfg, "--out", str(out)]) == 0
    result = json.loads((out / "validate.json").read_text())
    assert result["passed"] and result["oracle_uniqueness"]


def test_exit_codes(tmp_path):
    cfg = write(tmp_path, spec())
    assert main(["generate", "--config", cfg, "--out", str(tmp_path / "o"), "--replicas", "0"]) == 2
    no_seed = spec()
    no_seed["sim"].pop("seed")
    assert main(["generate", "--config", write(tmp_path, no_seed, "ns.json"), "--out", str(tmp_path / "o")]) == 2
    assert main(["generate", "--config", write(tmp_path, no_seed, "ns.json"), "--out", str(tmp_path / "o"),
                 "--seed", "3"]) == 0
    assert main(["match", "--config", cfg, "--out", str(tmp_path / "missing")]) == 3
    assert main(["generate", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 3
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["generate", "--config", cfg, "--out", str(blocker / "sub")]) == 3
    asym = spec()
    asym["sim"]["blue_law"] = {"type": "deterministic", "k": 2}
    acfg = write(tmp_path, asym, "asym.json")
    assert main(["generate", "--config", acfg, "--out", str(tmp_path / "u")]) == 0
    assert main(["scheme", "--config", acfg, "--out", str(tmp_path / "u"), "--scheme", "finite"]) == 4
    with pytest.raises(SystemExit) as err:
        main(["match", "--engine", "fast"])
    assert err.value.code == 2


def test_help_documents_sweep_columns():
    text = build_parser()._subparsers._group_actions[0].choices["sweep"].format_help()
    for column in SWEEP_COLUMNS:
        assert column in text


def test_console_entry_point(tmp_path):
    cfg = write(tmp_path, spec(replicas=1))
    done = subprocess.run([sys.executable, "-m", "stubmatch", "generate", "--config", cfg,
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert done.returncode == 0, done.stderr
    assert (tmp_path / "o" / "configs" / "replica_0000.csv").exists()
