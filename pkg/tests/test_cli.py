from __future__ import annotations

import json
import os
import subprocess
import sys

import pytest

from artifact.cli import main


def _cli(*argv: str, cwd=None) -> subprocess.CompletedProcess:
    env = {**os.environ, "PYTHONHASHSEED": "0"}
    return subprocess.run([sys.executable, "-m", "artifact", *argv], capture_output=True, text=True,
                          cwd=cwd, env=env)


def test_malformed_graph_reports_line_and_column(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "vertex_count": 2,\n  "edges": [\n    {"u": 0, "v": 1, "pu": 0 "pv": 0}\n  ]\n}\n')
    res = _cli("graph", "validate", str(bad))
    assert res.returncode == 2
    assert "line 4 column 30" in res.stderr


def test_invalid_port_labeling_is_rejected(tmp_path, capsys):
    bad = tmp_path / "ports.json"
    bad.write_text(json.dumps({"vertex_count": 3, "edges": [
        {"u": 0, "v": 1, "pu": 0, "pv": 0}, {"u": 0, "v": 2, "pu": 0, "pv": 0}]}))
    assert main(["graph", "validate", str(bad)]) == 2
    assert "duplicate port 0" in capsys.readouterr().err


def test_graph_generate_and_dot(tmp_path, capsys):
    out = tmp_path / "k4.json"
    assert main(["graph", "generate", "--kind", "k4", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["vertex_count"] == 4
    capsys.readouterr()
    assert main(["graph", "show", "--format", "dot", str(out)]) == 0
    dot = capsys.readouterr().out
    assert dot.startswith("graph G {") and dot.count("--") == 6


@pytest.mark.parametrize("agent", ["zoo:oscillator", "zoo:rotor1"])
def test_trap_build_then_verify(tmp_path, capsys, agent):
    trap = tmp_path / "trap.json"
    assert main(["trap", "build", "--agents", agent, "--out", str(trap)]) == 0
    assert main(["trap", "verify", "--agents", agent, "--graph", str(trap)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["verdict"] == "trapped" and doc["unvisited_count"] > 0


def test_corpus_is_reproducible_and_tamper_evident(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert _cli("corpus", "make", "--max-n", "8", "--samples", "4", "--out", str(path)).returncode == 0
    assert a.read_bytes() == b.read_bytes()
    assert _cli("corpus", "hash", "--manifest", str(a)).returncode == 0
    doc = json.loads(a.read_text())
    doc["entries"][1]["edges"][0][2] ^= 1
    a.write_text(json.dumps(doc))
    res = _cli("corpus", "hash", "--manifest", str(a))
    assert res.returncode == 1
    assert json.loads(res.stdout)["mismatched_entries"]


def test_explore_sweep_csv(capsys):
    assert main(["explore", "--max-n", "6", "--format", "csv"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "n,pebbles_used,traversals,r_final"
    assert len(lines) > 1


def test_suite_subset_writes_bundle(tmp_path):
    res = _cli("suite", "--only", "3,5", "--no-rerun", "--out", str(tmp_path / "out"))
    assert res.returncode == 0, res.stdout + res.stderr
    lines = [x for x in res.stdout.splitlines() if x.startswith("criterion")]
    assert [x.split()[1] for x in lines] == ["3", "5"]
    assert all(" PASS " in x for x in lines)
    assert {p.name for p in (tmp_path / "out").iterdir()} >= {"report.json", "summary.txt"}


def test_single_agent_commands_take_zoo_names(tmp_path, capsys):
    g = tmp_path / "k4.json"
    main(["graph", "generate", "--kind", "k4", "--out", str(g)])
    capsys.readouterr()
    assert main(["run", "agent", "--agent", "zoo:rotor1", "--graph", str(g), "--budget", "50"]) == 0
    assert json.loads(capsys.readouterr().out)["traversals"] == 50
    assert main(["run", "agent", "--agent", "zoo:cautious_pair", "--graph", str(g)]) == 2
