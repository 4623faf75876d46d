from __future__ import annotations

import json
import subprocess
import sys

import pytest

from spinal_lab.cli import UsageError, _parser, parse_seq, run
from spinal_lab.generators import path_graph, vicsek
from spinal_lab.io import dumps_graph, dumps_spinal, loads_spinal

SUBCOMMANDS = [
    [],
    ["generate"], ["generate", "vicsek"], ["generate", "plates"], ["generate", "glue"], ["generate", "random"],
    ["validate"],
    ["analyze"], ["analyze", "volumes"], ["analyze", "dims"], ["analyze", "nash"], ["analyze", "vlb"],
    ["check"], ["check", "lemma2"], ["check", "roundtrip"], ["check", "ball-intersection"],
    ["check", "lemma4"], ["check", "equivalence"],
    ["pc"], ["walk"],
    ["export"], ["export", "dot"], ["export", "csv"],
]


@pytest.fixture
def vicsek_file(tmp_path):
    path = tmp_path / "v.json"
    assert run(["generate", "vicsek", "--dim", "2", "--level", "3", "--out", str(path)]) == 0
    return path


def test_generate_vicsek(vicsek_file):
    doc = json.loads(vicsek_file.read_text())
    assert doc["vertex_count"] == 2**2 * 5**3 + 1 == 501
    manifest = json.loads((vicsek_file.parent / "v.json.manifest.json").read_text())
    assert manifest["command"] == "generate" and manifest["exit_code"] == 0
    assert str(vicsek_file) in manifest["outputs"]


def test_pc_prints_two(capsys):
    assert run(["pc", "--delta-sigma", "1", "--delta-g", "1.46497", "--nu", "1.46497"]) == 0
    assert capsys.readouterr().out.strip() == "2.0"


def test_pc_domain_error_is_usage(capsys):
    assert run(["pc", "--delta-sigma", "1", "--delta-g", "2", "--nu", "1"]) == 2


def test_validate_good_and_bad(tmp_path, vicsek_file, capsys):
    assert run(["validate", str(vicsek_file)]) == 0
    v = vicsek(2, 1)
    doc = json.loads(dumps_spinal(v.spinal))
    doc["pi"][v.center], doc["pi"][1] = 1, doc["pi"][v.center]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    capsys.readouterr()
    assert run(["validate", str(bad)]) == 1
    report = json.loads(capsys.readouterr().out)
    assert report["ok"] is False and report["violations"]


def test_validate_malformed(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"format": "spinal-lab/graph-v1", "vertex_count": 3, "edges": [[0, 1]]}))
    assert run(["validate", str(bad)]) == 1


def test_validate_bruteforce(tmp_path, capsys):
    path = tmp_path / "r.json"
    assert run(["generate", "random", "--seed", "4", "--length", "4", "--max-fiber-size", "3", "--out", str(path)]) == 0
    assert run(["validate", "--bruteforce", str(path)]) == 0
    assert json.loads(capsys.readouterr().out)["bruteforce"] is True


@pytest.mark.parametrize(
    "argv",
    [
        ["generate", "vicsek", "--dim", "2"],
        ["generate", "vicsek", "--dim", "2", "--lev", "3"],
        ["frobnicate"],
        ["analyze", "dims", "nofile.json", "--seq", "geometric:base=3,count=2",
         "--delta-sigma", "1", "--delta-g", "1"],
        ["check", "lemma4", "nofile.json", "--seq", "linear:1", "--p", "2"],
    ],
)
def test_usage_errors(argv, capsys):
    assert run(argv) == 2


@pytest.mark.parametrize("argv", SUBCOMMANDS)
def test_every_subcommand_has_help(argv, capsys):
    assert run([*argv, "--help"]) == 0
    text = capsys.readouterr().out
    assert "usage:" in text


def test_parse_seq():
    assert parse_seq("geometric:base=3,count=4") == [1, 3, 9, 27]
    assert parse_seq("geometric:base=2,count=3,start=2") == [2, 4, 8]
    for bad in ("geometric:base=1,count=3", "geometric:count=3", "linear:base=2,count=3", "geometric:base=2,count=3,x=1"):
        with pytest.raises(UsageError):
            parse_seq(bad)


def _outputs(tmp_path, tag, argv):
    out = tmp_path / f"{tag}.out"
    code = run([*argv, "--out", str(out)])
    return code, out.read_bytes()


@pytest.mark.parametrize(
    "argv",
    [
        ["generate", "random", "--seed", "7", "--length", "6"],
        ["generate", "plates", "--D", "1.5", "--delta", "2", "--length", "30", "--provider", "mixed", "--seed", "9"],
    ],
)
def test_generation_is_deterministic(tmp_path, argv):
    a = _outputs(tmp_path, "a", argv)
    b = _outputs(tmp_path, "b", argv)
    assert a == b and a[0] == 0


def test_analysis_outputs_deterministic(tmp_path, vicsek_file):
    cmds = [
        ["analyze", "volumes", str(vicsek_file), "--rmax", "27"],
        ["analyze", "volumes", str(vicsek_file), "--rmax", "27", "--spinal"],
        ["analyze", "nash", str(vicsek_file), "--p", "4", "--nu", "1.4649735207179269",
         "--seq", "geometric:base=3,count=3", "--delta-sigma", "1", "--delta-g", "1.4649735207179269"],
        ["walk", str(vicsek_file), "--tmax", "40"],
        ["walk", str(vicsek_file), "--tmax", "20", "--mode", "mc", "--walkers", "500", "--seed", "3"],
        ["export", "dot", str(vicsek_file)],
        ["export", "csv", str(vicsek_file)],
        ["check", "ball-intersection", str(vicsek_file), "--rmax", "3", "--budget", "3000", "--seed", "2"],
    ]
    for i, argv in enumerate(cmds):
        first = _outputs(tmp_path, f"{i}a", argv)
        assert first == _outputs(tmp_path, f"{i}b", argv), argv


def test_volumes_csv_content(tmp_path, vicsek_file, capsys):
    assert run(["analyze", "volumes", str(vicsek_file), "--rmax", "3", "--spinal"]) == 0
    lines = capsys.readouterr().out.split()
    assert lines[0] == "r,volume"
    assert lines[2] == "1,5" and lines[4] == "3,21"


def test_dims_check_exit_codes(vicsek_file, capsys):
    base = ["analyze", "dims", str(vicsek_file), "--seq", "geometric:base=3,count=3",
            "--delta-sigma", "1", "--delta-g", "1.4649735207179269"]
    # the spine constant at n = 1 is |B_Σ(o, 2)| / 1 = 9
    assert run(base) == 1
    assert run([*base, "--threshold", "9"]) == 0


def test_checks_pass_on_vicsek(vicsek_file, capsys):
    f = str(vicsek_file)
    assert run(["check", "lemma2", f]) == 0
    assert run(["check", "roundtrip", f]) == 0
    assert run(["check", "lemma4", f, "--seq", "geometric:base=3,count=3", "--p", "2"]) == 0
    assert run(["analyze", "vlb", f, "--D", "1.4649735207179269", "--rmax", "9", "--samples", "20"]) == 0


def test_check_equivalence(tmp_path, capsys):
    path = tmp_path / "r.json"
    assert run(["generate", "random", "--seed", "1", "--length", "3", "--max-fiber-size", "3", "--out", str(path)]) == 0
    assert run(["check", "equivalence", str(path)]) == 0
    assert json.loads(capsys.readouterr().out)["agree"] is True


def test_glue_from_files(tmp_path, capsys):
    skel = tmp_path / "skel.json"
    fiber = tmp_path / "fiber.json"
    skel.write_text(dumps_graph(path_graph(4)))
    fiber.write_text(dumps_graph(path_graph(3)))
    out = tmp_path / "glued.json"
    assert run(["generate", "glue", "--skeleton", str(skel), "--fiber", str(fiber), "--z", "1", "--out", str(out)]) == 0
    sg = loads_spinal(out.read_text())
    assert sg.vertex_count == 12 and len(sg.spine) == 4


def test_walk_boundary_is_usage_error(tmp_path, vicsek_file):
    assert run(["walk", str(vicsek_file), "--tmax", "200"]) == 2


def test_console_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "spinal_lab.cli", "pc", "--delta-sigma", "1.5", "--delta-g", "3", "--nu", "3"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert float(proc.stdout) == pytest.approx(3.0)
    assert json.loads(proc.stderr)["command"] == "pc"


def test_parser_has_all_families():
    text = _parser().format_help()
    for name in ("generate", "validate", "analyze", "check", "pc", "walk", "export"):
        assert name in text
