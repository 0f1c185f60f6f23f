"""Command-line surface: delegation, end-to-end runs, determinism."""

import csv
from pathlib import Path

import pytest
import yaml

from gesdispatch.cantelli import ShapeClass, cantelli_bound
from gesdispatch.cli import main

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"
SMOKE = str(FIXTURES / "smoke3")
TCL100 = str(FIXTURES / "synthetic_100tcl")


def read_tree(root: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(root.iterdir()) if p.is_file()}


def test_bounds_table_matches_catalog(tmp_path, capsys):
    out = tmp_path / "bounds.csv"
    assert main(["bounds", "--gammas", "0.05,0.25,0.45", "--nu", "5", "--out", str(out)]) == 0
    capsys.readouterr()
    rows = list(csv.reader(out.read_text().splitlines()))
    gammas = [float(g) for g in rows[0][1:]]
    shapes = {
        "no_assumption": ShapeClass("no_assumption"),
        "symmetric": ShapeClass("symmetric"),
        "unimodal": ShapeClass("unimodal"),
        "symmetric_unimodal": ShapeClass("symmetric_unimodal"),
        "student_t(5)": ShapeClass("student_t", nu=5.0),
        "normal": ShapeClass("normal"),
    }
    assert len(rows) == 7
    for row in rows[1:]:
        shape = shapes[row[0]]
        for g, val in zip(gammas, row[1:]):
            assert float(val) == pytest.approx(cantelli_bound(shape, g), abs=1e-12)


def test_solve_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "m2"
    assert main(["solve", "--scenario", SMOKE, "--mode", "M2", "--out", str(out)]) == 0
    capsys.readouterr()
    for name in ("strategy_units.csv", "strategy_system.csv", "summary.yaml", "manifest.yaml"):
        assert (out / name).exists()
    summary = yaml.safe_load((out / "summary.yaml").read_text())
    assert summary["mode"] == "M2"
    assert float(summary["objective"]) > 0  # serialized at full precision as text


def test_solve_then_evaluate_end_to_end(tmp_path, capsys):
    strat = tmp_path / "strategy"
    rep = tmp_path / "report"
    assert main(["solve", "--scenario", TCL100, "--mode", "M3", "--reform", "R1",
                 "--shape", "na", "--out", str(strat)]) == 0
    assert main(["evaluate", "--scenario", TCL100, "--strategy", str(strat),
                 "--draws", "2000", "--seed", "1", "--out", str(rep)]) == 0
    capsys.readouterr()
    report = yaml.safe_load((rep / "report.yaml").read_text())
    assert float(report["lorp"]) <= float(report["gamma"])
    assert (rep / "erns.csv").exists()
    assert (rep / "violation_freq.csv").exists()


def test_solve_byte_determinism(tmp_path, capsys):
    a = tmp_path / "a"
    b = tmp_path / "b"
    argv = ["solve", "--scenario", SMOKE, "--mode", "M2", "--seed", "3"]
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b)]) == 0
    capsys.readouterr()
    ta, tb = read_tree(a), read_tree(b)
    assert ta.keys() == tb.keys()
    for name in ta:
        assert ta[name] == tb[name], name


def test_evaluate_byte_determinism(tmp_path, capsys):
    strat = tmp_path / "s"
    main(["solve", "--scenario", SMOKE, "--mode", "M2", "--out", str(strat)])
    outs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        assert main(["evaluate", "--scenario", SMOKE, "--strategy", str(strat),
                     "--draws", "500", "--seed", "7", "--out", str(out)]) == 0
        outs.append(read_tree(out))
    capsys.readouterr()
    assert outs[0] == outs[1]


def test_validation_error_exit_code(tmp_path, capsys):
    import shutil

    dst = tmp_path / "broken"
    shutil.copytree(FIXTURES / "smoke3", dst)
    lines = (dst / "units.csv").read_text().splitlines()
    header = lines[0].split(",")
    row = lines[1].split(",")
    row[header.index("price_c")] = "0.9"
    lines[1] = ",".join(row)
    (dst / "units.csv").write_text("\n".join(lines) + "\n")
    code = main(["solve", "--scenario", str(dst), "--mode", "M2", "--out", str(tmp_path / "x")])
    err = capsys.readouterr().err
    assert code == 2
    assert "price_c" in err


def test_reserve_sweep_csv(tmp_path, capsys):
    out = tmp_path / "rs"
    assert main(["reserve", "--scenario", SMOKE, "--gammas", "0.05,0.30",
                 "--modes", "S1,S2", "--out", str(out)]) == 0
    capsys.readouterr()
    rows = list(csv.DictReader((out / "reserve.csv").read_text().splitlines()))
    assert len(rows) == 4
    assert {r["mode"] for r in rows} == {"S1", "S2"}


def test_window_flag(tmp_path, capsys):
    out = tmp_path / "win"
    assert main(["solve", "--scenario", SMOKE, "--mode", "M3", "--reform", "R1",
                 "--window", "19-22", "--out", str(out)]) == 0
    capsys.readouterr()
    with open(out / "strategy_units.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            t = int(row["t"])
            if not 19 <= t <= 22:
                assert float(row["p_c"]) == 0.0 and float(row["p_d"]) == 0.0
