from __future__ import annotations

import json

import numpy as np
import pytest

from sphericalize.cli import (
    EXIT_CONFIG,
    EXIT_DIVERGING,
    EXIT_NONCONVERGENCE,
    EXIT_OK,
    annulus_capacity,
    main,
    read_field_csv,
)


def run(tmp_path, *args):
    out = tmp_path / "out"
    code = main(list(args) + ["--out", str(out)])
    return code, out


def test_sphericalize_outputs(tmp_path):
    code, out = run(tmp_path, "sphericalize", "--pairs", "0,0:inf;1,0:3,0", "--disc-radius", "2")
    assert code == EXIT_OK
    doc = json.loads((out / "sphericalize.json").read_text())
    assert doc["pairs"][0][2] == 1.0 and doc["pairs"][1][2] == pytest.approx(0.25)
    assert doc["mass_within_bound"] is True
    assert (out / "densities.csv").read_text().startswith("x1,x2,dist_a,mu_a,muhat")


def test_check_weight_exit_codes(tmp_path):
    assert run(tmp_path, "check-weight", "--alpha", "1", "--p", "3")[0] == EXIT_OK
    code, out = run(tmp_path, "check-weight", "--alpha", "2.5", "--p", "2")
    assert code == EXIT_DIVERGING
    assert json.loads((out / "ap_report.json").read_text())["report"]["verdict"] == "diverging"


def test_config_errors(tmp_path, capsys):
    assert main(["check-weight", "--p", "0.5"]) == EXIT_CONFIG
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("error:")
    assert main(["solve", "--example", "nowhere"]) == EXIT_CONFIG
    assert main(["capacity", "--h", "abc"]) == EXIT_CONFIG
    ini = tmp_path / "bad.ini"
    ini.write_text("[run]\nbogus = 1\n")
    assert main(["capacity", "--config", str(ini)]) == EXIT_CONFIG


def test_config_file_and_flag_precedence(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[run]\np = 3\n[capacity]\nh = 1/8\nouter = 4\ninner = 0.5\n")
    code, out = run(tmp_path, "capacity", "--config", str(ini), "--outer", "3")
    assert code == EXIT_OK
    doc = json.loads((out / "capacity.json").read_text())
    assert doc["config"]["p"] == 3.0 and doc["config"]["h"] == 0.125 and doc["config"]["outer"] == 3.0
    assert doc["closed_form"] == pytest.approx(annulus_capacity(2, 3.0, 0.5, 3.0))
    assert abs(doc["relative_error"]) < 0.1


def test_solve_writes_field_and_is_reproducible(tmp_path):
    args = ["solve", "--example", "half-plane", "--center", "0,-1", "--h", "1/16", "--data", "step:0,0,1"]
    code, out = run(tmp_path, *args)
    assert code == EXIT_OK
    first = (out / "report.json").read_bytes(), (out / "field.csv").read_bytes()
    assert run(tmp_path, *args)[0] == EXIT_OK
    assert (out / "report.json").read_bytes() == first[0]
    assert (out / "field.csv").read_bytes() == first[1]
    h, origin, shape, idx, vals = read_field_csv(out / "field.csv")
    assert h == 0.0625 and len(shape) == 2 and idx.shape[1] == 2
    assert vals.min() >= -1e-9 and vals.max() <= 1 + 1e-9


def test_solve_nonconvergence(tmp_path):
    code, out = run(tmp_path, "solve", "--example", "half-plane", "--center", "0,-1", "--h", "1/16", "--p", "4",
                    "--data", "step:0,0,1", "--max-iters", "1")
    assert code == EXIT_NONCONVERGENCE
    assert json.loads((out / "report.json").read_text())["converged"] is False


def test_harmonic_measure(tmp_path):
    code, out = run(tmp_path, "harmonic-measure", "--example", "half-plane", "--center", "0,-0.5", "--h", "1/32",
                    "--set", "box:-1,-1;1,1", "--eval", "0,1")
    assert code == EXIT_OK
    doc = json.loads((out / "harmonic_measure.json").read_text())
    assert doc["values"][0] == pytest.approx(0.5, abs=0.05)
    assert (out / "values.csv").exists()


def test_check_regularity_and_invert(tmp_path):
    code, out = run(tmp_path, "check-regularity", "--example", "half-plane", "--p", "1.5")
    assert code == EXIT_OK
    assert json.loads((out / "regularity.json").read_text())["verdict"] == "regular (p<Q)"
    code, out = run(tmp_path, "invert", "--example", "shifted-half-space", "--n", "3")
    assert code == EXIT_OK
    text = (out / "image.dom").read_text()
    assert text.split()[:1] == ["ball"] and np.allclose([float(v) for v in text.split()[1:]], [0, 0, 1, 1])


def test_domain_file(tmp_path):
    f = tmp_path / "d.dom"
    f.write_text("halfspace 0 1 0\n")
    code, out = run(tmp_path, "check-regularity", "--domain", str(f), "--p", "1.5")
    assert code == EXIT_OK
