"""Configuration parsing and the command line runner."""

import csv
import io
import subprocess
import sys

import pytest

from bdp.cli import main
from bdp.config import parse_config, parse_config_text, parse_fn_spec
from bdp.errors import ParseError, ValidationError
from bdp.pathsim import CadlagPath
from bdp.scale import classify_boundary


def test_minimal_plan():
    plan = parse_config_text("command = classify\nrates.family = linear\ntriple.gamma = 1\n")
    assert plan.command == "classify" and plan.triple.gamma == 1.0
    assert plan.triple.nu_mass == 0.0


def test_sections_equal_dotted_keys():
    a = parse_config_text("[rates]\nfamily = geometric_regular\nratio = 4\n")
    b = parse_config_text("rates.family = geometric_regular\nrates.ratio = 4\n")
    assert a.values == b.values
    c = parse_config_text("[rates]\nfamily = geometric_regular\nparams = ratio=4\n")
    assert c.rates.b(3) == b.rates.b(3)


def test_nested_measure_sections():
    plan = parse_config_text("rates.family = geometric_regular\n[triple]\nbeta = 1\n[triple.nu]\n"
                             "family = geometric\nparams = C=1, rho=0.5  # inline comment\n")
    assert plan.triple.nu_mass == pytest.approx(2.0)


def test_validation_errors():
    with pytest.raises(ValidationError) as ei:
        parse_config_text("rates.family = linear\ntriple.nu.family = geometric\ntriple.nu.rho = 1.0\n")
    assert "rho" in ei.value.key
    with pytest.raises(ValidationError) as ei:
        parse_config_text("rates.famly = linear\n")
    assert "rates.family" in str(ei.value)
    with pytest.raises(ValidationError):
        parse_config_text("rates.family = linear\nmc.count = many\n")
    with pytest.raises(ValidationError):
        parse_config_text("rates.ratio = 4\n")


def test_parse_errors():
    with pytest.raises(ParseError) as ei:
        parse_config_text("rates.family = linear\nthis line is broken\n")
    assert ei.value.line == 2
    with pytest.raises(ParseError):
        parse_config_text("rates.family = linear\nrates.family = linear\n")


def test_digest_ignores_layout():
    a = parse_config_text("rates.family = linear\n\n# note\nclassify.tol = 1e-8\n")
    b = parse_config_text("[classify]\ntol = 1e-8\n[rates]\nfamily = linear\n")
    assert a.digest == b.digest


def test_fn_spec():
    f = parse_fn_spec("indicator:0,2,inf")
    assert f(0) == 1.0 and f(1) == 0.0 and f.at_inf == 1.0
    assert parse_fn_spec("const:2").at_cem == 2.0
    with pytest.raises(ValueError):
        parse_fn_spec("sin:1")


# -- CLI ----------------------------------------------------------------------------

def write(tmp_path, text, name="exp.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_cli_classify(tmp_path, capsys):
    cfg = write(tmp_path, "rates.family = geometric_regular\nrates.ratio = 4\n")
    out = tmp_path / "out"
    assert main(["classify", "--config", cfg, "--out", str(out)]) == 0
    assert capsys.readouterr().out.strip() == "Regular"
    (f,) = out.iterdir()
    rows = {r[0]: r for r in read_csv(f)[1:]}
    bc = classify_boundary(parse_config(cfg).rates)
    assert float(rows["R"][1]) == bc.R_value and float(rows["S"][1]) == bc.S_value


def test_cli_resolvent_and_approx(tmp_path, capsys):
    cfg = write(tmp_path, "rates.family = geometric_regular\nrates.ratio = 4\ntriple.beta = 1\n"
                          "resolvent.alpha = 1, 2\nresolvent.f = indicator:0\nresolvent.states = 4\n"
                          "approx.scheme = truncation\napprox.n_grid = 2, 4\n")
    out = tmp_path / "out"
    assert main(["resolvent", "--config", cfg, "--out", str(out)]) == 0
    assert main(["approx", "--config", cfg, "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert any(n.startswith("resolvent-") for n in names) and any(n.startswith("approx-") for n in names)


def test_cli_simulate_then_distance(tmp_path):
    cfg = write(tmp_path, "rates.family = geometric_regular\nrates.ratio = 4\nsim.horizon = 3\n"
                          "simulate.process = minimal\nsimulate.count = 2\n")
    out = tmp_path / "sims"
    assert main(["simulate", "--config", cfg, "--out", str(out), "--seed", "5"]) == 0
    files = sorted(out.iterdir())
    assert len(files) == 2
    CadlagPath.load(files[0])
    dcfg = write(tmp_path, f"rates.family = geometric_regular\ndistance.path1 = sims/{files[0].name}\n"
                           f"distance.path2 = sims/{files[0].name}\n", "dist.ini")
    assert main(["distance", "--config", dcfg, "--out", str(tmp_path / "d")]) == 0
    (f,) = (tmp_path / "d").iterdir()
    rows = read_csv(f)
    assert rows[1][:2] == ["dprime", "0.0"]


def test_cli_mc_constant_scheme_passes(tmp_path, capsys):
    cfg = write(tmp_path, "rates.family = geometric_regular\nrates.ratio = 4\n[triple.nu]\nfamily = geometric\n"
                          "C = 1\nrho = 0.5\n[mc]\nexperiment = fdd\nscheme = constant\nn_grid = 2, 4\n"
                          "count = 400\ntimes = 0.5\ntest_fns = indicator:0\nseed = 3\n")
    assert main(["mc", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    assert capsys.readouterr().out.startswith("verdict: Pass")


def test_cli_errors(tmp_path, capsys):
    assert main(["classify", "--config", str(tmp_path / "missing.ini")]) == 1
    assert "ValidationError" in capsys.readouterr().err
    cfg = write(tmp_path, "command = mc\nrates.family = linear\n")
    assert main(["classify", "--config", cfg, "--out", str(tmp_path)]) == 1
    cfg = write(tmp_path, "rates.family = linear\ntriple.gamma = 0\n[triple.nu]\nfamily = geometric\nrho = 0.5\n"
                          "mc.count = 10\n", "nat.ini")
    assert main(["mc", "--config", cfg, "--out", str(tmp_path)]) == 1


def test_console_script(tmp_path):
    cfg = write(tmp_path, "rates.family = geometric_exit\nrates.ratio = 2\n")
    res = subprocess.run([sys.executable, "-m", "bdp.cli", "classify", "--config", cfg, "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "Exit"
