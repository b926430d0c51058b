import io
import json

import numpy as np
import pytest

from causalfuse import cli, library, scmsim
from causalfuse.symexpr import equivalent_canonical, parse_latex

TWO_ARM_LATEX = r"\sum_{Z2,Z4}\left(p(Z4|Z3)\left(p(Z2|Z1)p(Y|do(X1,X2),Z1,Z2,Z3,Z4,S)\right)\right)"


def run(*argv):
    out = io.StringIO()
    code = cli.main(list(argv), out)
    return code, out.getvalue()


def test_identify_two_arm_problem_file():
    code, text = run("identify", "problems/two_arm.txt", "--style", "latex")
    assert code == 0
    assert equivalent_canonical(parse_latex(text.strip()), parse_latex(TWO_ARM_LATEX))


def test_identify_styles_and_trace(tmp_path):
    code, text = run("identify", "two_arm", "--style", "json", "--trace", str(tmp_path / "t.json"))
    assert code == 0 and json.loads(text)["type"] == "sum"
    trace = json.loads((tmp_path / "t.json").read_text())
    assert trace["steps"]
    code, text = run("identify", "basic_trapdoor", "--style", "text")
    assert code == 0 and "P(" in text


def test_unknown_within_budget(tmp_path):
    p = tmp_path / "bow.txt"
    p.write_text("graph:\n X -> Y\n X <-> Y\ndata:\n P(X,Y)\nquery:\n P(Y|do(X))\n")
    code, text = run("identify", str(p))
    assert code == cli.EXIT_UNKNOWN and text == ""
    code, _ = run("identify", "two_arm_observational", "--budget-exprs", "10")
    assert code == cli.EXIT_UNKNOWN


def test_parse_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("graph:\n X => Y\ndata:\n P(X,Y)\nquery:\n P(Y|do(X))\n")
    assert run("identify", str(p))[0] == cli.EXIT_PARSE
    assert run("identify", "no_such_problem")[0] == cli.EXIT_PARSE
    assert run("bogus")[0] == cli.EXIT_PARSE


def test_trapdoors_command():
    code, text = run("trapdoors", "gene_therapy")
    assert code == 0 and json.loads(text)["confirmed"] == ["Z2"]


def test_trapdoors_with_given_formula():
    code, text = run("trapdoors", "two_arm", "--formula", TWO_ARM_LATEX)
    assert code == 0 and json.loads(text)["confirmed"] == ["Z1", "Z3"]


def _write_data(tmp_path, n_rct, n_survey, seed=0):
    scm = scmsim.gene_therapy_scm()
    rng = scmsim.rng_for(seed)
    rct = scmsim.rct_sample(scm, n_rct, rng)
    survey = scmsim.survey_sample(scm, n_survey, rng)
    rct.to_csv(tmp_path / "rct.csv")
    survey.to_csv(tmp_path / "survey.csv")
    return str(tmp_path / "rct.csv"), str(tmp_path / "survey.csv")


def test_estimate_command(tmp_path):
    rct, survey = _write_data(tmp_path, 5000, 5000)
    code, text = run("estimate", "gene_therapy", "--data", rct, "--data", survey, "--trapdoor", "Z2=1",
                     "--formula", library.FORMULAS["gene_therapy"])
    assert code == 0
    assert json.loads(text)["estimate"] == pytest.approx(0.711, abs=0.03)


def test_estimate_empty_stratum(tmp_path):
    rct, survey = _write_data(tmp_path, 3, 3)
    code, _ = run("estimate", "gene_therapy", "--data", rct, "--data", survey, "--trapdoor", "Z2=0",
                  "--formula", library.FORMULAS["gene_therapy"])
    assert code == cli.EXIT_ESTIMATION


def test_estimate_argument_errors(tmp_path):
    rct, _ = _write_data(tmp_path, 10, 10)
    assert run("estimate", "gene_therapy", "--data", rct)[0] == cli.EXIT_PARSE
    assert run("estimate", "gene_therapy", "--data", rct, "--data", rct, "--trapdoor", "Z2")[0] == cli.EXIT_PARSE


def test_simulate_csv(tmp_path):
    cfg = tmp_path / "s.ini"
    cfg.write_text("[sweep]\nrct = 1000\nsurvey = 10000\nreplications = 4\ndegenerate = skip\n")
    code, text = run("simulate", "--scenarios", str(cfg))
    assert code == 0
    header = text.splitlines()[0].split(",")
    assert header[:6] == ["RCT", "Survey", "bias Z2=1", "bias Z2=0", "rmse Z2=1", "rmse Z2=0"]
    assert len(text.splitlines()) == 2


def test_simulate_error_policy(tmp_path):
    cfg = tmp_path / "s.ini"
    cfg.write_text("[sweep]\nrct = 100\nsurvey = 50\nreplications = 40\ndegenerate = error\n")
    assert run("simulate", "--scenarios", str(cfg))[0] == cli.EXIT_ESTIMATION
    assert run("simulate", "--scenarios", str(cfg), "--skip-degenerate")[0] == 0
