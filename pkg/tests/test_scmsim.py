import numpy as np
import pytest

from causalfuse import library, scmsim
from causalfuse.admg import Admg
from causalfuse.estimate import EstimationError
from causalfuse.scmsim import (
    DiscreteScm,
    GenerationError,
    RctDesign,
    Scm,
    SimScenario,
    Threshold,
    exact_joint,
    gene_therapy_scm,
    mc_joint,
    oracle,
    rct_sample,
    run_scenario,
    sample,
)

SCM = gene_therapy_scm()


def test_constants_by_quadrature():
    assert oracle(SCM, {"X": 1}).prob({"Y": 1}) == pytest.approx(0.711, abs=0.002)
    assert oracle(SCM, {"X": 1}).prob({"Z2": 1}) == pytest.approx(0.841, abs=0.005)
    assert oracle(SCM).prob({"Z2": 1}) == pytest.approx(0.715, abs=0.005)


def test_quadrature_agrees_with_monte_carlo():
    exact = exact_joint(SCM, {"X": 1})
    mc = mc_joint(SCM, {"X": 1}, n=400_000, seed=3)
    assert np.abs(exact.probs - mc.probs).max() < 0.004


def test_quadrature_converged():
    a = exact_joint(SCM, None, "T", nodes=48).probs
    b = exact_joint(SCM, None, "T", nodes=96).probs
    assert np.abs(a - b).max() < 1e-10


def test_sample_survey_frequency():
    v = sample(SCM, 200_000, 11)
    assert v["Z2"].mean() == pytest.approx(0.715, abs=0.005)


def test_intervention_is_constant():
    v = sample(SCM, 1000, 1, intervention={"X": 1})
    assert (v["X"] == 1).all()
    full = sample(SCM, 50, 1, intervention={n: 0 for n in SCM.names})
    assert all((full[n] == 0).all() for n in SCM.names)


def test_intervention_changes_outcome():
    assert oracle(SCM, {"X": 0}).prob({"Y": 1}) < oracle(SCM, {"X": 1}).prob({"Y": 1})


def test_rct_rows_are_selected_and_sized():
    ds = rct_sample(SCM, 100, 5)
    assert len(ds) == 100
    assert ds.term == library.problem("gene_therapy").inputs[0]


def test_selection_upweights_z3():
    kept = rct_sample(SCM, 200_000, 6)
    plain = sample(SCM, 200_000, 7, domain="T", randomize={"X": 1.0})
    assert kept.column("Z3").mean() > plain["Z3"].mean() + 0.02


def test_no_selection_variant_matches_plain_experiment():
    always = Scm(SCM.exogenous, tuple((n, Threshold(None, 1.0) if n == "S" else r) for n, r in SCM.endogenous), SCM.domains)
    a = rct_sample(always, 500, 9, RctDesign(count_after_selection=True))
    assert len(a) == 500


def test_impossible_selection():
    never = Scm(SCM.exogenous, tuple((n, Threshold(None, -1.0) if n == "S" else r) for n, r in SCM.endogenous), SCM.domains)
    with pytest.raises(GenerationError):
        rct_sample(never, 10, 1)


def test_deterministic_model_is_point_mass():
    m = Scm(("U",), (("A", Threshold(None, 1.0)), ("B", Threshold(None, -1.0, {"A": 0.5}))))
    j = exact_joint(m)
    assert j.prob({"A": 1, "B": 0}) == 1.0


def test_model_validation():
    with pytest.raises(ValueError):
        Scm(("U",), (("A", Threshold("U", 0.0, {"B": 1.0})),))
    with pytest.raises(ValueError):
        Scm(("U",), (("A", Threshold("U")),), {"T": {"Q": Threshold("U")}})
    with pytest.raises(ValueError):
        sample(SCM, 0, 1)


def test_discrete_joint_and_truncation():
    g = Admg(["X", "Y"], [("X", "Y")], [("X", "Y")])
    m = DiscreteScm.random(g, np.random.default_rng(0))
    assert m.joint().probs.sum() == pytest.approx(1.0)
    assert m.joint({"X": 1}).prob({"X": 1}) == pytest.approx(1.0)
    assert m.joint({"X": 1}).prob({"Y": 1}) != pytest.approx(m.joint().prob({"Y": 1}, {"X": 1}))


def test_exact_table_matches_joint():
    t = scmsim.exact_table(SCM, library.problem("gene_therapy").inputs[1])
    assert t.prob({"Z2": 1}) == pytest.approx(oracle(SCM).prob({"Z2": 1}), abs=1e-12)


def test_harness_reproducible_across_workers():
    expr = library.formula("gene_therapy")
    sc = SimScenario(100, 50, 24, 0, seed=4)
    one = run_scenario(SCM, sc, expr, 0.71, policy="skip", workers=1)
    two = run_scenario(SCM, sc, expr, 0.71, policy="skip", workers=2)
    assert one == two
    assert one.rmse >= abs(one.bias)


def test_harness_policies():
    expr = library.formula("gene_therapy")
    sc = SimScenario(100, 50, 40, 0, seed=2)
    with pytest.raises(EstimationError):
        run_scenario(SCM, sc, expr, 0.71, policy="error")
    skip = run_scenario(SCM, sc, expr, 0.71, policy="skip")
    zero = run_scenario(SCM, sc, expr, 0.71, policy="zero")
    assert skip.dropped_replications == zero.degenerate_replications > 0
    assert len(zero.estimates) == 40


def test_exact_inputs_have_zero_error():
    truth = oracle(SCM, {"X": 1}).prob({"Y": 1})
    spec = library.problem("gene_therapy")
    from causalfuse.estimate import plug_in

    tables = {t: scmsim.exact_table(SCM, t) for t in spec.inputs}
    est = plug_in(library.formula("gene_therapy"), tables, {"Z2": 1}, {"Y": 1, "X": 1}, ("T", "S"))
    assert abs(est.value - truth) < 1e-12


def test_sweep_file(tmp_path):
    path = tmp_path / "s.ini"
    path.write_text("[sweep]\nrct = 100, 200\nsurvey = 50\nreplications = 3\ndegenerate = skip\n[rct]\np_treat = 0.5\n")
    cfg = scmsim.load_sweep(path)
    assert cfg.rct_sizes == (100, 200) and cfg.design.p_treat == 0.5
    assert len(cfg.scenarios()) == 4
    path.write_text("[sweep]\nrct = 1\nsurvey = 1\ndegenerate = maybe\n")
    with pytest.raises(ValueError):
        scmsim.load_sweep(path)


def test_scenario_validation():
    with pytest.raises(ValueError):
        SimScenario(0, 10, 10, 1)
