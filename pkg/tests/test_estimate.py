import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from causalfuse import library, scmsim
from causalfuse.estimate import (
    ContingencyTable,
    Dataset,
    EstimationError,
    TableOracle,
    covers,
    fit,
    match_atom,
    plug_in,
)
from causalfuse.symexpr import DistTerm, MissingInputError, evaluate

RCT = DistTerm(("Y", "Z1", "Z2", "Z3"), ("X",), ("T", "S"))
SURVEY = DistTerm(("Z1", "Z2", "Z3", "X"))


def test_fit_proportions():
    ds = Dataset(("X",), (2,), np.array([[0], [0], [1], [1]]), DistTerm(("X",)))
    t = fit(ds)
    assert t.prob({"X": 1}) == 0.5
    one = fit(Dataset(("X", "Y"), (2, 2), np.array([[1, 0]]), DistTerm(("X", "Y"))))
    assert one.counts.sum() == 1 and one.prob({"X": 1, "Y": 0}) == 1.0


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(("X",), (2,), np.array([[2]]), DistTerm(("X",)))
    with pytest.raises(ValueError):
        Dataset(("X",), (2,), np.zeros((0, 1)), DistTerm(("X",)))


def test_probabilities_normalize_per_stratum():
    rng = np.random.default_rng(0)
    rows = rng.integers(0, 2, size=(500, 3))
    t = fit(Dataset(("Y", "X", "W"), (2, 2, 2), rows, DistTerm(("Y",), ("X",), ("W",))))
    p = t.probabilities()
    assert np.allclose(p.sum(axis=0), 1.0, atol=1e-12)


def test_csv_round_trip(tmp_path):
    ds = Dataset(("A", "B"), (2, 3), np.array([[0, 2], [1, 1]]), DistTerm(("A", "B")))
    ds.to_csv(tmp_path / "d.csv")
    back = Dataset.from_csv(tmp_path / "d.csv", ds.term, {"B": 3})
    assert back.variables == ds.variables and (back.rows == ds.rows).all() and back.cardinalities == (2, 3)


def test_match_atom_routes():
    assert match_atom(DistTerm(("Z3",), (), ("Z1", "X", "Z2")), [RCT, SURVEY]) == SURVEY
    assert match_atom(DistTerm(("Y",), ("X",), ("Z1", "Z3", "Z2", "T", "S")), [RCT, SURVEY]) == RCT
    with pytest.raises(MissingInputError):
        match_atom(DistTerm(("Y",)), [DistTerm(("X",), (), ("S",))])
    with pytest.warns(UserWarning):
        match_atom(DistTerm(("A",)), [DistTerm(("A", "B")), DistTerm(("A", "C"))])
    assert not covers(RCT, DistTerm(("Y",), (), ("X",)))


def _tables(n_rct, n_survey, seed):
    scm = scmsim.gene_therapy_scm()
    rng = scmsim.rng_for(seed)
    rct = scmsim.rct_sample(scm, n_rct, rng)
    survey = scmsim.survey_sample(scm, n_survey, rng)
    return {rct.term: fit(rct), survey.term: fit(survey)}, rct, survey


def test_plug_in_on_sample_is_close_to_truth():
    tables, _, _ = _tables(20000, 20000, 1)
    est = plug_in(library.formula("gene_therapy"), tables, {"Z2": 1}, {"Y": 1, "X": 1}, ("T", "S"))
    assert est.value == pytest.approx(0.7107, abs=0.02)
    assert est.assignment["T"] == 1 and est.assignment["S"] == 1


def test_plug_in_sums_to_one_over_outcome():
    tables, _, _ = _tables(2000, 2000, 2)
    e = library.formula("gene_therapy")
    tot = sum(plug_in(e, tables, {"Z2": 1}, {"Y": y, "X": 1}, ("T", "S")).value for y in (0, 1))
    assert tot == pytest.approx(1.0, abs=1e-12)


@given(st.integers(0, 2**31))
def test_plug_in_row_order_invariant(seed):
    _, rct, survey = _tables(300, 300, 3)
    perm = np.random.default_rng(seed).permutation(len(rct))
    shuffled = Dataset(rct.variables, rct.cardinalities, rct.rows[perm], rct.term)
    e = library.formula("gene_therapy")
    a = plug_in(e, {rct.term: fit(rct), survey.term: fit(survey)}, {"Z2": 1}, {"Y": 1, "X": 1}, ("T", "S"), True)
    b = plug_in(e, {rct.term: fit(shuffled), survey.term: fit(survey)}, {"Z2": 1}, {"Y": 1, "X": 1}, ("T", "S"), True)
    assert a.value == b.value


def test_exact_tables_give_exact_answers():
    scm = scmsim.gene_therapy_scm()
    spec = library.problem("gene_therapy")
    tables = {t: scmsim.exact_table(scm, t) for t in spec.inputs}
    for z2 in (0, 1):
        est = plug_in(library.formula("gene_therapy"), tables, {"Z2": z2}, {"Y": 1, "X": 1}, ("T", "S"))
        truth = scmsim.oracle(scm, {"X": 1}).prob({"Y": 1})
        assert est.value == pytest.approx(truth, abs=1e-9)


def test_empty_stratum_raises_with_stratum():
    counts = np.zeros((2, 2))
    counts[1, 0] = 5  # only Y=1, X=0 observed
    t = ContingencyTable(("Y", "X"), (2, 2), counts, ("X",))
    term = DistTerm(("Y",), (), ("X",))
    from causalfuse.symexpr import Atom

    with pytest.raises(EstimationError) as exc:
        plug_in(Atom(term), {DistTerm(("Y", "X")): t}, {}, {"Y": 1, "X": 1})
    assert exc.value.stratum == {"Y": 1, "X": 1}
    est = plug_in(Atom(term), {DistTerm(("Y", "X")): t}, {}, {"Y": 1, "X": 1}, allow_degenerate=True)
    assert est.value == 0.0 and est.degenerate


def test_missing_trapdoor_value():
    tables, _, _ = _tables(100, 100, 4)
    with pytest.raises(ValueError):
        plug_in(library.formula("gene_therapy"), tables, {}, {"Y": 1, "X": 1}, ("T", "S"))


def test_unknown_atom():
    tables, _, _ = _tables(100, 100, 4)
    from causalfuse.symexpr import Atom

    with pytest.raises(MissingInputError):
        plug_in(Atom(DistTerm(("Y",), (), ("X",))), tables, {}, {"Y": 1, "X": 1})


def test_table_oracle_checks_columns():
    t = ContingencyTable(("A",), (2,), np.ones(2))
    with pytest.raises(ValueError):
        TableOracle({DistTerm(("A", "B")): t})
