import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from causalfuse.symexpr import (
    Atom,
    Diagnostics,
    DistTerm,
    EvaluationError,
    ExprError,
    Product,
    Quotient,
    Sum,
    canonicalize,
    equivalent_canonical,
    evaluate,
    free_vars,
    from_json,
    is_adjustment,
    parse,
    parse_latex,
    render,
    to_json,
    well_formed,
)
from causalfuse.estimate import ContingencyTable, TableOracle

NAMES = ["A", "B", "C", "D", "E"]


def P(out, do=(), cond=()):
    return Atom(DistTerm(out, do, cond))


@st.composite
def terms(draw):
    names = draw(st.permutations(NAMES))
    k = draw(st.integers(1, 3))
    j = draw(st.integers(0, 2))
    m = draw(st.integers(0, 2))
    return DistTerm(names[:k], names[k : k + j], names[k + j : k + j + m])


exprs = st.recursive(
    terms().map(Atom),
    lambda sub: st.one_of(
        st.lists(sub, min_size=2, max_size=3).map(lambda fs: Product(tuple(fs))),
        st.tuples(sub, sub).map(lambda t: Quotient(*t)),
        st.tuples(st.sets(st.sampled_from(NAMES), min_size=1, max_size=2), sub).map(lambda t: Sum(tuple(t[0]), t[1])),
    ),
    max_leaves=6,
)


def test_term_validation():
    with pytest.raises(ExprError):
        DistTerm(())
    with pytest.raises(ExprError):
        DistTerm(("Y",), ("Y",))
    with pytest.raises(ExprError):
        DistTerm("Y")
    assert DistTerm(("B", "A")).outcomes == ("A", "B")


@given(exprs)
def test_latex_round_trip(e):
    assert parse_latex(render(e, "latex")) == e


@given(exprs)
def test_json_round_trip(e):
    assert from_json(json.dumps(to_json(e))) == e
    assert parse(render(e, "json"), "json") == e


@given(exprs)
def test_canonicalize_idempotent_and_equivalent(e):
    c = canonicalize(e)
    assert canonicalize(c) == c
    assert equivalent_canonical(c, e)
    assert free_vars(c) == free_vars(e)


def test_product_order_and_nesting_do_not_matter():
    a, b, c = P(["A"]), P(["B"], cond=["A"]), P(["C"], ["A"])
    assert equivalent_canonical(Product((a, Product((b, c)))), Product((Product((c, a)), b)))
    assert not equivalent_canonical(Product((a, b)), Product((a, c)))


def test_sum_hoisting_respects_capture():
    inner = Sum(("A",), P(["A", "B"]))
    captured = Product((inner, P(["A"])))
    c = canonicalize(captured)
    assert free_vars(c) == {"A", "B"}


def test_free_vars_and_regime():
    e = Sum(("Z",), Product((P(["Y"], ["X"], ["Z", "S"]), P(["Z"]))))
    assert free_vars(e) == {"X", "Y", "S"}
    assert free_vars(e, ["S"]) == {"X", "Y"}
    assert well_formed(e)


def test_render_styles():
    e = Sum(("Z",), Product((P(["Y"], ["X"], ["Z"]), P(["Z"]))))
    assert render(e, "latex") == r"\sum_{Z}\left(p(Y|do(X),Z)p(Z)\right)"
    assert render(e, "text") == "sum_{Z} [P(Y|do(X),Z) * P(Z)]"
    assert render(Quotient(P(["A", "B"]), P(["B"])), "latex") == r"\frac{p(A,B)}{p(B)}"
    with pytest.raises(ValueError):
        render(e, "html")


def test_render_order():
    e = P(["Z2", "Z1"])
    assert render(e, "latex", ["Z2", "Z1"]) == "p(Z2,Z1)"


@pytest.mark.parametrize("bad", ["p(Y", r"\sum_{}\left(p(Y)\right)", "p(Y)p(", "q(Y)", r"\frac{p(Y)}"])
def test_parse_errors(bad):
    with pytest.raises(ExprError):
        parse_latex(bad)


def _joint_oracle(rng, names):
    p = rng.uniform(0.1, 1, size=(2,) * len(names))
    return TableOracle({DistTerm(names): ContingencyTable(names, p.shape, p / p.sum())})


def test_evaluate_sums_and_quotients(rng):
    orc = _joint_oracle(rng, ("A", "B"))
    marg = evaluate(Sum(("B",), P(["A", "B"])), orc, {"A": 1})
    assert marg == pytest.approx(evaluate(P(["A"]), orc, {"A": 1}), abs=1e-12)
    cond = evaluate(Quotient(P(["A", "B"]), P(["B"])), orc, {"A": 1, "B": 0})
    assert cond == pytest.approx(evaluate(P(["A"], cond=["B"]), orc, {"A": 1, "B": 0}), abs=1e-12)
    with pytest.raises(ExprError):
        evaluate(P(["A"]), orc, {})


def test_zero_over_zero_is_flagged():
    counts = np.array([[3.0, 0.0], [2.0, 0.0]])  # B=1 never observed
    orc = TableOracle({DistTerm(("A", "B")): ContingencyTable(("A", "B"), (2, 2), counts)})
    d = Diagnostics()
    assert evaluate(P(["A"], cond=["B"]), orc, {"A": 1, "B": 1}, d) == 0.0
    assert d.flagged
    d2 = Diagnostics()
    masked = Product((P(["B"]), P(["A"], cond=["B"])))
    assert evaluate(masked, orc, {"A": 1, "B": 1}, d2) == 0.0
    assert not d2.flagged
    with pytest.raises(EvaluationError):
        evaluate(Quotient(P(["A"]), P(["B"])), orc, {"A": 1, "B": 1})


def test_adjustment_shape():
    q = DistTerm(("Y",), ("X",))
    adj = Sum(("Z",), Product((P(["Y"], cond=["X", "Z"]), P(["Z"]))))
    assert is_adjustment(adj, q) == {"Z"}
    assert is_adjustment(P(["Y"], cond=["X"]), q) == frozenset()
    front = Sum(("M",), Product((P(["M"], cond=["X"]), P(["Y"], cond=["M"]))))
    assert is_adjustment(front, q) is None
