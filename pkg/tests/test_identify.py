import dataclasses
import itertools

import numpy as np
import pytest

from causalfuse import identify, library, scmsim
from causalfuse.admg import Admg
from causalfuse.identify import (
    DOCALC2,
    EXHAUSTED,
    FOUND,
    UNKNOWN,
    Derivation,
    DerivationError,
    SearchBudget,
    derive,
    search,
    verify,
)
from causalfuse.symexpr import Atom, DistTerm, evaluate, free_vars, is_adjustment
from conftest import random_admg


def test_backdoor_adjustment():
    g = Admg(["Z", "X", "Y"], [("Z", "X"), ("Z", "Y"), ("X", "Y")])
    d = derive(g, [DistTerm(("Z", "X", "Y"))], DistTerm(("Y",), ("X",)))
    assert d is not None and verify(g, d)
    assert is_adjustment(d.result, DistTerm(("Y",), ("X",))) == {"Z"}


def test_bow_is_not_identifiable():
    g = Admg(["X", "Y"], [("X", "Y")], [("X", "Y")])
    res = search(g, [DistTerm(("X", "Y"))], DistTerm(("Y",), ("X",)))
    assert res.status == EXHAUSTED and res.derivation is None


def test_budget_exhaustion_reports_unknown():
    spec = library.problem("two_arm_observational")
    res = search(spec.graph, spec.inputs, spec.query, SearchBudget(max_expressions=50))
    assert res.status == UNKNOWN


def test_query_among_inputs():
    g = Admg(["X", "Y"], [("X", "Y")])
    q = DistTerm(("Y",), ("X",))
    d = derive(g, [q], q)
    assert d.steps == () and d.result == Atom(q) and verify(g, d)


def test_budget_validation():
    with pytest.raises(ValueError):
        SearchBudget(max_expressions=0)


@pytest.mark.parametrize("name", list(library.PROBLEMS))
def test_bundled_problems(name):
    spec = library.problem(name)
    res = search(spec.graph, spec.inputs, spec.query, SearchBudget(time_limit=60))
    assert res.found and verify(spec.graph, res.derivation)
    back = Derivation.from_json(res.derivation.dumps())
    assert back == res.derivation and verify(spec.graph, back)


def test_heuristic_mode_also_finds():
    spec = library.problem("two_arm")
    res = search(spec.graph, spec.inputs, spec.query, heuristic=True)
    assert res.found and verify(spec.graph, res.derivation)
    scm = scmsim.DiscreteScm.random(spec.graph, np.random.default_rng(5))
    oracle = scmsim.exact_oracle(scm, spec.inputs)
    for vals in itertools.product((0, 1), repeat=5):
        a = dict(zip(["Y", "X1", "X2", "Z1", "Z3"], vals), S=1)
        assert evaluate(res.derivation.result, oracle, a) == pytest.approx(
            evaluate(library.formula("two_arm"), oracle, a), abs=1e-12
        )


def test_expand_contains_docalc_consequences():
    g = Admg(["X", "Y"], [("X", "Y")])
    known = identify.expand(g, [DistTerm(("X", "Y"))])
    assert DistTerm(("Y",), (), ("X",)) in known
    assert DistTerm(("X",)) in known


# -- tampering ----------------------------------------------------------------


@pytest.fixture(scope="module")
def two_arm_derivation():
    spec = library.problem("two_arm")
    return spec.graph, derive(spec.graph, spec.inputs, spec.query)


def _replace_step(d, i, **changes):
    steps = list(d.steps)
    steps[i] = dataclasses.replace(steps[i], **changes)
    return dataclasses.replace(d, steps=tuple(steps))


def test_tampered_side_condition(two_arm_derivation):
    g, d = two_arm_derivation
    i = next(k for k, s in enumerate(d.steps) if s.side_condition is not None)
    sc = d.steps[i].side_condition
    bad = dataclasses.replace(sc, c=frozenset(sc.c) ^ {"Z1"})
    assert not verify(g, _replace_step(d, i, side_condition=bad))


def test_tampered_rule_name(two_arm_derivation):
    g, d = two_arm_derivation
    i = next(k for k, s in enumerate(d.steps) if s.side_condition is not None)
    other = DOCALC2 if d.steps[i].rule != DOCALC2 else identify.DOCALC1
    assert not verify(g, _replace_step(d, i, rule=other))


def test_tampered_conclusion(two_arm_derivation):
    g, d = two_arm_derivation
    assert not verify(g, _replace_step(d, 0, conclusion=Atom(DistTerm(("Y",)))))


def test_tampered_term(two_arm_derivation):
    g, d = two_arm_derivation
    assert not verify(g, _replace_step(d, 0, term=DistTerm(("Y",), (), ("Z1",))))


def test_tampered_premise_index(two_arm_derivation):
    g, d = two_arm_derivation
    with pytest.raises(DerivationError):
        verify(g, _replace_step(d, 0, premises=(999,)))


def test_wrong_graph_rejected(two_arm_derivation):
    g, d = two_arm_derivation
    denser = Admg(g.vertices, g.directed | {("X1", "X2")}, g.bidirected | {frozenset({"X1", "Y"})}, g.kinds)
    assert not verify(denser, d)


def test_truncated_derivation_rejected(two_arm_derivation):
    g, d = two_arm_derivation
    assert not verify(g, dataclasses.replace(d, steps=d.steps[:-1]))


# -- soundness on random models ---------------------------------------------------


def _random_problem(rng):
    n = int(rng.integers(3, 7))
    g = random_admg(rng, n, p_dir=0.45, p_bi=0.15)
    order = g.topological_order()
    i, j = sorted(rng.choice(n, size=2, replace=False))
    x, y = order[i], order[j]
    inputs = [DistTerm(g.vertices)]
    if rng.random() < 0.3:
        rest = [v for v in g.vertices if v != x]
        inputs.append(DistTerm(rest[: max(1, len(rest) // 2)], (x,)))
    return g, inputs, DistTerm((y,), (x,))


def _exact_input_oracle(scm, inputs):
    return scmsim.exact_oracle(scm, inputs)


def test_derivations_are_sound_on_random_models():
    rng = np.random.default_rng(31337)
    checked = 0
    attempts = 0
    worst = 0.0
    while checked < 100:
        attempts += 1
        assert attempts < 2000
        g, inputs, q = _random_problem(rng)
        res = search(g, inputs, q, SearchBudget(time_limit=20))
        if not res.found:
            continue
        d = res.derivation
        assert verify(g, d)
        scm = scmsim.DiscreteScm.random(g, rng)
        oracle = _exact_input_oracle(scm, inputs)
        extra = sorted(free_vars(d.result) - q.variables)
        for vals in itertools.product((0, 1), repeat=len(q.variables) + len(extra)):
            a = dict(zip(sorted(q.variables) + extra, vals))
            truth = scmsim.interventional(scm, q, a)
            worst = max(worst, abs(evaluate(d.result, oracle, a) - truth))
        checked += 1
    assert worst <= 1e-9
