"""Trapdoor variables of an identifying functional.

A trapdoor variable is free in the functional (so estimation must fix it),
the functional's value does not depend on the value chosen, and yet the
query stops being identifiable once the variable is projected out of the
graph. The last clause is checked by bounded search, so "confirmed" means
"not re-derivable within the recorded budget".
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .admg import Admg, latent_project
from .identify import FOUND, SearchBudget, search
from .symexpr import Diagnostics, DistTerm, EvaluationError, Expr, evaluate, free_vars

FOUND_IN_PROJECTION = "found"
NOT_FOUND = "unknown"


def candidates(e: Expr, query: DistTerm, regime: Iterable[str] = ()) -> frozenset[str]:
    """Free variables the user has to fix: everything free outside the query's outcomes and interventions."""
    return free_vars(e, regime) - set(query.outcomes) - set(query.interventions)


@dataclass(frozen=True)
class IndependenceCheck:
    variable: str
    independent: bool
    max_deviation: float


def check_functional_independence(
    e: Expr,
    v: str,
    oracle,
    query: DistTerm,
    tol: float = 1e-9,
    regime: Iterable[str] = (),
    fixed: Iterable[str] = (),
) -> IndependenceCheck:
    """Max spread of ``e`` over the values of ``v``, at every assignment of the other free variables.

    ``fixed`` lists further free variables that must be held constant while
    ``v`` varies (other trapdoor candidates). Regime indicators are set to 1.
    """
    regime = set(regime)
    others = sorted((set(query.variables) | set(fixed)) - {v} - regime)
    base = {r: 1 for r in regime}
    ranges = [range(oracle.cardinality(x)) for x in others]
    worst = 0.0
    for combo in itertools.product(*ranges):
        a = {**base, **dict(zip(others, combo))}
        values = []
        for val in range(oracle.cardinality(v)):
            diag = Diagnostics()
            values.append(evaluate(e, oracle, {**a, v: val}, diag))
            if diag.flagged:
                raise EvaluationError("zero-probability stratum on an exact oracle", e, {**a, v: val})
        worst = max(worst, max(values) - min(values))
    return IndependenceCheck(v, worst <= tol, worst)


def project_inputs(inputs: Sequence[DistTerm], v: str) -> list[DistTerm]:
    """Inputs that survive projecting ``v`` out.

    ``v`` is marginalized away from outcomes; an input that conditions on or
    intervenes on ``v`` is dropped, as is one left without outcomes.
    """
    out = []
    for t in inputs:
        if v in t.conditions or v in t.interventions:
            warnings.warn(f"dropping input {t} which depends on {v}", stacklevel=2)
            continue
        outs = [o for o in t.outcomes if o != v]
        if not outs:
            continue
        out.append(DistTerm(outs, t.interventions, t.conditions))
    return list(dict.fromkeys(out))


@dataclass(frozen=True)
class ProjectionCheck:
    removed: tuple[str, ...]
    status: str
    search_status: str
    explored: int
    elapsed: float


def check_projection(
    g: Admg,
    inputs: Sequence[DistTerm],
    query: DistTerm,
    v: str | Iterable[str],
    budget: SearchBudget | None = None,
) -> ProjectionCheck:
    """Search for the query in the latent projection of ``g`` without ``v`` (one vertex or a set)."""
    removed = (v,) if isinstance(v, str) else tuple(v)
    for x in removed:
        if x not in g.index:
            raise ValueError(f"{x!r} is not a vertex")
        if x in query.variables:
            raise ValueError(f"cannot project out query variable {x!r}")
    h = latent_project(g, [x for x in g.vertices if x not in removed])
    ins = list(inputs)
    for x in removed:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ins = project_inputs(ins, x)
    if not ins:
        return ProjectionCheck(removed, NOT_FOUND, "no-inputs", 0, 0.0)
    res = search(h, ins, query, budget)
    status = FOUND_IN_PROJECTION if res.status == FOUND else NOT_FOUND
    return ProjectionCheck(removed, status, res.status, res.explored, res.elapsed)


@dataclass
class TrapdoorReport:
    candidates: frozenset[str]
    confirmed: frozenset[str]
    independence: dict[str, IndependenceCheck] = field(default_factory=dict)
    projection: dict[str, ProjectionCheck] = field(default_factory=dict)
    joint_projection: ProjectionCheck | None = None
    budget: SearchBudget = field(default_factory=SearchBudget)
    tol: float = 1e-9

    @property
    def set_status(self) -> bool:
        """The candidate set is a trapdoor set when every member is confirmed."""
        return bool(self.candidates) and self.confirmed == self.candidates

    def to_json(self) -> dict:
        def proj(p):
            return None if p is None else {
                "removed": list(p.removed),
                "status": p.status,
                "search_status": p.search_status,
                "explored": p.explored,
                "elapsed": round(p.elapsed, 6),
            }

        return {
            "candidates": sorted(self.candidates),
            "confirmed": sorted(self.confirmed),
            "independence": {
                k: {"independent": c.independent, "max_deviation": c.max_deviation}
                for k, c in sorted(self.independence.items())
            },
            "projection": {k: proj(p) for k, p in sorted(self.projection.items())},
            "joint_projection": proj(self.joint_projection),
            "budget": {
                "max_expressions": self.budget.max_expressions,
                "max_depth": self.budget.max_depth,
                "time_limit": self.budget.time_limit,
            },
            "tol": self.tol,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def analyze(
    e: Expr,
    g: Admg,
    inputs: Sequence[DistTerm],
    query: DistTerm,
    oracle,
    budget: SearchBudget | None = None,
    tol: float = 1e-9,
    regime: Iterable[str] | None = None,
) -> TrapdoorReport:
    """Candidates, numeric independence and projection evidence for ``e``."""
    budget = budget or SearchBudget()
    if regime is None:
        regime = {x for x, k in g.kinds.items() if k != "ordinary"}
    regime = set(regime)
    cands = candidates(e, query, regime)
    report = TrapdoorReport(cands, frozenset(), budget=budget, tol=tol)
    confirmed = set()
    for v in sorted(cands):
        ind = check_functional_independence(e, v, oracle, query, tol, regime, cands - {v})
        proj = check_projection(g, inputs, query, v, budget)
        report.independence[v] = ind
        report.projection[v] = proj
        if ind.independent and proj.status == NOT_FOUND:
            confirmed.add(v)
    if len(cands) > 1:
        report.joint_projection = check_projection(g, inputs, query, sorted(cands), budget)
    report.confirmed = frozenset(confirmed)
    return report
