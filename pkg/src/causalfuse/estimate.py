"""Contingency tables, atom routing and plug-in estimation.

Every declared input distribution is backed by one :class:`ContingencyTable`.
An atom of an identifying functional is answered by the table of the input
it can be computed from (by marginalizing and conditioning), as a ratio of
two cell-mass sums. Indicator variables of the sampling regime (for example
a selection variable S for a trial that only kept S=1 participants) may be
absent from a table; they are then implicit constants of that table.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .symexpr import (
    Assignment,
    Diagnostics,
    DistTerm,
    EvaluationError,
    Expr,
    MissingInputError,
    evaluate,
    free_vars,
    render_term,
)


class EstimationError(RuntimeError):
    """A stratum needed by the estimate holds no data."""

    def __init__(self, message, stratum=None):
        super().__init__(message)
        self.stratum = stratum


@dataclass(frozen=True)
class Dataset:
    """Integer-coded records sampled under the regime described by ``term``."""

    variables: tuple[str, ...]
    cardinalities: tuple[int, ...]
    rows: np.ndarray
    term: DistTerm
    provenance: str = ""

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        if rows.ndim != 2 or rows.shape[1] != len(self.variables):
            raise ValueError("rows must be an (n, k) array matching the schema")
        if rows.shape[0] < 1:
            raise ValueError("a dataset needs at least one row")
        if len(self.cardinalities) != len(self.variables):
            raise ValueError("one cardinality per variable")
        if (rows < 0).any() or (rows >= np.asarray(self.cardinalities)).any():
            raise ValueError("value outside the declared cardinality")
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "cardinalities", tuple(int(c) for c in self.cardinalities))
        object.__setattr__(self, "rows", rows)

    def __len__(self):
        return self.rows.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.variables.index(name)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.variables)
            w.writerows(self.rows.tolist())

    @classmethod
    def from_csv(cls, path, term: DistTerm, cardinalities: Mapping[str, int] | None = None, provenance=None):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader)]
            rows = [[int(x) for x in r] for r in reader if r]
        if not rows:
            raise ValueError(f"{path}: no data rows")
        arr = np.asarray(rows, dtype=np.int64)
        cards = tuple(
            int(cardinalities[h]) if cardinalities and h in cardinalities else max(2, int(arr[:, i].max()) + 1)
            for i, h in enumerate(header)
        )
        return cls(tuple(header), cards, arr, term, provenance or Path(path).stem)


@dataclass(eq=False)
class ContingencyTable:
    """Nonnegative cell weights over ``variables``.

    ``strata`` lists the columns whose slices are separate conditional
    distributions (interventions and observed conditions of the declared
    term). ``counts`` may hold raw counts or exact probabilities.
    """

    variables: tuple[str, ...]
    cardinalities: tuple[int, ...]
    counts: np.ndarray
    strata: tuple[str, ...] = ()
    _marginals: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.variables = tuple(self.variables)
        self.cardinalities = tuple(int(c) for c in self.cardinalities)
        self.counts = np.asarray(self.counts, dtype=float)
        if self.counts.shape != self.cardinalities:
            raise ValueError("counts shape does not match cardinalities")
        if (self.counts < 0).any():
            raise ValueError("negative cell weight")

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    def marginal(self, names: Sequence[str]) -> np.ndarray:
        """Summed weights over ``names`` (kept in table order)."""
        key = frozenset(names)
        got = self._marginals.get(key)
        if got is None:
            drop = tuple(i for i, v in enumerate(self.variables) if v not in key)
            got = self._marginals[key] = self.counts.sum(axis=drop) if drop else self.counts
        return got

    def mass(self, fixed: Mapping[str, int]) -> float:
        names = [v for v in self.variables if v in fixed]
        arr = self.marginal(names)
        return float(arr[tuple(fixed[v] for v in names)]) if names else float(arr)

    def probabilities(self) -> np.ndarray:
        """Cell probabilities, normalized within each stratum (empty strata stay 0)."""
        axes = tuple(i for i, v in enumerate(self.variables) if v not in self.strata)
        tot = self.counts.sum(axis=axes, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            p = np.where(tot > 0, self.counts / np.where(tot > 0, tot, 1), 0.0)
        return p

    def prob(self, values: Mapping[str, int], given: Mapping[str, int] | None = None) -> float:
        given = dict(given or {})
        num = self.mass({**given, **values})
        den = self.mass(given)
        return num / den if den else float("nan")


def fit(dataset: Dataset, smoothing: float = 0.0) -> ContingencyTable:
    """Tabulate counts over the full variable range of ``dataset``."""
    flat = np.ravel_multi_index(dataset.rows.T, dataset.cardinalities)
    counts = np.bincount(flat, minlength=int(np.prod(dataset.cardinalities))).astype(float)
    counts = counts.reshape(dataset.cardinalities) + smoothing
    t = dataset.term
    strata = tuple(v for v in dataset.variables if v in t.interventions or v in t.conditions)
    return ContingencyTable(dataset.variables, dataset.cardinalities, counts, strata)


def covers(declared: DistTerm, term: DistTerm) -> bool:
    """Whether ``term`` is a marginal/conditional of ``declared`` under the same interventions."""
    return (
        set(term.interventions) == set(declared.interventions)
        and set(declared.conditions) <= set(term.conditions)
        and set(term.outcomes) <= set(declared.outcomes)
        and set(term.conditions) <= set(declared.outcomes) | set(declared.conditions)
    )


def match_atom(term: DistTerm, declared: Sequence[DistTerm]) -> DistTerm:
    """The declared input an atom is computed from; first match wins."""
    if not declared:
        raise ValueError("no declared inputs")
    hits = [d for d in declared if covers(d, term)]
    if not hits:
        raise MissingInputError(f"no input distribution covers {render_term(term)}")
    if len(hits) > 1:
        warnings.warn(
            f"{render_term(term)} is computable from several inputs; using {render_term(hits[0])}",
            stacklevel=2,
        )
    return hits[0]


class TableOracle:
    """Answers atoms from the contingency tables of the declared inputs."""

    def __init__(self, tables: Mapping[DistTerm, ContingencyTable], cardinalities: Mapping[str, int] | None = None):
        self.tables = dict(tables)
        self.declared = list(self.tables)
        for term, table in self.tables.items():
            missing = (set(term.outcomes) | set(term.interventions)) - set(table.variables)
            if missing:
                raise ValueError(f"table for {render_term(term)} lacks columns {sorted(missing)}")
        cards = {}
        for table in self.tables.values():
            for v, k in zip(table.variables, table.cardinalities):
                if cards.setdefault(v, k) != k:
                    raise ValueError(f"inconsistent cardinality for {v!r}")
        cards.update(cardinalities or {})
        self.cards = cards
        self._routes: dict = {}

    def route(self, term: DistTerm):
        got = self._routes.get(term)
        if got is None:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                declared = match_atom(term, self.declared)
            table = self.tables[declared]
            cols = set(table.variables)
            num = [v for v in table.variables if v in term.variables]
            den = [v for v in table.variables if v in cols and (v in term.interventions or v in term.conditions)]
            got = self._routes[term] = (table, num, den)
        return got

    def atom(self, term: DistTerm, assignment: Assignment) -> tuple[float, float]:
        table, num, den = self.route(term)
        return table.mass({v: assignment[v] for v in num}), table.mass({v: assignment[v] for v in den})

    def cardinality(self, var: str) -> int:
        try:
            return self.cards[var]
        except KeyError:
            raise MissingInputError(f"no cardinality known for {var!r}") from None


@dataclass
class Estimate:
    value: float
    assignment: dict
    degenerate: list = field(default_factory=list)


def plug_in(
    e: Expr,
    tables: Mapping[DistTerm, ContingencyTable],
    td: Mapping[str, int],
    target: Mapping[str, int],
    regime: Iterable[str] = (),
    allow_degenerate: bool = False,
) -> Estimate:
    """Evaluate ``e`` with empirical proportions substituted for its atoms.

    ``td`` fixes the trapdoor variables and ``target`` the query values, e.g.
    ``{"Y": 1, "X": 1}``. Regime indicators default to 1. An atom whose
    stratum is empty but which still carries weight raises
    :class:`EstimationError` naming the stratum, unless ``allow_degenerate``
    (then 0/0 counts as 0 and the strata are listed on the result).
    """
    regime = set(regime)
    free = free_vars(e)
    need = free - regime - set(target)
    if not need <= set(td):
        raise ValueError(f"trapdoor assignment misses {sorted(need - set(td))}")
    a = {v: 1 for v in regime & free}
    a.update(td)
    a.update(target)
    oracle = tables if isinstance(tables, TableOracle) else TableOracle(tables)
    diag = Diagnostics()
    try:
        value = evaluate(e, oracle, a, diag)
    except EvaluationError as exc:
        raise EstimationError(f"empty stratum at {exc.assignment}", exc.assignment) from None
    if diag.flagged and not allow_degenerate:
        node, stratum = diag.degenerate[0]
        raise EstimationError(f"empty stratum for {_describe(node)} at {stratum}", stratum)
    return Estimate(value, a, diag.degenerate)


def _describe(node):
    from .symexpr import Atom, render

    return render_term(node.term) if isinstance(node, Atom) else render(node, "text")
