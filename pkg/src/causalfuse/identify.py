"""Search-based identification with the do-calculus.

Known distributions are terms ``P(A | do(B), C)`` over the graph's vertices.
Starting from the input terms, the engine applies the three do-calculus
rules (both directions) and the probability-calculus operations
(marginalization, conditioning, chain-rule products) one variable at a time,
breadth first, until the query term appears. Every term is derived at most
once, so the search space is bounded by 4^n terms for n vertices.

Each derived term remembers the rule, premises and d-separation certificate
that produced it; the identifying formula and an auditable
:class:`Derivation` are reconstructed from that record on success.
"""

from __future__ import annotations

import heapq
import json
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .admg import Admg, GraphError, Mutilation, _ancestors_mask, d_separated, mutilate, mutilated_masks, reachable_mask
from .symexpr import Atom, DistTerm, Expr, ExprError, Product, Quotient, Sum, from_json, to_json

DOCALC1 = "docalc-1-insert/delete-observation"
DOCALC2 = "docalc-2-exchange-action-observation"
DOCALC3 = "docalc-3-insert/delete-action"
MARGINALIZE = "marginalize"
CHAIN = "condition-chain-rule"
PRODUCT = "product-compose"
QUOTIENT = "quotient-condition"
RULES = (DOCALC1, DOCALC2, DOCALC3, MARGINALIZE, CHAIN, PRODUCT, QUOTIENT)
DOCALC_RULES = (DOCALC1, DOCALC2, DOCALC3)

FOUND = "found"
UNKNOWN = "unknown"  # budget ran out first
EXHAUSTED = "exhausted"  # every reachable term was derived; query is not among them


class DerivationError(ValueError):
    """A derivation trace that refers to missing premises."""


@dataclass(frozen=True)
class SearchBudget:
    max_expressions: int = 1_000_000
    max_depth: int = 1_000
    time_limit: float = 60.0

    def __post_init__(self):
        if self.max_expressions <= 0 or self.max_depth <= 0 or self.time_limit <= 0:
            raise ValueError("budget limits must be positive")


@dataclass(frozen=True)
class SideCondition:
    """d-separation statement ``a _||_ b | c`` in a mutilated graph."""

    mutilation: Mutilation
    a: frozenset[str]
    b: frozenset[str]
    c: frozenset[str]

    def holds(self, g: Admg) -> bool:
        return d_separated(mutilate(g, self.mutilation), self.a, self.b, self.c)

    def to_json(self) -> dict:
        return {
            "graph": self.mutilation.describe(),
            "mutilation": self.mutilation.to_json(),
            "separated": sorted(self.a),
            "from": sorted(self.b),
            "given": sorted(self.c),
        }

    @classmethod
    def from_json(cls, data) -> SideCondition:
        return cls(
            Mutilation.from_json(data["mutilation"]),
            frozenset(data["separated"]),
            frozenset(data["from"]),
            frozenset(data["given"]),
        )


@dataclass(frozen=True)
class DerivationStep:
    rule: str
    premises: tuple[int, ...]
    term: DistTerm
    conclusion: Expr
    variable: str
    side_condition: SideCondition | None = None


@dataclass(frozen=True)
class Derivation:
    """Inputs, ordered steps and resulting formula for one query."""

    inputs: tuple[DistTerm, ...]
    query: DistTerm
    steps: tuple[DerivationStep, ...]
    result: Expr

    def term_at(self, index: int) -> DistTerm:
        if index < len(self.inputs):
            return self.inputs[index]
        return self.steps[index - len(self.inputs)].term

    def expr_at(self, index: int) -> Expr:
        if index < len(self.inputs):
            return Atom(self.inputs[index])
        return self.steps[index - len(self.inputs)].conclusion

    def to_json(self) -> dict:
        return {
            "query": to_json(Atom(self.query)),
            "inputs": [to_json(Atom(t)) for t in self.inputs],
            "steps": [
                {
                    "rule": s.rule,
                    "variable": s.variable,
                    "premises": list(s.premises),
                    "term": to_json(Atom(s.term)),
                    "side_condition": s.side_condition.to_json() if s.side_condition else None,
                    "conclusion": to_json(s.conclusion),
                }
                for s in self.steps
            ],
            "result": to_json(self.result),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def from_json(cls, data) -> Derivation:
        if isinstance(data, str):
            data = json.loads(data)
        steps = tuple(
            DerivationStep(
                rule=s["rule"],
                premises=tuple(s["premises"]),
                term=from_json(s["term"]).term,
                conclusion=from_json(s["conclusion"]),
                variable=s["variable"],
                side_condition=SideCondition.from_json(s["side_condition"]) if s["side_condition"] else None,
            )
            for s in data["steps"]
        )
        return cls(
            inputs=tuple(from_json(t).term for t in data["inputs"]),
            query=from_json(data["query"]).term,
            steps=steps,
            result=from_json(data["result"]),
        )


@dataclass
class SearchResult:
    status: str
    derivation: Derivation | None
    explored: int
    elapsed: float
    budget: SearchBudget = field(default_factory=SearchBudget)

    @property
    def found(self) -> bool:
        return self.status == FOUND


# -- formula composition shared by the engine and the verifier ------------


def _marginal(f: Expr, v: str) -> Expr:
    if isinstance(f, Atom) and v in f.term.outcomes and len(f.term.outcomes) > 1:
        t = f.term
        return Atom(DistTerm(set(t.outcomes) - {v}, t.interventions, t.conditions))
    if isinstance(f, Sum) and v not in f.bound:
        return Sum(f.bound + (v,), f.body)
    return Sum((v,), f)


def compose(rule: str, premises: Sequence[Expr], terms: Sequence[DistTerm], v: str) -> Expr:
    """Formula of a conclusion given the formulas and terms of its premises."""
    if rule in DOCALC_RULES:
        return premises[0]
    if rule == MARGINALIZE:
        return _marginal(premises[0], v)
    if rule == QUOTIENT:
        f = premises[0]
        if isinstance(f, Atom) and v in f.term.outcomes and len(f.term.outcomes) > 1:
            t = f.term
            return Atom(DistTerm(set(t.outcomes) - {v}, t.interventions, set(t.conditions) | {v}))
        den = f
        for other in terms[0].outcomes:
            if other != v:
                den = _marginal(den, other)
        return Quotient(f, den)
    if rule == PRODUCT:
        main, factor = premises
        return Product((factor, main))
    if rule == CHAIN:
        main, factor = premises
        return Product((main, factor))
    raise ValueError(f"unknown rule {rule!r}")


# -- the engine -----------------------------------------------------------


def _bits(mask):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


class _Engine:
    """Term-level search state over bitmask-encoded distribution terms."""

    def __init__(self, g: Admg):
        self.g = g
        self.n = len(g.vertices)
        self._graphs: dict = {}
        self._reach: dict = {}
        self._anc: dict = {}

    def graph(self, cut_in, cut_out):
        key = (cut_in, cut_out)
        got = self._graphs.get(key)
        if got is None:
            got = self._graphs[key] = mutilated_masks(self.g, cut_in, cut_out)
        return got

    def reach(self, v, cond, cut_in, cut_out):
        key = (v, cond, cut_in, cut_out)
        r = self._reach.get(key)
        if r is None:
            pa, ch, bi = self.graph(cut_in, cut_out)
            r = self._reach[key] = reachable_mask(pa, ch, bi, 1 << v, cond)
        return r

    def ancestors(self, cut_in, s):
        key = (cut_in, s)
        r = self._anc.get(key)
        if r is None:
            r = self._anc[key] = _ancestors_mask(self.graph(cut_in, 0)[0], s)
        return r

    # each check returns (cut_in, cut_out, cond) when the side condition holds
    def rule1(self, a, b, c_small, v):
        cond = b | c_small
        if self.reach(v, cond, b, 0) & a:
            return None
        return (b, 0, cond)

    def rule2(self, a, b_small, c_small, v):
        cond = b_small | c_small
        if self.reach(v, cond, b_small, 1 << v) & a:
            return None
        return (b_small, 1 << v, cond)

    def rule3(self, a, b_small, c, v):
        bit = 1 << v
        cut = b_small if self.ancestors(b_small, c) & bit else b_small | bit
        cond = b_small | c
        if self.reach(v, cond, cut, 0) & a:
            return None
        return (cut, 0, cond)

    def search(self, inputs, target, budget: SearchBudget, heuristic: bool = False):
        start = time.monotonic()
        known: dict = {}  # key -> (rule, premises, v, cert, depth)
        order: list = []
        by_cond: dict = {}  # (b, c) -> keys
        by_scope: dict = {}  # (b, a|c) -> keys
        target_vars = target[0] | target[1] | target[2]
        if heuristic:
            heap: list = []
        else:
            queue: deque = deque()

        def add(key, rule, premises, v, cert, depth):
            known[key] = (rule, premises, v, cert, depth)
            order.append(key)
            a, b, c = key
            by_cond.setdefault((b, c), []).append(key)
            by_scope.setdefault((b, a | c), []).append(key)
            if heuristic:
                shared = bin((a | b | c) & target_vars).count("1")
                heapq.heappush(heap, (-shared, len(order), key))
            else:
                queue.append(key)

        for t in inputs:
            if t not in known:
                add(t, None, (), None, None, 0)
        if target in known:
            return FOUND, known, order
        status = EXHAUSTED
        pops = 0
        n = self.n
        max_depth = budget.max_depth
        while heap if heuristic else queue:
            key = heapq.heappop(heap)[2] if heuristic else queue.popleft()
            pops += 1
            if pops & 255 == 0 and time.monotonic() - start > budget.time_limit:
                status = UNKNOWN
                break
            depth = known[key][4]
            if depth >= max_depth:
                status = UNKNOWN
                continue
            nd = depth + 1
            a, b, c = key
            used = a | b | c
            new = []
            for v in range(n):
                bit = 1 << v
                if a & bit:
                    if a != bit:
                        k = (a ^ bit, b, c)
                        if k not in known:
                            new.append((k, MARGINALIZE, (key,), v, None))
                        k = (a ^ bit, b, c | bit)
                        if k not in known:
                            new.append((k, QUOTIENT, (key,), v, None))
                elif c & bit:
                    cs = c ^ bit
                    k = (a, b, cs)
                    if k not in known:
                        cert = self.rule1(a, b, cs, v)
                        if cert:
                            new.append((k, DOCALC1, (key,), v, cert))
                    k = (a, b | bit, cs)
                    if k not in known:
                        cert = self.rule2(a, b, cs, v)
                        if cert:
                            new.append((k, DOCALC2, (key,), v, cert))
                    k = (a | bit, b, cs)
                    if k not in known and (bit, b, cs) in known:
                        new.append((k, PRODUCT, (key, (bit, b, cs)), v, None))
                elif b & bit:
                    bs = b ^ bit
                    k = (a, bs, c | bit)
                    if k not in known:
                        cert = self.rule2(a, bs, c, v)
                        if cert:
                            new.append((k, DOCALC2, (key,), v, cert))
                    k = (a, bs, c)
                    if k not in known:
                        cert = self.rule3(a, bs, c, v)
                        if cert:
                            new.append((k, DOCALC3, (key,), v, cert))
                else:
                    k = (a, b, c | bit)
                    if k not in known:
                        cert = self.rule1(a, b, c, v)
                        if cert:
                            new.append((k, DOCALC1, (key,), v, cert))
                    k = (a, b | bit, c)
                    if k not in known:
                        cert = self.rule3(a, b, c, v)
                        if cert:
                            new.append((k, DOCALC3, (key,), v, cert))
                    k = (a | bit, b, c)
                    if k not in known and (bit, b, a | c) in known:
                        new.append((k, CHAIN, (key, (bit, b, a | c)), v, None))
            if a & (a - 1) == 0:
                # the term is a single-outcome factor; pair it with known main terms
                v = a.bit_length() - 1
                for main in by_cond.get((b, c | a), ()):
                    k = (main[0] | a, b, c)
                    if k not in known:
                        new.append((k, PRODUCT, (main, key), v, None))
                for main in by_scope.get((b, c), ()):
                    k = (main[0] | a, b, main[2])
                    if main[0] & a == 0 and k not in known:
                        new.append((k, CHAIN, (main, key), v, None))
            for k, rule, prem, v, cert in new:
                if k in known:
                    continue
                add(k, rule, prem, v, cert, nd)
                if k == target:
                    return FOUND, known, order
                if len(known) >= budget.max_expressions:
                    return UNKNOWN, known, order
        return status, known, order


def _term_key(g: Admg, t: DistTerm):
    try:
        return (g.mask(t.outcomes), g.mask(t.interventions), g.mask(t.conditions))
    except GraphError as exc:
        raise ExprError(str(exc)) from None


def _key_term(g: Admg, key) -> DistTerm:
    a, b, c = key
    return DistTerm(g.names(a), g.names(b), g.names(c))


def _certificate(g: Admg, rule: str, cert, a_mask: int, v: str) -> SideCondition:
    cut_in, cut_out, cond = cert
    return SideCondition(Mutilation(g.names(cut_in), g.names(cut_out)), g.names(a_mask), frozenset({v}), g.names(cond))


def search(
    g: Admg,
    inputs: Iterable[DistTerm],
    query: DistTerm,
    budget: SearchBudget | None = None,
    heuristic: bool = False,
) -> SearchResult:
    """Run the do-calculus search and report its status."""
    budget = budget or SearchBudget()
    inputs = tuple(dict.fromkeys(inputs))
    start = time.monotonic()
    input_keys = [_term_key(g, t) for t in inputs]
    target = _term_key(g, query)
    engine = _Engine(g)
    status, known, order = engine.search(input_keys, target, budget, heuristic)
    elapsed = time.monotonic() - start
    if status != FOUND:
        return SearchResult(status, None, len(known), elapsed, budget)
    return SearchResult(FOUND, _extract(g, inputs, input_keys, query, target, known, order), len(known), elapsed, budget)


def derive(
    g: Admg,
    inputs: Iterable[DistTerm],
    query: DistTerm,
    budget: SearchBudget | None = None,
    heuristic: bool = False,
) -> Derivation | None:
    """Derivation of ``query`` from ``inputs``, or None if none was found within budget.

    None is not a proof of non-identifiability.
    """
    return search(g, inputs, query, budget, heuristic).derivation


def _extract(g, inputs, input_keys, query, target, known, order) -> Derivation:
    serial = {k: i for i, k in enumerate(order)}
    needed = set()
    stack = [target]
    while stack:
        k = stack.pop()
        if k in needed:
            continue
        needed.add(k)
        stack.extend(known[k][1])
    index = {k: i for i, k in enumerate(input_keys)}
    formulas = {k: Atom(t) for k, t in zip(input_keys, inputs)}
    steps = []
    for k in sorted(needed, key=serial.get):
        if k in index:
            continue
        rule, prem, v, cert, _ = known[k]
        name = g.vertices[v]
        formula = compose(rule, [formulas[p] for p in prem], [_key_term(g, p) for p in prem], name)
        formulas[k] = formula
        side = _certificate(g, rule, cert, k[0], name) if cert else None
        index[k] = len(inputs) + len(steps)
        steps.append(DerivationStep(rule, tuple(index[p] for p in prem), _key_term(g, k), formula, name, side))
    return Derivation(tuple(inputs), query, tuple(steps), formulas[target])


def expand(g: Admg, known: Iterable[DistTerm]) -> set[DistTerm]:
    """All terms derivable from ``known`` by a single rule application."""
    known = list(known)
    keys = {_term_key(g, t) for t in known}
    engine = _Engine(g)
    out = set()
    # a one-level search: seed with the known terms and stop before expanding any new term
    budget = SearchBudget(max_depth=1)
    _, found, _ = engine.search(list(keys), (0, 0, 0), budget)
    for k in found:
        if k not in keys:
            out.add(_key_term(g, k))
    return out


# -- verification ---------------------------------------------------------


def expected_side_condition(g: Admg, rule: str, premise: DistTerm, conclusion: DistTerm) -> SideCondition | None:
    """Certificate a do-calculus step must carry, or None if the step is not of that rule's shape."""
    a = frozenset(premise.outcomes)
    if frozenset(conclusion.outcomes) != a:
        return None
    pb, pc = set(premise.interventions), set(premise.conditions)
    qb, qc = set(conclusion.interventions), set(conclusion.conditions)
    if rule == DOCALC1:
        if pb != qb or len(pc ^ qc) != 1:
            return None
        (v,) = pc ^ qc
        return SideCondition(Mutilation(frozenset(pb)), a, frozenset({v}), frozenset(pb | (pc & qc)))
    if rule == DOCALC2:
        moved = (pb ^ qb) | (pc ^ qc)
        if len(moved) != 1 or len(pb ^ qb) != 1 or len(pc ^ qc) != 1:
            return None
        (v,) = moved
        bs, cs = (pb | qb) - {v}, (pc | qc) - {v}
        return SideCondition(Mutilation(frozenset(bs), frozenset({v})), a, frozenset({v}), frozenset(bs | cs))
    if rule == DOCALC3:
        if pc != qc or len(pb ^ qb) != 1:
            return None
        (v,) = pb ^ qb
        bs = (pb | qb) - {v}
        anc = _ancestors_mask(mutilated_masks(g, g.mask(bs), 0)[0], g.mask(pc))
        cut = set(bs) if anc & g.mask([v]) else set(bs) | {v}
        return SideCondition(Mutilation(frozenset(cut)), a, frozenset({v}), frozenset(bs | pc))
    return None


def _probability_step_ok(rule, prem_terms, term, v) -> bool:
    if rule in (MARGINALIZE, QUOTIENT):
        (p,) = prem_terms
        if v not in p.outcomes or len(p.outcomes) < 2:
            return False
        cond = set(p.conditions) | ({v} if rule == QUOTIENT else set())
        return term == DistTerm(set(p.outcomes) - {v}, p.interventions, cond)
    if rule in (PRODUCT, CHAIN):
        main, factor = prem_terms
        if factor.outcomes != (v,) or factor.interventions != main.interventions or v in main.outcomes:
            return False
        if rule == PRODUCT:
            ok = set(factor.conditions) == set(main.conditions) - {v} and v in main.conditions
            return ok and term == DistTerm(set(main.outcomes) | {v}, main.interventions, factor.conditions)
        ok = set(factor.conditions) == set(main.outcomes) | set(main.conditions) and v not in main.conditions
        return ok and term == DistTerm(set(main.outcomes) | {v}, main.interventions, main.conditions)
    return False


def verify(g: Admg, d: Derivation) -> bool:
    """Independent re-check of every step of ``d``.

    Raises :class:`DerivationError` for premises that point nowhere; returns
    False for any illegal step or failing side condition.
    """
    k = len(d.inputs)
    for i, step in enumerate(d.steps):
        for p in step.premises:
            if not 0 <= p < k + i:
                raise DerivationError(f"step {i} refers to missing premise {p}")
        if step.rule not in RULES:
            return False
        prem_terms = [d.term_at(p) for p in step.premises]
        prem_exprs = [d.expr_at(p) for p in step.premises]
        if step.rule in DOCALC_RULES:
            if len(prem_terms) != 1 or step.side_condition is None:
                return False
            expected = expected_side_condition(g, step.rule, prem_terms[0], step.term)
            if expected is None or expected != step.side_condition:
                return False
            if not step.side_condition.holds(g):
                return False
        else:
            if step.side_condition is not None:
                return False
            if not _probability_step_ok(step.rule, prem_terms, step.term, step.variable):
                return False
        try:
            if compose(step.rule, prem_exprs, prem_terms, step.variable) != step.conclusion:
                return False
        except ExprError:
            return False
    if not d.steps:
        return d.query in d.inputs and d.result == Atom(d.query)
    return d.steps[-1].term == d.query and d.steps[-1].conclusion == d.result
