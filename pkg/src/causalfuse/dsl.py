"""Text formats: edge-list graphs, distribution terms and problem files.

A problem file has an optional kind header followed by three labelled
blocks::

    transportability: T
    selection: S

    graph:
      X -> Y
      X <-> Z
    data:
      P(Y,Z | do(X),T,S)
      P(Z,X)
    query:
      P(Y|do(X))

The block bodies use exactly the strings one would pass to do-search.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable

from .admg import KINDS, ORDINARY, Admg, GraphError
from .symexpr import DistTerm, ExprError, render_term


class DslError(ValueError):
    """Malformed problem text; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


_EDGE = re.compile(r"^\s*([A-Za-z0-9_]+)\s*(<->|->)\s*([A-Za-z0-9_]+)\s*$")
_NAME = r"[A-Za-z0-9_]+"


def parse_graph(text: str, kinds: dict | None = None, first_line: int = 1) -> Admg:
    """One edge per non-empty line, ``A -> B`` or ``A <-> B``; vertices are implicit."""
    vertices: list[str] = []
    directed, bidirected = [], []
    for offset, raw in enumerate(text.splitlines()):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _EDGE.match(line)
        if not m:
            raise DslError(f"cannot parse edge {raw.strip()!r}", first_line + offset)
        a, arrow, b = m.groups()
        if a == b:
            raise DslError(f"self-loop on {a!r}", first_line + offset)
        for v in (a, b):
            if v not in vertices:
                vertices.append(v)
        (directed if arrow == "->" else bidirected).append((a, b))
    for v in kinds or {}:
        if v not in vertices:
            vertices.append(v)
    try:
        return Admg(vertices, directed, bidirected, kinds or {})
    except GraphError as exc:
        raise DslError(str(exc)) from None


def render_graph(g: Admg) -> str:
    return "\n".join(g.edge_lines())


def parse_dist(text: str) -> DistTerm:
    """``P(Y,Z | do(X),W)`` into a :class:`DistTerm`."""
    s = text.strip()
    m = re.fullmatch(r"[Pp]\s*\((.*)\)", s, flags=re.S)
    if not m:
        raise DslError(f"not a distribution term: {text!r}")
    body = m.group(1)
    head, _, tail = body.partition("|")
    outcomes = _names(head, text)
    interventions, conditions = [], []
    tail = tail.strip()
    if "|" in tail:
        raise DslError(f"more than one '|' in {text!r}")
    while tail:
        dm = re.match(r"do\s*\(([^)]*)\)\s*(,|$)", tail)
        if dm:
            interventions.extend(_names(dm.group(1), text))
            tail = tail[dm.end():].strip()
            continue
        nm = re.match(rf"({_NAME})\s*(,|$)", tail)
        if not nm:
            raise DslError(f"cannot parse conditioning part of {text!r}")
        conditions.append(nm.group(1))
        tail = tail[nm.end():].strip()
    every = outcomes + interventions + conditions
    if len(set(every)) != len(every):
        raise DslError(f"a variable appears more than once in {text!r}")
    try:
        return DistTerm(outcomes, interventions, conditions)
    except ExprError as exc:
        raise DslError(str(exc)) from None


def _names(chunk: str, text: str) -> list[str]:
    out = [x.strip() for x in chunk.split(",")]
    if not all(re.fullmatch(_NAME, x) for x in out):
        raise DslError(f"bad variable list {chunk!r} in {text!r}")
    return out


def render_dist(t: DistTerm, order=None) -> str:
    return render_term(t, "text", order)


@dataclass
class ProblemSpec:
    graph: Admg
    inputs: list[DistTerm]
    query: DistTerm
    vertex_kinds: dict[str, str] = field(default_factory=dict)
    order: list[str] = field(default_factory=list)

    @property
    def regime(self) -> frozenset[str]:
        """Transportability and selection vertices."""
        return frozenset(v for v, k in self.graph.kinds.items() if k != ORDINARY)

    def render(self) -> str:
        lines = []
        for kind in KINDS[1:]:
            names = [v for v in self.graph.vertices if self.graph.kinds[v] == kind]
            if names:
                lines.append(f"{kind}: {', '.join(names)}")
        if lines:
            lines.append("")
        lines.append("graph:")
        lines += ["  " + e for e in self.graph.edge_lines()]
        lines.append("data:")
        lines += ["  " + render_dist(t, self.rank) for t in self.inputs]
        lines.append("query:")
        lines.append("  " + render_dist(self.query, self.rank))
        return "\n".join(lines) + "\n"

    @property
    def rank(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.order)}


def appearance_order(inputs: Iterable[DistTerm], raw_data: str, g: Admg, query_text: str = "") -> list[str]:
    """Variables in order of first appearance in the data block, then query and graph."""
    seen: list[str] = []
    for tok in re.findall(_NAME, raw_data + " " + query_text):
        if tok in g.index and tok not in seen:
            seen.append(tok)
    for v in g.vertices:
        if v not in seen:
            seen.append(v)
    return seen


def make_problem(graph_text: str, data_text: str, query_text: str, kinds: dict | None = None) -> ProblemSpec:
    g = parse_graph(graph_text, kinds)
    inputs = [parse_dist(line) for line in data_text.splitlines() if line.split("#", 1)[0].strip()]
    query = parse_dist(query_text)
    for t in inputs + [query]:
        for v in t.variables:
            if v not in g.index:
                raise DslError(f"variable {v!r} in {render_dist(t)} is not in the graph")
    order = appearance_order(inputs, re.sub(r"\bdo\(", "(", data_text), g, query_text)
    return ProblemSpec(g, inputs, query, dict(g.kinds), order)


_BLOCK = re.compile(r"^\s*(graph|data|query)\s*:\s*(.*)$")
_KIND = re.compile(r"^\s*(transportability|selection)\s*:\s*(.*)$")


def parse_problem(text: str) -> ProblemSpec:
    kinds: dict[str, str] = {}
    blocks: dict[str, list[str]] = {"graph": [], "data": [], "query": []}
    starts = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        km = _KIND.match(line)
        if km and current is None:
            for name in km.group(2).replace(",", " ").split():
                kinds[name] = km.group(1)
            continue
        bm = _BLOCK.match(line)
        if bm:
            current = bm.group(1)
            if current in starts:
                raise DslError(f"duplicate {current!r} block", lineno)
            starts[current] = lineno + 1
            if bm.group(2).strip():
                blocks[current].append(bm.group(2))
                starts[current] = lineno
            continue
        if current is None:
            raise DslError(f"text outside of a graph/data/query block: {raw.strip()!r}", lineno)
        blocks[current].append(line)
    for name in ("graph", "data", "query"):
        if not blocks[name]:
            raise DslError(f"missing {name!r} block")
    if len(blocks["query"]) != 1:
        raise DslError("the query block must hold exactly one term", starts.get("query"))
    g_text = "\n".join(blocks["graph"])
    try:
        return make_problem(g_text, "\n".join(blocks["data"]), blocks["query"][0], kinds)
    except DslError as exc:
        if exc.line is not None and "graph" in starts:
            raise DslError(str(exc).split(": ", 1)[1], exc.line + starts["graph"] - 1) from None
        raise
