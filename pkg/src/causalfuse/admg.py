"""Acyclic directed mixed graphs.

Directed edges encode causation, bidirected edges encode unobserved
confounding. Graphs are immutable; every operation returns a new graph.
Internally vertices are indexed in declaration order so that set-valued
arguments can be handled as integer bitmasks by the search engine.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

ORDINARY = "ordinary"
TRANSPORTABILITY = "transportability"
SELECTION = "selection"
KINDS = (ORDINARY, TRANSPORTABILITY, SELECTION)

_NAME = re.compile(r"^[A-Za-z0-9_]+$")


class GraphError(ValueError):
    """Invalid graph construction or an unknown vertex reference."""


def _check_name(name: str) -> str:
    if not isinstance(name, str) or not _NAME.match(name):
        raise GraphError(f"invalid vertex name {name!r}")
    return name


@dataclass(frozen=True)
class Mutilation:
    """Edge surgery used by the do-calculus side conditions.

    ``cut_incoming`` removes every directed edge into these vertices and every
    bidirected edge touching them; ``cut_outgoing`` removes every directed
    edge out of them.
    """

    cut_incoming: frozenset[str] = frozenset()
    cut_outgoing: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "cut_incoming", frozenset(self.cut_incoming))
        object.__setattr__(self, "cut_outgoing", frozenset(self.cut_outgoing))

    def describe(self) -> str:
        parts = []
        if self.cut_incoming:
            parts.append("bar(" + ",".join(sorted(self.cut_incoming)) + ")")
        if self.cut_outgoing:
            parts.append("underline(" + ",".join(sorted(self.cut_outgoing)) + ")")
        return "G" + ("_" + "".join(parts) if parts else "")

    def to_json(self) -> dict:
        return {
            "cut_incoming": sorted(self.cut_incoming),
            "cut_outgoing": sorted(self.cut_outgoing),
        }

    @classmethod
    def from_json(cls, data: Mapping) -> Mutilation:
        return cls(frozenset(data["cut_incoming"]), frozenset(data["cut_outgoing"]))


@dataclass(frozen=True, eq=False)
class Admg:
    """Mixed graph over named vertices.

    Args:
        vertices: vertex names in declaration order.
        directed: (tail, head) pairs.
        bidirected: unordered pairs, given as 2-tuples.
        kinds: optional vertex kind per name; missing names are ordinary.
    """

    vertices: tuple[str, ...]
    directed: frozenset[tuple[str, str]] = frozenset()
    bidirected: frozenset[frozenset[str]] = frozenset()
    kinds: Mapping[str, str] = field(default_factory=dict)

    def __init__(self, vertices: Iterable[str], directed=(), bidirected=(), kinds=None):
        verts = []
        seen = set()
        for v in vertices:
            _check_name(v)
            if v in seen:
                raise GraphError(f"duplicate vertex {v!r}")
            seen.add(v)
            verts.append(v)
        dset = set()
        for edge in directed:
            t, h = edge
            for x in (t, h):
                if x not in seen:
                    raise GraphError(f"edge endpoint {x!r} is not a declared vertex")
            if t == h:
                raise GraphError(f"self-loop on {t!r}")
            dset.add((t, h))
        bset = set()
        for edge in bidirected:
            a, b = tuple(edge)
            for x in (a, b):
                if x not in seen:
                    raise GraphError(f"edge endpoint {x!r} is not a declared vertex")
            if a == b:
                raise GraphError(f"bidirected self-loop on {a!r}")
            bset.add(frozenset((a, b)))
        kinds = dict(kinds or {})
        for name, kind in kinds.items():
            if name not in seen:
                raise GraphError(f"kind declared for unknown vertex {name!r}")
            if kind not in KINDS:
                raise GraphError(f"unknown vertex kind {kind!r}")
        object.__setattr__(self, "vertices", tuple(verts))
        object.__setattr__(self, "directed", frozenset(dset))
        object.__setattr__(self, "bidirected", frozenset(bset))
        object.__setattr__(self, "kinds", {v: kinds.get(v, ORDINARY) for v in verts})
        if self._topological() is None:
            raise GraphError("directed part of the graph contains a cycle")
        for v, kind in self.kinds.items():
            if kind == SELECTION and any(t == v for t, _ in dset):
                warnings.warn(f"selection vertex {v!r} has outgoing edges", stacklevel=2)

    # equality ignores declaration order
    def __eq__(self, other):
        if not isinstance(other, Admg):
            return NotImplemented
        return (
            set(self.vertices) == set(other.vertices)
            and self.directed == other.directed
            and self.bidirected == other.bidirected
        )

    def __hash__(self):
        return hash((frozenset(self.vertices), self.directed, self.bidirected))

    def __repr__(self):
        return f"Admg({len(self.vertices)} vertices, {len(self.directed)} directed, {len(self.bidirected)} bidirected)"

    # -- indexing -------------------------------------------------------

    @cached_property
    def index(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.vertices)}

    @cached_property
    def parent_masks(self) -> tuple[int, ...]:
        pa = [0] * len(self.vertices)
        for t, h in self.directed:
            pa[self.index[h]] |= 1 << self.index[t]
        return tuple(pa)

    @cached_property
    def child_masks(self) -> tuple[int, ...]:
        ch = [0] * len(self.vertices)
        for t, h in self.directed:
            ch[self.index[t]] |= 1 << self.index[h]
        return tuple(ch)

    @cached_property
    def sibling_masks(self) -> tuple[int, ...]:
        bi = [0] * len(self.vertices)
        for e in self.bidirected:
            a, b = sorted(e)
            bi[self.index[a]] |= 1 << self.index[b]
            bi[self.index[b]] |= 1 << self.index[a]
        return tuple(bi)

    def mask(self, names: Iterable[str]) -> int:
        m = 0
        for v in names:
            try:
                m |= 1 << self.index[v]
            except KeyError:
                raise GraphError(f"unknown vertex {v!r}") from None
        return m

    def names(self, mask: int) -> frozenset[str]:
        return frozenset(v for i, v in enumerate(self.vertices) if mask >> i & 1)

    def _topological(self):
        n = len(self.vertices)
        idx = {v: i for i, v in enumerate(self.vertices)}
        indeg = [0] * n
        out = [[] for _ in range(n)]
        for t, h in self.directed:
            indeg[idx[h]] += 1
            out[idx[t]].append(idx[h])
        order = [i for i in range(n) if indeg[i] == 0]
        k = 0
        while k < len(order):
            for j in sorted(out[order[k]]):
                indeg[j] -= 1
                if indeg[j] == 0:
                    order.append(j)
            k += 1
        return order if len(order) == n else None

    def topological_order(self) -> list[str]:
        return [self.vertices[i] for i in self._topological()]

    def parents(self, v: str) -> frozenset[str]:
        return self.names(self.parent_masks[self.mask([v]).bit_length() - 1])

    def children(self, v: str) -> frozenset[str]:
        return self.names(self.child_masks[self.mask([v]).bit_length() - 1])

    def siblings(self, v: str) -> frozenset[str]:
        return self.names(self.sibling_masks[self.mask([v]).bit_length() - 1])

    def of_kind(self, kind: str) -> frozenset[str]:
        return frozenset(v for v, k in self.kinds.items() if k == kind)

    def edge_lines(self) -> list[str]:
        """Edges in the text format accepted by :func:`causalfuse.dsl.parse_graph`."""
        pos = self.index
        lines = [f"{t} -> {h}" for t, h in sorted(self.directed, key=lambda e: (pos[e[0]], pos[e[1]]))]
        bi = sorted((tuple(sorted(e, key=pos.get)) for e in self.bidirected), key=lambda e: (pos[e[0]], pos[e[1]]))
        lines += [f"{a} <-> {b}" for a, b in bi]
        return lines


# -- graph operations ---------------------------------------------------


def _ancestors_mask(parent_masks, start: int) -> int:
    seen = start
    frontier = start
    while frontier:
        nxt = 0
        m = frontier
        while m:
            low = m & -m
            nxt |= parent_masks[low.bit_length() - 1]
            m ^= low
        frontier = nxt & ~seen
        seen |= frontier
    return seen


def ancestors(g: Admg, s: Iterable[str]) -> frozenset[str]:
    """``s`` together with every vertex that has a directed path into ``s``."""
    return g.names(_ancestors_mask(g.parent_masks, g.mask(s)))


def descendants(g: Admg, s: Iterable[str]) -> frozenset[str]:
    return g.names(_ancestors_mask(g.child_masks, g.mask(s)))


def mutilate(g: Admg, m: Mutilation) -> Admg:
    cut_in = set(m.cut_incoming)
    cut_out = set(m.cut_outgoing)
    for v in cut_in | cut_out:
        if v not in g.index:
            raise GraphError(f"unknown vertex {v!r}")
    directed = [(t, h) for t, h in g.directed if h not in cut_in and t not in cut_out]
    bidirected = [e for e in g.bidirected if not (e & cut_in)]
    return Admg(g.vertices, directed, bidirected, g.kinds)


def mutilated_masks(g: Admg, cut_in: int, cut_out: int):
    """Parent, child and sibling masks of a mutilated graph, without building it."""
    n = len(g.vertices)
    pa = list(g.parent_masks)
    ch = list(g.child_masks)
    bi = list(g.sibling_masks)
    keep_in = ~cut_in
    keep_out = ~cut_out
    for i in range(n):
        bit = 1 << i
        if cut_in & bit:
            pa[i] = 0
            bi[i] = 0
        else:
            pa[i] &= keep_out
            bi[i] &= keep_in
        if cut_out & bit:
            ch[i] = 0
        else:
            ch[i] &= keep_in
    return tuple(pa), tuple(ch), tuple(bi)


def reachable_mask(pa, ch, bi, source: int, cond: int) -> int:
    """Vertices d-connected to ``source`` given ``cond``.

    Bayes-ball over the graph where each bidirected edge is a latent parent
    of both endpoints. A visit "from below" means the ball arrived from a
    child; "from above" means it arrived from a (possibly latent) parent.
    """
    anc = _ancestors_mask(pa, cond)
    up = 0  # visited from below
    down = 0  # visited from above
    todo_up = source
    todo_down = 0
    while todo_up or todo_down:
        if todo_up:
            low = todo_up & -todo_up
            todo_up ^= low
            if up & low:
                continue
            up |= low
            if cond & low:
                continue
            i = low.bit_length() - 1
            todo_up |= pa[i] & ~up
            todo_down |= (ch[i] | bi[i]) & ~down
        else:
            low = todo_down & -todo_down
            todo_down ^= low
            if down & low:
                continue
            down |= low
            i = low.bit_length() - 1
            if not cond & low:
                todo_down |= ch[i] & ~down
            if anc & low:
                todo_up |= pa[i] & ~up
                todo_down |= bi[i] & ~down
    return (up | down) & ~cond


def d_separated(g: Admg, a: Iterable[str], b: Iterable[str], c: Iterable[str]) -> bool:
    """True iff ``a`` and ``b`` are d-separated given ``c``."""
    am, bm, cm = g.mask(a), g.mask(b), g.mask(c)
    if am & bm or am & cm or bm & cm:
        raise GraphError("d-separation arguments must be pairwise disjoint")
    reach = reachable_mask(g.parent_masks, g.child_masks, g.sibling_masks, am, cm)
    return not reach & bm


def latent_project(g: Admg, keep: Iterable[str]) -> Admg:
    """Latent projection of ``g`` onto ``keep``.

    ``Z -> W`` is kept when a directed path from Z to W runs only through
    dropped vertices; ``Z <-> W`` when a collider-free path with arrowheads at
    both ends does.
    """
    keep_mask = g.mask(keep)
    n = len(g.vertices)
    latent = ((1 << n) - 1) & ~keep_mask
    ch = g.child_masks
    pa = g.parent_masks
    bi = g.sibling_masks

    def via_latents(start: int, step) -> int:
        # vertices reached from `start` along edges given by `step`, passing only through latents
        reached = 0
        frontier = step[start]
        while frontier:
            low = frontier & -frontier
            frontier ^= low
            if reached & low:
                continue
            reached |= low
            if latent & low:
                frontier |= step[low.bit_length() - 1] & ~reached
        return reached

    # up[i]: i itself plus latents with a directed latent-only path into i
    up = []
    for i in range(n):
        up.append((1 << i) | (via_latents(i, pa) & latent))
    order = [v for v in g.vertices if keep_mask >> g.index[v] & 1]
    directed = []
    for z in order:
        zi = g.index[z]
        for w in g.names(via_latents(zi, ch) & keep_mask):
            directed.append((z, w))
    bidirected = []
    for x, z in enumerate(order):
        zi = g.index[z]
        for w in order[x + 1 :]:
            wi = g.index[w]
            uz, uw = up[zi], up[wi]
            found = bool(uz & uw & latent)
            m = uz
            while m and not found:
                low = m & -m
                m ^= low
                if bi[low.bit_length() - 1] & uw:
                    found = True
            if found:
                bidirected.append((z, w))
    return Admg(order, directed, bidirected, {v: g.kinds[v] for v in order})
