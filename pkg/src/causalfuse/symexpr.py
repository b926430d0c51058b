"""Symbolic distribution terms and identifying-functional expression trees.

An :class:`Expr` is built from :class:`Atom` leaves (one :class:`DistTerm`
each), :class:`Product`, :class:`Quotient` and :class:`Sum` nodes. Raw trees
keep whatever nesting they were built with (rendering depends on it);
:func:`canonicalize` produces the normal form used for comparisons and as a
memoization key.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Protocol, Sequence, Union

Assignment = Mapping[str, int]


class ExprError(ValueError):
    """Malformed term or expression."""


class EvaluationError(ArithmeticError):
    """Nonzero quantity divided by a zero-probability stratum."""

    def __init__(self, message, expr=None, assignment=None):
        super().__init__(message)
        self.expr = expr
        self.assignment = dict(assignment or {})


class MissingInputError(LookupError):
    """An atom cannot be answered by any available distribution."""


def _sorted(names: Iterable[str]) -> tuple[str, ...]:
    return tuple(sorted(set(names)))


@dataclass(frozen=True)
class DistTerm:
    """``P(outcomes | do(interventions), conditions)``."""

    outcomes: tuple[str, ...]
    interventions: tuple[str, ...] = ()
    conditions: tuple[str, ...] = ()

    def __post_init__(self):
        for attr in ("outcomes", "interventions", "conditions"):
            value = getattr(self, attr)
            if isinstance(value, str):
                raise ExprError(f"{attr} must be a collection of names, not a string")
            object.__setattr__(self, attr, _sorted(value))
        if not self.outcomes:
            raise ExprError("a distribution term needs at least one outcome")
        y, x, w = set(self.outcomes), set(self.interventions), set(self.conditions)
        if y & x or y & w or x & w:
            raise ExprError(f"variable roles overlap in {self}")

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(self.outcomes + self.interventions + self.conditions)

    def __str__(self):
        return render_term(self, "text")


# -- expression nodes -----------------------------------------------------


@dataclass(frozen=True)
class Atom:
    term: DistTerm


@dataclass(frozen=True)
class Product:
    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if len(self.factors) < 2:
            raise ExprError("a product needs at least two factors")


@dataclass(frozen=True)
class Quotient:
    numerator: object
    denominator: object


@dataclass(frozen=True)
class Sum:
    bound: tuple[str, ...]
    body: object

    def __post_init__(self):
        object.__setattr__(self, "bound", _sorted(self.bound))
        if not self.bound:
            raise ExprError("a sum must bind at least one variable")


Expr = Union[Atom, Product, Quotient, Sum]


def children(e: Expr) -> tuple:
    if isinstance(e, Atom):
        return ()
    if isinstance(e, Product):
        return e.factors
    if isinstance(e, Quotient):
        return (e.numerator, e.denominator)
    return (e.body,)


def atoms(e: Expr) -> Iterator[DistTerm]:
    if isinstance(e, Atom):
        yield e.term
    for c in children(e):
        yield from atoms(c)


def variables(e: Expr) -> frozenset[str]:
    """Every variable mentioned anywhere in ``e``, free or bound."""
    out = set()
    for t in atoms(e):
        out |= t.variables
    return frozenset(out)


def free_vars(e: Expr, regime: Iterable[str] = ()) -> frozenset[str]:
    """Variables of ``e`` not bound by an enclosing sum.

    ``regime`` names indicator variables (transportability/selection) that are
    implicit constants of a sampling regime; they are never reported as free.
    """
    return _free(e) - frozenset(regime)


def _free(e):
    if isinstance(e, Atom):
        return e.term.variables
    if isinstance(e, Sum):
        return _free(e.body) - frozenset(e.bound)
    out = frozenset()
    for c in children(e):
        out |= _free(c)
    return out


def well_formed(e: Expr) -> bool:
    """Sums bind variables that occur in their body, and never rebind on a path."""

    def walk(node, bound):
        if isinstance(node, Sum):
            if set(node.bound) & bound:
                return False
            if not set(node.bound) <= variables(node.body):
                return False
            bound = bound | set(node.bound)
        return all(walk(c, bound) for c in children(node))

    return walk(e, frozenset())


# -- canonical form -------------------------------------------------------


def _key(e: Expr) -> str:
    return json.dumps(to_json(e), separators=(",", ":"))


def canonicalize(e: Expr) -> Expr:
    """Normal form: flat products with sorted factors, sums hoisted and merged.

    A sum is pulled out of a product only when its bound variables do not
    occur in the sibling factors, so no variable is captured.
    """
    if isinstance(e, Atom):
        return e
    if isinstance(e, Quotient):
        return Quotient(canonicalize(e.numerator), canonicalize(e.denominator))
    if isinstance(e, Sum):
        body = canonicalize(e.body)
        if isinstance(body, Sum) and not set(body.bound) & set(e.bound):
            return Sum(e.bound + body.bound, body.body)
        return Sum(e.bound, body)

    factors = []
    for f in e.factors:
        f = canonicalize(f)
        factors.extend(f.factors if isinstance(f, Product) else [f])
    bound: list[str] = []
    changed = True
    while changed:
        changed = False
        for i, f in enumerate(factors):
            if not isinstance(f, Sum):
                continue
            others = set()
            for j, g in enumerate(factors):
                if j != i:
                    others |= variables(g)
            if others & set(f.bound) or set(bound) & set(f.bound):
                continue
            bound.extend(f.bound)
            body = f.body
            factors = factors[:i] + factors[i + 1 :] + (list(body.factors) if isinstance(body, Product) else [body])
            changed = True
            break
    factors.sort(key=_key)
    prod = factors[0] if len(factors) == 1 else Product(tuple(factors))
    return Sum(tuple(bound), prod) if bound else prod


def equivalent_canonical(a: Expr, b: Expr) -> bool:
    return canonicalize(a) == canonicalize(b)


# -- evaluation -----------------------------------------------------------


class DistOracle(Protocol):
    """Answers atom queries as a (joint mass, stratum mass) pair."""

    def atom(self, term: DistTerm, assignment: Assignment) -> tuple[float, float]: ...

    def cardinality(self, var: str) -> int: ...


@dataclass
class Diagnostics:
    """Zero-probability strata met during evaluation (0/0 taken as 0)."""

    degenerate: list = field(default_factory=list)

    @property
    def flagged(self) -> bool:
        return bool(self.degenerate)


def evaluate(e: Expr, source: DistOracle, a: Assignment, diagnostics: Diagnostics | None = None) -> float:
    """Numeric value of ``e`` with atoms answered by ``source``.

    ``a`` must assign every free variable. A quotient 0/0 evaluates to 0; the
    offending subexpression and assignment are recorded in ``diagnostics``
    when that value actually influences the result. Any nonzero value over a
    zero denominator raises :class:`EvaluationError`.
    """
    missing = _free(e) - set(a)
    if missing:
        raise ExprError(f"assignment misses free variables {sorted(missing)}")
    value, flag = _eval(e, source, dict(a))
    if flag is not None and diagnostics is not None:
        diagnostics.degenerate.append(flag)
    return value


def _eval(e, source, a):
    # returns (value, degenerate-flag or None)
    if isinstance(e, Atom):
        num, den = source.atom(e.term, a)
        if den == 0:
            if num != 0:
                raise EvaluationError("nonzero mass in an empty stratum", e, a)
            return 0.0, (e, dict(a))
        return num / den, None
    if isinstance(e, Product):
        value = 1.0
        flag = None
        clean_zero = False
        for f in e.factors:
            v, fl = _eval(f, source, a)
            value *= v
            if fl is None:
                clean_zero = clean_zero or v == 0
            elif flag is None:
                flag = fl
        return value, (None if clean_zero else flag)
    if isinstance(e, Quotient):
        num, fn = _eval(e.numerator, source, a)
        den, fd = _eval(e.denominator, source, a)
        if den == 0:
            if num != 0:
                raise EvaluationError("nonzero numerator over zero denominator", e, a)
            return 0.0, fn or fd or (e, dict(a))
        return num / den, fn or fd
    total = 0.0
    flag = None
    saved = {v: a.get(v) for v in e.bound}
    ranges = [range(source.cardinality(v)) for v in e.bound]
    for values in itertools.product(*ranges):
        for v, x in zip(e.bound, values):
            a[v] = x
        val, fl = _eval(e.body, source, a)
        total += val
        if flag is None and fl is not None:
            flag = fl
    for v, x in saved.items():
        if x is None:
            del a[v]
        else:
            a[v] = x
    return total, flag


# -- adjustment recognizer -------------------------------------------------


def is_adjustment(e: Expr, query: DistTerm) -> frozenset[str] | None:
    """Adjustment set Z if ``e`` has the form sum_Z P(Y|X,Z) P(Z), else None."""
    e = canonicalize(e)
    y, x = set(query.outcomes), set(query.interventions)

    def outcome_atom(node, z):
        return (
            isinstance(node, Atom)
            and set(node.term.outcomes) == y
            and not node.term.interventions
            and set(node.term.conditions) == x | z
        )

    if not isinstance(e, Sum):
        return frozenset() if outcome_atom(e, set()) else None
    z = set(e.bound)
    if z & (x | y) or not isinstance(e.body, Product) or len(e.body.factors) != 2:
        return None
    f1, f2 = e.body.factors
    for main, marg in ((f1, f2), (f2, f1)):
        if (
            outcome_atom(main, z)
            and isinstance(marg, Atom)
            and set(marg.term.outcomes) == z
            and not marg.term.interventions
            and not marg.term.conditions
        ):
            return frozenset(z)
    return None


# -- rendering ------------------------------------------------------------


def _ordered(names: Sequence[str], order) -> list[str]:
    if order is None:
        return list(names)
    return sorted(names, key=lambda v: (order.get(v, len(order)), v))


def render_term(t: DistTerm, style: str = "text", order: Mapping[str, int] | None = None) -> str:
    p = "p" if style == "latex" else "P"
    parts = []
    if t.interventions:
        parts.append("do(" + ",".join(_ordered(t.interventions, order)) + ")")
    parts.extend(_ordered(t.conditions, order))
    head = ",".join(_ordered(t.outcomes, order))
    return f"{p}({head}|{','.join(parts)})" if parts else f"{p}({head})"


def render(e: Expr, style: str = "latex", order: Mapping[str, int] | Sequence[str] | None = None) -> str:
    """Deterministic string form of ``e``.

    ``latex`` follows the do-search output grammar (``\\sum_{..}\\left(..\\right)``,
    nested products grouped with ``\\left( \\right)``); ``json`` is a lossless
    tree encoding readable by :func:`from_json`; ``text`` is for humans.
    ``order`` fixes how variables are listed inside terms and sums.
    """
    if order is not None and not isinstance(order, Mapping):
        order = {v: i for i, v in enumerate(order)}
    if style == "json":
        return json.dumps(to_json(e))
    if style == "latex":
        return _latex(e, order)
    if style == "text":
        return _text(e, order)
    raise ValueError(f"unknown style {style!r}")


def _latex(e, order):
    if isinstance(e, Atom):
        return render_term(e.term, "latex", order)
    if isinstance(e, Sum):
        return "\\sum_{" + ",".join(_ordered(e.bound, order)) + "}\\left(" + _latex(e.body, order) + "\\right)"
    if isinstance(e, Quotient):
        return "\\frac{" + _latex(e.numerator, order) + "}{" + _latex(e.denominator, order) + "}"
    out = []
    for f in e.factors:
        s = _latex(f, order)
        out.append("\\left(" + s + "\\right)" if isinstance(f, Product) else s)
    return "".join(out)


def _text(e, order):
    if isinstance(e, Atom):
        return render_term(e.term, "text", order)
    if isinstance(e, Sum):
        return "sum_{" + ",".join(_ordered(e.bound, order)) + "} [" + _text(e.body, order) + "]"
    if isinstance(e, Quotient):
        return "(" + _text(e.numerator, order) + ") / (" + _text(e.denominator, order) + ")"
    out = []
    for f in e.factors:
        s = _text(f, order)
        out.append("(" + s + ")" if isinstance(f, Product) else s)
    return " * ".join(out)


def to_json(e: Expr) -> dict:
    if isinstance(e, Atom):
        t = e.term
        return {
            "type": "atom",
            "outcomes": list(t.outcomes),
            "interventions": list(t.interventions),
            "conditions": list(t.conditions),
        }
    if isinstance(e, Product):
        return {"type": "product", "factors": [to_json(f) for f in e.factors]}
    if isinstance(e, Quotient):
        return {"type": "quotient", "numerator": to_json(e.numerator), "denominator": to_json(e.denominator)}
    return {"type": "sum", "bound": list(e.bound), "body": to_json(e.body)}


def from_json(data) -> Expr:
    if isinstance(data, str):
        data = json.loads(data)
    kind = data.get("type")
    if kind == "atom":
        return Atom(DistTerm(data["outcomes"], data["interventions"], data["conditions"]))
    if kind == "product":
        return Product(tuple(from_json(f) for f in data["factors"]))
    if kind == "quotient":
        return Quotient(from_json(data["numerator"]), from_json(data["denominator"]))
    if kind == "sum":
        return Sum(tuple(data["bound"]), from_json(data["body"]))
    raise ExprError(f"unknown node type {kind!r}")


# -- parsing --------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(\\sum_\{)|(\\frac\{)|(\\left\()|(\\right\))|(\}\{)|(do\()|([pP]\()|([A-Za-z0-9_]+)|([|,(){}]))"
)


def _tokenize(text: str) -> list[str]:
    pos = 0
    out = []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ExprError(f"unexpected input at {text[pos:pos + 20]!r}")
        out.append(m.group(m.lastindex))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return out


class _Parser:
    def __init__(self, tokens):
        self.toks = tokens
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, expected=None):
        tok = self.peek()
        if tok is None or (expected is not None and tok != expected):
            raise ExprError(f"expected {expected!r}, found {tok!r}")
        self.i += 1
        return tok

    def names(self, closer):
        out = []
        while True:
            tok = self.take()
            if not re.fullmatch(r"[A-Za-z0-9_]+", tok):
                raise ExprError(f"expected a variable name, found {tok!r}")
            out.append(tok)
            nxt = self.take()
            if nxt == closer:
                return out
            if nxt != ",":
                raise ExprError(f"expected ',' or {closer!r}, found {nxt!r}")

    def term(self):
        self.take()  # p(
        outcomes = self.names_until({"|", ")"})
        inter, cond = [], []
        if self.take() == "|":
            while True:
                if self.peek() == "do(":
                    self.take()
                    inter.extend(self.names(")"))
                else:
                    cond.append(self.take())
                nxt = self.take()
                if nxt == ")":
                    break
                if nxt != ",":
                    raise ExprError(f"expected ',' or ')', found {nxt!r}")
        return DistTerm(outcomes, inter, cond)

    def names_until(self, stops):
        out = [self.take()]
        while self.peek() == ",":
            self.take()
            out.append(self.take())
        if self.peek() not in stops:
            raise ExprError(f"unexpected token {self.peek()!r} in term")
        return out

    def factor(self):
        tok = self.peek()
        if tok in ("p(", "P("):
            return Atom(self.term())
        if tok == "\\sum_{":
            self.take()
            bound = self.names("}")
            self.take("\\left(")
            body = self.product()
            self.take("\\right)")
            return Sum(tuple(bound), body)
        if tok == "\\frac{":
            self.take()
            num = self.product()
            self.take("}{")
            den = self.product()
            self.take("}")
            return Quotient(num, den)
        if tok == "\\left(":
            self.take()
            inner = self.product()
            self.take("\\right)")
            return inner
        raise ExprError(f"unexpected token {tok!r}")

    def product(self):
        factors = [self.factor()]
        while self.peek() in ("p(", "P(", "\\sum_{", "\\frac{", "\\left("):
            factors.append(self.factor())
        return factors[0] if len(factors) == 1 else Product(tuple(factors))


def parse_latex(text: str) -> Expr:
    """Parse the latex grammar produced by :func:`render` (and by do-search)."""
    p = _Parser(_tokenize(text.strip().strip('"')))
    e = p.product()
    if p.peek() is not None:
        raise ExprError(f"trailing input starting at {p.peek()!r}")
    return e


def parse(text: str, style: str = "latex") -> Expr:
    if style == "json":
        return from_json(text)
    if style == "latex":
        return parse_latex(text)
    raise ValueError(f"no parser for style {style!r}")
