"""Worked problems: graphs, inputs and reference identifying formulas.

Each entry is a problem-file string (see :mod:`causalfuse.dsl`) plus the
expected functional in the latex grammar. They double as test fixtures and
as starting points for the command-line tool.
"""

from __future__ import annotations

from .dsl import ProblemSpec, parse_problem
from .symexpr import Expr, parse_latex

BASIC_TRAPDOOR = """
graph:
  W -> Z
  Z -> X
  X -> Y
  Y <-> W
  W <-> X
data:
  P(W,Z,X,Y)
query:
  P(Y|do(X))
"""

GENE_THERAPY = """
transportability: T
selection: S

graph:
  T -> Z1
  Z1 -> X
  Z1 -> Z3
  Z1 -> Y
  X -> Y
  X -> Z2
  Z2 -> Z3
  Z3 -> S
  X <-> Z3
  Y <-> Z3
data:
  P(Y,Z1,Z2,Z3|do(X),T,S)
  P(Z1,Z2,Z3,X)
query:
  P(Y|do(X))
"""

GENE_THERAPY_EXTENDED = """
transportability: T
selection: S

graph:
  T -> Z1
  Z1 -> X
  Z1 -> Z3
  Z1 -> Y
  X -> Y
  X -> Z2
  Z2 -> Z3
  Z3 -> S
  X <-> Z3
  Y <-> Z3
  X <-> Y
  Z1 <-> X
  Z2 <-> Y
data:
  P(Y,Z1,Z2,Z3|do(X),T,S)
  P(Z1,Z2,Z3,X)
query:
  P(Y|do(X))
"""

_TWO_ARM_GRAPH = """
  X1 -> Z1
  X1 -> Y
  Z1 -> Z2
  Z2 -> S
  X2 -> Z3
  X2 -> Y
  Z3 -> Z4
  Z4 -> S
  X1 <-> Z4
  X2 <-> Z2
  Z2 <-> Y
  Z4 <-> Y
"""

_TWO_ARM_EXTRA = """
  X1 <-> X2
  X1 <-> Y
  X2 <-> Y
  Z1 <-> Z3
  X1 -> S
  X2 -> S
  Z1 -> S
  Z3 -> S
"""

TWO_ARM = (
    "selection: S\n\ngraph:"
    + _TWO_ARM_GRAPH
    + """data:
    P(Y,Z1,Z2,Z3,Z4 | do(X1,X2),S)
    P(Z1,Z2)
    P(Z3,Z4)
query:
  P(Y|do(X1,X2))
"""
)

TWO_ARM_OBSERVATIONAL = (
    "selection: S\n\ngraph:"
    + _TWO_ARM_GRAPH
    + """data:
  P(Z2,Z4)
  P(Y,Z1,Z2,Z3,Z4,X1,X2|S)
query:
  P(Y|do(X1,X2))
"""
)

TWO_ARM_EXTENDED = (
    "selection: S\n\ngraph:"
    + _TWO_ARM_GRAPH
    + _TWO_ARM_EXTRA
    + """data:
    P(Y,Z1,Z2,Z3,Z4 | do(X1,X2),S)
    P(Z1,Z2)
    P(Z3,Z4)
query:
  P(Y|do(X1,X2))
"""
)

# reference functionals, in the latex grammar of causalfuse.symexpr
FORMULAS = {
    "basic_trapdoor": r"\frac{\sum_{W}\left(p(W)p(X|Z,W)p(Y|X,Z,W)\right)}{\sum_{W}\left(p(W)p(X|Z,W)\right)}",
    "gene_therapy": r"\sum_{Z1,Z3}\left(p(Y|do(X),Z1,Z3,Z2,T,S)\sum_{X}\left(p(Z1,X)p(Z3|Z1,X,Z2)\right)\right)",
    "gene_therapy_extended": (
        r"\sum_{Z1,Z3,Z2}\left(p(Y|do(X),Z1,Z3,Z2,T,S)p(Z2|X)"
        r"\sum_{X}\left(p(Z1,X)p(Z3|Z1,X,Z2)\right)\right)"
    ),
    "two_arm": r"\sum_{Z2,Z4}\left(p(Z4|Z3)\left(p(Z2|Z1)p(Y|do(X1,X2),Z1,Z2,Z3,Z4,S)\right)\right)",
    "two_arm_observational": (
        r"\frac{\sum_{Z1,Z2,Z3,Z4}\left(p(Z2,Z4)p(Y,Z1,Z3,X1,X2|Z2,Z4,S)\right)}"
        r"{\sum_{Y}\left(\sum_{Z1,Z2,Z3,Z4}\left(p(Z2,Z4)p(Y,Z1,Z3,X1,X2|Z2,Z4,S)\right)\right)}"
    ),
    "two_arm_extended": r"\sum_{Z2,Z4}\left(p(Z4|Z3)\left(p(Z2|Z1)p(Y|do(X1,X2),Z1,Z2,Z3,Z4,S)\right)\right)",
}

PROBLEMS = {
    "basic_trapdoor": BASIC_TRAPDOOR,
    "gene_therapy": GENE_THERAPY,
    "gene_therapy_extended": GENE_THERAPY_EXTENDED,
    "two_arm": TWO_ARM,
    "two_arm_observational": TWO_ARM_OBSERVATIONAL,
    "two_arm_extended": TWO_ARM_EXTENDED,
}

# variables a user must fix in each reference functional
TRAPDOORS = {
    "basic_trapdoor": {"Z"},
    "gene_therapy": {"Z2"},
    "gene_therapy_extended": set(),
    "two_arm": {"Z1", "Z3"},
    "two_arm_observational": set(),
    "two_arm_extended": {"Z1", "Z3"},
}


def problem(name: str) -> ProblemSpec:
    return parse_problem(PROBLEMS[name])


def formula(name: str) -> Expr:
    return parse_latex(FORMULAS[name])
