"""Command-line front end.

    causalfuse identify PROBLEM [--style latex] [--trace out.json]
    causalfuse trapdoors PROBLEM
    causalfuse estimate PROBLEM --data rct.csv --data survey.csv --trapdoor Z2=1
    causalfuse simulate [--scenarios sweep.ini] [--workers 4]

PROBLEM is a problem file or the name of a bundled problem.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from . import library, scmsim, trapdoor
from .dsl import DslError, ProblemSpec, parse_problem
from .estimate import Dataset, EstimationError, TableOracle, fit, plug_in
from .identify import FOUND, SearchBudget, search
from .symexpr import ExprError, MissingInputError, parse, render

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_PARSE = 2
EXIT_UNKNOWN = 3
EXIT_ESTIMATION = 4


class _ParseFailure(Exception):
    pass


def _load_problem(ref: str) -> ProblemSpec:
    path = Path(ref)
    if path.is_file():
        text = path.read_text()
    elif ref in library.PROBLEMS:
        text = library.PROBLEMS[ref]
    else:
        raise _ParseFailure(f"{ref}: no such file or bundled problem (bundled: {', '.join(library.PROBLEMS)})")
    try:
        return parse_problem(text)
    except DslError as exc:
        raise _ParseFailure(f"{ref}: {exc}") from None


def _pairs(items, what) -> dict[str, int]:
    out = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise _ParseFailure(f"{what} must look like VAR=VALUE, got {item!r}")
        try:
            out[name.strip()] = int(value)
        except ValueError:
            raise _ParseFailure(f"{what} value must be an integer, got {item!r}") from None
    return out


def _budget(args) -> SearchBudget:
    return SearchBudget(args.budget_exprs, args.budget_depth, args.time_limit)


def _functional(args, spec: ProblemSpec):
    """The formula given with --formula, else the one found by search."""
    if getattr(args, "formula", None):
        try:
            return parse(args.formula, "latex"), None
        except ExprError as exc:
            raise _ParseFailure(f"--formula: {exc}") from None
    res = search(spec.graph, spec.inputs, spec.query, _budget(args), args.heuristic)
    return (res.derivation.result if res.status == FOUND else None), res


def cmd_identify(args, out) -> int:
    spec = _load_problem(args.problem)
    res = search(spec.graph, spec.inputs, spec.query, _budget(args), args.heuristic)
    if res.status != FOUND:
        print(
            f"no identifying formula found ({res.status}; {res.explored} terms, {res.elapsed:.2f}s)",
            file=sys.stderr,
        )
        return EXIT_UNKNOWN
    d = res.derivation
    if args.trace:
        Path(args.trace).write_text(d.dumps())
    if args.style == "json":
        print(json.dumps(json.loads(render(d.result, "json")), indent=2), file=out)
    else:
        print(render(d.result, args.style, spec.rank), file=out)
    return EXIT_OK


def cmd_trapdoors(args, out) -> int:
    spec = _load_problem(args.problem)
    e, res = _functional(args, spec)
    if e is None:
        print(f"no identifying formula found ({res.status})", file=sys.stderr)
        return EXIT_UNKNOWN
    scm = scmsim.DiscreteScm.random(spec.graph, scmsim.rng_for(args.seed, 0x7D))
    oracle = scmsim.exact_oracle(scm, spec.inputs)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = trapdoor.analyze(e, spec.graph, spec.inputs, spec.query, oracle, _budget(args), args.tol)
    payload = report.to_json()
    payload["functional"] = render(e, "latex", spec.rank)
    print(json.dumps(payload, indent=2), file=out)
    return EXIT_OK


def cmd_estimate(args, out) -> int:
    spec = _load_problem(args.problem)
    if len(args.data) != len(spec.inputs):
        raise _ParseFailure(f"expected {len(spec.inputs)} --data files (one per declared input), got {len(args.data)}")
    td = _pairs(args.trapdoor, "--trapdoor")
    target = _pairs(args.target, "--target")
    for v in list(spec.query.outcomes) + list(spec.query.interventions) + list(spec.query.conditions):
        target.setdefault(v, 1)
    e, res = _functional(args, spec)
    if e is None:
        print(f"no identifying formula found ({res.status})", file=sys.stderr)
        return EXIT_UNKNOWN
    tables = {}
    for term, path in zip(spec.inputs, args.data):
        try:
            tables[term] = fit(Dataset.from_csv(path, term), args.smoothing)
        except (OSError, ValueError) as exc:
            raise _ParseFailure(f"{path}: {exc}") from None
    try:
        est = plug_in(e, TableOracle(tables), td, target, spec.regime, allow_degenerate=args.allow_degenerate)
    except (EstimationError, MissingInputError) as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except ValueError as exc:
        raise _ParseFailure(str(exc)) from None
    print(
        json.dumps(
            {
                "functional": render(e, "latex", spec.rank),
                "estimate": est.value,
                "assignment": est.assignment,
                "degenerate_strata": [s for _, s in est.degenerate],
            },
            indent=2,
        ),
        file=out,
    )
    return EXIT_OK


def cmd_simulate(args, out) -> int:
    if args.scenarios:
        try:
            cfg = scmsim.load_sweep(args.scenarios)
        except (OSError, ValueError, KeyError) as exc:
            raise _ParseFailure(f"{args.scenarios}: {exc}") from None
    else:
        cfg = scmsim.SweepConfig((100, 200, 400, 1000), (50, 100, 200, 1000, 10000))
    if args.replications:
        cfg = replace(cfg, replications=args.replications)
    if args.skip_degenerate:
        cfg = replace(cfg, policy="skip")
    elif args.degenerate:
        cfg = replace(cfg, policy=args.degenerate)
    scm = scmsim.gene_therapy_scm()
    try:
        results = scmsim.run_sweep(scm, cfg, library.formula("gene_therapy"), workers=args.workers, seed=args.seed)
    except EstimationError as exc:
        print(f"estimation failed: {exc} (try --skip-degenerate)", file=sys.stderr)
        return EXIT_ESTIMATION
    if args.output:
        scmsim.write_table(results, args.output, cfg.trapdoor)
    else:
        scmsim.write_table(results, out, cfg.trapdoor)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="causalfuse", description="Causal effect identification from multiple data sources.")
    sub = p.add_subparsers(dest="command", required=True)

    def search_flags(sp):
        sp.add_argument("problem", help="problem file or bundled problem name")
        sp.add_argument("--budget-exprs", type=int, default=1_000_000, help="maximum number of derived terms")
        sp.add_argument("--budget-depth", type=int, default=1000, help="maximum derivation depth")
        sp.add_argument("--time-limit", type=float, default=60.0, help="seconds")
        sp.add_argument("--heuristic", action="store_true", help="best-first instead of breadth-first search")

    sp = sub.add_parser("identify", help="derive an identifying formula")
    search_flags(sp)
    sp.add_argument("--style", choices=("text", "latex", "json"), default="latex")
    sp.add_argument("--trace", metavar="PATH", help="write the derivation as JSON")
    sp.set_defaults(func=cmd_identify)

    sp = sub.add_parser("trapdoors", help="classify trapdoor variables of the functional")
    search_flags(sp)
    sp.add_argument("--formula", help="latex functional to analyze instead of the derived one")
    sp.add_argument("--seed", type=int, default=0, help="seed of the random surrogate model")
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.set_defaults(func=cmd_trapdoors)

    sp = sub.add_parser("estimate", help="plug-in estimate from CSV data")
    search_flags(sp)
    sp.add_argument("--data", action="append", default=[], metavar="CSV", help="one per declared input, in order")
    sp.add_argument("--trapdoor", action="append", metavar="VAR=VALUE")
    sp.add_argument("--target", action="append", metavar="VAR=VALUE", help="query values (default 1)")
    sp.add_argument("--formula", help="latex functional to use instead of the derived one")
    sp.add_argument("--smoothing", type=float, default=0.0, help="pseudo-count added to every cell")
    sp.add_argument("--allow-degenerate", action="store_true", help="read 0/0 as 0 instead of failing")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("simulate", help="bias/RMSE sweep on the threshold model")
    sp.add_argument("--scenarios", metavar="PATH", help="INI sweep file (default: the full 4x5 grid)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--replications", type=int)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--skip-degenerate", action="store_true", help="drop replications with an empty stratum")
    sp.add_argument("--degenerate", choices=scmsim.DEGENERATE_POLICIES)
    sp.add_argument("--output", "-o", metavar="CSV")
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_PARSE
    try:
        return args.func(args, out)
    except _ParseFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
