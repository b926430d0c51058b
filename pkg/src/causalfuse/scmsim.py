"""Structural causal models: sampling, exact distributions and the replication harness.

Two model families are supported.

:class:`Scm` has standard-normal exogenous terms and binary endogenous
variables of threshold form ``V = I(U_V < offset + sum(w * parent))``, where
the weighted terms may include shared exogenous variables (unobserved
confounders). Exact distributions are obtained by integrating the shared
terms out with Gauss-Hermite quadrature; private noise terms integrate to
normal CDFs in closed form.

:class:`DiscreteScm` is a finite latent-variable model given by conditional
probability tables. Its joints are computed by full enumeration; random
instances over a mixed graph serve as surrogate ground truth.
"""

from __future__ import annotations

import concurrent.futures as cf
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.special import ndtr

from .admg import Admg
from .estimate import ContingencyTable, Dataset, EstimationError, TableOracle, fit, plug_in
from .symexpr import DistTerm, Expr, MissingInputError, render_term


class GenerationError(RuntimeError):
    """Data cannot be generated as requested (e.g. nothing survives selection)."""


def rng_for(*key: int) -> np.random.Generator:
    """Counter-based generator for one (seed, ..., stream) key."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


# -- joint distributions --------------------------------------------------


@dataclass(frozen=True)
class Joint:
    """Probability array over ``variables`` (all binary unless stated)."""

    variables: tuple[str, ...]
    probs: np.ndarray

    def marginal(self, names: Sequence[str]) -> np.ndarray:
        drop = tuple(i for i, v in enumerate(self.variables) if v not in names)
        arr = self.probs.sum(axis=drop) if drop else self.probs
        kept = [v for v in self.variables if v in names]
        return np.moveaxis(arr, [kept.index(v) for v in names], range(len(names))) if names else arr

    def prob(self, event: Mapping[str, int], given: Mapping[str, int] | None = None) -> float:
        given = dict(given or {})
        both = {**given, **event}
        num = float(self.marginal(list(both))[tuple(both.values())]) if both else 1.0
        den = float(self.marginal(list(given))[tuple(given.values())]) if given else 1.0
        return num / den


class JointOracle:
    """Atom answers from one joint distribution.

    Interventions named in an atom must be the ones the joint was computed
    under; they are then treated as constants.
    """

    def __init__(self, joint: Joint, intervention: Mapping[str, int] | None = None):
        self.joint = joint
        self.intervention = dict(intervention or {})
        self.table = ContingencyTable(joint.variables, joint.probs.shape, joint.probs)

    def atom(self, term: DistTerm, assignment):
        for v in term.interventions:
            if v not in self.intervention:
                raise MissingInputError(f"oracle was not computed under do({v})")
            if assignment.get(v, self.intervention[v]) != self.intervention[v]:
                raise MissingInputError(f"oracle fixes {v}={self.intervention[v]}")
        cols = set(self.joint.variables)
        given = {v: assignment[v] for v in term.conditions if v in cols}
        num = self.table.mass({**given, **{v: assignment[v] for v in term.outcomes}})
        return num, self.table.mass(given)

    def cardinality(self, var: str) -> int:
        return self.joint.probs.shape[self.joint.variables.index(var)]

    def prob(self, event, given=None) -> float:
        return self.joint.prob(event, given)


# -- threshold-Gaussian models --------------------------------------------


@dataclass(frozen=True)
class Threshold:
    """``I(noise < offset + sum(weights[k] * value_k))``; no noise means a comparison with 0."""

    noise: str | None
    offset: float = 0.0
    weights: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class Scm:
    exogenous: tuple[str, ...]
    endogenous: tuple[tuple[str, Threshold], ...]
    domains: Mapping[str, Mapping[str, Threshold]] = field(default_factory=dict)

    def __post_init__(self):
        seen = set(self.exogenous)
        names = set()
        for name, rule in self.endogenous:
            refs = set(rule.weights) | ({rule.noise} if rule.noise else set())
            unknown = refs - seen
            if unknown:
                raise ValueError(f"{name} refers to {sorted(unknown)} before they are defined")
            seen.add(name)
            names.add(name)
        for dom, overrides in self.domains.items():
            for name, rule in overrides.items():
                if name not in names:
                    raise ValueError(f"domain {dom!r} overrides unknown variable {name!r}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.endogenous)

    def assignments(self, domain: str | None = None) -> list[tuple[str, Threshold]]:
        overrides = self.domains.get(domain, {}) if domain else {}
        if domain and domain not in self.domains:
            raise ValueError(f"unknown domain {domain!r}")
        return [(n, overrides.get(n, r)) for n, r in self.endogenous]

    def cardinality(self, var: str) -> int:
        return 2


def gene_therapy_scm() -> Scm:
    """The binary-threshold model with a shifted background distribution in domain T."""
    exo = ("U_Z1", "U_Z2", "U_Z3", "U_X", "U_Y", "U_XZ3", "U_YZ3", "U_S")
    endo = (
        ("Z1", Threshold("U_Z1", 0.0)),
        ("X", Threshold("U_X", 0.0, {"Z1": 1.0, "U_XZ3": 1.0})),
        ("Z2", Threshold("U_Z2", 0.0, {"X": 1.0})),
        ("Z3", Threshold("U_Z3", 0.0, {"Z1": 1.0, "Z2": 1.0, "U_XZ3": 1.0, "U_YZ3": 1.0})),
        ("Y", Threshold("U_Y", -1.0, {"Z1": 2.0, "X": 1.0, "U_YZ3": 1.0})),
        ("S", Threshold("U_S", 0.0, {"Z3": 1.0})),
    )
    return Scm(exo, endo, {"T": {"Z1": Threshold("U_Z1", 1.0)}})


def _shared_exogenous(rules, exogenous) -> list[str]:
    """Exogenous terms that enter more than one assignment or appear as a weighted term."""
    exo = set(exogenous)
    uses: dict[str, int] = {}
    shared = set()
    for _, r in rules:
        if r.noise:
            uses[r.noise] = uses.get(r.noise, 0) + 1
        shared |= set(r.weights) & exo
    shared |= {k for k, c in uses.items() if c > 1}
    return sorted(shared)


def sample(
    scm: Scm,
    n: int,
    rng: np.random.Generator | int,
    domain: str | None = None,
    intervention: Mapping[str, int] | None = None,
    randomize: Mapping[str, float] | None = None,
) -> dict[str, np.ndarray]:
    """``n`` independent draws of every endogenous variable.

    ``intervention`` fixes variables to constants; ``randomize`` replaces the
    assignment of a variable by an independent Bernoulli(p) draw.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rng = rng if isinstance(rng, np.random.Generator) else rng_for(rng)
    intervention = dict(intervention or {})
    randomize = dict(randomize or {})
    u = rng.standard_normal((len(scm.exogenous), n))
    values: dict[str, np.ndarray] = dict(zip(scm.exogenous, u))
    coin = rng.random((len(randomize), n)) if randomize else None
    for name, rule in scm.assignments(domain):
        if name in intervention:
            values[name] = np.full(n, int(intervention[name]), dtype=np.int64)
            continue
        if name in randomize:
            values[name] = (coin[list(randomize).index(name)] < randomize[name]).astype(np.int64)
            continue
        thr = np.full(n, float(rule.offset))
        for k, w in rule.weights.items():
            thr = thr + w * values[k]
        noise = values[rule.noise] if rule.noise else 0.0
        values[name] = (noise < thr).astype(np.int64)
    return {name: values[name] for name in scm.names}


def to_dataset(values: Mapping[str, np.ndarray], names: Sequence[str], term: DistTerm, provenance: str) -> Dataset:
    rows = np.stack([values[v] for v in names], axis=1)
    return Dataset(tuple(names), (2,) * len(names), rows, term, provenance)


RCT_TERM = DistTerm(("Y", "Z1", "Z2", "Z3"), ("X",), ("T", "S"))
SURVEY_TERM = DistTerm(("Z1", "Z2", "Z3", "X"))


@dataclass(frozen=True)
class RctDesign:
    """How the trial assigns treatment and counts its sample size."""

    treatment: str = "X"
    p_treat: float = 1.0
    domain: str | None = "T"
    selection: str | None = "S"
    count_after_selection: bool = True
    apply_selection: bool = True


def rct_sample(scm: Scm, n: int, rng, design: RctDesign = RctDesign(), columns=("Y", "Z1", "Z2", "Z3", "X")) -> Dataset:
    """Randomized trial in the experimental domain, keeping rows with selection = 1.

    With ``count_after_selection`` the draw continues until ``n`` rows are
    retained; otherwise ``n`` participants are enrolled and the survivors kept.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rng = rng if isinstance(rng, np.random.Generator) else rng_for(rng)
    term = DistTerm(
        [c for c in columns if c != design.treatment],
        (design.treatment,),
        tuple(x for x in (design.domain, design.selection) if x),
    )
    rand = {design.treatment: design.p_treat}
    if design.selection is None or not design.apply_selection:
        return to_dataset(sample(scm, n, rng, design.domain, randomize=rand), columns, term, "RCT")
    if not design.count_after_selection:
        vals = sample(scm, n, rng, design.domain, randomize=rand)
        keep = vals[design.selection] == 1
        if not keep.any():
            raise GenerationError("no enrolled participant passed selection")
        return to_dataset({k: v[keep] for k, v in vals.items()}, columns, term, "RCT")
    chunks = []
    kept = 0
    drawn = 0
    batch = max(2 * n, 64)
    while kept < n:
        vals = sample(scm, batch, rng, design.domain, randomize=rand)
        keep = vals[design.selection] == 1
        chunks.append({k: v[keep] for k, v in vals.items()})
        kept += int(keep.sum())
        drawn += batch
        if kept == 0 and drawn >= 100 * batch:
            raise GenerationError("selection retains no rows")
    merged = {k: np.concatenate([c[k] for c in chunks])[:n] for k in chunks[0]}
    return to_dataset(merged, columns, term, "RCT")


def survey_sample(scm: Scm, n: int, rng, columns=("Z1", "Z2", "Z3", "X")) -> Dataset:
    """Observational sample from the target population, without selection."""
    rng = rng if isinstance(rng, np.random.Generator) else rng_for(rng)
    return to_dataset(sample(scm, n, rng), columns, DistTerm(columns), "survey")


def exact_joint(
    scm: Scm,
    intervention: Mapping[str, int] | None = None,
    domain: str | None = None,
    nodes: int = 64,
) -> Joint:
    """Joint of the endogenous variables, shared exogenous terms integrated out by quadrature."""
    intervention = dict(intervention or {})
    rules = scm.assignments(domain)
    names = [n for n, _ in rules]
    shared = _shared_exogenous(rules, scm.exogenous)
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / math.sqrt(2 * math.pi)
    grids = np.meshgrid(*([x] * len(shared)), indexing="ij") if shared else []
    weight = np.ones((nodes,) * len(shared)) if shared else np.ones(())
    for k in range(len(shared)):
        shape = [1] * len(shared)
        shape[k] = nodes
        weight = weight * w.reshape(shape)
    u = {name: grid.ravel() for name, grid in zip(shared, grids)}
    weight = weight.ravel()
    m = weight.size
    probs = np.zeros((2,) * len(names))
    for config in itertools.product((0, 1), repeat=len(names)):
        vals = dict(zip(names, config))
        if any(vals[k] != v for k, v in intervention.items()):
            continue
        dens = np.ones(m)
        for name, rule in rules:
            if name in intervention:
                continue
            thr = np.full(m, float(rule.offset))
            for k, wt in rule.weights.items():
                thr = thr + wt * (u[k] if k in u else vals[k])
            if rule.noise is None or rule.noise in u:
                noise = u[rule.noise] if rule.noise else 0.0
                p1 = (noise < thr).astype(float)
            else:
                p1 = ndtr(thr)
            dens = dens * (p1 if vals[name] else 1.0 - p1)
        probs[config] = float(dens @ weight)
    return Joint(tuple(names), probs)


def mc_joint(scm: Scm, intervention=None, domain=None, n: int = 10_000_000, seed: int = 0, chunk: int = 1_000_000) -> Joint:
    """Monte Carlo estimate of the same joint (independent check on the quadrature)."""
    names = scm.names
    counts = np.zeros(2 ** len(names))
    rng = rng_for(seed, 0xC0FFEE)
    left = n
    while left > 0:
        k = min(chunk, left)
        vals = sample(scm, k, rng, domain, intervention)
        flat = np.ravel_multi_index(tuple(vals[v] for v in names), (2,) * len(names))
        counts += np.bincount(flat, minlength=counts.size)
        left -= k
    return Joint(tuple(names), (counts / n).reshape((2,) * len(names)))


def oracle(scm, intervention=None, n_oracle: int = 10_000_000, seed: int = 0, domain=None, method: str = "quadrature"):
    """Ground-truth oracle under ``intervention`` in the target (or given) domain."""
    if isinstance(scm, DiscreteScm):
        return JointOracle(scm.joint(intervention), intervention)
    if method == "quadrature":
        joint = exact_joint(scm, intervention, domain)
    elif method == "mc":
        joint = mc_joint(scm, intervention, domain, n_oracle, seed)
    else:
        raise ValueError(f"unknown oracle method {method!r}")
    return JointOracle(joint, intervention)


# -- discrete enumerable models --------------------------------------------


@dataclass(frozen=True)
class DiscreteScm:
    """Finite model given by conditional probability tables.

    ``cpts[v]`` has one axis per parent (in ``parents[v]`` order) and a last
    axis over the values of ``v``. Variables listed in ``latent`` are
    marginalized out of every joint.
    """

    order: tuple[str, ...]
    parents: Mapping[str, tuple[str, ...]]
    cpts: Mapping[str, np.ndarray]
    latent: frozenset[str] = frozenset()

    @property
    def observed(self) -> tuple[str, ...]:
        return tuple(v for v in self.order if v not in self.latent)

    def cardinality(self, var: str) -> int:
        return self.cpts[var].shape[-1]

    def joint(self, intervention: Mapping[str, int] | None = None) -> Joint:
        """Truncated factorization under ``intervention``, latents summed out."""
        intervention = dict(intervention or {})
        letters = {v: i for i, v in enumerate(self.order)}
        operands = []
        for v in self.order:
            if v in intervention:
                point = np.zeros(self.cardinality(v))
                point[intervention[v]] = 1.0
                operands += [point, [letters[v]]]
            else:
                operands += [self.cpts[v], [letters[p] for p in self.parents[v]] + [letters[v]]]
        obs = self.observed
        probs = np.einsum(*operands, [letters[v] for v in obs], optimize="greedy")
        return Joint(obs, probs)

    @classmethod
    def random(cls, g: Admg, rng: np.random.Generator, low: float = 0.1, high: float = 0.9, card: int = 2) -> DiscreteScm:
        """Random positive model whose latent structure matches ``g``'s bidirected edges."""
        parents: dict[str, tuple[str, ...]] = {}
        cpts: dict[str, np.ndarray] = {}
        latents = []
        for k, e in enumerate(sorted(tuple(sorted(e)) for e in g.bidirected)):
            name = f"_L{k}_{e[0]}_{e[1]}"
            latents.append((name, e))
            parents[name] = ()
            cpts[name] = _random_cpt(rng, (), card, low, high)
        order = [name for name, _ in latents]
        for v in g.topological_order():
            pa = tuple(p for p in g.vertices if p in g.parents(v))
            pa += tuple(name for name, e in latents if v in e)
            parents[v] = pa
            cpts[v] = _random_cpt(rng, (card,) * len(pa), card, low, high)
            order.append(v)
        return cls(tuple(order), parents, cpts, frozenset(name for name, _ in latents))


def _random_cpt(rng, parent_shape, card, low, high):
    raw = rng.uniform(low, high, size=tuple(parent_shape) + (card,))
    return raw / raw.sum(axis=-1, keepdims=True)


# -- exact input tables ----------------------------------------------------


def exact_table(scm, term: DistTerm) -> ContingencyTable:
    """Exact table for a declared input term.

    A condition naming a domain switch of ``scm`` selects that domain and is
    not a column; interventions are evaluated value by value.
    """
    domains = getattr(scm, "domains", {}) or {}
    domain = next((c for c in term.conditions if c in domains), None)
    cond = [c for c in term.conditions if c not in domains]
    inter = list(term.interventions)
    cols = list(term.outcomes) + inter + cond
    cards = tuple(scm.cardinality(v) for v in cols)
    counts = np.zeros(cards)
    inter_cards = [scm.cardinality(v) for v in inter]
    for values in itertools.product(*[range(k) for k in inter_cards]):
        do = dict(zip(inter, values))
        if isinstance(scm, DiscreteScm):
            joint = scm.joint(do)
        else:
            joint = exact_joint(scm, do, domain)
        keep = list(term.outcomes) + cond
        arr = joint.marginal(keep) if keep else np.asarray(1.0)
        idx = [slice(None)] * len(term.outcomes) + list(values) + [slice(None)] * len(cond)
        counts[tuple(idx)] = arr
    return ContingencyTable(tuple(cols), cards, counts, tuple(inter + cond))


def exact_oracle(scm, inputs: Iterable[DistTerm]) -> TableOracle:
    """Oracle whose atoms are computed only from the exact declared inputs."""
    return TableOracle({t: exact_table(scm, t) for t in inputs})


def interventional(scm, query: DistTerm, assignment: Mapping[str, int]) -> float:
    """Ground truth ``P(outcomes | do(interventions), conditions)`` at ``assignment``."""
    do = {v: assignment[v] for v in query.interventions}
    joint = scm.joint(do) if isinstance(scm, DiscreteScm) else exact_joint(scm, do)
    return joint.prob({v: assignment[v] for v in query.outcomes}, {v: assignment[v] for v in query.conditions})


# -- replication harness ----------------------------------------------------


@dataclass(frozen=True)
class SimScenario:
    rct_n: int
    survey_n: int
    replications: int
    trapdoor_value: int
    seed: int = 20220601
    design: RctDesign = RctDesign()

    def __post_init__(self):
        if min(self.rct_n, self.survey_n, self.replications) < 1:
            raise ValueError("sizes and replications must be positive")


@dataclass(frozen=True)
class SimResult:
    scenario: SimScenario
    bias: float
    rmse: float
    dropped_replications: int
    degenerate_replications: int
    truth: float
    estimates: tuple[float, ...] = field(repr=False, default=())

    @property
    def mc_se_bias(self) -> float:
        k = len(self.estimates)
        return float(np.std(self.estimates, ddof=1) / math.sqrt(k)) if k > 1 else float("nan")


DEGENERATE_POLICIES = ("error", "skip", "zero")


def _replicate(args):
    scm, scenario, expr, rep, target, trapdoor, policy = args
    rng = rng_for(scenario.seed, scenario.rct_n, scenario.survey_n, rep)
    rct_rng, survey_rng = rng.spawn(2)
    rct = rct_sample(scm, scenario.rct_n, rct_rng, scenario.design)
    survey = survey_sample(scm, scenario.survey_n, survey_rng)
    tables = {rct.term: fit(rct), survey.term: fit(survey)}
    td = {trapdoor: scenario.trapdoor_value}
    try:
        est = plug_in(expr, tables, td, target, regime=("T", "S"), allow_degenerate=policy == "zero")
    except EstimationError:
        if policy == "error":
            raise
        return None, True
    return est.value, bool(est.degenerate)


def run_scenario(
    scm: Scm,
    scenario: SimScenario,
    expr: Expr,
    truth: float,
    target: Mapping[str, int] | None = None,
    trapdoor: str = "Z2",
    policy: str = "error",
    workers: int = 1,
) -> SimResult:
    """Bias and RMSE of the plug-in estimate over the scenario's replications.

    ``policy`` decides what happens when a stratum the estimate needs is
    empty: ``error`` propagates the error, ``skip`` drops the replication
    (counted in ``dropped_replications``) and ``zero`` keeps it with 0/0
    read as 0 (counted in ``degenerate_replications``).

    Replication ``r`` draws its data from a generator keyed by
    (seed, RCT size, survey size, r), so results do not depend on the number
    of workers, and scenarios that differ only in the trapdoor value share data.
    """
    if policy not in DEGENERATE_POLICIES:
        raise ValueError(f"policy must be one of {DEGENERATE_POLICIES}")
    target = dict(target or {"Y": 1, "X": 1})
    jobs = [(scm, scenario, expr, r, target, trapdoor, policy) for r in range(scenario.replications)]
    if workers > 1:
        with cf.ProcessPoolExecutor(workers) as pool:
            out = list(pool.map(_replicate, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    else:
        out = [_replicate(j) for j in jobs]
    estimates = [v for v, _ in out if v is not None]
    dropped = sum(v is None for v, _ in out)
    degenerate = sum(flag for v, flag in out if v is not None)
    if dropped >= scenario.replications:
        raise EstimationError("every replication hit an empty stratum")
    est = np.asarray(estimates)
    return SimResult(
        scenario,
        float(est.mean() - truth),
        float(np.sqrt(np.mean((est - truth) ** 2))),
        dropped,
        degenerate,
        truth,
        tuple(estimates),
    )


def run_scenarios(scm, scenarios: Sequence[SimScenario], expr: Expr, truth: float | None = None, **kwargs) -> list[SimResult]:
    if truth is None:
        truth = oracle(scm, {"X": 1}).prob({"Y": 1})
    return [run_scenario(scm, s, expr, truth, **kwargs) for s in scenarios]


# -- scenario sweeps ---------------------------------------------------------


@dataclass(frozen=True)
class SweepConfig:
    """A grid of (RCT size, survey size) pairs, each run for every trapdoor value."""

    rct_sizes: tuple[int, ...]
    survey_sizes: tuple[int, ...]
    replications: int = 2000
    seed: int = 20220601
    trapdoor: str = "Z2"
    trapdoor_values: tuple[int, ...] = (1, 0)
    policy: str = "zero"
    design: RctDesign = RctDesign()

    def scenarios(self) -> list[SimScenario]:
        return [
            SimScenario(r, s, self.replications, z, self.seed, self.design)
            for r in self.rct_sizes
            for s in self.survey_sizes
            for z in self.trapdoor_values
        ]


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace(",", " ").split())


def load_sweep(path) -> SweepConfig:
    """Read an INI-style sweep file with a ``[sweep]`` and optional ``[rct]`` section."""
    import configparser

    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    with open(path) as fh:
        cp.read_file(fh)
    if "sweep" not in cp:
        raise ValueError(f"{path}: missing [sweep] section")
    sw = cp["sweep"]
    design = RctDesign()
    if "rct" in cp:
        sec = cp["rct"]
        design = RctDesign(
            p_treat=sec.getfloat("p_treat", design.p_treat),
            count_after_selection=sec.getboolean("count_after_selection", design.count_after_selection),
            apply_selection=sec.getboolean("apply_selection", design.apply_selection),
        )
    policy = sw.get("degenerate", "zero")
    if policy not in DEGENERATE_POLICIES:
        raise ValueError(f"{path}: degenerate must be one of {DEGENERATE_POLICIES}")
    return SweepConfig(
        _ints(sw["rct"]),
        _ints(sw["survey"]),
        sw.getint("replications", 2000),
        sw.getint("seed", 20220601),
        sw.get("trapdoor", "Z2"),
        _ints(sw.get("trapdoor_values", "1, 0")),
        policy,
        design,
    )


def run_sweep(scm: Scm, cfg: SweepConfig, expr: Expr, truth: float | None = None, workers: int = 1, seed: int | None = None):
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    return run_scenarios(scm, cfg.scenarios(), expr, truth, trapdoor=cfg.trapdoor, policy=cfg.policy, workers=workers)


def table_rows(results: Sequence[SimResult], trapdoor: str = "Z2") -> tuple[list[str], list[list]]:
    """Results reshaped to one row per size pair: bias and RMSE for each trapdoor value."""
    values = sorted({r.scenario.trapdoor_value for r in results}, reverse=True)
    cells: dict[tuple[int, int], dict[int, SimResult]] = {}
    for r in results:
        cells.setdefault((r.scenario.rct_n, r.scenario.survey_n), {})[r.scenario.trapdoor_value] = r
    header = ["RCT", "Survey"]
    header += [f"bias {trapdoor}={v}" for v in values] + [f"rmse {trapdoor}={v}" for v in values]
    header += [f"dropped {trapdoor}={v}" for v in values] + [f"degenerate {trapdoor}={v}" for v in values]
    rows = []
    for (rn, sn), by in cells.items():
        rows.append(
            [rn, sn]
            + [round(by[v].bias, 6) for v in values]
            + [round(by[v].rmse, 6) for v in values]
            + [by[v].dropped_replications for v in values]
            + [by[v].degenerate_replications for v in values]
        )
    return header, rows


def write_table(results: Sequence[SimResult], path_or_file, trapdoor: str = "Z2") -> None:
    import csv

    header, rows = table_rows(results, trapdoor)
    fh = open(path_or_file, "w", newline="") if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__") else path_or_file
    try:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    finally:
        if fh is not path_or_file:
            fh.close()
