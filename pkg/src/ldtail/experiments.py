"""Named experiments: each turns a validated config into CSV rows plus an itemized audit."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .bounds import (
    SmoothnessBudget,
    ergm_bound,
    free_energy_lower_slack,
    free_energy_upper_terms,
    tail_lower_slack,
    tail_sandwich,
)
from .config import EXPERIMENTS, ExperimentConfig, to_graph
from .covering import (
    empirical_gradient_net,
    fourier_round,
    spectral_round,
    subgraph_gradient_net,
)
from .errors import BudgetExceeded, DomainError, LdtailError
from .functionals import (
    AP3,
    Chain,
    CurieWeiss,
    Ergm,
    ErgmSpec,
    HomDensity,
    Linear,
    SmoothFunctional,
)
from .oracle import GibbsMeasure, TailQuery, enumerate_free_energy, enumerate_tail, tilted_monte_carlo_tail
from .variational import (
    RateQuery,
    SolverOptions,
    grid_oracle_rate,
    lz_closed_form,
    minimal_planted_clique,
    planted_interval_upper_ap3,
    rate_lower_bound,
    solve_mean_field,
    solve_rate,
)

COLUMNS = ["experiment", "n", "p", "t", "phi_hat", "lower", "upper", "exact_or_mc", "stderr", "seed"]
LZ_COLUMN = "lz_overlay"
AUDIT_SCHEMA = 1
GRID_MAX_N = 4


@dataclass
class Row:
    experiment: str
    n: int
    p: float | None
    t: float | None
    phi_hat: float | None
    lower: float | None
    upper: float | None
    exact_or_mc: float | None
    stderr: float | None
    seed: int
    extra: dict = field(default_factory=dict)


@dataclass
class Record:
    """One CSV row together with every term that produced it."""

    row: Row
    terms: dict
    runtime: float = 0.0


@dataclass
class RunOutput:
    records: list
    status: str = "complete"
    error: str | None = None
    exception: Exception | None = None


def max_enumeration_n(budget_states: int) -> int:
    return int(math.floor(math.log2(budget_states)))


def build_functional(fc) -> SmoothFunctional:
    if fc.kind == "homdensity":
        return HomDensity(to_graph(fc.graph), fc.N)
    if fc.kind == "ap3":
        return AP3(fc.n)
    if fc.kind == "curie-weiss":
        return CurieWeiss(fc.n, fc.beta)
    if fc.kind == "chain":
        return Chain(fc.n)
    if fc.kind == "linear":
        return Linear(fc.n, fc.beta)
    spec = ErgmSpec(tuple(to_graph(g) for g in fc.graphs), tuple(fc.betas))
    return Ergm(spec, fc.N)


def solver_options(cfg: ExperimentConfig) -> SolverOptions:
    s = cfg.solver
    return SolverOptions(n_random=s.n_random, seed=cfg.seed, max_outer=s.max_outer, max_inner=s.max_inner, tol=s.tol)


def _thresholds(cfg: ExperimentConfig, f: SmoothFunctional, p: float):
    if cfg.t is not None:
        return [(None, float(t)) for t in cfg.t]
    return [(u, RateQuery.from_ratio(f, p, u).t) for u in cfg.u]


def _planted_upper(f: SmoothFunctional, p: float, t: float) -> float:
    """A planted feasible point when the functional has one, else ``inf``."""
    try:
        if isinstance(f, HomDensity):
            res = minimal_planted_clique(f.H, f.N, p, t)
            return res.value if res is not None else math.inf
        if isinstance(f, AP3):
            return planted_interval_upper_ap3(f.n, p, t).value
    except DomainError:
        pass
    return math.inf


def phi_upper(f: SmoothFunctional, p: float, t: float, opts: SolverOptions) -> tuple[float, dict]:
    """Upper bound on ``phi_p(t)``: the entropy of the best feasible point found."""
    res = solve_rate(RateQuery(f, p, t), opts)
    planted = _planted_upper(f, p, t)
    return min(res.value, planted), {"solver": res.to_dict(), "planted": planted}


def phi_lower(f: SmoothFunctional, p: float, t: float) -> tuple[float, dict]:
    """Certified lower bound on ``phi_p(t)`` from the relaxation, tightened by a grid when n is tiny."""
    rb = rate_lower_bound(f, p, t)
    info = {"relaxation": rb.value, "method": rb.method}
    value = rb.value
    if f.n <= GRID_MAX_N and math.isfinite(value):
        g = grid_oracle_rate(RateQuery(f, p, t))
        info["grid_lower"] = g.lower
        value = max(value, g.lower)
    return value, info


def net_size_log(f: SmoothFunctional, radius: float, budget_states: int) -> tuple[float, dict]:
    """Log-size of a gradient net of the given radius over the binary points."""
    if (1 << f.n) <= budget_states:
        net = empirical_gradient_net(f, radius, budget_states=budget_states)
        return net.size_log, {"method": "empirical", "size": net.size, "worst_sq_error": net.worst_sq_error}
    return f.n * math.log(2.0), {"method": "binary-points"}


def certified_tail_interval(
    f: SmoothFunctional,
    p: float,
    t: float,
    delta_frac: float = 0.1,
    eps: float = 0.25,
    opts: SolverOptions | None = None,
    budget_states: int = 1 << 25,
):
    """Interval for ``log P(f(Y) >= tn)`` whose every input is a certified bound.

    Returns ``(ErrorBudget, phi_hat, terms)``.
    """
    opts = opts or SolverOptions()
    K_phi, k_info = phi_upper(f, p, t, opts)
    if not math.isfinite(K_phi):
        raise DomainError(f"threshold t = {t} is not reachable")
    delta = delta_frac * t
    lo_phi, lo_info = phi_lower(f, p, t - delta)
    budget = SmoothnessBudget.from_functional(f)
    _, delta0 = tail_lower_slack(budget, p)
    up_phi, up_info = phi_upper(f, p, t + delta0, opts)
    K = K_phi / f.n
    radius = delta * eps / (4.0 * K) if K > 0 else math.inf
    size_log, net_info = net_size_log(f, radius, budget_states)
    eb = tail_sandwich(
        f,
        p,
        t,
        delta,
        eps,
        K_phi=K_phi,
        phi_lower_at_t_minus_delta=lo_phi,
        phi_upper_at_t_plus_delta0=up_phi,
        net_size_log=size_log,
        certified={"K_phi": "feasible point", "phi_lower": lo_info["method"], "phi_upper": "feasible point"},
    )
    terms = {"K": k_info, "phi_lower": lo_info, "phi_upper": up_info, "net": net_info, "budget": eb.to_dict()}
    return eb, K_phi, terms


def _reference_tail(f, p, t, cfg, tilt):
    """``(log P, stderr of log P, source)`` by enumeration when affordable, else tilted Monte Carlo."""
    if (1 << f.n) <= cfg.budget_states:
        res = enumerate_tail(TailQuery(f, p, t, max_n=max_enumeration_n(cfg.budget_states)))
        return res.log_probability, 0.0, "exact"
    if cfg.mc_budget and tilt is not None:
        tilt = np.clip(tilt, 1e-3, 1 - 1e-3)
        mc = tilted_monte_carlo_tail(TailQuery(f, p, t, "tilted-mc", cfg.mc_budget, cfg.seed), tilt)
        if mc.estimate > 0:
            return math.log(mc.estimate), mc.stderr / mc.estimate, "tilted-mc"
    return None, None, "none"


def _rate_instance(cfg, f, p, u, t, opts):
    res = solve_rate(RateQuery(f, p, t), opts)
    lo, lo_info = phi_lower(f, p, t)
    planted = _planted_upper(f, p, t)
    upper = min(res.value, planted)
    logP, se, source = _reference_tail(f, p, t, cfg, res.optimizer if res.status != "infeasible" else None)
    extra = {}
    if cfg.lz_overlay:
        extra[LZ_COLUMN] = lz_overlay(u, f, p) if u is not None else None
    row = Row(
        cfg.experiment, f.n, p, t, upper, lo, upper,
        -logP if logP is not None else None, se, cfg.seed, extra,
    )
    terms = {
        "u": u,
        "solver": res.to_dict(),
        "phi_lower": lo_info,
        "planted": planted,
        "reference": source,
        "exact_or_mc": "-log P(f(Y) >= tn)",
        **extra,
    }
    return row, terms


def lz_overlay(u: float, f, p: float) -> float:
    """``min(delta^{2/3}/2, delta/3) N^2 p^2 log(1/p)`` with ``delta = u - 1``."""
    N = f.N
    return lz_closed_form(u - 1.0) * N * N * p * p * math.log(1.0 / p)


def _sandwich_instance(cfg, f, p, u, t, opts):
    eb, phi_hat, terms = certified_tail_interval(f, p, t, cfg.delta, cfg.eps, opts, cfg.budget_states)
    logP, se, source = _reference_tail(f, p, t, cfg, None)
    row = Row(cfg.experiment, f.n, p, t, phi_hat, eb.lower, eb.upper, logP, se, cfg.seed)
    terms.update({"u": u, "reference": source, "exact_or_mc": "log P(f(Y) >= tn)"})
    if logP is not None:
        terms["inside"] = eb.contains(logP)
    return row, terms


def _free_energy_instance(cfg, f, opts):
    if (1 << f.n) > cfg.budget_states:
        raise BudgetExceeded(f"exact free energy needs 2^{f.n} states, over the budget {cfg.budget_states}")
    F = enumerate_free_energy(GibbsMeasure(f, max_n=max_enumeration_n(cfg.budget_states)))
    mf = solve_mean_field(f, opts)
    budget = SmoothnessBudget.from_functional(f)
    size_log, net_info = net_size_log(f, cfg.eps, cfg.budget_states)
    up = free_energy_upper_terms(budget, cfg.eps, size_log)
    lower = mf.value - free_energy_lower_slack(budget)
    upper = mf.value + up["total"]
    row = Row(cfg.experiment, f.n, None, None, mf.value, lower, upper, F, 0.0, cfg.seed)
    terms = {
        "mean_field": mf.to_dict(),
        "lower_slack": free_energy_lower_slack(budget),
        "upper_terms": up,
        "net": net_info,
        "net_size_log": size_log,
        "exact_or_mc": "log sum_x exp f(x)",
        "inside": lower - 1e-6 <= F <= upper + 1e-6,
    }
    if isinstance(f, Ergm):
        shape = ergm_bound(f.spec.B, f.N)
        terms["shape_rates"] = {"lower": shape.lower, "upper": shape.upper, "label": shape.label}
    return row, terms


def _net_audit(cfg):
    rng = np.random.default_rng(cfg.seed)
    tasks = []
    for N in cfg.net_sizes:
        for tau in cfg.taus:
            for _ in range(cfg.net_samples):
                A = rng.uniform(size=(N, N))
                tasks.append(("spectral", N, tau, (A + A.T) / 2))
    n = cfg.functional.n
    for _ in range(cfg.net_samples):
        tasks.append(("fourier", n, cfg.eps, rng.uniform(size=n)))
    H = to_graph(cfg.functional.graph)
    N = cfg.functional.N
    for _ in range(cfg.net_samples):
        tasks.append(("subgraph", N, cfg.eps, rng.uniform(size=N * (N - 1) // 2)))

    def run(task):
        kind, size, param, x = task
        if kind == "spectral":
            cert = spectral_round(x, param)
        elif kind == "fourier":
            cert = fourier_round(x, param)
        else:
            cert = subgraph_gradient_net(H, size, param, x)
        row = Row(cfg.experiment, size, None, param, cert.fidelity, 0.0, cert.claimed_bound, cert.size_log_bound, None, cfg.seed)
        return row, {"certificate": cert.to_dict(), "t_column": "tau or eps", "exact_or_mc": "net size log bound"}

    return tasks, run


def _instances(cfg: ExperimentConfig):
    """Return ``(tasks, run)`` so the caller can schedule them on a pool."""
    opts = solver_options(cfg)
    if cfg.experiment == "net-audit":
        return _net_audit(cfg)
    fc = cfg.functional
    if cfg.experiment == "triangles":
        fc = fc.model_copy(update={"kind": "homdensity", "graph": "triangle"})
    elif cfg.experiment == "ap3":
        fc = fc.model_copy(update={"kind": "ap3"})
    elif cfg.experiment == "ergm":
        fc = fc.model_copy(update={"kind": "ergm"})
    f = build_functional(fc)

    if cfg.experiment in ("free-energy", "ergm"):
        return [None], lambda _: _free_energy_instance(cfg, f, opts)

    tasks = [(p, u, t) for p in cfg.p for u, t in _thresholds(cfg, f, p)]
    body = _sandwich_instance if cfg.experiment == "sandwich" else _rate_instance

    def run(task):
        p, u, t = task
        return body(cfg, f, p, u, t, opts)

    return tasks, run


def run_experiment(cfg: ExperimentConfig) -> RunOutput:
    """Run every instance; on the first failure, keep finished rows and mark the run partial."""
    tasks, run = _instances(cfg)

    def timed(task):
        start = time.perf_counter()
        row, terms = run(task)
        return Record(row, terms, time.perf_counter() - start)

    records = []
    try:
        if cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                for rec in pool.map(timed, tasks):
                    records.append(rec)
        else:
            for task in tasks:
                records.append(timed(task))
    except LdtailError as exc:
        return RunOutput(records, "partial", f"{type(exc).__name__}: {exc}", exc)
    return RunOutput(records)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def rows_to_csv(records, lz: bool = False) -> str:
    cols = COLUMNS + ([LZ_COLUMN] if lz else [])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for rec in records:
        d = asdict(rec.row)
        extra = d.pop("extra")
        w.writerow([d[c] if c in ("experiment",) else _fmt(d[c]) for c in COLUMNS] + ([_fmt(extra.get(LZ_COLUMN))] if lz else []))
    return buf.getvalue()


def _json_safe(v):
    if isinstance(v, dict):
        return {str(k): _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    if isinstance(v, np.ndarray):
        return _json_safe(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if v is None or isinstance(v, (str, int)):
        return v
    return repr(v)


def audit_document(cfg: ExperimentConfig, out: RunOutput) -> dict:
    entries = []
    for i, rec in enumerate(out.records):
        row = asdict(rec.row)
        row.update(row.pop("extra"))
        entries.append({"index": i, "row": row, "terms": rec.terms, "runtime_s": rec.runtime})
    return _json_safe(
        {
            "schema_version": AUDIT_SCHEMA,
            "experiment": cfg.experiment,
            "status": out.status,
            "error": out.error,
            "config": cfg.model_dump(),
            "columns": COLUMNS,
            "entries": entries,
        }
    )


def write_outputs(cfg: ExperimentConfig, out: RunOutput, out_dir) -> tuple[Path, Path]:
    """Write CSV and JSON; a partial run gets a ``.partial`` infix and a comment header."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_name, audit_name = cfg.output.csv, cfg.output.audit
    text = rows_to_csv(out.records, lz=cfg.lz_overlay)
    if out.status != "complete":
        csv_name = _partial_name(csv_name)
        audit_name = _partial_name(audit_name)
        text = f"# PARTIAL: {out.error}\n" + text
    csv_path, audit_path = out_dir / csv_name, out_dir / audit_name
    csv_path.write_text(text)
    audit_path.write_text(json.dumps(audit_document(cfg, out), indent=2, sort_keys=True) + "\n")
    return csv_path, audit_path


def _partial_name(name: str) -> str:
    stem, dot, ext = name.rpartition(".")
    return f"{stem}.partial.{ext}" if dot else f"{name}.partial"


def list_experiments() -> dict:
    return dict(EXPERIMENTS)
