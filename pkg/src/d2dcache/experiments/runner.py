"""Run a scenario over its grid and write CSV datasets.

Every grid point is computed independently from the scenario and its
index, so rows do not depend on execution order or worker count. Each CSV
gets a ``<name>.params.json`` sidecar holding the full parameter set.
"""
from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..core import SystemParams, zipf_popularity
from ..delay import cooperation_gain, energy_per_cluster, network_delay
from ..placement import (
    BaselineUnstableError,
    GreedyTrace,
    Objective,
    cpf_placement,
    greedy_caching,
    random_placement,
)
from ..queuesim import SimConfig, simulate_network
from ..rates import cluster_rates
from ..throughput import (
    network_per_request_throughput,
    outage_report,
    scaling_bound,
    throughput_vs_cluster_size,
)
from .config import Scenario

__all__ = [
    "OUTPUT_ENV",
    "HEADERS",
    "RunResult",
    "output_dir_for",
    "placement_for",
    "run_scenario",
    "grid_tasks",
    "rc_throughput_samples",
    "greedy_trace_for",
    "greedy_trace_csv",
]

OUTPUT_ENV = "D2DCACHE_OUTPUT_DIR"

HEADERS = {
    "delay_vs_beta.csv": "scheme,beta,n_cache,analytic_delay_s,sim_delay_s,sim_ci95_s,stable",
    "delay_vs_lambda.csv": "scheme,lambda,n_cache,analytic_delay_s,sim_delay_s,sim_ci95_s,stable",
    "delay_vs_cache.csv": "scheme,n_cache,beta,analytic_delay_s,sim_delay_s,sim_ci95_s,stable",
    "gain_vs_cache.csv": "n_cache,delay_coop_s,delay_noncoop_s,gain,baseline_unstable",
    "gain_vs_beta.csv": "beta,delay_coop_s,delay_noncoop_s,gain,baseline_unstable",
    "energy_vs_cache.csv": "n_cache,e_lc_j_per_s,e_rc_j_per_s,gain",
    "throughput_vs_beta.csv": "scheme,x,per_request_throughput_bps",
    "throughput_vs_cache.csv": "scheme,x,per_request_throughput_bps",
    "throughput_vs_lambda.csv": "scheme,x,per_request_throughput_bps",
    "outage_vs_y.csv": "y,p_outage_coop,p_outage_noncoop,p_outage_noncoop_approx",
    "scaling_vs_m.csv": "m,gamma,t_sum_bound_bps,loglog_slope",
    "throughput_vs_y.csv": "beta,y,t_sum_bound_bps,per_user_throughput_bps,expected_good_clusters",
}

_SWEEP_SUFFIX = {"beta": "beta", "lambda": "lambda", "n_cache": "cache", "y": "y", "m": "m"}
_PREFIX = {"delay": "delay", "gain": "gain", "energy": "energy", "throughput": "throughput",
           "outage": "outage", "scaling": "scaling", "cluster_size": "throughput"}


@dataclass
class RunResult:
    scenario: Scenario
    files: list[Path]
    rows: dict[str, list[list]] = field(default_factory=dict)
    summary: list[str] = field(default_factory=list)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if np.isnan(v):
        return "nan"
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return f"{v:.10g}"


def output_dir_for(scenario: Scenario, override=None) -> Path:
    """Where a scenario writes its CSVs.

    The scenario's own ``output`` is used as given. Otherwise the base
    directory (``override``, then ``$D2DCACHE_OUTPUT_DIR``, then
    ``./results``) gets a subdirectory named after the scenario, so runs
    sharing a CSV name do not overwrite each other.
    """
    if override is None and scenario.output:
        return Path(scenario.output)
    base = override or os.environ.get(OUTPUT_ENV) or "results"
    return Path(base) / scenario.name


def _child_seed(scenario: Scenario, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([scenario.seed, *key])


def placement_for(scheme: str, params: SystemParams, pop, scenario: Scenario,
                  seed=None) -> np.ndarray:
    """Placement matrix of one scheme. RC uses ``seed``."""
    if scheme == "cpf":
        return cpf_placement(params, pop)
    if scheme == "gca":
        return greedy_caching(params, pop, scenario.objective, scenario.service_model,
                              fallback=scenario.gca_fallback).final_placement
    if scheme == "rc":
        return random_placement(params, seed)
    if scheme in scenario.custom_placements:
        return scenario.custom_placements[scheme]
    raise ValueError(f"unknown scheme {scheme!r}")


def _scheme_label(scheme: str) -> str:
    return "custom" if scheme.startswith("custom:") else scheme


def _rc_seeds(scenario: Scenario, idx: int):
    return _child_seed(scenario, idx, 1).spawn(scenario.rc_replications)


def _delay_point(scenario: Scenario, idx: int, scheme: str, params: SystemParams):
    pop = zipf_popularity(params)
    model = scenario.service_model
    if scheme == "rc":
        delays = [network_delay(random_placement(params, s), pop, params, model, strict=False)
                  for s in _rc_seeds(scenario, idx)]
        stable = all(d.stable for d in delays)
        analytic = float(np.mean([d.network_delay for d in delays])) if stable else float("inf")
        return analytic, None, None, stable
    try:
        c = placement_for(scheme, params, pop, scenario)
    except BaselineUnstableError:
        return float("inf"), None, None, False
    report = network_delay(c, pop, params, model, strict=False)
    sim_mean = sim_ci = None
    if scenario.sim is not None and report.stable:
        seed = int(_child_seed(scenario, idx, 2).generate_state(1)[0])
        cfg = SimConfig(scenario.sim.num_requests, scenario.sim.warmup_fraction, seed,
                        scenario.sim.batch_count)
        res = simulate_network(c, pop, params, model, cfg, scenario.discipline)
        sim_mean, sim_ci = res.sim_delay, res.ci_half_width
    return report.network_delay, sim_mean, sim_ci, report.stable


def rc_throughput_samples(scenario: Scenario, idx: int, params: SystemParams) -> np.ndarray:
    """Per-draw network throughput of the random placements behind grid task ``idx``."""
    pop = zipf_popularity(params)
    return np.array([network_per_request_throughput(random_placement(params, s), pop, params,
                                                    scenario.service_model)
                     for s in _rc_seeds(scenario, idx)])


def _throughput_point(scenario: Scenario, idx: int, scheme: str, params: SystemParams) -> float:
    pop = zipf_popularity(params)
    model = scenario.service_model
    if scheme == "rc":
        return float(np.mean(rc_throughput_samples(scenario, idx, params)))
    try:
        c = placement_for(scheme, params, pop, scenario)
    except BaselineUnstableError:
        return float("nan")
    return network_per_request_throughput(c, pop, params, model)


def _compute_point(task) -> list[list]:
    """Rows for one (series value, scheme, sweep value) point."""
    scenario, idx, series_value, scheme, x = task
    params = scenario.params_at(x, series_value)
    kind = scenario.kind
    if kind == "delay":
        analytic, sim_mean, sim_ci, stable = _delay_point(scenario, idx, scheme, params)
        other = params.N if scenario.sweep != "n_cache" else params.beta
        return [[_scheme_label(scheme), x, other, analytic, sim_mean, sim_ci, stable]]
    if kind == "throughput":
        return [[_scheme_label(scheme), x, _throughput_point(scenario, idx, scheme, params)]]
    pop = zipf_popularity(params)
    if kind in ("gain", "energy"):
        c = placement_for(scheme, params, pop, scenario)
        gain, baseline_unstable, coop, noncoop = cooperation_gain(c, pop, params, scenario.service_model)
        if kind == "gain":
            return [[x, coop.network_delay, noncoop.network_delay, gain, baseline_unstable]]
        w = params.lam / params.lam.sum()
        energy = [energy_per_cluster(r, params)
                  for r in cluster_rates(c, pop, params, scenario.service_model)]
        return [[x, float(np.dot(w, [e.e_lc for e in energy])),
                 float(np.dot(w, [e.e_rc for e in energy])), gain]]
    if kind == "outage":
        rep = outage_report(params)
        return [[x, rep.p_outage_coop, rep.p_outage_noncoop, rep.p_outage_noncoop_approx]]
    raise ValueError(f"kind {kind!r} is not evaluated per point")


def _file_name(scenario: Scenario, series_value) -> str:
    name = f"{_PREFIX[scenario.kind]}_vs_{_SWEEP_SUFFIX[scenario.sweep]}.csv"
    header = HEADERS[name].split(",")
    column = {"n_cache": "n_cache", "beta": "beta", "lambda": "lambda", "y": "y", "m": "m"}
    if series_value is not None and column[scenario.series_key] not in header:
        stem = name[:-4]
        name = f"{stem}_{scenario.series_key}{_fmt(series_value)}.csv"
    return name


def grid_tasks(scenario: Scenario):
    """``(idx, series_value, scheme, x)`` for every per-point task, in output order."""
    return [t[1:] for t in _tasks(scenario)]


def _tasks(scenario: Scenario):
    series = scenario.series or (None,)
    schemes = scenario.schemes if scenario.kind in ("delay", "throughput") else scenario.schemes[:1]
    idx = 0
    for sv in series:
        for scheme in schemes:
            for x in scenario.grid:
                yield (scenario, idx, sv, scheme, x)
                idx += 1


def _whole_series_rows(scenario: Scenario, series_value) -> list[list]:
    # the sweep variable is handled by the curve functions, not by the parameters
    params = scenario.params_at(None, series_value)
    if scenario.kind == "scaling":
        rep = scaling_bound(params, scenario.grid, C=scenario.c_rate)
        C = params.r_d2d if scenario.c_rate is None else scenario.c_rate
        if rep.degenerate:
            return [[m, rep.gamma, float("nan"), float("nan")] for m in scenario.grid]
        return [[m, rep.gamma, d + params.k1_rate_ratio * C, rep.loglog_slope]
                for m, d in zip(scenario.grid, rep.dominant_term)]
    curve = throughput_vs_cluster_size(params, scenario.grid, C=scenario.c_rate)
    return [[params.beta, y, t, u, e] for y, t, u, e in
            zip(curve.y, curve.t_sum_bound, curve.per_user, curve.expected_good_clusters)]


def _summary(scenario: Scenario, rows: dict[str, list[list]]) -> list[str]:
    out = []
    for name, table in rows.items():
        if scenario.kind in ("gain", "energy"):
            gains = np.array([r[3] for r in table], dtype=float)
            finite = gains[np.isfinite(gains)]
            line = f"{name}: gain min {_fmt(finite.min()) if finite.size else 'nan'}" \
                   f" max {_fmt(finite.max()) if finite.size else 'nan'}"
            if scenario.kind == "gain":
                flagged = [_fmt(r[0]) for r in table if r[4]]
                line += f"; baseline unstable at {', '.join(flagged) if flagged else 'none'}"
            out.append(line)
        elif scenario.kind == "delay":
            unstable = [f"{r[0]}@{_fmt(r[1])}" for r in table if not r[6]]
            errs = [abs(r[4] - r[3]) / r[3] for r in table if r[4] is not None and r[6]]
            line = f"{name}: {len(table)} points, unstable {', '.join(unstable) if unstable else 'none'}"
            if errs:
                line += f"; max sim/analytic deviation {max(errs):.4f}"
            out.append(line)
        elif scenario.kind == "cluster_size":
            for beta in sorted({r[0] for r in table}):
                sub = [r for r in table if r[0] == beta]
                i = int(np.argmax([r[2] for r in sub]))
                out.append(f"{name}: beta {_fmt(beta)} argmax y = {_fmt(sub[i][1])}"
                           f" ({'interior' if 0 < i < len(sub) - 1 else 'at grid edge'})")
        elif scenario.kind == "scaling":
            out.append(f"{name}: gamma {_fmt(table[0][1])} slope {_fmt(table[0][3])}")
        else:
            out.append(f"{name}: {len(table)} rows")
    return out


def _sidecar(scenario: Scenario, series_value) -> dict:
    params = asdict(scenario.params)
    return {
        "scenario": scenario.name,
        "kind": scenario.kind,
        "base_params_si": params,
        "param_values": scenario.param_values,
        "schemes": list(scenario.schemes),
        "sweep": scenario.sweep,
        "grid": list(scenario.grid),
        "series": {scenario.series_key: series_value} if scenario.series_key else None,
        "sim": asdict(scenario.sim) if scenario.sim else None,
        "discipline": scenario.discipline,
        "rc_replications": scenario.rc_replications,
        "seed": scenario.seed,
        "service_model": scenario.service_model.value,
        "objective": scenario.objective.value,
        "gca_fallback": scenario.gca_fallback.value if scenario.gca_fallback else None,
        "c_rate_bps": scenario.c_rate,
    }


def _csv_text(header: str, rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    buf.write(header + "\n")
    for r in rows:
        writer.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def run_scenario(scenario: Scenario, output_dir=None, workers: Optional[int] = None,
                 write: bool = True) -> RunResult:
    """Evaluate every grid point and write the CSVs (plus JSON sidecars).

    Instability at a grid point is recorded in its row. With ``workers > 1``
    grid points run in a process pool; rows are still written in grid order.
    """
    workers = scenario.workers if workers is None else workers
    out_dir = output_dir_for(scenario, output_dir)
    series = scenario.series or (None,)
    tables: dict[str, list[list]] = {}
    sidecars: dict[str, dict] = {}
    if scenario.kind in ("scaling", "cluster_size"):
        for sv in series:
            name = _file_name(scenario, sv)
            tables.setdefault(name, []).extend(_whole_series_rows(scenario, sv))
            sidecars.setdefault(name, _sidecar(scenario, sv if name != _file_name(scenario, None) else None))
    else:
        tasks = list(_tasks(scenario))
        if workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_compute_point, tasks))
        else:
            results = [_compute_point(t) for t in tasks]
        for task, rows in zip(tasks, results):
            sv = task[2]
            name = _file_name(scenario, sv)
            tables.setdefault(name, []).extend(rows)
            sidecars.setdefault(name, _sidecar(scenario, sv if name != _file_name(scenario, None) else None))

    files = []
    if write:
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, rows in tables.items():
            base = name if name in HEADERS else _file_name(scenario, None)
            path = out_dir / name
            path.write_text(_csv_text(HEADERS[base], rows), encoding="utf-8")
            (out_dir / (name + ".params.json")).write_text(
                json.dumps(sidecars[name], indent=2, sort_keys=True) + "\n", encoding="utf-8")
            files.append(path)
    return RunResult(scenario, files, tables, _summary(scenario, tables))


def greedy_trace_for(scenario: Scenario, objective: Optional[Objective] = None) -> GreedyTrace:
    """Greedy trace at the scenario's base parameters."""
    params = scenario.params
    pop = zipf_popularity(params)
    return greedy_caching(params, pop, objective or scenario.objective, scenario.service_model,
                          fallback=scenario.gca_fallback)


def greedy_trace_csv(trace: GreedyTrace) -> str:
    rows = [[i, s.cluster, s.file, s.marginal] for i, s in enumerate(trace.steps, start=1)]
    return _csv_text("step,cluster,file,marginal_s", rows)
