"""Experiment orchestration: declarative sweep configs, parallel execution
over the (density x infection rate x MAC) lattice, and stable CSV outputs.

Seeds derive hierarchically from the experiment master seed (master ->
graph -> cell -> run), so any cell can be recomputed in isolation and
results are byte-identical for any worker count.  Completed cells are
flushed to disk as JSON, which makes long sweeps resumable at cell
granularity.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import shutil
import sys
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass
from pathlib import Path

import multiprocessing as mp

import numpy as np

from . import __version__
from .analysis import (
    CurvePoint,
    PrevalenceCurve,
    RegimeNotBracketedError,
    ThresholdMethod,
    estimate_threshold,
    mean_field_threshold,
    scaling_collapse,
    topology_label,
)
from .epidemic import EpidemicParams, ensemble
from .rng import derive_seed
from .spatial_graph import (
    Graph,
    GraphKind,
    NetworkConfig,
    PathlossParams,
    build_er_matched,
    build_rgg,
    compute_metrics,
    mean_degree_prediction,
    place_nodes,
    transmission_range,
)

TOPOLOGY_RGG = "rgg"
TOPOLOGY_ER = "er-matched"

PREVALENCE_HEADER = (
    "name,N,topology,mac,lambda,graph_replica,prevalence_mean,"
    "prevalence_conditional,susceptibility,std_error,runs"
)
TIMESERIES_HEADER = "name,N,topology,mac,lambda,t,mean_i_frac,mean_r_frac"
THRESHOLDS_HEADER = (
    "name,N,topology,mac,method,lambda_c,uncertainty,kappa_c,mean_degree,mean_field_lambda_c"
)
METRICS_HEADER = "name,N,topology,graph_replica,mean_degree,clustering,connected,giant_frac"

_PATHLOSS_KEYS = (
    "transmit_power",
    "pathloss_constant",
    "pathloss_exponent",
    "attenuation_threshold",
    "noise_level",
)


class SpecError(ValueError):
    """Config file cannot be parsed or fails validation."""


@dataclass(frozen=True)
class ExperimentSpec:
    """Declarative description of one parameter sweep."""

    name: str
    topology: str
    node_counts: tuple[int, ...]
    side_length: float
    lambda_grid: tuple[float, ...]
    transmission_range: float
    patching_rate: float = 1.0
    mac: str = "both"
    runs_per_point: int = 500
    seed_nodes_per_point: int = 5
    master_seed: int = 0
    graph_replicas: int = 1

    @property
    def mac_arms(self) -> tuple[bool, ...]:
        return {"on": (True,), "off": (False,), "both": (False, True)}[self.mac]


@dataclass(frozen=True)
class ResultRow:
    """One flat record per (N, topology, mac, lambda, replica) cell."""

    name: str
    node_count: int
    topology: str
    mac: str
    infection_rate: float
    graph_replica: int
    prevalence_mean: float
    prevalence_conditional: float
    susceptibility: float
    std_error: float
    runs: int
    mean_i_curve: tuple[float, ...]
    mean_r_curve: tuple[float, ...]
    master_seed: int
    graph_seed: int
    code_version: str

    def sort_key(self):
        return (self.name, self.node_count, self.topology, self.mac,
                self.infection_rate, self.graph_replica)


def load_spec(path) -> ExperimentSpec:
    """Parse and validate a flat key-value experiment file.

    Unknown and duplicate keys are rejected with their line number;
    validation failures name the offending field.
    """
    raw: dict[str, str] = {}
    lines: dict[str, int] = {}
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SpecError(f"cannot read spec file {path}: {exc}") from exc
    known = {
        "name", "topology", "node_counts", "side_length", "transmission_range",
        "lambda_grid", "patching_rate", "mac", "runs_per_point",
        "seed_nodes_per_point", "master_seed", "graph_replicas", *_PATHLOSS_KEYS,
    }
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise SpecError(f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in known:
            raise SpecError(f"{path}:{lineno}: unknown key {key!r}")
        if key in raw:
            raise SpecError(f"{path}:{lineno}: duplicate key {key!r}")
        raw[key] = value
        lines[key] = lineno

    def fail(key: str, msg: str):
        where = f"{path}:{lines[key]}: " if key in lines else ""
        raise SpecError(f"{where}{key}: {msg}")

    def parse_float(key: str) -> float:
        try:
            return float(raw[key])
        except ValueError:
            fail(key, f"not a number: {raw[key]!r}")

    def parse_int(key: str) -> int:
        try:
            return int(raw[key])
        except ValueError:
            fail(key, f"not an integer: {raw[key]!r}")

    for key in ("name", "topology", "node_counts", "side_length", "lambda_grid"):
        if key not in raw:
            raise SpecError(f"{path}: missing required key {key!r}")

    topology = raw["topology"].lower()
    if topology not in (TOPOLOGY_RGG, TOPOLOGY_ER):
        fail("topology", f"must be '{TOPOLOGY_RGG}' or '{TOPOLOGY_ER}', got {raw['topology']!r}")

    try:
        node_counts = tuple(int(tok) for tok in raw["node_counts"].replace(",", " ").split())
    except ValueError:
        fail("node_counts", f"not an integer list: {raw['node_counts']!r}")
    if not node_counts or any(n < 1 for n in node_counts):
        fail("node_counts", "must be a nonempty list of counts >= 1")
    if len(set(node_counts)) != len(node_counts):
        fail("node_counts", "contains duplicates")

    side_length = parse_float("side_length")
    if not side_length > 0:
        fail("side_length", "must be positive")

    has_range = "transmission_range" in raw
    has_pathloss = any(k in raw for k in _PATHLOSS_KEYS)
    if has_range and has_pathloss:
        fail("transmission_range", "give either transmission_range or pathloss parameters, not both")
    if not has_range and not has_pathloss:
        raise SpecError(f"{path}: missing transmission_range (or pathloss parameters)")
    if has_range:
        r_t = parse_float("transmission_range")
        if not r_t > 0:
            fail("transmission_range", "must be positive")
    else:
        missing = [k for k in _PATHLOSS_KEYS if k not in raw]
        if missing:
            raise SpecError(f"{path}: incomplete pathloss parameters, missing {missing}")
        try:
            pl = PathlossParams(*(parse_float(k) for k in _PATHLOSS_KEYS))
        except ValueError as exc:
            raise SpecError(f"{path}: pathloss parameters: {exc}") from exc
        r_t = transmission_range(pl)

    try:
        lambda_grid = tuple(float(tok) for tok in raw["lambda_grid"].replace(",", " ").split())
    except ValueError:
        fail("lambda_grid", f"not a number list: {raw['lambda_grid']!r}")
    if not lambda_grid:
        fail("lambda_grid", "must be nonempty")
    for lam in lambda_grid:
        if not 0.0 <= lam <= 1.0:
            fail("lambda_grid", f"infection_rate out of [0, 1]: {lam!r}")
    if any(b <= a for a, b in zip(lambda_grid, lambda_grid[1:])):
        fail("lambda_grid", "must be sorted strictly increasing")

    patching_rate = parse_float("patching_rate") if "patching_rate" in raw else 1.0
    if not 0.0 < patching_rate <= 1.0:
        fail("patching_rate", f"patching_rate out of (0, 1]: {patching_rate!r}")

    mac = raw.get("mac", "both").lower()
    if mac not in ("on", "off", "both"):
        fail("mac", f"must be on, off or both, got {raw['mac']!r}")
    if topology == TOPOLOGY_ER and mac != "off":
        fail("mac", "MAC requires node positions; use mac = off with er-matched topology")

    runs_per_point = parse_int("runs_per_point") if "runs_per_point" in raw else 500
    if runs_per_point < 1:
        fail("runs_per_point", "must be >= 1")
    seed_nodes = parse_int("seed_nodes_per_point") if "seed_nodes_per_point" in raw else 5
    if seed_nodes < 1:
        fail("seed_nodes_per_point", "must be >= 1")
    if seed_nodes > min(node_counts):
        fail("seed_nodes_per_point", "exceeds the smallest node count")
    master_seed = parse_int("master_seed") if "master_seed" in raw else 0
    graph_replicas = parse_int("graph_replicas") if "graph_replicas" in raw else 1
    if graph_replicas < 1:
        fail("graph_replicas", "must be >= 1")

    if not r_t < side_length / 2:
        raise SpecError(
            f"{path}: periodic boundaries require transmission_range < side_length / 2 "
            f"(got {r_t:g} vs {side_length:g})"
        )

    return ExperimentSpec(
        name=raw["name"],
        topology=topology,
        node_counts=node_counts,
        side_length=side_length,
        lambda_grid=lambda_grid,
        transmission_range=r_t,
        patching_rate=patching_rate,
        mac=mac,
        runs_per_point=runs_per_point,
        seed_nodes_per_point=seed_nodes,
        master_seed=master_seed,
        graph_replicas=graph_replicas,
    )


def default_worker_count() -> int:
    env = os.environ.get("WORMSIM_WORKERS")
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise SpecError(f"WORMSIM_WORKERS is not an integer: {env!r}") from exc
        if value < 1:
            raise SpecError("WORMSIM_WORKERS must be >= 1")
        return value
    return os.cpu_count() or 1


def _spec_dict(spec: ExperimentSpec) -> dict:
    d = asdict(spec)
    d["node_counts"] = list(spec.node_counts)
    d["lambda_grid"] = list(spec.lambda_grid)
    return d


def _lambda_token(lam: float) -> str:
    return repr(float(lam))


def _cell_key(spec: ExperimentSpec, n: int, replica: int, mac_on: bool, lam: float) -> str:
    arm = "on" if mac_on else "off"
    return f"{spec.topology}_N{n}_r{replica}_mac-{arm}_lam{_lambda_token(lam)}"


def _graph_key(spec: ExperimentSpec, n: int, replica: int) -> str:
    return f"{spec.topology}_N{n}_r{replica}"


def build_experiment_graph(spec: ExperimentSpec, n: int, replica: int) -> tuple[Graph, int]:
    """Deterministic graph for one (node count, replica) slot."""
    graph_seed = derive_seed(spec.master_seed, "graph", spec.topology, n, replica)
    config = NetworkConfig(n, spec.side_length, spec.transmission_range, periodic=True)
    rng = np.random.default_rng(graph_seed)
    if spec.topology == TOPOLOGY_RGG:
        g = build_rgg(place_nodes(config, rng), config)
    else:
        g = build_er_matched(n, mean_degree_prediction(config), rng, config)
    return g, graph_seed


_CELL_GRAPH: Graph | None = None


def _cell_worker_init(graph: Graph) -> None:
    global _CELL_GRAPH
    _CELL_GRAPH = graph


def _run_cell(task: dict) -> dict:
    params = EpidemicParams(task["lam"], task["patching_rate"], task["mac_on"])
    stats = ensemble(
        _CELL_GRAPH,
        params,
        task["runs"],
        task["seed_nodes"],
        task["cell_seed"],
        n_workers=1,
    )
    return {
        "key": task["key"],
        "stats": {
            "prevalence_mean": stats.prevalence_mean,
            "prevalence_conditional": stats.prevalence_conditional,
            "susceptibility": stats.susceptibility,
            "std_error": stats.std_error,
            "run_count": stats.run_count,
            "outbreak_count": stats.outbreak_count,
            "mean_i_curve": stats.mean_i_curve.tolist(),
            "mean_r_curve": stats.mean_r_curve.tolist(),
        },
    }


def execute(
    spec: ExperimentSpec,
    out_dir,
    worker_count: int = 1,
    force: bool = False,
    log=None,
) -> list[ResultRow]:
    """Run every cell of the sweep, flushing each finished cell to disk.

    Rerunning against the same output directory computes only missing
    cells; a directory holding a different experiment is refused unless
    `force` wipes it.  Returns all result rows (freshly computed plus
    resumed), sorted by primary key.
    """
    log = log or (lambda msg: print(msg, file=sys.stderr, flush=True))
    out = Path(out_dir)
    manifest_path = out / "manifest.json"
    spec_dict = _spec_dict(spec)
    if out.exists() and any(out.iterdir()):
        if manifest_path.exists():
            old = json.loads(manifest_path.read_text())
            if old.get("spec") != spec_dict:
                if not force:
                    raise FileExistsError(
                        f"{out} holds a different experiment; pass --force to overwrite"
                    )
                shutil.rmtree(out)
        elif not force:
            raise FileExistsError(f"{out} exists and is not a wormsim output dir; pass --force")
        else:
            shutil.rmtree(out)
    cells_dir = out / "cells"
    graphs_dir = out / "graphs"
    cells_dir.mkdir(parents=True, exist_ok=True)
    graphs_dir.mkdir(parents=True, exist_ok=True)

    graph_seeds = {
        _graph_key(spec, n, r): derive_seed(spec.master_seed, "graph", spec.topology, n, r)
        for n in spec.node_counts
        for r in range(spec.graph_replicas)
    }
    _write_json(
        manifest_path,
        {
            "format": "wormsim-experiment",
            "version": __version__,
            "spec": spec_dict,
            "graph_seeds": graph_seeds,
        },
    )

    total_cells = (
        len(spec.node_counts) * spec.graph_replicas * len(spec.mac_arms) * len(spec.lambda_grid)
    )
    done_cells = 0
    t_start = time.time()

    for n in spec.node_counts:
        for replica in range(spec.graph_replicas):
            gkey = _graph_key(spec, n, replica)
            pending = []
            for mac_on in spec.mac_arms:
                for lam in spec.lambda_grid:
                    key = _cell_key(spec, n, replica, mac_on, lam)
                    if (cells_dir / f"{key}.json").exists():
                        done_cells += 1
                    else:
                        pending.append((mac_on, lam, key))
            metrics_path = graphs_dir / f"{gkey}.json"
            if not pending and metrics_path.exists():
                log(f"[wormsim] {gkey}: all cells present, skipping")
                continue

            t0 = time.time()
            graph, graph_seed = build_experiment_graph(spec, n, replica)
            metrics = compute_metrics(graph)
            _write_json(
                metrics_path,
                {
                    "name": spec.name,
                    "node_count": n,
                    "topology": spec.topology,
                    "graph_replica": replica,
                    "graph_seed": graph_seed,
                    "side_length": spec.side_length,
                    "transmission_range": spec.transmission_range,
                    "mean_degree": metrics.mean_degree,
                    "clustering": metrics.clustering_coefficient,
                    "connected": metrics.connected,
                    "giant_frac": metrics.giant_component_fraction,
                    "degree_histogram": {str(k): v for k, v in metrics.degree_histogram.items()},
                },
            )
            log(
                f"[wormsim] {gkey}: graph built in {time.time() - t0:.1f}s "
                f"(mean degree {metrics.mean_degree:.2f}, clustering "
                f"{metrics.clustering_coefficient:.3f}, connected={metrics.connected})"
            )
            if not metrics.connected:
                log(
                    f"[wormsim] warning: {gkey} is disconnected (giant component "
                    f"{metrics.giant_component_fraction:.3f}); cells still run"
                )

            tasks = [
                {
                    "key": key,
                    "lam": lam,
                    "mac_on": mac_on,
                    "patching_rate": spec.patching_rate,
                    "runs": spec.runs_per_point,
                    "seed_nodes": spec.seed_nodes_per_point,
                    "cell_seed": derive_seed(
                        spec.master_seed, "cell", spec.topology, n, replica,
                        "on" if mac_on else "off", _lambda_token(lam),
                    ),
                }
                for mac_on, lam, key in pending
            ]
            for result in _run_cells(graph, tasks, worker_count):
                payload = {
                    "name": spec.name,
                    "node_count": n,
                    "topology": spec.topology,
                    "mac": "on" if "mac-on" in result["key"] else "off",
                    "infection_rate": _lam_of_key(result["key"]),
                    "graph_replica": replica,
                    "master_seed": spec.master_seed,
                    "graph_seed": graph_seed,
                    "code_version": __version__,
                    **result["stats"],
                }
                _write_json(cells_dir / f"{result['key']}.json", payload)
                done_cells += 1
                log(
                    f"[wormsim] cell {done_cells}/{total_cells} {result['key']} "
                    f"(prevalence {payload['prevalence_mean']:.4f}, "
                    f"{time.time() - t_start:.0f}s elapsed)"
                )
            del graph

    rows = load_rows(out)
    emit(rows, load_graph_metrics(out), out)
    return rows


def _run_cells(graph: Graph, tasks: list[dict], worker_count: int):
    """Yield finished cell results; order does not affect stored output."""
    if not tasks:
        return
    if worker_count <= 1 or len(tasks) == 1:
        _cell_worker_init(graph)
        for task in tasks:
            yield _run_cell(task)
        return
    ctx = mp.get_context("fork")
    with ProcessPoolExecutor(
        max_workers=min(worker_count, len(tasks)),
        mp_context=ctx,
        initializer=_cell_worker_init,
        initargs=(graph,),
    ) as pool:
        futures = [pool.submit(_run_cell, task) for task in tasks]
        for fut in as_completed(futures):
            yield fut.result()


def _lam_of_key(key: str) -> float:
    return float(key.rsplit("_lam", 1)[1])


def load_rows(out_dir) -> list[ResultRow]:
    """All completed cells in an output directory, sorted by primary key."""
    out = Path(out_dir)
    rows = []
    for path in sorted((out / "cells").glob("*.json")):
        d = json.loads(path.read_text())
        rows.append(
            ResultRow(
                name=d["name"],
                node_count=d["node_count"],
                topology=d["topology"],
                mac=d["mac"],
                infection_rate=d["infection_rate"],
                graph_replica=d["graph_replica"],
                prevalence_mean=d["prevalence_mean"],
                prevalence_conditional=d["prevalence_conditional"],
                susceptibility=d["susceptibility"],
                std_error=d["std_error"],
                runs=d["run_count"],
                mean_i_curve=tuple(d["mean_i_curve"]),
                mean_r_curve=tuple(d["mean_r_curve"]),
                master_seed=d["master_seed"],
                graph_seed=d["graph_seed"],
                code_version=d["code_version"],
            )
        )
    rows.sort(key=ResultRow.sort_key)
    return rows


def load_graph_metrics(out_dir) -> list[dict]:
    out = Path(out_dir)
    entries = [json.loads(p.read_text()) for p in sorted((out / "graphs").glob("*.json"))]
    entries.sort(key=lambda d: (d["name"], d["node_count"], d["topology"], d["graph_replica"]))
    return entries


def fmt(x: float) -> str:
    """Fixed-notation float with 6 significant digits (CSV convention)."""
    if isinstance(x, bool):
        return str(x).lower()
    if math.isnan(x):
        return "nan"
    return np.format_float_positional(float(x), precision=6, unique=False, fractional=False, trim="-")


def emit(rows: list[ResultRow], graph_metrics: list[dict], out_dir) -> None:
    """Write the four CSV schemas from completed cells."""
    if not rows:
        raise ValueError("no results to emit")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    lines = [PREVALENCE_HEADER]
    for r in sorted(rows, key=ResultRow.sort_key):
        lines.append(
            f"{r.name},{r.node_count},{r.topology},{r.mac},{fmt(r.infection_rate)},"
            f"{r.graph_replica},{fmt(r.prevalence_mean)},{fmt(r.prevalence_conditional)},"
            f"{fmt(r.susceptibility)},{fmt(r.std_error)},{r.runs}"
        )
    (out / "prevalence.csv").write_text("\n".join(lines) + "\n")

    # schema has no replica column: average curves across replicas, padding
    # finished epidemics with I=0 and their final R (exact, not approximate)
    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.name, r.node_count, r.topology, r.mac, r.infection_rate), []).append(r)
    lines = [TIMESERIES_HEADER]
    for key in sorted(groups):
        name, n, topology, mac, lam = key
        members = groups[key]
        length = max(len(r.mean_i_curve) for r in members)
        sum_i = np.zeros(length)
        sum_r = np.zeros(length)
        for r in members:
            m = len(r.mean_i_curve)
            sum_i[:m] += r.mean_i_curve
            sum_r[:m] += r.mean_r_curve
            if m < length:
                sum_r[m:] += r.mean_r_curve[-1]
        for t in range(length):
            lines.append(
                f"{name},{n},{topology},{mac},{fmt(lam)},{t},"
                f"{fmt(sum_i[t] / len(members))},{fmt(sum_r[t] / len(members))}"
            )
    (out / "timeseries.csv").write_text("\n".join(lines) + "\n")

    lines = [METRICS_HEADER]
    for d in graph_metrics:
        lines.append(
            f"{d['name']},{d['node_count']},{d['topology']},{d['graph_replica']},"
            f"{fmt(d['mean_degree'])},{fmt(d['clustering'])},"
            f"{str(bool(d['connected'])).lower()},{fmt(d['giant_frac'])}"
        )
    (out / "metrics.csv").write_text("\n".join(lines) + "\n")

    lines = [THRESHOLDS_HEADER]
    for (name, n, topology, mac), curve in sorted(curves_from_rows(rows, graph_metrics).items()):
        if len(curve.points) < 3:
            continue
        for method in ThresholdMethod:
            try:
                est = estimate_threshold(curve, method)
            except RegimeNotBracketedError:
                continue
            lines.append(
                f"{name},{n},{topology},{mac},{method.value},{fmt(est.lambda_c)},"
                f"{fmt(est.uncertainty)},{fmt(est.kappa_c)},{fmt(curve.mean_degree)},"
                f"{fmt(mean_field_threshold(curve.mean_degree))}"
            )
    (out / "thresholds.csv").write_text("\n".join(lines) + "\n")


def curves_from_rows(rows: list[ResultRow], graph_metrics: list[dict]) -> dict[tuple, PrevalenceCurve]:
    """Replica-averaged prevalence curves per (name, N, topology, mac) group.

    With several graph replicas, curve points and the measured mean degree
    are averaged across replicas before threshold estimation.
    """
    degree_of: dict[tuple, list[float]] = {}
    geometry: dict[tuple, tuple[float, float]] = {}
    for d in graph_metrics:
        gkey = (d["name"], d["node_count"], d["topology"])
        degree_of.setdefault(gkey, []).append(d["mean_degree"])
        geometry[gkey] = (d["side_length"], d["transmission_range"])

    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.name, r.node_count, r.topology, r.mac), []).append(r)
    curves: dict[tuple, PrevalenceCurve] = {}
    for key, members in groups.items():
        name, n, topology, mac = key
        by_lambda: dict[float, list[ResultRow]] = {}
        for r in members:
            by_lambda.setdefault(r.infection_rate, []).append(r)
        points = []
        for lam in sorted(by_lambda):
            reps = by_lambda[lam]
            points.append(
                CurvePoint(
                    infection_rate=lam,
                    prevalence_mean=float(np.mean([r.prevalence_mean for r in reps])),
                    prevalence_conditional=float(np.mean([r.prevalence_conditional for r in reps])),
                    susceptibility=float(np.mean([r.susceptibility for r in reps])),
                    std_error=float(np.sqrt(np.mean([r.std_error**2 for r in reps]) / len(reps))),
                )
            )
        gkey = (name, n, topology)
        side, r_t = geometry.get(gkey, (float("nan"), float("nan")))
        kind = GraphKind.ER if topology == TOPOLOGY_ER else GraphKind.RGG
        curves[key] = PrevalenceCurve(
            points=tuple(points),
            topology_kind=topology_label(kind, mac == "on"),
            network_config=NetworkConfig(n, side, r_t, periodic=True),
            mean_degree=float(np.mean(degree_of.get(gkey, [float("nan")]))),
        )
    return curves


def analyze(out_dir, log=None) -> dict:
    """Recompute thresholds and the scaling collapse from stored cells."""
    log = log or (lambda msg: print(msg, file=sys.stderr, flush=True))
    out = Path(out_dir)
    if not (out / "manifest.json").exists():
        raise FileNotFoundError(f"{out} is not a wormsim output directory")
    rows = load_rows(out)
    if not rows:
        raise ValueError(f"{out} has no completed cells")
    graph_metrics = load_graph_metrics(out)
    emit(rows, graph_metrics, out)

    curves = curves_from_rows(rows, graph_metrics)
    summary: dict = {"thresholds": {}, "collapse": {}}
    for key, curve in sorted(curves.items()):
        name, n, topology, mac = key
        for method in ThresholdMethod:
            try:
                est = estimate_threshold(curve, method)
            except (RegimeNotBracketedError, ValueError) as exc:
                log(f"[wormsim] threshold {key} {method.value}: not estimable ({exc})")
                continue
            summary["thresholds"][f"{name}/{topology}/N{n}/mac-{mac}/{method.value}"] = {
                "lambda_c": est.lambda_c,
                "uncertainty": est.uncertainty,
                "kappa_c": est.kappa_c,
                "mean_degree": curve.mean_degree,
            }

    by_arm: dict[tuple, list[PrevalenceCurve]] = {}
    for (name, n, topology, mac), curve in curves.items():
        by_arm.setdefault((name, topology, mac), []).append(curve)
    for arm, arm_curves in sorted(by_arm.items()):
        if len(arm_curves) < 2:
            continue
        try:
            result = scaling_collapse(arm_curves)
        except ValueError as exc:
            log(f"[wormsim] collapse {arm}: skipped ({exc})")
            continue
        summary["collapse"]["/".join(map(str, arm))] = {
            "max_deviation": result.max_deviation,
            "window": list(result.window),
            "node_counts": [s.node_count for s in result.series],
        }
    _write_json(out / "collapse.json", summary["collapse"])
    return summary


def graph_metrics_audit(spec: ExperimentSpec, out_dir=None, log=None) -> list[dict]:
    """Topology-only audit: build each graph and report its metrics."""
    log = log or (lambda msg: print(msg, file=sys.stderr, flush=True))
    entries = []
    for n in spec.node_counts:
        for replica in range(spec.graph_replicas):
            t0 = time.time()
            graph, graph_seed = build_experiment_graph(spec, n, replica)
            metrics = compute_metrics(graph)
            entries.append(
                {
                    "name": spec.name,
                    "node_count": n,
                    "topology": spec.topology,
                    "graph_replica": replica,
                    "graph_seed": graph_seed,
                    "side_length": spec.side_length,
                    "transmission_range": spec.transmission_range,
                    "mean_degree": metrics.mean_degree,
                    "clustering": metrics.clustering_coefficient,
                    "connected": metrics.connected,
                    "giant_frac": metrics.giant_component_fraction,
                    "degree_histogram": {str(k): v for k, v in metrics.degree_histogram.items()},
                }
            )
            log(f"[wormsim] {_graph_key(spec, n, replica)} audited in {time.time() - t0:.1f}s")
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = [METRICS_HEADER]
        for d in entries:
            lines.append(
                f"{d['name']},{d['node_count']},{d['topology']},{d['graph_replica']},"
                f"{fmt(d['mean_degree'])},{fmt(d['clustering'])},"
                f"{str(bool(d['connected'])).lower()},{fmt(d['giant_frac'])}"
            )
        (out / "metrics.csv").write_text("\n".join(lines) + "\n")
        hist_lines = ["name,N,topology,graph_replica,degree,count"]
        for d in entries:
            for k in sorted(int(x) for x in d["degree_histogram"]):
                hist_lines.append(
                    f"{d['name']},{d['node_count']},{d['topology']},"
                    f"{d['graph_replica']},{k},{d['degree_histogram'][str(k)]}"
                )
        (out / "degree_histogram.csv").write_text("\n".join(hist_lines) + "\n")
    return entries


def _write_json(path: Path, payload: dict) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, indent=1, sort_keys=True))
    tmp.replace(path)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="wormsim",
        description="Monte Carlo worm epidemics on wireless ad hoc networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment sweep")
    p_run.add_argument("spec", help="experiment spec file")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--workers", type=int, default=None, help="worker process count")
    p_run.add_argument("--force", action="store_true", help="overwrite a conflicting output dir")

    p_an = sub.add_parser("analyze", help="recompute thresholds/collapse from stored cells")
    p_an.add_argument("dir", help="output directory of a previous run")

    p_gm = sub.add_parser("graph-metrics", help="topology-only audit of the spec's graphs")
    p_gm.add_argument("spec", help="experiment spec file")
    p_gm.add_argument("--out", default=None, help="optional directory for metrics CSVs")

    args = parser.parse_args(argv)

    try:
        if args.command == "run":
            spec = load_spec(args.spec)
            workers = args.workers if args.workers is not None else default_worker_count()
            if workers < 1:
                raise SpecError("--workers must be >= 1")
            try:
                rows = execute(spec, args.out, worker_count=workers, force=args.force)
            except FileExistsError as exc:
                print(f"wormsim: {exc}", file=sys.stderr)
                return 1
            print(f"wormsim: wrote {len(rows)} result rows to {args.out}")
            return 0
        if args.command == "analyze":
            summary = analyze(args.dir)
            for key, val in summary["thresholds"].items():
                print(
                    f"{key}: lambda_c={fmt(val['lambda_c'])} +- {fmt(val['uncertainty'])} "
                    f"(kappa_c={fmt(val['kappa_c'])})"
                )
            for key, val in summary["collapse"].items():
                print(
                    f"collapse {key}: max deviation {fmt(val['max_deviation'])} "
                    f"over kappa {val['window']}"
                )
            return 0
        if args.command == "graph-metrics":
            spec = load_spec(args.spec)
            entries = graph_metrics_audit(spec, args.out)
            for d in entries:
                print(
                    f"{d['topology']} N={d['node_count']} replica={d['graph_replica']}: "
                    f"mean_degree={fmt(d['mean_degree'])} clustering={fmt(d['clustering'])} "
                    f"connected={str(bool(d['connected'])).lower()} "
                    f"giant_frac={fmt(d['giant_frac'])}"
                )
            return 0
    except SpecError as exc:
        print(f"wormsim: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, FileNotFoundError) as exc:
        print(f"wormsim: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
