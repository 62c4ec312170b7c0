"""Discrete-time worm spreading with an optional listen-before-talk MAC.

Each timestep has three phases: transmitter selection (all infected nodes,
or a randomized maximal independent set of them when the MAC is on), a
broadcast round, and a patching round in which every node infected at the
start of the step (including MAC-blocked ones) becomes immune with the
patching probability.  In the broadcast round each vulnerable node that
hears at least one transmission runs a single infection trial at the
infection rate; simultaneous broadcasts reaching the same node do not
stack, which is what suppresses clustered spreading on geometric graphs.
Nodes infected during a step activate at the next step: they neither
transmit nor risk patching in the step of their infection.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import IntEnum

import multiprocessing as mp

import numpy as np

from . import _kernels
from .rng import derive_seed, generator_for
from .spatial_graph import Graph, GraphKind

#: a run counts as an outbreak when it patches more than this fraction of nodes
OUTBREAK_CUTOFF = 0.01


class NodeState(IntEnum):
    VULNERABLE = 0
    INFECTED = 1
    IMMUNE = 2


@dataclass(frozen=True)
class EpidemicParams:
    """Worm parameters: infection probability per step for a node in radio
    range of a transmitter, per-step patching probability, and whether
    channel access is MAC-constrained."""

    infection_rate: float
    patching_rate: float = 1.0
    mac_enabled: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.infection_rate <= 1.0:
            raise ValueError("infection_rate out of [0, 1]")
        if not 0.0 < self.patching_rate <= 1.0:
            raise ValueError("patching_rate out of (0, 1]")


@dataclass(frozen=True)
class RunRecord:
    """One run to extinction: S/I/R counts per timestep plus outcome."""

    series_s: np.ndarray
    series_i: np.ndarray
    series_r: np.ndarray
    final_recovered: int
    duration: int
    seed_node: int
    rng_seed: int


@dataclass(frozen=True)
class EnsembleStats:
    """Cross-run aggregates of a Monte Carlo ensemble.

    Mean curves are fractions of the node count; runs shorter than the
    longest one contribute I=0 and their final R beyond extinction, which
    is exact for a finished epidemic.  `susceptibility` is the normalized
    variance (<s^2> - <s>^2) / <s> of final outbreak sizes in node counts;
    it peaks near the epidemic threshold.
    """

    mean_i_curve: np.ndarray
    mean_r_curve: np.ndarray
    prevalence_mean: float
    prevalence_conditional: float
    susceptibility: float
    std_error: float
    run_count: int
    outbreak_count: int


def mac_select(g: Graph, infected, rng: np.random.Generator) -> np.ndarray:
    """Pick the transmitting subset of `infected` under listen-before-talk.

    The infected list is shuffled uniformly; each node taken removes its
    infected graph neighbors from contention.  The result (in selection
    order) is a maximal independent set of the infected-induced subgraph.
    """
    if g.kind is not GraphKind.RGG:
        raise ValueError("MAC selection requires a geometric graph")
    infected = np.sort(np.asarray(list(infected), dtype=np.int32))
    if infected.size == 0:
        raise ValueError("infected set is empty")
    mask = np.zeros(g.n_nodes, dtype=np.bool_)
    mask[infected] = True
    blocked = np.zeros(g.n_nodes, dtype=np.bool_)
    perm = rng.permutation(infected)
    return _kernels.lbt_select(perm, g.indptr, g.indices, mask, blocked)


def step(states: np.ndarray, g: Graph, params: EpidemicParams, rng: np.random.Generator):
    """Advance one timestep; returns (new_states, (s, i, r) counts)."""
    states = np.array(states, dtype=np.int8)
    infected = np.flatnonzero(states == NodeState.INFECTED).astype(np.int32)
    if infected.size == 0:
        raise ValueError("no infected node to step")
    mask = None
    blocked = None
    if params.mac_enabled:
        mask = np.zeros(g.n_nodes, dtype=np.bool_)
        mask[infected] = True
        blocked = np.zeros(g.n_nodes, dtype=np.bool_)
    counts = [
        int(np.count_nonzero(states == NodeState.VULNERABLE)),
        int(infected.size),
        int(np.count_nonzero(states == NodeState.IMMUNE)),
    ]
    infected = _step_inplace(states, infected, g, params, rng, mask, blocked, counts)
    return states, (counts[0], counts[1], counts[2])


def run(g: Graph, params: EpidemicParams, seed_node: int, rng_seed: int) -> RunRecord:
    """Simulate from a single infected seed until no infected node remains."""
    n = g.n_nodes
    if not 0 <= seed_node < n:
        raise ValueError("seed_node out of range")
    if params.mac_enabled and g.kind is not GraphKind.RGG:
        raise ValueError("MAC selection requires a geometric graph")
    rng = np.random.default_rng(int(rng_seed))
    states = np.zeros(n, dtype=np.int8)
    states[seed_node] = NodeState.INFECTED
    infected = np.array([seed_node], dtype=np.int32)
    mask = None
    blocked = None
    if params.mac_enabled:
        mask = np.zeros(n, dtype=np.bool_)
        mask[seed_node] = True
        blocked = np.zeros(n, dtype=np.bool_)
    counts = [n - 1, 1, 0]
    series_s = [n - 1]
    series_i = [1]
    series_r = [0]
    while infected.size:
        infected = _step_inplace(states, infected, g, params, rng, mask, blocked, counts)
        series_s.append(counts[0])
        series_i.append(counts[1])
        series_r.append(counts[2])
    return RunRecord(
        series_s=np.asarray(series_s, dtype=np.int64),
        series_i=np.asarray(series_i, dtype=np.int64),
        series_r=np.asarray(series_r, dtype=np.int64),
        final_recovered=series_r[-1],
        duration=len(series_s) - 1,
        seed_node=int(seed_node),
        rng_seed=int(rng_seed),
    )


def ensemble(
    g: Graph,
    params: EpidemicParams,
    n_runs: int,
    n_seed_nodes: int,
    master_seed: int,
    n_workers: int = 1,
) -> EnsembleStats:
    """Run an ensemble and aggregate it.

    Seed nodes are drawn (distinct, without replacement) from the stream
    keyed (master_seed, "seed-nodes"); run r starts at seed node
    r mod n_seed_nodes and uses the rng seed keyed (master_seed, "run", r),
    so results are identical for any worker count or completion order.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    if not 1 <= n_seed_nodes <= g.n_nodes:
        raise ValueError("n_seed_nodes must be in [1, node_count]")
    seed_nodes = np.sort(
        generator_for(master_seed, "seed-nodes").choice(g.n_nodes, size=n_seed_nodes, replace=False)
    )
    run_args = [
        (int(seed_nodes[r % n_seed_nodes]), derive_seed(master_seed, "run", r))
        for r in range(n_runs)
    ]
    if n_workers <= 1 or n_runs == 1:
        records = [run(g, params, node, seed) for node, seed in run_args]
    else:
        chunk = max(1, -(-n_runs // (n_workers * 4)))
        chunks = [run_args[i : i + chunk] for i in range(0, n_runs, chunk)]
        ctx = mp.get_context("fork")
        with ProcessPoolExecutor(
            max_workers=n_workers,
            mp_context=ctx,
            initializer=_init_worker,
            initargs=(g, params),
        ) as pool:
            results = pool.map(_run_chunk, chunks)
            records = [rec for batch in results for rec in batch]
    return aggregate(records, g.n_nodes)


def aggregate(records: list[RunRecord], node_count: int) -> EnsembleStats:
    """Reduce run records (in run order) into EnsembleStats."""
    n_runs = len(records)
    max_len = max(rec.series_i.shape[0] for rec in records)
    sum_i = np.zeros(max_len, dtype=np.float64)
    sum_r = np.zeros(max_len, dtype=np.float64)
    for rec in records:
        m = rec.series_i.shape[0]
        sum_i[:m] += rec.series_i
        sum_r[:m] += rec.series_r
        if m < max_len:
            sum_r[m:] += rec.series_r[-1]
    scale = 1.0 / (n_runs * node_count)
    finals = np.array([rec.final_recovered for rec in records], dtype=np.float64)
    fractions = finals / node_count
    outbreaks = fractions > OUTBREAK_CUTOFF
    # divide after averaging so degenerate ensembles stay exact
    prevalence_mean = float(finals.mean() / node_count)
    if outbreaks.any():
        prevalence_conditional = float(finals[outbreaks].mean() / node_count)
    else:
        prevalence_conditional = prevalence_mean
    susceptibility = float((finals**2).mean() - finals.mean() ** 2) / float(finals.mean())
    std_error = float(fractions.std(ddof=1) / np.sqrt(n_runs)) if n_runs > 1 else 0.0
    return EnsembleStats(
        mean_i_curve=sum_i * scale,
        mean_r_curve=sum_r * scale,
        prevalence_mean=prevalence_mean,
        prevalence_conditional=prevalence_conditional,
        susceptibility=susceptibility,
        std_error=std_error,
        run_count=n_runs,
        outbreak_count=int(outbreaks.sum()),
    )


_WORKER_GRAPH: Graph | None = None
_WORKER_PARAMS: EpidemicParams | None = None


def _init_worker(g: Graph, params: EpidemicParams) -> None:
    global _WORKER_GRAPH, _WORKER_PARAMS
    _WORKER_GRAPH = g
    _WORKER_PARAMS = params


def _run_chunk(args: list[tuple[int, int]]) -> list[RunRecord]:
    return [run(_WORKER_GRAPH, _WORKER_PARAMS, node, seed) for node, seed in args]


def _step_inplace(
    states: np.ndarray,
    infected: np.ndarray,
    g: Graph,
    params: EpidemicParams,
    rng: np.random.Generator,
    mask: np.ndarray | None,
    blocked: np.ndarray | None,
    counts: list[int],
) -> np.ndarray:
    """One timestep over preallocated state; returns the next infected list.

    Random draws occur in a fixed order (MAC shuffle, one uniform per
    exposed vulnerable node in ascending node order, one uniform per
    infected node in ascending order for patching) so runs are
    reproducible.
    """
    if params.mac_enabled:
        perm = rng.permutation(infected)
        transmitters = _kernels.lbt_select(perm, g.indptr, g.indices, mask, blocked)
    else:
        transmitters = infected

    targets = _gather_neighbors(g.indptr, g.indices, transmitters)
    if targets.size:
        exposed = np.unique(targets[states[targets] == NodeState.VULNERABLE]).astype(np.int32)
        newly = exposed[rng.random(exposed.size) < params.infection_rate]
    else:
        newly = np.empty(0, dtype=np.int32)

    if params.patching_rate >= 1.0:
        cured = infected
        remaining = np.empty(0, dtype=np.int32)
    else:
        patched = rng.random(infected.size) < params.patching_rate
        cured = infected[patched]
        remaining = infected[~patched]

    states[newly] = NodeState.INFECTED
    states[cured] = NodeState.IMMUNE
    if mask is not None:
        mask[cured] = False
        mask[newly] = True

    counts[0] -= int(newly.size)
    counts[1] += int(newly.size) - int(cured.size)
    counts[2] += int(cured.size)

    if remaining.size == 0:
        return newly
    if newly.size == 0:
        return remaining
    merged = np.concatenate((remaining, newly))
    merged.sort()
    return merged


def _gather_neighbors(indptr: np.ndarray, indices: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Concatenated neighbor lists of `nodes`, in node order."""
    if nodes.size == 0:
        return np.empty(0, dtype=indices.dtype)
    starts = indptr[nodes]
    ends = indptr[nodes + 1]
    counts = ends - starts
    nonzero = counts > 0
    if not nonzero.all():
        starts = starts[nonzero]
        ends = ends[nonzero]
        counts = counts[nonzero]
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=indices.dtype)
    # cumulative-offset gather: flat[k] walks each slice in turn
    flat = np.ones(total, dtype=np.int64)
    flat[0] = starts[0]
    boundaries = np.cumsum(counts)[:-1]
    flat[boundaries] = starts[1:] - ends[:-1] + 1
    np.cumsum(flat, out=flat)
    return indices[flat]
