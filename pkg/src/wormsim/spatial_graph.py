"""Network topologies for wireless ad hoc worm simulations.

Nodes are placed uniformly on a square (optionally a torus); the radio
pathloss model turns transmit power into a maximum transmission range, and
linking every pair of nodes within that range yields a random geometric
graph (RGG).  Degree-matched Erdos-Renyi graphs serve as a spatially
uncorrelated baseline.  Graphs are immutable CSR structures shared
read-only by all Monte Carlo runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TextIO

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import _kernels


class GraphKind(Enum):
    RGG = "rgg"
    ER = "er"


@dataclass(frozen=True)
class PathlossParams:
    """Radio propagation parameters of the pathloss attenuation law.

    Received power at distance r is transmit_power / (pathloss_constant *
    r**pathloss_exponent); a transmission is decodable while that power
    stays above attenuation_threshold * noise_level.
    """

    transmit_power: float
    pathloss_constant: float
    pathloss_exponent: float
    attenuation_threshold: float
    noise_level: float

    def __post_init__(self) -> None:
        for name in (
            "transmit_power",
            "pathloss_constant",
            "pathloss_exponent",
            "attenuation_threshold",
            "noise_level",
        ):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.pathloss_exponent < 1:
            raise ValueError("pathloss_exponent must be >= 1")


@dataclass(frozen=True)
class NetworkConfig:
    """Geometry of a deployment: node count, square side, radio range."""

    node_count: int
    side_length: float
    transmission_range: float
    periodic: bool = True

    def __post_init__(self) -> None:
        if self.node_count < 1:
            raise ValueError("node_count must be >= 1")
        if not self.side_length > 0:
            raise ValueError("side_length must be positive")
        if not self.transmission_range > 0:
            raise ValueError("transmission_range must be positive")
        if self.periodic and not self.transmission_range < self.side_length / 2:
            # otherwise a node could reach the same neighbor via two wrap paths
            raise ValueError("periodic boundaries require transmission_range < side_length / 2")

    @property
    def density(self) -> float:
        return self.node_count / self.side_length**2


class Graph:
    """Immutable undirected graph in CSR form, with optional node positions.

    `indices[indptr[i]:indptr[i+1]]` is the sorted neighbor list of node i.
    Safe to share read-only across concurrent simulation workers.
    """

    __slots__ = ("kind", "config", "positions", "indptr", "indices")

    def __init__(
        self,
        kind: GraphKind,
        config: NetworkConfig,
        indptr: np.ndarray,
        indices: np.ndarray,
        positions: np.ndarray | None = None,
    ):
        self.kind = kind
        self.config = config
        self.indptr = np.array(indptr, dtype=np.int64)
        self.indices = np.array(indices, dtype=np.int32)
        self.positions = None if positions is None else np.array(positions, dtype=np.float64)
        for arr in (self.indptr, self.indices) + (() if self.positions is None else (self.positions,)):
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.indptr.shape[0] - 1

    @property
    def n_edges(self) -> int:
        return self.indices.shape[0] // 2

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, node: int) -> np.ndarray:
        return self.indices[self.indptr[node] : self.indptr[node + 1]]


@dataclass(frozen=True)
class GraphMetrics:
    """Topology audit: degree law, clustering, connectivity."""

    degree_histogram: dict[int, int]
    mean_degree: float
    clustering_coefficient: float
    connected: bool
    giant_component_fraction: float


def place_nodes(config: NetworkConfig, rng: np.random.Generator) -> np.ndarray:
    """Drop node_count points uniformly on [0, L)^2; deterministic per rng state."""
    return rng.random((config.node_count, 2)) * config.side_length


def transmission_range(p: PathlossParams) -> float:
    """Maximum link distance allowed by the pathloss law.

    The received signal clears the attenuation threshold over noise up to
    (P / (c * beta_th * nu)) ** (1 / alpha).
    """
    return (
        p.transmit_power / (p.pathloss_constant * p.attenuation_threshold * p.noise_level)
    ) ** (1.0 / p.pathloss_exponent)


def toroidal_distance(a, b, side_length: float, periodic: bool = True):
    """Euclidean distance between points, minimum-image if periodic.

    Accepts single (x, y) pairs or arrays with coordinates on the last
    axis; coordinates must lie in [0, side_length).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    diff = np.abs(a - b)
    if periodic:
        diff = np.minimum(diff, side_length - diff)
    return np.hypot(diff[..., 0], diff[..., 1])


def build_rgg(positions: np.ndarray, config: NetworkConfig) -> Graph:
    """Link every pair of nodes within the transmission range (inclusive).

    Neighbor search runs on a uniform grid with cell size >= range, so the
    expected cost is O(N * mean_degree) rather than O(N^2).  A pair at
    exactly the transmission range counts as an edge.
    """
    positions = np.ascontiguousarray(positions, dtype=np.float64)
    n = config.node_count
    if positions.shape != (n, 2):
        raise ValueError(f"expected positions of shape ({n}, 2), got {positions.shape}")
    side = float(config.side_length)
    radius = float(config.transmission_range)

    ncell = max(1, int(side // radius))
    cell_size = side / ncell
    cell_xy = np.clip((positions // cell_size).astype(np.int64), 0, ncell - 1)
    cell_of_node = cell_xy[:, 0] * ncell + cell_xy[:, 1]
    order = np.argsort(cell_of_node, kind="stable").astype(np.int64)
    counts = np.bincount(cell_of_node, minlength=ncell * ncell)
    cell_ptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)

    src, dst = _kernels.rgg_neighbor_pairs(
        positions, cell_of_node, cell_ptr, order, ncell, cell_size, side, radius, config.periodic
    )
    indptr, indices = _pairs_to_csr(n, src, dst)
    return Graph(GraphKind.RGG, config, indptr, indices, positions)


def build_er_matched(
    node_count: int,
    mean_degree: float,
    rng: np.random.Generator,
    config: NetworkConfig | None = None,
) -> Graph:
    """G(N, p) random graph with p = mean_degree / (N - 1).

    Its Poisson degree law matches an RGG of the same mean degree, which is
    what makes it a useful spatially-uncorrelated baseline.  No positions
    are stored.  `config` records which deployment the graph is matched to;
    a nominal one is synthesized when omitted.
    """
    if node_count < 2:
        raise ValueError("node_count must be >= 2")
    if not 0 < mean_degree <= node_count - 1:
        raise ValueError("mean_degree must be in (0, node_count - 1]")
    p = mean_degree / (node_count - 1)
    pair_idx = _sample_pair_indices(node_count, p, rng)
    src, dst = _pair_index_to_nodes(node_count, pair_idx)
    indptr, indices = _pairs_to_csr(node_count, src.astype(np.int32), dst.astype(np.int32))
    if config is None:
        config = NetworkConfig(
            node_count=node_count, side_length=1.0, transmission_range=0.25, periodic=False
        )
    elif config.node_count != node_count:
        raise ValueError("config.node_count does not match node_count")
    return Graph(GraphKind.ER, config, indptr, indices, None)


def compute_metrics(g: Graph) -> GraphMetrics:
    """Degree histogram, mean degree, average local clustering, connectivity.

    Local clustering of a node is (edges among its neighbors) / (deg choose
    2); nodes of degree < 2 are excluded from the average (undefined
    denominator).
    """
    deg = g.degrees
    hist_arr = np.bincount(deg)
    histogram = {int(k): int(c) for k, c in enumerate(hist_arr) if c > 0}
    mean_degree = float(deg.mean()) if g.n_nodes else 0.0

    tri = _kernels.triangle_counts(g.indptr, g.indices)
    eligible = deg >= 2
    if eligible.any():
        d = deg[eligible].astype(np.float64)
        local = tri[eligible] / (d * (d - 1) / 2.0)
        clustering = float(local.mean())
    else:
        clustering = 0.0

    adj = csr_matrix(
        (np.ones(g.indices.shape[0], dtype=np.int8), g.indices, g.indptr),
        shape=(g.n_nodes, g.n_nodes),
    )
    n_comp, labels = connected_components(adj, directed=False)
    giant = float(np.bincount(labels).max()) / g.n_nodes
    return GraphMetrics(
        degree_histogram=histogram,
        mean_degree=mean_degree,
        clustering_coefficient=clustering,
        connected=bool(n_comp == 1),
        giant_component_fraction=giant,
    )


def mean_degree_prediction(config: NetworkConfig) -> float:
    """Expected RGG degree pi * r_t^2 * density (a disk's worth of nodes)."""
    return math.pi * config.transmission_range**2 * config.density


def export_graph(g: Graph, edges_file: TextIO, positions_file: TextIO | None = None) -> None:
    """Debug export: one `i j` line per edge (i < j), one `i x y` line per node."""
    indptr, indices = g.indptr, g.indices
    for i in range(g.n_nodes):
        for j in indices[indptr[i] : indptr[i + 1]]:
            if i < j:
                edges_file.write(f"{i} {j}\n")
    if positions_file is not None:
        if g.positions is None:
            raise ValueError("graph has no positions to export")
        for i, (x, y) in enumerate(g.positions):
            positions_file.write(f"{i} {float(x)!r} {float(y)!r}\n")


def _pairs_to_csr(n: int, src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # symmetrize (i, j) pairs and sort each row
    rows = np.concatenate((src, dst))
    cols = np.concatenate((dst, src))
    order = np.lexsort((cols, rows))
    rows = rows[order]
    cols = cols[order]
    deg = np.bincount(rows, minlength=n)
    indptr = np.concatenate(([0], np.cumsum(deg))).astype(np.int64)
    return indptr, cols.astype(np.int32)


def _sample_pair_indices(n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """Indices of selected pairs among the n*(n-1)/2 unordered pairs.

    Geometric gap skipping: each pair is selected independently with
    probability p at O(expected edges) cost.
    """
    m = n * (n - 1) // 2
    if p >= 1.0:
        return np.arange(m, dtype=np.int64)
    picked: list[np.ndarray] = []
    cursor = -1
    block = max(1024, int(m * p * 1.2) + 64)
    while True:
        gaps = rng.geometric(p, size=block).astype(np.int64)
        idx = cursor + np.cumsum(gaps)
        inside = idx < m
        if not inside.all():
            picked.append(idx[inside])
            break
        picked.append(idx)
        cursor = int(idx[-1])
        block = max(1024, int((m - cursor) * p * 1.2) + 64)
    return np.concatenate(picked) if picked else np.empty(0, dtype=np.int64)


def _pair_index_to_nodes(n: int, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Invert the row-major pair enumeration: idx -> (i, j), i < j.

    Pair (i, j) has index i*(2n - i - 1)/2 + (j - i - 1).
    """
    idx = np.asarray(idx, dtype=np.int64)
    guess = (2 * n - 1 - np.sqrt((2.0 * n - 1) ** 2 - 8.0 * idx)) / 2
    i = np.clip(np.floor(guess).astype(np.int64), 0, n - 2)

    def row_start(i_arr: np.ndarray) -> np.ndarray:
        return i_arr * (2 * n - i_arr - 1) // 2

    # guard against float rounding at row boundaries
    while True:
        too_low = idx < row_start(i)
        too_high = idx >= row_start(i + 1)
        if not (too_low.any() or too_high.any()):
            break
        i[too_low] -= 1
        i[too_high] += 1
    j = idx - row_start(i) + i + 1
    return i, j
