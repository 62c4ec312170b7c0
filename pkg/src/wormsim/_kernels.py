"""Numba kernels for the hot loops: grid neighbor search, triangle counting,
and greedy listen-before-talk transmitter selection.

All kernels are deterministic given their inputs; randomness stays outside
in numpy generators.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def rgg_neighbor_pairs(
    positions: np.ndarray,
    cell_of_node: np.ndarray,
    cell_ptr: np.ndarray,
    node_of: np.ndarray,
    ncell: int,
    cell_size: float,
    side: float,
    radius: float,
    periodic: bool,
):
    """Collect all ordered pairs (i, j), i < j, within `radius`.

    Nodes are pre-bucketed into an ncell x ncell uniform grid (cell_size >=
    radius), so only the 3x3 block around each node is scanned.  Wrapped
    block cells are deduplicated, which keeps the scan correct for small
    grids (ncell <= 2).  Returns (src, dst) arrays.
    """
    n = positions.shape[0]
    r2 = radius * radius

    # counting pass
    deg = np.zeros(n, np.int64)
    cells = np.empty(9, np.int64)
    for i in range(n):
        ci = cell_of_node[i]
        cx = ci // ncell
        cy = ci % ncell
        ncells = 0
        for dx in range(-1, 2):
            gx = cx + dx
            if periodic:
                gx = gx % ncell
            elif gx < 0 or gx >= ncell:
                continue
            for dy in range(-1, 2):
                gy = cy + dy
                if periodic:
                    gy = gy % ncell
                elif gy < 0 or gy >= ncell:
                    continue
                cid = gx * ncell + gy
                seen = False
                for k in range(ncells):
                    if cells[k] == cid:
                        seen = True
                        break
                if not seen:
                    cells[ncells] = cid
                    ncells += 1
        xi = positions[i, 0]
        yi = positions[i, 1]
        cnt = 0
        for k in range(ncells):
            cid = cells[k]
            for s in range(cell_ptr[cid], cell_ptr[cid + 1]):
                j = node_of[s]
                if j <= i:
                    continue
                ax = abs(xi - positions[j, 0])
                ay = abs(yi - positions[j, 1])
                if periodic:
                    if side - ax < ax:
                        ax = side - ax
                    if side - ay < ay:
                        ay = side - ay
                if ax * ax + ay * ay <= r2:
                    cnt += 1
        deg[i] = cnt

    total = deg.sum()
    src = np.empty(total, np.int32)
    dst = np.empty(total, np.int32)
    pos = 0

    # fill pass, same deterministic scan order
    for i in range(n):
        ci = cell_of_node[i]
        cx = ci // ncell
        cy = ci % ncell
        ncells = 0
        for dx in range(-1, 2):
            gx = cx + dx
            if periodic:
                gx = gx % ncell
            elif gx < 0 or gx >= ncell:
                continue
            for dy in range(-1, 2):
                gy = cy + dy
                if periodic:
                    gy = gy % ncell
                elif gy < 0 or gy >= ncell:
                    continue
                cid = gx * ncell + gy
                seen = False
                for k in range(ncells):
                    if cells[k] == cid:
                        seen = True
                        break
                if not seen:
                    cells[ncells] = cid
                    ncells += 1
        xi = positions[i, 0]
        yi = positions[i, 1]
        for k in range(ncells):
            cid = cells[k]
            for s in range(cell_ptr[cid], cell_ptr[cid + 1]):
                j = node_of[s]
                if j <= i:
                    continue
                ax = abs(xi - positions[j, 0])
                ay = abs(yi - positions[j, 1])
                if periodic:
                    if side - ax < ax:
                        ax = side - ax
                    if side - ay < ay:
                        ay = side - ay
                if ax * ax + ay * ay <= r2:
                    src[pos] = i
                    dst[pos] = j
                    pos += 1

    return src, dst


@njit(cache=True)
def triangle_counts(indptr: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Per-node triangle counts on a CSR graph with sorted neighbor rows.

    For each edge (v, u) with v < u, common neighbors are found by a sorted
    merge; crediting only the common neighbor makes each triangle corner
    count exactly once (via its opposite edge).
    """
    n = indptr.shape[0] - 1
    tri = np.zeros(n, np.int64)
    for v in range(n):
        av, bv = indptr[v], indptr[v + 1]
        for e in range(av, bv):
            u = indices[e]
            if u <= v:
                continue
            au, bu = indptr[u], indptr[u + 1]
            p, q = av, au
            while p < bv and q < bu:
                a = indices[p]
                b = indices[q]
                if a == b:
                    tri[a] += 1
                    p += 1
                    q += 1
                elif a < b:
                    p += 1
                else:
                    q += 1
    return tri


@njit(cache=True)
def lbt_select(
    perm: np.ndarray,
    indptr: np.ndarray,
    indices: np.ndarray,
    infected: np.ndarray,
    blocked: np.ndarray,
) -> np.ndarray:
    """Greedy transmitter selection under the listen-before-talk rule.

    Walks the shuffled infected list `perm`; each node taken blocks all
    infected graph neighbors.  `blocked` is scratch (all False on entry,
    restored to all False on exit).  Returns transmitters in selection
    order: a maximal independent set of the infected-induced subgraph.
    """
    sel = np.empty(perm.size, np.int32)
    m = 0
    for k in range(perm.size):
        v = perm[k]
        if blocked[v]:
            continue
        sel[m] = v
        m += 1
        blocked[v] = True
        for e in range(indptr[v], indptr[v + 1]):
            w = indices[e]
            if infected[w]:
                blocked[w] = True
    for k in range(perm.size):
        blocked[perm[k]] = False
    return sel[:m]
