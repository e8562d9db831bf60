"""Maximum-mean-cycle oracle for the maximum ergodic average.

The map is coarse-grained onto n uniform cells; cell i has an edge to every
cell met (with nonempty interior overlap) by the image of its center
inflated by lip * width / 2.  Each edge carries the potential at the source
cell center.  Karp's recurrence then gives the maximum cycle mean.

The Karp table is never stored in full: rows are recomputed from
checkpoints every ~sqrt(n) layers, which keeps memory at O(n sqrt(n)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import dynamics as dyn
from .dynamics import MapSpec
from .errors import NoCycle, NotExpanding
from .potentials import Potential, Step

MAX_NODES = 1 << 16


@dataclass(frozen=True)
class TransferGraph:
    n: int
    indptr: np.ndarray      # CSR by source node
    indices: np.ndarray
    node_weight: np.ndarray  # weight of every edge leaving the node
    cell_width: float
    inflation: float
    lo: float = 0.0
    circle: bool = False

    def successors(self, i: int) -> list:
        return self.indices[self.indptr[i]:self.indptr[i + 1]].tolist()

    @property
    def n_edges(self) -> int:
        return int(self.indptr[-1])

    def edge_arrays(self):
        src = np.repeat(np.arange(self.n), np.diff(self.indptr))
        return src, self.indices.copy()

    def shifted(self, c: float) -> "TransferGraph":
        return TransferGraph(self.n, self.indptr, self.indices, self.node_weight + c,
                             self.cell_width, self.inflation, self.lo, self.circle)


@dataclass(frozen=True)
class CycleMeanResult:
    value: float
    cycle: list
    certificate: dict


def graph_from_edges(n: int, edges, node_weight) -> TransferGraph:
    """Graph from explicit (i, j) pairs; weights are per source node."""
    edges = sorted(set((int(i), int(j)) for i, j in edges))
    src = np.array([e[0] for e in edges], dtype=np.int64)
    dst = np.array([e[1] for e in edges], dtype=np.int64)
    indptr = np.searchsorted(src, np.arange(n + 1), side="left")
    return TransferGraph(n, indptr, dst, np.asarray(node_weight, dtype=float), 1.0, 0.0)


def build_transfer_graph(m: MapSpec, p: Potential, n: int) -> TransferGraph:
    if n < 2:
        raise ValueError("need at least two cells")
    if n > MAX_NODES:
        raise ValueError(f"n capped at {MAX_NODES}")
    cw = m.length / n
    centers = m.lo + (np.arange(n) + 0.5) * cw
    infl = dyn.lipschitz(m) * cw / 2.0
    y = dyn.evaluate(m, centers)
    eps = 1e-9
    # cells j with interior overlapping (y - infl, y + infl)
    jlo = np.floor((y - infl - m.lo) / cw + eps).astype(np.int64)
    jhi = np.ceil((y + infl - m.lo) / cw - eps).astype(np.int64) - 1
    jhi = np.maximum(jhi, jlo)
    if not m.circle:
        jlo = np.clip(jlo, 0, n - 1)
        jhi = np.clip(jhi, 0, n - 1)
    counts = jhi - jlo + 1
    if m.circle:
        counts = np.minimum(counts, n)
    src = np.repeat(np.arange(n), counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    dst = np.repeat(jlo, counts) + offs
    if m.circle:
        dst = np.mod(dst, n)
    # sort targets within each source row, drop duplicates
    key = src * n + dst
    key = np.unique(key)
    src, dst = key // n, key % n
    indptr = np.searchsorted(src, np.arange(n + 1), side="left")
    return TransferGraph(n, indptr, dst, np.asarray(p(centers), dtype=float), cw, infl,
                         m.lo, m.circle)


# ------------------------------------------------------------------- Karp

class _Layers:
    """Row recurrence D_k(v) = max_{u -> v} D_{k-1}(u) + w(u), D_0 = 0."""

    def __init__(self, g: TransferGraph, nodes: np.ndarray):
        self.nodes = nodes
        loc = -np.ones(g.n, dtype=np.int64)
        loc[nodes] = np.arange(len(nodes))
        src, dst = g.edge_arrays()
        keep = (loc[src] >= 0) & (loc[dst] >= 0)
        s, d = loc[src[keep]], loc[dst[keep]]
        order = np.lexsort((s, d))
        self.src, self.dst = s[order], d[order]
        self.w = g.node_weight[nodes]
        self.m = len(nodes)
        self.starts = np.searchsorted(self.dst, np.arange(self.m), side="left")
        if np.any(np.diff(np.concatenate([self.starts, [len(self.dst)]])) == 0):
            raise NoCycle("node without in-edge after cyclic restriction")

    def step(self, row: np.ndarray) -> np.ndarray:
        vals = row[self.src] + self.w[self.src]
        return np.maximum.reduceat(vals, self.starts)

    def argpred(self, row: np.ndarray, v: int) -> int:
        lo = self.starts[v]
        hi = self.starts[v + 1] if v + 1 < self.m else len(self.dst)
        cand = self.src[lo:hi]
        vals = row[cand] + self.w[cand]
        return int(cand[int(np.argmax(vals))])


def cyclic_nodes(g: TransferGraph) -> np.ndarray:
    """Nodes lying in strongly connected components that contain a cycle."""
    src, dst = g.edge_arrays()
    A = csr_matrix((np.ones(len(src)), (src, dst)), shape=(g.n, g.n))
    ncomp, lab = connected_components(A, directed=True, connection="strong")
    size = np.bincount(lab, minlength=ncomp)
    selfloop = np.zeros(ncomp, dtype=bool)
    sl = src == dst
    selfloop[lab[src[sl]]] = True
    good = (size > 1) | selfloop
    return np.nonzero(good[lab])[0]


def karp_max_mean_cycle(g: TransferGraph) -> CycleMeanResult:
    nodes = cyclic_nodes(g)
    if len(nodes) == 0:
        raise NoCycle("graph has no directed cycle")
    L = _Layers(g, nodes)
    n = L.m
    s = max(1, int(math.isqrt(n)))
    # pass 1: D_n with checkpoints
    checkpoints = {}
    row = np.zeros(n)
    for k in range(n):
        if k % s == 0:
            checkpoints[k] = row
        row = L.step(row)
    Dn = row
    # pass 2: min over k of (D_n - D_k)/(n - k), streamed
    best = np.full(n, np.inf)
    arg = np.zeros(n, dtype=np.int64)
    row = np.zeros(n)
    for k in range(n):
        r = (Dn - row) / (n - k)
        upd = r < best
        best = np.where(upd, r, best)
        arg = np.where(upd, k, arg)
        row = L.step(row)
    v = int(np.argmax(best))
    value = float(best[v])
    # pass 3: backtrack the optimal length-n walk ending at v
    walk = [v]
    cur = v
    for seg in sorted(checkpoints, reverse=True):
        hi = min(seg + s, n)
        rows = [checkpoints[seg]]
        for _ in range(seg, hi - 1):
            rows.append(L.step(rows[-1]))
        for k in range(hi, seg, -1):
            cur = L.argpred(rows[k - 1 - seg], cur)
            walk.append(cur)
    walk.reverse()
    cycle = _best_cycle(walk, L.w)
    cyc_nodes = [int(nodes[c]) for c in cycle]
    mean = float(np.mean(L.w[cycle]))
    cert = {"node": int(nodes[v]), "k": int(arg[v]), "D_n": float(Dn[v]),
            "min_ratio": value, "cycle_mean": mean}
    return CycleMeanResult(value, cyc_nodes, cert)


def _best_cycle(walk: list, w: np.ndarray) -> list:
    """Decompose a walk into simple cycles and return the one of largest mean."""
    stack, pos, cycles = [], {}, []
    for x in walk:
        if x in pos:
            i = pos[x]
            cyc = stack[i:]
            cycles.append(cyc)
            for y in cyc[1:]:
                del pos[y]
            stack = stack[:i + 1]
        else:
            pos[x] = len(stack)
            stack.append(x)
    if not cycles:
        raise NoCycle("walk of length n contains no cycle")
    return max(cycles, key=lambda c: float(np.mean(w[c])))


def oracle_Q(m: MapSpec, p: Potential, n: int):
    """(value, error_bound) with the true maximum average in value +- error_bound."""
    g = build_transfer_graph(m, p, n)
    res = karp_max_mean_cycle(g)
    semi = p.seminorm().holder_seminorm
    if semi == 0.0:
        return res.value, 0.0
    if isinstance(p, Step) or not math.isfinite(semi):
        return res.value, math.inf
    try:
        lam = dyn.estimate_hyperbolic(m).lam
    except NotExpanding:
        return res.value, math.inf
    lip = dyn.lipschitz(m)
    bound = semi * (g.cell_width * (1.0 + lip / 2.0)) ** p.alpha * lam / (lam - 1.0)
    return res.value, float(bound)
