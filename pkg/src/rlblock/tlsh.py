"""Transitive LSH: minhash banding graph, connected components, then greedy
modularity splitting of every block larger than the size cap.

Modularity gains are kept as exact integers. For communities ``i`` and ``j``
with ``w`` edges between them and degree sums ``d_i``, ``d_j`` in a graph of
``m`` edges, ``4 m**2 * dQ = 4 m w - 2 d_i d_j``. Integer gains make ties
exact, and ties go to the lexicographically lowest ``(i, j)``.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numba import njit
from scipy.sparse.csgraph import connected_components as _cc

from rlblock.corpus import Dataset
from rlblock.errors import ParameterError
from rlblock.minhash import MinHashFamily, band_and_bucket, minhash_signatures
from rlblock.partition import BlockingPartition
from rlblock.shingle import build_vocabulary, incidence_matrix, shingle_dataset

DEFAULT_PERMUTATIONS = 100
DEFAULT_BANDS = 26
DEFAULT_MAX_BLOCK = 500

# components at most this large and at least this dense use the matrix engine
DENSE_MAX_NODES = 12_000
DENSE_MIN_AVG_DEGREE = 32

_NONE = np.iinfo(np.int64).min


@dataclass(frozen=True, eq=False)
class SimilarityGraph:
    n: int
    edges: np.ndarray  # (m, 2), lo < hi, unique

    @classmethod
    def from_edges(cls, n: int, edges) -> "SimilarityGraph":
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if len(e):
            if (e[:, 0] == e[:, 1]).any():
                raise ParameterError("self-loops are not allowed")
            e = np.sort(e, axis=1)
            e = np.unique(e, axis=0)
        return cls(n, e)

    @property
    def m(self) -> int:
        return len(self.edges)


def connected_components(g: SimilarityGraph) -> BlockingPartition:
    if g.n == 0:
        return BlockingPartition(np.empty(0, dtype=np.int64))
    adj = sp.coo_matrix(
        (np.ones(g.m, dtype=np.int8), (g.edges[:, 0], g.edges[:, 1])), shape=(g.n, g.n)
    )
    _, labels = _cc(adj, directed=False)
    return BlockingPartition(labels)


def modularity(n: int, edges, labels) -> float:
    """``sum_c (e_c / m - (d_c / 2m)**2)`` for a simple undirected graph."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    m = len(edges)
    if m == 0:
        return 0.0
    labels = np.asarray(labels)
    deg = np.bincount(edges.ravel(), minlength=n)
    _, comm = np.unique(labels, return_inverse=True)
    comm = comm.ravel()
    internal = np.bincount(comm[edges[:, 0]][comm[edges[:, 0]] == comm[edges[:, 1]]],
                           minlength=comm.max() + 1)
    dsum = np.bincount(comm, weights=deg, minlength=comm.max() + 1)
    return float((internal / m).sum() - ((dsum / (2 * m)) ** 2).sum())


def _merge_sparse(s: int, edges: np.ndarray) -> list[list[int]]:
    m = len(edges)
    four_m = 4 * m
    adj = [dict() for _ in range(s)]
    for u, v in edges.tolist():
        adj[u][v] = 1
        adj[v][u] = 1
    deg = [len(a) for a in adj]
    members: list = [[i] for i in range(s)]
    # best[i], arg[i]: largest gain over neighbours j > i, lowest j on ties
    best = [None] * s
    arg = [-1] * s
    heap = []

    def refresh(i):
        di = deg[i]
        bv, bj = None, -1
        for j, w in adj[i].items():
            if j > i:
                v = four_m * w - 2 * di * deg[j]
                if bv is None or v > bv or (v == bv and j < bj):
                    bv, bj = v, j
        best[i], arg[i] = bv, bj
        if bv is not None:
            heapq.heappush(heap, (-bv, i, bj))

    for i in range(s):
        refresh(i)
    while heap:
        neg, a, b = heapq.heappop(heap)
        if members[a] is None or best[a] != -neg or arg[a] != b:
            continue
        if -neg <= 0:
            break
        adj_a = adj[a]
        del adj_a[b]
        for k, wk in adj[b].items():
            if k == a:
                continue
            adj_a[k] = adj_a.get(k, 0) + wk
            adj_k = adj[k]
            del adj_k[b]
            adj_k[a] = adj_k.get(a, 0) + wk
        adj[b] = {}
        deg[a] += deg[b]
        deg[b] = 0
        members[a].extend(members[b])
        members[b] = None
        best[b], arg[b] = None, -1
        da = deg[a]
        for k, wk in adj_a.items():
            if k > a:
                continue
            if arg[k] == a or arg[k] == b:
                refresh(k)
                continue
            v = four_m * wk - 2 * da * deg[k]
            if best[k] is None or v > best[k] or (v == best[k] and a < arg[k]):
                best[k], arg[k] = v, a
                heapq.heappush(heap, (-v, k, a))
        # rows above a that pointed at b lose it; rows below a are handled above
        for k in adj_a:
            if k > a and arg[k] == b:
                refresh(k)
        refresh(a)
    return [mem for mem in members if mem is not None]


@njit(cache=True)
def _refresh_row(W, deg, alive, best, arg, four_m, k):
    s = W.shape[0]
    bv = _NONE
    bj = -1
    dk = deg[k]
    for j in range(k + 1, s):
        w = W[k, j]
        if w > 0 and alive[j]:
            v = four_m * w - 2 * dk * deg[j]
            if v > bv:
                bv = v
                bj = j
    best[k] = bv
    arg[k] = bj


@njit(cache=True)
def _cnm_dense(s, eu, ev):
    four_m = np.int64(4 * len(eu))
    W = np.zeros((s, s), dtype=np.int32)  # s <= DENSE_MAX_NODES keeps m < 2**31
    for i in range(len(eu)):
        W[eu[i], ev[i]] = 1
        W[ev[i], eu[i]] = 1
    deg = np.zeros(s, dtype=np.int64)
    for i in range(len(eu)):
        deg[eu[i]] += 1
        deg[ev[i]] += 1
    alive = np.ones(s, dtype=np.bool_)
    best = np.full(s, _NONE, dtype=np.int64)
    arg = np.full(s, -1, dtype=np.int64)
    parent = np.arange(s)
    for k in range(s):
        _refresh_row(W, deg, alive, best, arg, four_m, k)
    while True:
        a = np.argmax(best)
        if best[a] <= 0:
            break
        b = arg[a]
        for j in range(s):
            W[a, j] += W[b, j]
            W[b, j] = 0
        for j in range(s):
            W[j, a] += W[j, b]
            W[j, b] = 0
        W[a, a] = 0
        deg[a] += deg[b]
        deg[b] = 0
        alive[b] = False
        best[b] = _NONE
        arg[b] = -1
        parent[b] = a
        da = deg[a]
        for k in range(s):
            if k == a or not alive[k]:
                continue
            if arg[k] == a or arg[k] == b:
                _refresh_row(W, deg, alive, best, arg, four_m, k)
            elif k < a and W[k, a] > 0:
                v = four_m * W[k, a] - 2 * deg[k] * da
                if v > best[k] or (v == best[k] and a < arg[k]):
                    best[k] = v
                    arg[k] = a
        _refresh_row(W, deg, alive, best, arg, four_m, a)
    return parent


def _merge_dense(s: int, edges: np.ndarray) -> list[list[int]]:
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    parent = _cnm_dense(s, np.ascontiguousarray(e[:, 0]), np.ascontiguousarray(e[:, 1]))
    root = parent.copy()
    while True:
        nxt = root[root]
        if np.array_equal(nxt, root):
            break
        root = nxt
    groups: dict = {}
    for node, r in enumerate(root.tolist()):
        groups.setdefault(r, []).append(node)
    return list(groups.values())


def greedy_modularity_split(g: SimilarityGraph, component) -> list[list[int]]:
    """Greedy agglomerative modularity maximization on the induced subgraph.

    Starts from singletons and keeps merging the adjacent pair with the
    largest positive gain. Communities are returned as sorted lists of node
    ids, ordered by their smallest member.
    """
    nodes = np.unique(np.asarray(component, dtype=np.int64))
    local = np.full(g.n, -1, dtype=np.int64)
    local[nodes] = np.arange(len(nodes))
    e = g.edges
    keep = (local[e[:, 0]] >= 0) & (local[e[:, 1]] >= 0) if len(e) else np.zeros(0, bool)
    sub = local[e[keep]] if len(e) else np.empty((0, 2), dtype=np.int64)
    return _split_local(nodes, sub)


def _split_local(nodes: np.ndarray, sub: np.ndarray, engine: str | None = None) -> list[list[int]]:
    s = len(nodes)
    if engine is None:
        dense = s <= DENSE_MAX_NODES and len(sub) >= DENSE_MIN_AVG_DEGREE * s / 2
        engine = "dense" if dense else "sparse"
    merged = _merge_dense(s, sub) if engine == "dense" else _merge_sparse(s, sub)
    out = [sorted(nodes[mem].tolist()) for mem in merged]
    out.sort(key=lambda c: c[0])
    return out


def force_split(nodes, sub_edges: np.ndarray, t: int) -> list[list[int]]:
    """Cut a block into ``ceil(size / t)`` chunks of nodes sorted by degree (high first)."""
    nodes = np.asarray(nodes)
    deg = np.bincount(sub_edges.ravel(), minlength=len(nodes)) if len(sub_edges) else np.zeros(len(nodes), int)
    order = np.lexsort((nodes, -deg))
    chunks = math.ceil(len(nodes) / t)
    size = math.ceil(len(nodes) / chunks)
    return [sorted(nodes[order[i : i + size]].tolist()) for i in range(0, len(nodes), size)]


def split_oversized(g: SimilarityGraph, partition: BlockingPartition, t: int) -> BlockingPartition:
    """Replace every block above ``t`` records by its greedy modularity communities,
    force-splitting blocks the greedy step leaves whole, until all fit."""
    if t < 1:
        raise ParameterError(f"max block size must be >= 1, got {t}")
    labels = partition.assignment.copy()
    next_label = int(labels.max()) + 1 if len(labels) else 0
    e = g.edges
    local = np.full(g.n, -1, dtype=np.int64)
    while True:
        sizes = np.bincount(labels)
        over = np.flatnonzero(sizes > t)
        if not len(over):
            break
        # intra-block edges of over-cap blocks, grouped by block
        if len(e):
            lab = labels[e[:, 0]]
            intra = (lab == labels[e[:, 1]]) & (sizes[lab] > t)
            cand = e[intra]
            order = np.argsort(lab[intra], kind="stable")
            cand = cand[order]
            cand_lab = lab[intra][order]
        else:
            cand = np.empty((0, 2), dtype=np.int64)
            cand_lab = np.empty(0, dtype=np.int64)
        lo = np.searchsorted(cand_lab, over, side="left")
        hi = np.searchsorted(cand_lab, over, side="right")
        for blk, s0, s1 in zip(over.tolist(), lo.tolist(), hi.tolist()):
            nodes = np.flatnonzero(labels == blk)
            local[nodes] = np.arange(len(nodes))
            sub = local[cand[s0:s1]]
            local[nodes] = -1
            parts = _split_local(nodes, sub)
            if len(parts) == 1:
                parts = force_split(nodes, sub, t)
            for part in parts[1:]:
                labels[part] = next_label
                next_label += 1
    return BlockingPartition(labels)


def tlsh_block(
    ds: Dataset,
    k: int = 5,
    p: int = DEFAULT_PERMUTATIONS,
    b: int = DEFAULT_BANDS,
    t: int = DEFAULT_MAX_BLOCK,
    seed: int = 0,
) -> BlockingPartition:
    if t < 1:
        raise ParameterError(f"max block size must be >= 1, got {t}")
    if p < 1:
        raise ParameterError(f"permutations must be >= 1, got {p}")
    if not 1 <= b <= p:
        raise ParameterError(f"need 1 <= bands <= permutations, got b={b}, p={p}")
    timings = {}
    t0 = time.perf_counter()
    bags = shingle_dataset(ds, k)
    vocab = build_vocabulary(bags) if bags else None
    t1 = time.perf_counter()
    timings["shingle"] = t1 - t0
    if ds.n == 0:
        return BlockingPartition(np.empty(0, dtype=np.int64), timings)
    sig = minhash_signatures(incidence_matrix(bags, vocab), MinHashFamily.create(p, seed))
    t2 = time.perf_counter()
    timings["minhash"] = t2 - t1
    g = SimilarityGraph(ds.n, band_and_bucket(sig, b))
    t3 = time.perf_counter()
    timings["graph"] = t3 - t2
    comps = connected_components(g)
    out = split_oversized(g, comps, t)
    timings["split"] = time.perf_counter() - t3
    out.timings.update(timings)
    out.info.update(vocab_size=len(vocab), edges=g.m, components=comps.num_blocks)
    return out
