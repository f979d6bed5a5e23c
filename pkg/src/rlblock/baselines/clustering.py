"""Greedy clustering baselines: threshold and minimum-size nearest-neighbour
growth, and canopies."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from rlblock.corpus import Dataset
from rlblock.errors import ParameterError
from rlblock.klsh import project, random_unit_vectors
from rlblock.partition import BlockingPartition, encode_pairs
from rlblock.shingle import build_vocabulary, count_matrix, shingle_dataset


def tfidf_matrix(ds: Dataset, k: int = 2) -> sp.csr_matrix:
    """Shingle counts times IDF, rows scaled to unit length (all-zero rows stay zero)."""
    bags = shingle_dataset(ds, k)
    vocab = build_vocabulary(bags)
    x = sp.csr_matrix(count_matrix(bags, vocab) @ sp.diags(vocab.idf))
    norms = np.sqrt(np.asarray(x.multiply(x).sum(axis=1)).ravel())
    norms[norms == 0] = 1.0
    return sp.csr_matrix(sp.diags(1.0 / norms) @ x)


class _Distances:
    """Euclidean distances from one row to a set of rows, dense or sparse input."""

    def __init__(self, x):
        self.x = sp.csr_matrix(x) if sp.issparse(x) else np.ascontiguousarray(x, dtype=np.float64)
        if sp.issparse(self.x):
            self.sq = np.asarray(self.x.multiply(self.x).sum(axis=1)).ravel()
        else:
            self.sq = np.einsum("ij,ij->i", self.x, self.x)

    def __len__(self):
        return self.x.shape[0]

    def from_row(self, i: int, idx: np.ndarray) -> np.ndarray:
        if sp.issparse(self.x):
            dot = np.asarray((self.x[idx] @ self.x[i].T).todense()).ravel()
        else:
            dot = self.x[idx] @ self.x[i]
        d2 = self.sq[idx] - 2.0 * dot + self.sq[i]
        return np.sqrt(np.maximum(d2, 0.0))


def _grow(dist: _Distances, base: int, unassigned: np.ndarray, stop) -> list[int]:
    """Add the unassigned record nearest to any member until ``stop(size, d)``."""
    members = [base]
    cand = unassigned[unassigned != base]
    near = dist.from_row(base, cand)
    while len(cand):
        j = int(np.argmin(near))
        if stop(len(members), near[j]):
            break
        new = int(cand[j])
        members.append(new)
        cand = np.delete(cand, j)
        near = np.minimum(np.delete(near, j), dist.from_row(new, cand))
    return members


def tnn_clusters(x, t: float) -> list[list[int]]:
    if not t >= 0:
        raise ParameterError(f"threshold must be >= 0, got {t}")
    dist = _Distances(x)
    assigned = np.zeros(len(dist), dtype=bool)
    out = []
    while not assigned.all():
        base = int(np.argmin(assigned))
        members = _grow(dist, base, np.flatnonzero(~assigned), lambda size, d: d > t)
        assigned[members] = True
        out.append(members)
    return out


def tnn_block(ds: Dataset, t: float, k: int = 2) -> BlockingPartition:
    """Grow a cluster from the lowest unassigned record, adding the nearest
    unassigned neighbour of the cluster while it is within ``t``."""
    t0 = time.perf_counter()
    x = tfidf_matrix(ds, k)
    t1 = time.perf_counter()
    clusters = tnn_clusters(x, t)
    return BlockingPartition.from_blocks(
        clusters, ds.n, {"shingle": t1 - t0, "cluster": time.perf_counter() - t1}
    )


def knn_clusters(x, k_min: int) -> list[list[int]]:
    dist = _Distances(x)
    n = len(dist)
    if not 1 <= k_min <= max(n, 1):
        raise ParameterError(f"need 1 <= k_min <= n, got k_min={k_min}, n={n}")
    assigned = np.zeros(n, dtype=bool)
    out: list[list[int]] = []
    while (~assigned).sum() >= k_min:
        base = int(np.argmin(assigned))
        members = _grow(dist, base, np.flatnonzero(~assigned), lambda size, d: size >= k_min)
        assigned[members] = True
        out.append(members)
    rest = np.flatnonzero(~assigned)
    if len(rest):
        if not out:
            return [rest.tolist()]
        owner = np.empty(n, dtype=np.int64)
        for c, members in enumerate(out):
            owner[members] = c
        done = np.flatnonzero(assigned)
        # single linkage: the cluster holding the closest assigned record to any leftover
        best, target = np.inf, 0
        for r in rest.tolist():
            d = dist.from_row(r, done)
            j = int(np.argmin(d))
            if d[j] < best:
                best, target = d[j], int(owner[done[j]])
        out[target].extend(rest.tolist())
    return out


def knn_block(ds: Dataset, k_min: int, k: int = 2) -> BlockingPartition:
    """Grow clusters of exactly ``k_min`` nearest neighbours; the undersized
    remainder joins the nearest cluster."""
    t0 = time.perf_counter()
    x = tfidf_matrix(ds, k)
    t1 = time.perf_counter()
    clusters = knn_clusters(x, k_min)
    return BlockingPartition.from_blocks(
        clusters, ds.n, {"shingle": t1 - t0, "cluster": time.perf_counter() - t1}
    )


@dataclass
class CanopyCover:
    canopies: list
    n: int
    t1: float
    t2: float
    bases: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.t2 > self.t1:
            raise ParameterError(f"need t2 <= t1, got t1={self.t1}, t2={self.t2}")

    def covers_all(self) -> bool:
        seen = np.zeros(self.n, dtype=bool)
        for c in self.canopies:
            seen[np.asarray(c, dtype=np.int64)] = True
        return bool(seen.all())

    def candidate_keys(self) -> np.ndarray:
        """Encoded pairs of records sharing at least one canopy."""
        chunks = []
        for c in self.canopies:
            c = np.sort(np.asarray(c, dtype=np.int64))
            a, b = np.triu_indices(len(c), k=1)
            chunks.append(encode_pairs(c[a], c[b], self.n))
        return np.unique(np.concatenate(chunks)) if chunks else np.empty(0, dtype=np.int64)


def canopy_cover(x, t1: float, t2: float, randomize_bases: int | None = None) -> CanopyCover:
    """Canopies over the rows of ``x`` under Euclidean distance.

    Each round picks a base among the remaining candidates (lowest index, or
    uniformly at random when ``randomize_bases`` is a seed). Its canopy is
    every remaining candidate within ``t1``; those within ``t2`` are removed.
    """
    if t2 > t1:
        raise ParameterError(f"need t2 <= t1, got t1={t1}, t2={t2}")
    if t2 < 0:
        raise ParameterError("canopy thresholds must be >= 0")
    dist = _Distances(x)
    rng = None if randomize_bases is None else np.random.default_rng(randomize_bases)
    remaining = np.arange(len(dist))
    canopies, bases = [], []
    while len(remaining):
        pos = 0 if rng is None else int(rng.integers(len(remaining)))
        base = int(remaining[pos])
        d = dist.from_row(base, remaining)
        d[pos] = 0.0
        canopies.append(remaining[d <= t1].tolist())
        bases.append(base)
        remaining = remaining[d > t2]
    return CanopyCover(canopies, len(dist), t1, t2, bases)


def canopies(
    ds: Dataset,
    t1: float,
    t2: float,
    distance: str = "projection",
    k: int = 2,
    p: int = 100,
    seed: int = 0,
    randomize_bases: int | None = None,
) -> CanopyCover:
    """Canopy cover with the cheap distance ``"projection"`` (Euclidean on the
    random IDF projection) or ``"tfidf"`` (Euclidean on unit TF-IDF rows)."""
    if t2 > t1:
        raise ParameterError(f"need t2 <= t1, got t1={t1}, t2={t2}")
    t0 = time.perf_counter()
    if distance == "projection":
        bags = shingle_dataset(ds, k)
        vocab = build_vocabulary(bags)
        x = project(count_matrix(bags, vocab), vocab, random_unit_vectors(max(len(vocab), 1), p, seed))
    elif distance == "tfidf":
        x = tfidf_matrix(ds, k)
    else:
        raise ParameterError(f"unknown canopy distance {distance!r}")
    t_1 = time.perf_counter()
    cover = canopy_cover(x, t1, t2, randomize_bases)
    cover.timings = {"shingle": t_1 - t0, "cluster": time.perf_counter() - t_1}
    return cover


def canopy_to_blocks(cover: CanopyCover) -> BlockingPartition:
    """Blocks are the connected components of "shares a canopy"."""
    rows, cols = [], []
    for c in cover.canopies:
        c = np.asarray(c, dtype=np.int64)
        if len(c):
            rows.append(np.full(len(c), c[0]))
            cols.append(c)
    if rows:
        r, c = np.concatenate(rows), np.concatenate(cols)
    else:
        r = c = np.empty(0, dtype=np.int64)
    adj = sp.coo_matrix((np.ones(len(r)), (r, c)), shape=(cover.n, cover.n))
    _, labels = connected_components(adj, directed=False)
    return BlockingPartition(labels, dict(cover.timings))
