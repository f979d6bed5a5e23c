"""K-means LSH: IDF-weighted shingle counts, random unit-vector projections,
then Lloyd's k-means (k-means++ seeding) into ``c`` blocks."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from rlblock.corpus import Dataset
from rlblock.errors import ParameterError
from rlblock.partition import BlockingPartition
from rlblock.shingle import ShingleBag, Vocabulary, build_vocabulary, count_matrix, shingle_dataset

DEFAULT_PROJECTIONS = 100
DEFAULT_MAX_ITER = 100


@dataclass
class KMeansResult:
    assignment: np.ndarray
    centers: np.ndarray
    iterations_run: int
    inertia: float
    inertia_history: list = field(default_factory=list)


def random_unit_vectors(dim: int, p: int, seed: int) -> np.ndarray:
    """``p x dim`` array of Gaussian directions scaled to unit length."""
    if dim < 1 or p < 1:
        raise ParameterError(f"need dim >= 1 and p >= 1, got dim={dim}, p={p}")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0x5250,)))
    u = rng.standard_normal((p, dim))
    norms = np.linalg.norm(u, axis=1, keepdims=True)
    return u / norms


def project(bags, vocab: Vocabulary, units: np.ndarray) -> np.ndarray:
    """``r[j, m] = sum_w units[m, w] * count[j, w] * idf[w]``.

    ``bags`` is a list of :class:`ShingleBag` or a records x tokens count
    matrix. The sum runs over each record's nonzero counts only.
    """
    counts = bags if sp.issparse(bags) else count_matrix(bags, vocab)
    weighted = sp.csr_matrix(counts) @ sp.diags(vocab.idf)
    return np.asarray(weighted @ units.T)


def _sq_dist_rows(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    diff = x - c
    return np.einsum("ij,ij->i", diff, diff)


def _kmeanspp(points: np.ndarray, c: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    chosen = [int(rng.integers(n))]
    d2 = _sq_dist_rows(points, points[chosen[0]])
    for _ in range(1, c):
        total = d2.sum()
        if total <= 0:
            # every point sits on a center already; take unused points in order
            used = set(chosen)
            nxt = next(i for i in range(n) if i not in used)
        else:
            nxt = int(rng.choice(n, p=d2 / total))
        chosen.append(nxt)
        d2 = np.minimum(d2, _sq_dist_rows(points, points[nxt]))
    return points[chosen].copy()


def _nearest(points: np.ndarray, centers: np.ndarray, sq_norms: np.ndarray) -> np.ndarray:
    cn = np.einsum("ij,ij->i", centers, centers)
    out = np.empty(len(points), dtype=np.int64)
    step = 4096
    for s in range(0, len(points), step):
        d = sq_norms[s : s + step, None] - 2.0 * points[s : s + step] @ centers.T + cn[None, :]
        out[s : s + step] = d.argmin(axis=1)
    return out


def kmeans(points, c: int, max_iter: int = DEFAULT_MAX_ITER, seed: int = 0) -> KMeansResult:
    """Lloyd iterations from k-means++ seeds.

    Candidate centers come from the expanded distance formula; a point only
    moves when its exact squared distance to the candidate is strictly
    smaller, which keeps the recorded inertia non-increasing. Clusters that
    empty out take the point farthest from its own center.
    """
    x = np.ascontiguousarray(points, dtype=np.float64)
    n = len(x)
    if not 1 <= c <= n:
        raise ParameterError(f"need 1 <= clusters <= n, got c={c}, n={n}")
    if max_iter < 1:
        raise ParameterError("max_iter must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0x4B4D,)))
    centers = _kmeanspp(x, c, rng)
    sq_norms = np.einsum("ij,ij->i", x, x)

    assign = _nearest(x, centers, sq_norms)
    dist = _sq_dist_rows(x, centers[assign])
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        if it > 1:
            cand = _nearest(x, centers, sq_norms)
            moved = np.flatnonzero(cand != assign)
            if len(moved):
                d_new = _sq_dist_rows(x[moved], centers[cand[moved]])
                d_old = _sq_dist_rows(x[moved], centers[assign[moved]])
                go = d_new < d_old
                moved = moved[go]
                assign[moved] = cand[moved]
            dist = _sq_dist_rows(x, centers[assign])
            if not len(moved):
                history.append(float(dist.sum()))
                break
        counts = np.bincount(assign, minlength=c)
        for empty in np.flatnonzero(counts == 0).tolist():
            movable = np.where(counts[assign] > 1, dist, -1.0)
            far = int(np.argmax(movable))
            counts[assign[far]] -= 1
            assign[far] = empty
            counts[empty] = 1
            centers[empty] = x[far]
            dist[far] = 0.0
        history.append(float(dist.sum()))
        member = sp.csr_matrix((np.ones(n), (assign, np.arange(n))), shape=(c, n))
        centers = (member @ x) / counts[:, None]
    dist = _sq_dist_rows(x, centers[assign])
    return KMeansResult(assign, centers, it, float(dist.sum()), history)


def num_blocks_for(n: int, avg_block_size: float) -> int:
    if avg_block_size <= 0:
        raise ParameterError("average block size must be positive")
    return max(1, math.ceil(n / avg_block_size))


def klsh_block(
    ds: Dataset,
    k: int = 2,
    p: int = DEFAULT_PROJECTIONS,
    c: int | None = None,
    seed: int = 0,
    avg_block_size: float | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
) -> BlockingPartition:
    if c is None:
        if avg_block_size is None:
            raise ParameterError("give either the number of blocks or the average block size")
        c = num_blocks_for(ds.n, avg_block_size)
    if not 1 <= c <= ds.n:
        raise ParameterError(f"need 1 <= num_blocks <= n, got {c} for n={ds.n}")
    if p < 1:
        raise ParameterError(f"projections must be >= 1, got {p}")
    timings = {}
    t0 = time.perf_counter()
    bags = shingle_dataset(ds, k)
    vocab = build_vocabulary(bags)
    counts = count_matrix(bags, vocab)
    t1 = time.perf_counter()
    timings["shingle"] = t1 - t0
    r = project(counts, vocab, random_unit_vectors(max(len(vocab), 1), p, seed))
    t2 = time.perf_counter()
    timings["project"] = t2 - t1
    km = kmeans(r, c, max_iter=max_iter, seed=seed)
    timings["cluster"] = time.perf_counter() - t2
    out = BlockingPartition(km.assignment, timings)
    out.info.update(vocab_size=len(vocab), iterations=km.iterations_run, inertia=km.inertia)
    return out
