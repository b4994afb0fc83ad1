"""Spectral clustering of program networks and the month-over-month analytics."""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import (EigensolverFailure, InsufficientData, IsolatedProgram, ItemSetMismatch, KMismatch,
                     TooFewPrograms)
from .linalg import fix_signs, jacobi_eigh
from .networks import SimilarityMatrix

DEFAULT_K = 3
DEFAULT_SEED = 7
N_RESTARTS = 10
MAX_ITER = 300
EXHAUSTIVE_ALIGN_MAX_K = 6
NULL_EIGENVALUE_RTOL = 1e-10


@dataclass
class Embedding:
    month: str
    programs: list[str]
    coordinates: np.ndarray
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))
    zero_rows: list[str] = field(default_factory=list)


@dataclass
class _Affinity:
    month: str
    programs: list[str]
    values: np.ndarray


def normalized_affinity(p: np.ndarray) -> np.ndarray:
    d = p.sum(axis=1)
    inv = 1.0 / np.sqrt(d)
    return inv[:, None] * p * inv[None, :]


def spectral_embed(p: SimilarityMatrix | np.ndarray, k: int = DEFAULT_K) -> Embedding:
    """Ng-Jordan-Weiss embedding: top-k eigenvectors of D^-1/2 P D^-1/2, rows scaled to unit length.

    A bare array is accepted too (any symmetric non-negative affinity); its
    programs are then named by row index.
    """
    if not isinstance(p, SimilarityMatrix):
        values = np.asarray(p, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError("affinity must be square")
        if np.max(np.abs(values - values.T), initial=0.0) > 1e-12 or np.any(values < 0):
            raise ValueError("affinity must be symmetric and non-negative")
        p = _Affinity("", [str(i) for i in range(values.shape[0])], values)
    values = np.asarray(p.values, dtype=float)
    n = values.shape[0]
    if k < 2:
        raise ValueError("k must be at least 2")
    if n < k:
        raise ValueError(f"need at least k={k} programs, got {n}")
    deg = values.sum(axis=1)
    isolated = [p.programs[i] for i in np.flatnonzero(deg <= 0)]
    if isolated:
        raise IsolatedProgram(f"programs with zero degree: {isolated}")

    w, v = jacobi_eigh(normalized_affinity(values))
    top = fix_signs(v[:, :k])
    # directions with a numerically zero eigenvalue are an arbitrary basis of a
    # null space and carry no affinity structure
    top[:, np.abs(w[:k]) <= NULL_EIGENVALUE_RTOL * abs(w[0])] = 0.0
    if not np.all(np.isfinite(top)):
        raise EigensolverFailure("non-finite eigenvectors")
    norms = np.linalg.norm(top, axis=1)
    zero = norms < 1e-300
    coords = top.copy()
    coords[~zero] /= norms[~zero, None]
    coords[zero] = 0.0
    return Embedding(p.month, list(p.programs), coords, w[:k], [p.programs[i] for i in np.flatnonzero(zero)])


# -- k-means -----------------------------------------------------------------

def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((x - x[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            rest = [i for i in range(n) if i not in chosen]
            idx = int(rest[rng.integers(len(rest))])
        else:
            idx = int(rng.choice(n, p=d2 / total))
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((x - x[idx]) ** 2, axis=1))
    return x[chosen].copy()


def _assign(x, centers):
    d = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    return np.argmin(d, axis=1), d


def _repair_empty(x, labels, centers, k):
    labels = labels.copy()
    for _ in range(k):
        counts = np.bincount(labels, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            break
        big = int(np.argmax(counts))
        members = np.flatnonzero(labels == big)
        dist = np.sum((x[members] - centers[big]) ** 2, axis=1)
        far = int(members[np.argmax(dist)])
        labels[far] = int(empty[0])
        centers[empty[0]] = x[far]
        centers[big] = x[labels == big].mean(axis=0)
    return labels


def kmeans(x: np.ndarray, k: int, seed: int = DEFAULT_SEED, n_init: int = N_RESTARTS, max_iter: int = MAX_ITER):
    """Lloyd's algorithm with k-means++ seeding; best of ``n_init`` restarts by inertia.

    Returns ``(labels, inertia)`` with labels renumbered by first appearance.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} invalid for {n} points")
    rng = np.random.default_rng(seed)
    best_labels, best_inertia = None, np.inf
    for _ in range(n_init):
        centers = _kmeans_pp(x, k, rng)
        labels = None
        for _ in range(max_iter):
            new, _ = _assign(x, centers)
            new = _repair_empty(x, new, centers, k)
            if labels is not None and np.array_equal(new, labels):
                break
            labels = new
            centers = np.array([x[labels == c].mean(axis=0) for c in range(k)])
        inertia = float(np.sum((x - centers[labels]) ** 2))
        if inertia < best_inertia - 1e-12:
            best_labels, best_inertia = labels, inertia
    return _renumber(best_labels), best_inertia


def _renumber(labels) -> np.ndarray:
    mapping: dict[int, int] = {}
    for lab in labels:
        mapping.setdefault(int(lab), len(mapping))
    return np.array([mapping[int(lab)] for lab in labels], dtype=int)


def cluster(embedding: Embedding, k: int = DEFAULT_K, seed: int = DEFAULT_SEED) -> dict[str, int]:
    labels, _ = kmeans(embedding.coordinates, k, seed)
    return {p: int(lab) for p, lab in zip(embedding.programs, labels)}


def spectral_cluster(p: SimilarityMatrix | np.ndarray, k: int = DEFAULT_K, seed: int = DEFAULT_SEED) -> dict[str, int]:
    return cluster(spectral_embed(p, k), k, seed)


# -- label alignment ---------------------------------------------------------

@dataclass
class ClusterTimeline:
    months: list[str]
    assignments: dict[str, dict[str, int]]
    ari_by_month: dict[str, float] = field(default_factory=dict)
    k: int = DEFAULT_K


def _best_permutation(overlap: np.ndarray) -> tuple[int, ...]:
    """perm[new_label_of_current] maximising sum overlap[perm[b], b]."""
    k = overlap.shape[0]
    if k <= EXHAUSTIVE_ALIGN_MAX_K:
        best, best_score = None, -1
        for perm in itertools.permutations(range(k)):  # lexicographic order
            score = sum(overlap[perm[b], b] for b in range(k))
            if score > best_score:
                best, best_score = perm, score
        return best
    rows, cols = linear_sum_assignment(-overlap)
    perm = [0] * k
    for r, c in zip(rows, cols):
        perm[c] = int(r)
    return tuple(perm)


def align_labels(monthly: Mapping[str, Mapping[str, int]], k: int = DEFAULT_K,
                 truth: Mapping[str, str] | None = None) -> ClusterTimeline:
    """Relabel each month to maximise the number of programs keeping the previous month's label."""
    if not monthly:
        raise ValueError("need at least one month of assignments")
    months = sorted(monthly)
    aligned: dict[str, dict[str, int]] = {}
    prev = None
    for m in months:
        cur = dict(monthly[m])
        bad = {lab for lab in cur.values() if not 0 <= lab < k}
        if bad:
            raise KMismatch(f"month {m} uses labels {sorted(bad)} outside 0..{k - 1}")
        if prev is not None:
            overlap = np.zeros((k, k), dtype=int)
            for prog, lab in cur.items():
                if prog in prev:
                    overlap[prev[prog], lab] += 1
            perm = _best_permutation(overlap)
            cur = {prog: perm[lab] for prog, lab in cur.items()}
        aligned[m] = dict(sorted(cur.items()))
        prev = aligned[m]
    timeline = ClusterTimeline(months, aligned, k=k)
    if truth is not None:
        for m in months:
            progs = sorted(aligned[m])
            if len(progs) >= 2:
                timeline.ari_by_month[m] = adjusted_rand_index([aligned[m][p] for p in progs],
                                                               [truth[p] for p in progs])
    return timeline


# -- evaluation --------------------------------------------------------------

def _comb2(n):
    return n * (n - 1) // 2


def adjusted_rand_index(labels_a: Sequence | Mapping, labels_b: Sequence | Mapping) -> float:
    """Pair-counting ARI; 1.0 for the degenerate all-singletons / single-cluster cases."""
    if isinstance(labels_a, Mapping) or isinstance(labels_b, Mapping):
        if not (isinstance(labels_a, Mapping) and isinstance(labels_b, Mapping)) or labels_a.keys() != labels_b.keys():
            raise ItemSetMismatch("partitions cover different items")
        keys = sorted(labels_a)
        labels_a = [labels_a[x] for x in keys]
        labels_b = [labels_b[x] for x in keys]
    if len(labels_a) != len(labels_b):
        raise ItemSetMismatch(f"partitions have {len(labels_a)} and {len(labels_b)} items")
    n = len(labels_a)
    if n < 2:
        raise ValueError("ARI needs at least two items")
    table: dict[tuple, int] = defaultdict(int)
    rows: dict = defaultdict(int)
    cols: dict = defaultdict(int)
    for a, b in zip(labels_a, labels_b):
        table[(a, b)] += 1
        rows[a] += 1
        cols[b] += 1
    index = sum(_comb2(v) for v in table.values())
    sa = sum(_comb2(v) for v in rows.values())
    sb = sum(_comb2(v) for v in cols.values())
    total = _comb2(n)
    # exact integer numerator and denominator, scaled by 2 * total
    num = 2 * (total * index - sa * sb)
    den = total * (sa + sb) - 2 * sa * sb
    if den == 0:
        return 1.0
    return num / den


def pca_assignments(timeline: ClusterTimeline, dims: int = 2):
    """Project one-hot monthly cluster histories onto their top principal axes.

    Returns ``(programs, coordinates, explained_variance)``.
    """
    months = timeline.months
    k = timeline.k
    if len(months) < 2:
        raise InsufficientData("need at least two months")
    if dims > len(months) * k:
        raise ValueError("dims exceeds the one-hot feature dimension")
    programs = sorted({p for m in months for p in timeline.assignments[m]})
    if len(programs) < 2:
        raise InsufficientData("need at least two programs")
    x = assignment_features(timeline, programs)
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc / len(programs)
    w, v = jacobi_eigh(cov)
    axes = fix_signs(v[:, :dims])
    return programs, xc @ axes, w[:dims]


def assignment_features(timeline: ClusterTimeline, programs: Sequence[str]) -> np.ndarray:
    k = timeline.k
    x = np.zeros((len(programs), len(timeline.months) * k))
    for mi, m in enumerate(timeline.months):
        for pi, p in enumerate(programs):
            lab = timeline.assignments[m].get(p)
            if lab is not None:
                x[pi, mi * k + lab] = 1.0
    return x


def matrix_stddev(m: SimilarityMatrix | np.ndarray) -> float:
    """Population standard deviation of the strictly upper-triangular entries."""
    values = np.asarray(m.values if isinstance(m, SimilarityMatrix) else m, dtype=float)
    n = values.shape[0]
    if n < 3:
        raise TooFewPrograms(f"need at least 3 programs, got {n}")
    return float(np.std(values[np.triu_indices(n, k=1)]))


def sankey_flows(timeline: ClusterTimeline) -> list[dict]:
    flows = []
    for m1, m2 in zip(timeline.months, timeline.months[1:]):
        a, b = timeline.assignments[m1], timeline.assignments[m2]
        groups: dict[tuple[int, int], list[str]] = defaultdict(list)
        for prog in sorted(a.keys() & b.keys()):
            groups[(a[prog], b[prog])].append(prog)
        for (c1, c2), progs in sorted(groups.items()):
            flows.append({"from_month": m1, "to_month": m2, "from_cluster": c1, "to_cluster": c2,
                          "programs": progs, "count": len(progs)})
    return flows
