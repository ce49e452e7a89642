"""Complete-linkage agglomerative clustering of anchor candidates.

Starts from singletons and repeatedly merges the pair of clusters with the
smallest complete linkage -- the maximum pairwise cosine distance between
members -- until the target count is reached.  Each representative is the
normalized mean of its members.

Ties are broken by the lexicographically smallest (min original index,
max original index) over the candidate pair, where a cluster is identified by
its smallest original member index.  This makes merge order, and therefore the
shipped anchor set, deterministic for a given input order.
"""

from __future__ import annotations

import numpy as np

from .core import normalize
from .errors import DegenerateCluster, EmptyInput
from .locality import AnchorSet


def _representatives(points: np.ndarray, members: list[list[int]]) -> AnchorSet:
    reps = []
    for group in members:
        mean = points[group].mean(axis=0)
        if np.linalg.norm(mean) <= 1e-12:
            raise DegenerateCluster(
                f"cluster {sorted(group)[:8]} has (near-)zero mean")
        reps.append(normalize(mean))
    return AnchorSet(np.array(reps))


def _assignment(n: int, members: list[list[int]]) -> np.ndarray:
    labels = np.empty(n, dtype=np.int64)
    for c, group in enumerate(members):
        labels[group] = c
    return labels


def agglomerate(points: np.ndarray, target_k: int, return_assignments: bool = False):
    """Cluster unit rows of `points` down to target_k anchors.

    Returns an AnchorSet, or (AnchorSet, labels) with one cluster index per
    input point when return_assignments is set.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n == 0:
        raise EmptyInput("no points to cluster")
    if target_k < 1:
        raise ValueError("target_k must be >= 1")
    if n <= target_k:
        anchors = AnchorSet(points.copy())
        if return_assignments:
            return anchors, np.arange(n, dtype=np.int64)
        return anchors

    # pairwise cosine distances; diagonal poisoned so self never wins
    dist = 1.0 - points @ points.T
    np.fill_diagonal(dist, np.inf)

    active = np.ones(n, dtype=bool)
    ids = np.arange(n)              # smallest original member index per slot
    members: list[list[int] | None] = [[i] for i in range(n)]

    def row_min(i: int) -> tuple[float, int]:
        row = np.where(active, dist[i], np.inf)
        row[i] = np.inf
        j = int(np.argmin(row))
        return float(row[j]), j

    nn_dist = np.full(n, np.inf)
    nn_idx = np.full(n, -1)
    for i in range(n):
        nn_dist[i], nn_idx[i] = row_min(i)

    remaining = n
    while remaining > target_k:
        m = np.min(nn_dist[active])
        best_key = None
        best_pair = None
        for i in np.flatnonzero(active & (nn_dist == m)):
            row = np.where(active, dist[i], np.inf)
            row[i] = np.inf
            for j in np.flatnonzero(row == m):
                key = (min(ids[i], ids[j]), max(ids[i], ids[j]))
                if best_key is None or key < best_key:
                    best_key, best_pair = key, (i, j)
        a, b = best_pair
        if ids[b] < ids[a]:
            a, b = b, a

        merged_row = np.maximum(dist[a], dist[b])
        merged_row[a] = np.inf
        dist[a] = merged_row
        dist[:, a] = merged_row
        active[b] = False
        members[a] = members[a] + members[b]
        members[b] = None
        remaining -= 1

        # complete linkage only grows distances: a row's cached minimum stays
        # valid unless it pointed at one of the merged slots
        nn_dist[a], nn_idx[a] = row_min(a)
        for i in np.flatnonzero(active & ((nn_idx == a) | (nn_idx == b))):
            if i != a:
                nn_dist[i], nn_idx[i] = row_min(i)

    groups = [members[i] for i in np.flatnonzero(active)]
    groups.sort(key=min)
    anchors = _representatives(points, groups)
    if return_assignments:
        return anchors, _assignment(n, groups)
    return anchors


def agglomerate_oracle(points: np.ndarray, target_k: int,
                       return_assignments: bool = False):
    """Naive recompute-everything reference; test use only (n <= 10)."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n == 0:
        raise EmptyInput("no points to cluster")
    if n > 10:
        raise ValueError("oracle is restricted to n <= 10")
    if n <= target_k:
        anchors = AnchorSet(points.copy())
        if return_assignments:
            return anchors, np.arange(n, dtype=np.int64)
        return anchors

    dist = 1.0 - points @ points.T
    groups = [[i] for i in range(n)]
    while len(groups) > target_k:
        best = None
        for x in range(len(groups)):
            for y in range(x + 1, len(groups)):
                linkage = max(dist[i, j] for i in groups[x] for j in groups[y])
                key = (linkage,
                       min(min(groups[x]), min(groups[y])),
                       max(min(groups[x]), min(groups[y])))
                if best is None or key < best[0]:
                    best = (key, x, y)
        _, x, y = best
        groups[x] = groups[x] + groups[y]
        del groups[y]

    groups.sort(key=min)
    anchors = _representatives(points, groups)
    if return_assignments:
        return anchors, _assignment(n, groups)
    return anchors
