"""Numba-jitted kernel implementations (default path for the hot loops)."""

import numpy as np
from numba import njit


@njit(cache=True)
def pairwise_distances(rows):
    m, p = rows.shape
    out = np.zeros((m, m), dtype=np.float64)
    for i in range(m):
        for j in range(i + 1, m):
            acc = 0.0
            for c in range(p):
                diff = rows[i, c] - rows[j, c]
                acc += diff * diff
            d = np.sqrt(acc)
            out[i, j] = d
            out[j, i] = d
    return out


@njit(cache=True)
def facility_location_greedy(sim, k):
    m = sim.shape[0]
    cur = np.zeros(m, dtype=np.float64)
    selected = np.empty(k, dtype=np.int64)
    objective = np.empty(k, dtype=np.float64)
    taken = np.zeros(m, dtype=np.bool_)
    for t in range(k):
        best_j = -1
        best_total = -np.inf
        for j in range(m):
            if taken[j]:
                continue
            total = 0.0
            for i in range(m):
                s = sim[i, j]
                total += s if s > cur[i] else cur[i]
            if total > best_total:
                best_total = total
                best_j = j
        selected[t] = best_j
        taken[best_j] = True
        obj = 0.0
        for i in range(m):
            s = sim[i, best_j]
            if s > cur[i]:
                cur[i] = s
            obj += cur[i]
        objective[t] = obj
    return selected, objective


@njit(cache=True)
def nearest_assignment_counts(dist, selected):
    m = dist.shape[0]
    s = selected.shape[0]
    counts = np.zeros(s, dtype=np.int64)
    for i in range(m):
        best = 0
        best_d = dist[i, selected[0]]
        for t in range(1, s):
            d = dist[i, selected[t]]
            if d < best_d:
                best_d = d
                best = t
        counts[best] += 1
    return counts
