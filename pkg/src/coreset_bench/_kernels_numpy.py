"""Pure-numpy kernel implementations (fallback path, no JIT)."""

import numpy as np


def pairwise_distances(rows):
    """Euclidean distance matrix between the rows of a 2-D array."""
    rows = np.asarray(rows, dtype=np.float64)
    sq = np.einsum("ij,ij->i", rows, rows)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (rows @ rows.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(d2)


def facility_location_greedy(sim, k):
    """Greedy maximization of F(S) = sum_i max_{j in S} sim[i, j].

    Returns (selected, objective) where selected holds k column indices in
    pick order and objective[t] is F after the (t+1)-th pick. Ties break to
    the lowest index (argmax first occurrence).
    """
    m = sim.shape[0]
    cur = np.zeros(m, dtype=np.float64)
    selected = np.empty(k, dtype=np.int64)
    objective = np.empty(k, dtype=np.float64)
    taken = np.zeros(m, dtype=bool)
    for t in range(k):
        totals = np.maximum(cur[:, None], sim).sum(axis=0)
        totals[taken] = -np.inf
        j = int(np.argmax(totals))
        selected[t] = j
        taken[j] = True
        np.maximum(cur, sim[:, j], out=cur)
        objective[t] = cur.sum()
    return selected, objective


def nearest_assignment_counts(dist, selected):
    """Count, per selected column, how many rows have it as nearest center.

    `selected` must be sorted ascending so that argmin's first-occurrence
    rule resolves distance ties to the lowest selected index.
    """
    sub = dist[:, selected]
    nearest = np.argmin(sub, axis=1)
    return np.bincount(nearest, minlength=len(selected)).astype(np.int64)
