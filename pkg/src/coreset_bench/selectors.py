"""Coreset selectors: Random, CRAIG, GradMatch, GLISTER, and budget policies.

All four selectors run independently per class over an explicit per-class
budget, so uniform and adaptive budget policies are comparable under
identical selector code. Every tie (argmax/argmin/rounding) breaks to the
lowest index, making selections reproducible regardless of thread count.

CRAIG greedily maximizes the facility-location surrogate built from
distance-complemented gradient similarities; selected medoids are weighted
by the number of class members they are nearest to. GradMatch runs
orthogonal matching pursuit against the class gradient sum with a
ridge-regularized non-negative re-fit each step. GLISTER greedily picks the
sample whose gradient best aligns with the validation-loss gradient, taking
one inner step on a scratch parameter vector after each pick.
"""

import dataclasses
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence

import numpy as np
from scipy.optimize import nnls

from . import kernels
from .data import Dataset
from .model import GradientMatrix, Model, loss_and_grad

# Shift added to the per-class max pairwise distance so that all
# similarities stay strictly positive and the objective is monotone.
_SIMILARITY_EPS = 1e-12


@dataclass(frozen=True)
class Coreset:
    """Selected sample indices with positive per-sample weights."""

    indices: np.ndarray
    weights: np.ndarray
    selected_at_epoch: int = 0
    method: str = "random"

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        w = np.asarray(self.weights, dtype=np.float64)
        if idx.ndim != 1 or w.shape != idx.shape:
            raise ValueError("indices and weights must be 1-D and equally long")
        if idx.size == 0:
            raise ValueError("coreset must be non-empty")
        if len(np.unique(idx)) != idx.size:
            raise ValueError("coreset indices must be distinct")
        if np.any(w <= 0):
            raise ValueError("coreset weights must be positive")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.indices.size

    def at_epoch(self, epoch: int) -> "Coreset":
        return dataclasses.replace(self, selected_at_epoch=epoch)


@dataclass(frozen=True)
class BudgetSpec:
    """Total coreset budget and its per-class allocation."""

    total: int
    per_class: Dict[int, int]

    def __post_init__(self):
        if any(v < 0 for v in self.per_class.values()):
            raise ValueError("per-class budgets must be >= 0")
        if sum(self.per_class.values()) != self.total:
            raise ValueError("per-class budgets must sum to the total")


@dataclass(frozen=True)
class GlisterConfig:
    """Inner step size for the one-step meta approximation."""

    eta: float = 0.01

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be > 0")


def _largest_remainder(amount: int, shares: np.ndarray, order_keys: np.ndarray) -> np.ndarray:
    """Integer apportionment of `amount` proportional to non-negative shares.

    Fractional-remainder ties go to the lowest order key (class index).
    """
    total_share = shares.sum()
    if total_share <= 0:
        ideal = np.full(len(shares), amount / len(shares))
    else:
        ideal = amount * shares / total_share
    base = np.floor(ideal).astype(np.int64)
    leftover = amount - int(base.sum())
    if leftover > 0:
        remainders = ideal - base
        ranking = np.lexsort((order_keys, -remainders))
        base[ranking[:leftover]] += 1
    return base


def allocate_budgets(
    ds: Dataset,
    edpe: float,
    policy: str = "uniform",
    scores: Optional[Sequence[float]] = None,
) -> BudgetSpec:
    """Split round(edpe * n) coreset slots across classes.

    uniform: equal shares. adaptive: shares proportional to the given
    per-class complexity scores, with a floor of one slot per populated
    class. Either way allocations are capped at the class population and
    overflow is redistributed by the same proportional rule.
    """
    if not 0.0 < edpe <= 1.0:
        raise ValueError("edpe must lie in (0, 1]")
    pops = ds.class_populations()
    c_total = ds.class_count
    total = int(np.floor(edpe * ds.n + 0.5))
    if total < c_total:
        raise ValueError(
            f"infeasible budget: {total} slots for {c_total} classes (need >= 1 each)"
        )
    if policy == "uniform":
        scores_arr = np.ones(c_total, dtype=np.float64)
    elif policy == "adaptive":
        if scores is None:
            raise ValueError("adaptive policy requires per-class scores")
        scores_arr = np.asarray(scores, dtype=np.float64)
        if scores_arr.shape != (c_total,):
            raise ValueError(f"scores must have length {c_total}")
        if np.any(scores_arr < 0) or scores_arr.sum() <= 0:
            raise ValueError("scores must be non-negative and not all zero")
    else:
        raise ValueError(f"unknown budget policy {policy!r}")

    alloc = np.zeros(c_total, dtype=np.int64)
    pool = np.flatnonzero(pops > 0)
    remaining = total
    while remaining > 0 and pool.size > 0:
        gives = _largest_remainder(remaining, scores_arr[pool], pool)
        alloc[pool] = np.minimum(alloc[pool] + gives, pops[pool])
        remaining = total - int(alloc.sum())
        pool = pool[alloc[pool] < pops[pool]]

    if policy == "adaptive":
        # Floor of one slot per populated class, funded by the largest
        # allocations (never below one).
        needy = [c for c in np.flatnonzero(pops > 0) if alloc[c] == 0]
        for c in needy:
            donors = np.flatnonzero(alloc >= 2)
            donor = donors[np.argmax(alloc[donors])]
            alloc[donor] -= 1
            alloc[c] = 1

    return BudgetSpec(total=total, per_class={c: int(alloc[c]) for c in range(c_total)})


def _class_members(labels: np.ndarray, label: int, budget: int) -> np.ndarray:
    members = np.flatnonzero(labels == label)
    if members.size == 0 and budget > 0:
        raise ValueError(f"class {label} has a positive budget but no samples")
    if budget > members.size:
        raise ValueError(
            f"class {label}: budget {budget} exceeds population {members.size}"
        )
    return members


def select_random(ds: Dataset, budget: BudgetSpec, seed) -> Coreset:
    """Uniform without-replacement sampling per class, all weights one."""
    rng = np.random.default_rng(seed)
    picked = []
    for c in sorted(budget.per_class):
        k = budget.per_class[c]
        if k == 0:
            continue
        members = _class_members(ds.labels, c, k)
        picked.append(np.sort(rng.choice(members, size=k, replace=False)))
    indices = np.concatenate(picked)
    return Coreset(indices=indices, weights=np.ones(indices.size), method="random")


def select_craig(grads: GradientMatrix, budget: BudgetSpec, labels) -> Coreset:
    """Per-class greedy facility location over gradient similarities.

    Similarity is s_ij = d_max - ||g_i - g_j||_2 with d_max the class's max
    pairwise distance plus a small shift. Each selected medoid is weighted
    by the number of class members nearest to it (distance ties to the
    lowest selected index), so weights are positive integers summing to the
    class population. Medoids left with no assignees (possible only with
    exactly duplicated gradient rows) are dropped.
    """
    labels = np.asarray(labels, dtype=np.int64)
    rows = grads.rows
    out_idx, out_w = [], []
    for c in sorted(budget.per_class):
        k = budget.per_class[c]
        if k == 0:
            continue
        members = _class_members(labels, c, k)
        if k == members.size:
            out_idx.append(members)
            out_w.append(np.ones(members.size))
            continue
        dist = kernels.pairwise_distances(rows[members])
        d_max = float(dist.max()) + _SIMILARITY_EPS
        selected, _ = kernels.facility_location_greedy(d_max - dist, k)
        selected = np.sort(selected)
        counts = kernels.nearest_assignment_counts(dist, selected)
        keep = counts > 0
        out_idx.append(members[selected[keep]])
        out_w.append(counts[keep].astype(np.float64))
    return Coreset(
        indices=np.concatenate(out_idx),
        weights=np.concatenate(out_w),
        method="craig",
    )


def craig_objective(sim: np.ndarray, selected) -> float:
    """Facility-location value sum_i max_{j in S} sim[i, j] (0 for empty S)."""
    selected = np.asarray(selected, dtype=np.int64)
    if selected.size == 0:
        return 0.0
    return float(sim[:, selected].max(axis=1).sum())


def _nnls_ridge(atoms: np.ndarray, target: np.ndarray, lam: float) -> np.ndarray:
    """argmin_{w >= 0} ||atoms @ w - target||^2 + lam * ||w||^2.

    Solved exactly via NNLS on the ridge-augmented system; by the KKT
    conditions the positive-support weights satisfy the regularized normal
    equations on that support.
    """
    if lam > 0:
        s = atoms.shape[1]
        atoms = np.vstack([atoms, np.sqrt(lam) * np.eye(s)])
        target = np.concatenate([target, np.zeros(s)])
    return nnls(atoms, target)[0]


def omp_select(grad_rows: np.ndarray, target: np.ndarray, budget: int,
               lam: float = 0.5, tol: float = 1e-6):
    """Orthogonal matching pursuit of `target` over the given gradient rows.

    Repeatedly adds the unselected row with the largest |g . r| (ties to the
    lowest index), re-fits all selected weights with the non-negative ridge
    solve, and updates r = target - fit. Stops at the budget or when ||r||
    drops to tol.

    Returns (support, weights, residual_norms); residual_norms[0] is ||target||
    and one entry follows per step. Weights may contain zeros; callers prune.
    """
    r = target.astype(np.float64, copy=True)
    support: list = []
    weights = np.empty(0)
    residual_norms = [float(np.linalg.norm(r))]
    while len(support) < budget and residual_norms[-1] > tol:
        scores = np.abs(grad_rows @ r)
        scores[support] = -1.0
        support.append(int(np.argmax(scores)))
        weights = _nnls_ridge(grad_rows[support].T, target, lam)
        r = target - grad_rows[support].T @ weights
        residual_norms.append(float(np.linalg.norm(r)))
    return np.asarray(support, dtype=np.int64), weights, np.asarray(residual_norms)


def select_gradmatch(grads: GradientMatrix, budget: BudgetSpec, labels,
                     lam: float = 0.5, tol: float = 1e-6) -> Coreset:
    """Per-class OMP matching of the class gradient sum.

    Zero-weight atoms are dropped from the output, so the coreset may come
    in under budget; weights are strictly positive.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if lam < 0:
        raise ValueError("lam must be >= 0")
    rows = grads.rows
    out_idx, out_w = [], []
    for c in sorted(budget.per_class):
        k = budget.per_class[c]
        if k == 0:
            continue
        members = _class_members(labels, c, k)
        class_rows = rows[members]
        support, weights, _ = omp_select(class_rows, class_rows.sum(axis=0), k, lam, tol)
        keep = weights > 0
        if not np.any(keep):
            continue
        order = np.argsort(support[keep])
        out_idx.append(members[support[keep][order]])
        out_w.append(weights[keep][order])
    if not out_idx:
        raise ValueError("gradmatch selected no samples (all weights pruned)")
    return Coreset(
        indices=np.concatenate(out_idx),
        weights=np.concatenate(out_w),
        method="gradmatch",
    )


GradProvider = Callable[[Model, np.ndarray], np.ndarray]


def select_glister(
    grad_provider: GradProvider,
    model_snapshot: Model,
    val_set: Dataset,
    budget: BudgetSpec,
    labels,
    cfg: GlisterConfig,
) -> Coreset:
    """Greedy one-step meta selection against validation loss, per class.

    grad_provider(model, indices) must return one last-layer gradient row
    per requested train sample at the model's current parameters. For each
    class a scratch copy of the snapshot is advanced: pick the unselected
    sample maximizing v . g_i where v is the current validation-loss
    gradient on the last-layer coordinates, then step the scratch
    parameters by -eta * g_i. All weights are one.
    """
    if val_set is None or val_set.n == 0:
        raise ValueError("glister requires a non-empty validation set")
    labels = np.asarray(labels, dtype=np.int64)
    val_ones = np.ones(val_set.n)
    out_idx = []
    for c in sorted(budget.per_class):
        k = budget.per_class[c]
        if k == 0:
            continue
        members = _class_members(labels, c, k)
        if k == members.size:
            out_idx.append(members)
            continue
        scratch = model_snapshot.copy()
        tail = scratch.last_layer_slice()
        chosen: list = []
        for _ in range(k):
            rows = grad_provider(scratch, members)
            _, val_grad = loss_and_grad(scratch, val_set.features, val_set.labels, val_ones)
            gains = rows @ val_grad[tail]
            gains[chosen] = -np.inf
            pick = int(np.argmax(gains))
            chosen.append(pick)
            scratch.params[tail] -= cfg.eta * rows[pick]
        out_idx.append(members[np.sort(chosen)])
    indices = np.concatenate(out_idx)
    return Coreset(indices=indices, weights=np.ones(indices.size), method="glister")
