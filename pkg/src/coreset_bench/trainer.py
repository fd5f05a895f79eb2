"""SSI-scheduled coreset training loop and evaluation metrics.

A run starts from a random coreset, re-selects with the configured method
every `ssi` epochs, and trains by weighted mini-batch SGD with momentum,
cosine learning-rate decay, and global-norm gradient clipping. Wall-clock
time inside selector calls (including the per-sample gradient extraction
feeding them) accrues to selection time; everything else is training time,
and the reported total is their sum by construction.

Seeded RNG streams are segregated by purpose (model init, selection draws,
per-epoch shuffles), so metric trajectories are bit-reproducible and an
EDPE=1.0 random run matches the no-coreset baseline exactly.
"""

import time
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .data import Dataset, Split, combination_count, generate_blobs, generate_composite_sum, load_csv, split
from .model import (
    Model,
    OptimizerState,
    cosine_lr,
    forward,
    init_model,
    loss_and_grad,
    make_optimizer,
    per_sample_gradients,
    sgd_step,
)
from .selectors import (
    BudgetSpec,
    Coreset,
    GlisterConfig,
    allocate_budgets,
    select_craig,
    select_glister,
    select_gradmatch,
    select_random,
)

METHODS = ("random", "craig", "gradmatch", "glister")

# RNG stream tags; every consumer derives default_rng([seed, tag, ...]).
_STREAM_INIT = 0
_STREAM_SELECT = 1
_STREAM_SHUFFLE = 2
_STREAM_SPLIT = 3


@dataclass
class RunConfig:
    """One experiment: dataset, model, optimizer protocol, selection policy."""

    dataset: dict
    epochs: int
    edpe: float
    ssi: int
    method: str
    model_kind: str = "logistic"
    hidden: int = 0
    base_lr: float = 0.05
    momentum: float = 0.9
    clip_norm: float = 1.0
    batch_size: int = 32
    budget_policy: str = "uniform"
    budget_scores: Optional[List[float]] = None
    val_fraction: float = 0.1
    gradmatch_lambda: float = 0.5
    gradmatch_tol: float = 1e-6
    glister_eta: Optional[float] = None
    grad_mode: str = "last_layer"
    ordinal: bool = False
    seed: int = 0

    def validate(self) -> None:
        if not isinstance(self.dataset, dict) or not self.dataset:
            raise ValueError("dataset: must be a non-empty mapping")
        if self.epochs < 1:
            raise ValueError("epochs: must be >= 1")
        if not 0.0 < self.edpe <= 1.0:
            raise ValueError("edpe: must lie in (0, 1]")
        if not 1 <= self.ssi <= self.epochs:
            raise ValueError(f"ssi: must satisfy 1 <= ssi <= epochs, got {self.ssi}")
        if self.method not in METHODS:
            raise ValueError(f"method: must be one of {METHODS}, got {self.method!r}")
        if self.model_kind not in ("logistic", "mlp"):
            raise ValueError(f"model_kind: must be 'logistic' or 'mlp'")
        if self.model_kind == "mlp" and self.hidden < 1:
            raise ValueError("hidden: must be >= 1 for mlp")
        if self.batch_size < 1:
            raise ValueError("batch_size: must be >= 1")
        if self.budget_policy not in ("uniform", "adaptive"):
            raise ValueError("budget_policy: must be 'uniform' or 'adaptive'")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction: must lie in [0, 1)")
        if self.gradmatch_lambda < 0:
            raise ValueError("gradmatch_lambda: must be >= 0")
        if self.glister_eta is not None and self.glister_eta <= 0:
            raise ValueError("glister_eta: must be > 0 when given")
        if self.grad_mode not in ("last_layer", "full"):
            raise ValueError("grad_mode: must be 'last_layer' or 'full'")
        if self.method == "glister" and self.val_fraction == 0.0:
            raise ValueError("val_fraction: glister needs a non-empty validation split")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config key(s): {sorted(unknown)}")
        missing = [k for k in ("dataset", "epochs", "edpe", "ssi", "method") if k not in d]
        if missing:
            raise ValueError(f"missing required config key(s): {missing}")
        return cls(**d)


@dataclass
class RunResult:
    """Per-epoch accuracy plus the timing split and coreset provenance."""

    accuracy_per_epoch: List[float]
    final_accuracy: float
    final_kappa: Optional[float]
    training_time_s: float
    selection_time_s: float
    total_time_s: float
    edpe: float
    coreset_history: List[Coreset] = field(default_factory=list)


def selection_epochs(total_epochs: int, ssi: int) -> List[int]:
    """Epochs at which the configured selector re-runs.

    The epoch-0 coreset is always random and not part of this list.
    """
    if not 1 <= ssi <= total_epochs:
        raise ValueError("require 1 <= ssi <= total_epochs")
    return [e for e in range(1, total_epochs) if e % ssi == 0]


def train_split(cfg: RunConfig, ds: Dataset) -> Split:
    """The exact train/validation split a run of this config uses."""
    return split(ds, cfg.val_fraction, [cfg.seed, _STREAM_SPLIT])


def resolve_dataset(cfg: RunConfig) -> Dataset:
    """Materialize the dataset named by cfg.dataset (generator spec or CSV path)."""
    spec = dict(cfg.dataset)
    if "path" in spec:
        return load_csv(spec["path"])
    kind = spec.pop("kind", None)
    seed = spec.pop("seed", cfg.seed)
    if kind == "blobs":
        return generate_blobs(
            n_per_class=spec.pop("n_per_class"),
            classes=spec.pop("classes"),
            dim=spec.pop("dim", 10),
            spread=spec.pop("spread", 0.5),
            seed=seed,
        )
    if kind == "composite-sum":
        return generate_composite_sum(
            n_samples=spec.pop("n"),
            digit_count_min=spec.pop("digit_min", 3),
            digit_count_max=spec.pop("digit_max", 5),
            noise=spec.pop("noise", 0.1),
            seed=seed,
        )
    raise ValueError(f"dataset: unknown kind {kind!r} (expected 'blobs', 'composite-sum', or a 'path')")


def _adaptive_scores(cfg: RunConfig, ds: Dataset) -> np.ndarray:
    if cfg.budget_scores is not None:
        return np.asarray(cfg.budget_scores, dtype=np.float64)
    spec = cfg.dataset
    if spec.get("kind") == "composite-sum":
        dmin, dmax = spec.get("digit_min", 3), spec.get("digit_max", 5)
    elif ds.combo_keys is not None:
        sizes = [len(k.split("-")) for k in ds.combo_keys]
        dmin, dmax = min(sizes), max(sizes)
    else:
        raise ValueError(
            "budget_policy: adaptive needs budget_scores or a combination-keyed dataset"
        )
    return np.asarray(
        [combination_count(c, dmin, dmax) for c in range(ds.class_count)],
        dtype=np.float64,
    )


def _full_coreset(train: Dataset) -> Coreset:
    return Coreset(
        indices=np.arange(train.n, dtype=np.int64),
        weights=np.ones(train.n),
        selected_at_epoch=0,
        method="full",
    )


def _train_one_epoch(model: Model, opt: OptimizerState, train: Dataset,
                     coreset: Coreset, lr: float, batch_size: int, shuffle_rng) -> None:
    order = shuffle_rng.permutation(coreset.size)
    idx = coreset.indices[order]
    w = coreset.weights[order]
    feats, labels = train.features, train.labels
    for lo in range(0, idx.size, batch_size):
        sel = idx[lo : lo + batch_size]
        _, grad = loss_and_grad(model, feats[sel], labels[sel], w[lo : lo + batch_size])
        sgd_step(opt, model, grad, lr)


def _select(cfg: RunConfig, model: Model, train: Dataset, val: Optional[Dataset],
            budgets: BudgetSpec, epoch: int) -> Coreset:
    if cfg.method == "random":
        return select_random(train, budgets, [cfg.seed, _STREAM_SELECT, epoch])
    if cfg.method == "craig":
        grads = per_sample_gradients(model, train.features, train.labels, cfg.grad_mode)
        return select_craig(grads, budgets, train.labels)
    if cfg.method == "gradmatch":
        grads = per_sample_gradients(model, train.features, train.labels, cfg.grad_mode)
        return select_gradmatch(
            grads, budgets, train.labels, lam=cfg.gradmatch_lambda, tol=cfg.gradmatch_tol
        )
    if cfg.method == "glister":
        eta = cfg.glister_eta
        if eta is None:
            eta = 0.1 * cosine_lr(epoch, cfg.epochs, cfg.base_lr)
        def provider(m: Model, members: np.ndarray) -> np.ndarray:
            return per_sample_gradients(
                m, train.features[members], train.labels[members], "last_layer"
            ).rows
        return select_glister(provider, model, val, budgets, train.labels, GlisterConfig(eta))
    raise ValueError(f"method: unknown {cfg.method!r}")


def _run_loop(cfg: RunConfig, ds: Dataset, with_selection: bool) -> RunResult:
    sp = train_split(cfg, ds)
    train, val = sp.train, sp.validation
    if cfg.method == "glister" and with_selection and val is None:
        raise ValueError("val_fraction: glister needs a non-empty validation split")
    eval_set = val if val is not None else train

    model = init_model(
        cfg.model_kind, train.dim, train.class_count, cfg.hidden, seed=[cfg.seed, _STREAM_INIT]
    )
    opt = make_optimizer(model, cfg.momentum, cfg.base_lr, cfg.clip_norm)

    t_start = time.perf_counter()
    selection_s = 0.0

    if with_selection:
        scores = _adaptive_scores(cfg, train) if cfg.budget_policy == "adaptive" else None
        budgets = allocate_budgets(train, cfg.edpe, cfg.budget_policy, scores)
        t0 = time.perf_counter()
        coreset = select_random(train, budgets, [cfg.seed, _STREAM_SELECT, 0])
        selection_s += time.perf_counter() - t0
        reselect_at = set(selection_epochs(cfg.epochs, cfg.ssi))
    else:
        budgets = None
        coreset = _full_coreset(train)
        reselect_at = set()
    history = [coreset.at_epoch(0)]

    accuracy = []
    for epoch in range(cfg.epochs):
        if epoch in reselect_at:
            t0 = time.perf_counter()
            coreset = _select(cfg, model, train, val, budgets, epoch)
            selection_s += time.perf_counter() - t0
            history.append(coreset.at_epoch(epoch))
        lr = cosine_lr(epoch, cfg.epochs, cfg.base_lr)
        shuffle_rng = np.random.default_rng([cfg.seed, _STREAM_SHUFFLE, epoch])
        _train_one_epoch(model, opt, train, history[-1], lr, cfg.batch_size, shuffle_rng)
        accuracy.append(evaluate_accuracy(model, eval_set))

    kappa = None
    if cfg.ordinal:
        preds = np.argmax(forward(model, eval_set.features), axis=1)
        kappa = evaluate_quadratic_kappa(preds, eval_set.labels, eval_set.class_count)

    wall = time.perf_counter() - t_start
    training_s = wall - selection_s
    return RunResult(
        accuracy_per_epoch=accuracy,
        final_accuracy=accuracy[-1],
        final_kappa=kappa,
        training_time_s=training_s,
        selection_time_s=selection_s,
        total_time_s=training_s + selection_s,
        edpe=history[-1].size / train.n,
        coreset_history=history,
    )


def run(cfg: RunConfig, dataset: Optional[Dataset] = None) -> RunResult:
    """Execute one coreset-training run; pass `dataset` to skip regeneration."""
    cfg.validate()
    ds = dataset if dataset is not None else resolve_dataset(cfg)
    return _run_loop(cfg, ds, with_selection=True)


def run_full_baseline(cfg: RunConfig, dataset: Optional[Dataset] = None) -> RunResult:
    """Train on the entire train split every epoch, no coreset machinery.

    Uses the same init/shuffle RNG streams as `run`, so an EDPE=1.0 random
    run reproduces this trajectory bit for bit.
    """
    cfg.validate()
    ds = dataset if dataset is not None else resolve_dataset(cfg)
    return _run_loop(cfg, ds, with_selection=False)


def evaluate_accuracy(model: Model, ds: Dataset) -> float:
    """Fraction of argmax-logit predictions matching labels (ties to lowest class)."""
    preds = np.argmax(forward(model, ds.features), axis=1)
    return float(np.mean(preds == ds.labels))


def evaluate_quadratic_kappa(predictions, labels, class_count: int) -> float:
    """Cohen's kappa with quadratic weights w_ij = (i-j)^2 / (C-1)^2.

    kappa = 1 - sum(w*O) / sum(w*E), with O the confusion counts and E the
    outer product of the marginals scaled to the same total. Returns 0.0
    (with a warning) in the degenerate all-one-class case where E carries
    no off-diagonal mass.
    """
    preds = np.asarray(predictions, dtype=np.int64)
    labs = np.asarray(labels, dtype=np.int64)
    if preds.shape != labs.shape or preds.ndim != 1:
        raise ValueError("predictions and labels must be equal-length 1-D sequences")
    c = class_count
    if np.any((preds < 0) | (preds >= c)) or np.any((labs < 0) | (labs >= c)):
        raise ValueError(f"entries must lie in [0, {c})")
    observed = np.zeros((c, c), dtype=np.float64)
    np.add.at(observed, (labs, preds), 1.0)
    expected = np.outer(observed.sum(axis=1), observed.sum(axis=0)) / labs.size
    if c == 1:
        weights = np.zeros((1, 1))
    else:
        ii, jj = np.meshgrid(np.arange(c), np.arange(c), indexing="ij")
        weights = (ii - jj) ** 2 / (c - 1) ** 2
    denom = float((weights * expected).sum())
    if denom == 0.0:
        warnings.warn("degenerate kappa: marginals concentrate on one class; returning 0")
        return 0.0
    return float(1.0 - (weights * observed).sum() / denom)
