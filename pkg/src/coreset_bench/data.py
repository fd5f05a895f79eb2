"""Datasets: in-memory representation, synthetic generators, CSV I/O, splits.

Two generator families are provided. ``generate_blobs`` is the plain
Gaussian-mixture stand-in used for smoke runs. ``generate_composite_sum``
builds a class-complexity-heterogeneous task: each sample is a multiset of
3-5 decimal digits, the label is their sum, and the number of distinct
multisets producing a label varies wildly across labels, so per-class
distribution complexity is wildly uneven. Samples carry a canonical
``combo_key`` naming their digit multiset, the unit of coreset-churn
analysis.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

# Extra feature dimensions of pure Gaussian noise appended to the 10-bin
# digit histogram; keeps otherwise-identical combos distinguishable.
COMPOSITE_NOISE_DIMS = 6


@dataclass(frozen=True)
class Dataset:
    """Dense features with integer labels and optional combination keys.

    Arrays are normalized to float64/int64 and frozen (writeable=False);
    instances are safe to share across threads.
    """

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    combo_keys: Optional[tuple] = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise ValueError("features must be a non-empty n x d matrix")
        if labels.shape != (feats.shape[0],):
            raise ValueError("labels must be a length-n vector")
        if self.class_count < 1:
            raise ValueError("class_count must be >= 1")
        if labels.min() < 0 or labels.max() >= self.class_count:
            raise ValueError(
                f"labels must lie in [0, {self.class_count}), "
                f"got range [{labels.min()}, {labels.max()}]"
            )
        if self.combo_keys is not None:
            keys = tuple(self.combo_keys)
            if len(keys) != feats.shape[0]:
                raise ValueError("combo_keys must have one entry per sample")
            object.__setattr__(self, "combo_keys", keys)
        feats = feats.copy()
        labels = labels.copy()
        feats.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def class_populations(self) -> np.ndarray:
        """Sample count per class label, length class_count."""
        return np.bincount(self.labels, minlength=self.class_count)

    def subset(self, indices) -> "Dataset":
        """New Dataset restricted to the given sample indices (order kept)."""
        idx = np.asarray(indices, dtype=np.int64)
        keys = None
        if self.combo_keys is not None:
            keys = tuple(self.combo_keys[i] for i in idx)
        return Dataset(
            features=self.features[idx],
            labels=self.labels[idx],
            class_count=self.class_count,
            combo_keys=keys,
        )


@dataclass(frozen=True)
class Split:
    """Disjoint train/validation partition of a source dataset.

    ``validation`` is None for a zero validation fraction. The stored index
    arrays refer to the source dataset and together cover it exactly.
    """

    train: Dataset
    validation: Optional[Dataset]
    train_idx: np.ndarray
    val_idx: np.ndarray


def generate_blobs(n_per_class: int, classes: int, dim: int, spread: float, seed) -> Dataset:
    """Isotropic Gaussian blobs around seeded standard-normal class centers.

    Samples are laid out class-major (all of class 0, then class 1, ...).
    Pure function of its arguments including the seed.
    """
    if classes < 2:
        raise ValueError("classes must be >= 2")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    if spread < 0:
        raise ValueError("spread must be >= 0")
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(classes, dim))
    feats = np.empty((n_per_class * classes, dim), dtype=np.float64)
    labels = np.empty(n_per_class * classes, dtype=np.int64)
    for c in range(classes):
        lo = c * n_per_class
        feats[lo : lo + n_per_class] = centers[c] + spread * rng.standard_normal(
            (n_per_class, dim)
        )
        labels[lo : lo + n_per_class] = c
    return Dataset(features=feats, labels=labels, class_count=classes)


def generate_composite_sum(
    n_samples: int,
    digit_count_min: int = 3,
    digit_count_max: int = 5,
    noise: float = 0.1,
    seed=0,
) -> Dataset:
    """Digit-multiset dataset: label = digit sum, capped at 9*digit_count_min.

    Each sample draws k ~ uniform[min, max] digits from {0..9}; draws whose
    sum exceeds the cap are rejected and redrawn, so every label is reachable
    by the smallest digit count and the label range matches the 3-5 digit
    setup (sums 0..27). Features are the 10-bin digit-count histogram plus
    COMPOSITE_NOISE_DIMS dims of N(0, noise^2) padding; combo_keys hold the
    sorted digit multiset, e.g. "1-6-8".
    """
    if digit_count_min < 1 or digit_count_min > digit_count_max:
        raise ValueError("require 1 <= digit_count_min <= digit_count_max")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    cap = 9 * digit_count_min
    rng = np.random.default_rng(seed)
    dim = 10 + COMPOSITE_NOISE_DIMS
    feats = np.empty((n_samples, dim), dtype=np.float64)
    labels = np.empty(n_samples, dtype=np.int64)
    keys = []
    for i in range(n_samples):
        while True:
            k = int(rng.integers(digit_count_min, digit_count_max + 1))
            digits = rng.integers(0, 10, size=k)
            total = int(digits.sum())
            if total <= cap:
                break
        feats[i, :10] = np.bincount(digits, minlength=10)
        feats[i, 10:] = rng.normal(0.0, noise, size=COMPOSITE_NOISE_DIMS)
        labels[i] = total
        keys.append("-".join(str(d) for d in sorted(digits.tolist())))
    return Dataset(
        features=feats,
        labels=labels,
        class_count=cap + 1,
        combo_keys=tuple(keys),
    )


@lru_cache(maxsize=None)
def _multisets_summing_to(size: int, total: int, max_digit: int = 9) -> int:
    # Counts non-increasing digit sequences: one per multiset.
    if size == 0:
        return 1 if total == 0 else 0
    return sum(
        _multisets_summing_to(size - 1, total - d, d)
        for d in range(min(max_digit, total) + 1)
    )


def combination_count(label: int, digit_count_min: int, digit_count_max: int) -> int:
    """Number of digit multisets (size in [min, max], digits 0-9) summing to label.

    Serves as the per-class complexity score for adaptive budgets.
    """
    if label < 0:
        raise ValueError("label must be >= 0")
    return sum(
        _multisets_summing_to(k, label)
        for k in range(digit_count_min, digit_count_max + 1)
    )


def split(ds: Dataset, val_fraction: float, seed) -> Split:
    """Stratified train/validation split, deterministic per seed.

    Per class, round(val_fraction * population) samples go to validation;
    raises if that would empty the train side of a populated class.
    """
    if not 0.0 <= val_fraction < 1.0:
        raise ValueError("val_fraction must lie in [0, 1)")
    if val_fraction == 0.0:
        all_idx = np.arange(ds.n, dtype=np.int64)
        return Split(
            train=ds,
            validation=None,
            train_idx=all_idx,
            val_idx=np.empty(0, dtype=np.int64),
        )
    rng = np.random.default_rng(seed)
    train_parts, val_parts = [], []
    for c in range(ds.class_count):
        members = np.flatnonzero(ds.labels == c)
        if members.size == 0:
            continue
        n_val = int(np.floor(val_fraction * members.size + 0.5))
        if n_val >= members.size:
            raise ValueError(
                f"stratification impossible: class {c} has {members.size} "
                f"sample(s), validation would take all of them"
            )
        perm = rng.permutation(members.size)
        val_parts.append(members[perm[:n_val]])
        train_parts.append(members[perm[n_val:]])
    train_idx = np.sort(np.concatenate(train_parts))
    val_idx = np.sort(np.concatenate(val_parts)) if val_parts else np.empty(0, np.int64)
    validation = ds.subset(val_idx) if val_idx.size else None
    return Split(
        train=ds.subset(train_idx),
        validation=validation,
        train_idx=train_idx,
        val_idx=val_idx,
    )


def save_csv(ds: Dataset, path) -> None:
    """Write a dataset as UTF-8 CSV: header label[,combo],f0..f{d-1}.

    Features are serialized with 17 significant digits so load(save(ds))
    reproduces them exactly.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        cols = ["label"]
        if ds.combo_keys is not None:
            cols.append("combo")
        cols.extend(f"f{i}" for i in range(ds.dim))
        fh.write(",".join(cols) + "\n")
        for i in range(ds.n):
            row = [str(int(ds.labels[i]))]
            if ds.combo_keys is not None:
                row.append(ds.combo_keys[i])
            row.extend(format(v, ".17g") for v in ds.features[i])
            fh.write(",".join(row) + "\n")


def load_csv(path) -> Dataset:
    """Load a dataset CSV written by save_csv.

    class_count is inferred as max(label) + 1. Raises ValueError naming the
    offending line on malformed labels or row-length mismatches.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header:
            raise ValueError(f"{path}: empty file")
        cols = header.split(",")
        if cols[0] != "label":
            raise ValueError(f"{path}: header must start with 'label', got {cols[0]!r}")
        has_combo = len(cols) > 1 and cols[1] == "combo"
        feat_cols = cols[2:] if has_combo else cols[1:]
        expected = [f"f{i}" for i in range(len(feat_cols))]
        if feat_cols != expected or not feat_cols:
            raise ValueError(
                f"{path}: feature columns must be f0..f{{d-1}}, got {feat_cols}"
            )
        d = len(feat_cols)
        ncols = len(cols)
        labels, rows, keys = [], [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != ncols:
                raise ValueError(
                    f"{path}: line {lineno}: expected {ncols} columns, got {len(parts)}"
                )
            try:
                labels.append(int(parts[0]))
            except ValueError:
                raise ValueError(
                    f"{path}: line {lineno}: non-integer label {parts[0]!r}"
                ) from None
            if has_combo:
                keys.append(parts[1])
            try:
                rows.append([float(v) for v in parts[2 if has_combo else 1 :]])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: malformed feature value") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    labels_arr = np.asarray(labels, dtype=np.int64)
    return Dataset(
        features=np.asarray(rows, dtype=np.float64).reshape(len(rows), d),
        labels=labels_arr,
        class_count=int(labels_arr.max()) + 1,
        combo_keys=tuple(keys) if has_combo else None,
    )
