"""Benchmark records, timing identities, churn analysis, results I/O.

Results are flat per-run rows mirroring an (EDPE x epochs x SSI) grid; the
CSV column order is part of the interchange contract and JSON uses the same
field names. Churn analysis tracks which latent digit combinations survive
from one coreset to the next within a class.
"""

import json
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

from .data import Dataset
from .selectors import Coreset

CSV_COLUMNS = [
    "method",
    "edpe",
    "ssi",
    "epochs",
    "seed",
    "train_time_s",
    "selection_time_s",
    "total_time_s",
    "accuracy",
    "kappa",
]


@dataclass(frozen=True)
class MetricsRecord:
    """One benchmark row: protocol coordinates, timings, final quality."""

    method: str
    edpe: float
    ssi: int
    epochs: int
    seed: int
    training_time_s: float
    selection_time_s: float
    total_time_s: float
    accuracy: float
    kappa: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.edpe <= 1.0:
            raise ValueError("edpe must lie in (0, 1]")


def compute_edpe(coreset_size: int, train_size: int) -> float:
    """Fraction of the train set used per epoch: coreset_size / train_size."""
    if not 0 < coreset_size <= train_size:
        raise ValueError(
            f"require 0 < coreset_size <= train_size, got {coreset_size}/{train_size}"
        )
    return coreset_size / train_size


def aggregate_times(record: MetricsRecord) -> MetricsRecord:
    """Return the record with total_time_s = training + selection."""
    if record.training_time_s < 0 or record.selection_time_s < 0:
        raise ValueError("time components must be >= 0")
    total = record.training_time_s + record.selection_time_s
    return MetricsRecord(
        method=record.method,
        edpe=record.edpe,
        ssi=record.ssi,
        epochs=record.epochs,
        seed=record.seed,
        training_time_s=record.training_time_s,
        selection_time_s=record.selection_time_s,
        total_time_s=total,
        accuracy=record.accuracy,
        kappa=record.kappa,
    )


@dataclass(frozen=True)
class ChurnReport:
    """Per-coreset combination histograms for one class, plus dropped keys.

    histograms[t] counts combo_keys among the class's samples in coreset t;
    dropped_keys[t] lists keys present in coreset t but absent from t+1.
    """

    class_label: int
    histograms: List[Dict[str, int]]
    dropped_keys: List[List[str]]


def churn_analysis(coreset_history: Sequence[Coreset], ds: Dataset, class_label: int) -> ChurnReport:
    """Track combination-key survival across consecutive coresets of a class.

    `ds` must be the train split the coreset indices refer to, and must
    carry combo_keys.
    """
    if ds.combo_keys is None:
        raise ValueError("churn analysis requires a dataset with combo_keys")
    if not coreset_history:
        raise ValueError("coreset history is empty")
    histograms = []
    for cs in coreset_history:
        counts = Counter(
            ds.combo_keys[i] for i in cs.indices if ds.labels[i] == class_label
        )
        histograms.append(dict(sorted(counts.items())))
    dropped = []
    for earlier, later in zip(histograms, histograms[1:]):
        dropped.append(sorted(k for k in earlier if k not in later))
    return ChurnReport(class_label=class_label, histograms=histograms, dropped_keys=dropped)


def total_dropped_keys(history: Sequence[Coreset], ds: Dataset) -> int:
    """Dropped-key count summed over all classes and consecutive coreset pairs."""
    return sum(
        len(step)
        for c in range(ds.class_count)
        for step in churn_analysis(history, ds, c).dropped_keys
    )


def _record_to_row(r: MetricsRecord) -> List[str]:
    return [
        r.method,
        format(r.edpe, ".17g"),
        str(r.ssi),
        str(r.epochs),
        str(r.seed),
        format(r.training_time_s, ".17g"),
        format(r.selection_time_s, ".17g"),
        format(r.total_time_s, ".17g"),
        format(r.accuracy, ".17g"),
        "" if r.kappa is None else format(r.kappa, ".17g"),
    ]


def _record_to_obj(r: MetricsRecord) -> dict:
    obj = dict(zip(CSV_COLUMNS, [
        r.method, r.edpe, r.ssi, r.epochs, r.seed,
        r.training_time_s, r.selection_time_s, r.total_time_s, r.accuracy, r.kappa,
    ]))
    return obj


def _record_from_fields(fields: dict) -> MetricsRecord:
    kappa = fields["kappa"]
    if kappa in ("", None):
        kappa = None
    else:
        kappa = float(kappa)
    return MetricsRecord(
        method=str(fields["method"]),
        edpe=float(fields["edpe"]),
        ssi=int(fields["ssi"]),
        epochs=int(fields["epochs"]),
        seed=int(fields["seed"]),
        training_time_s=float(fields["train_time_s"]),
        selection_time_s=float(fields["selection_time_s"]),
        total_time_s=float(fields["total_time_s"]),
        accuracy=float(fields["accuracy"]),
        kappa=kappa,
    )


def write_results(records: Sequence[MetricsRecord], path, fmt: str = "csv",
                  append: bool = False) -> None:
    """Write records as CSV (fixed column order) or JSON (same field names)."""
    if fmt == "csv":
        mode = "a" if append else "w"
        try:
            with open(path, mode, encoding="utf-8", newline="") as fh:
                if not append or fh.tell() == 0:
                    fh.write(",".join(CSV_COLUMNS) + "\n")
                for r in records:
                    fh.write(",".join(_record_to_row(r)) + "\n")
        except OSError as exc:
            raise OSError(f"cannot write results to {path}: {exc}") from exc
    elif fmt == "json":
        existing = []
        if append:
            try:
                existing = [_record_to_obj(r) for r in read_results(path)]
            except FileNotFoundError:
                existing = []
        payload = existing + [_record_to_obj(r) for r in records]
        try:
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(payload, fh, indent=2)
                fh.write("\n")
        except OSError as exc:
            raise OSError(f"cannot write results to {path}: {exc}") from exc
    else:
        raise ValueError(f"unknown results format {fmt!r}")


def read_results(path) -> List[MetricsRecord]:
    """Read records back from a CSV or JSON results file."""
    text_path = str(path)
    if text_path.endswith(".json"):
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        return [_record_from_fields(obj) for obj in payload]
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header.split(",") != CSV_COLUMNS:
            raise ValueError(
                f"{path}: malformed header; expected columns {','.join(CSV_COLUMNS)}"
            )
        records = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(CSV_COLUMNS):
                raise ValueError(f"{path}: line {lineno}: expected {len(CSV_COLUMNS)} columns")
            records.append(_record_from_fields(dict(zip(CSV_COLUMNS, parts))))
    return records
