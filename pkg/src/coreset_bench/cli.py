"""Command-line interface: gen, run, sweep, report, churn.

Config files are JSON key-value trees; command-line flags override file
values, which override built-in defaults. Exit codes: 0 success, 1 runtime
failure, 2 usage or config error. CORESET_BENCH_SEED provides the default
seed where none is given.
"""

import argparse
import dataclasses
import itertools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List

import numpy as np

from .data import generate_blobs, generate_composite_sum, load_csv, save_csv
from .metrics import ChurnReport, MetricsRecord, churn_analysis, read_results, write_results
from .selectors import Coreset
from .trainer import RunConfig, RunResult, resolve_dataset, run, train_split

_EXIT_OK = 0
_EXIT_RUNTIME = 1
_EXIT_USAGE = 2


@dataclass
class SweepConfig:
    """Cartesian experiment grid over a base run configuration."""

    base: dict
    methods: List[str]
    edpe: List[float]
    ssi: List[int]
    seeds: List[int]

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        unknown = set(d) - {"base", "methods", "edpe", "ssi", "seeds"}
        if unknown:
            raise ValueError(f"unknown sweep key(s): {sorted(unknown)}")
        for key in ("base", "methods", "edpe", "ssi", "seeds"):
            if key not in d:
                raise ValueError(f"missing sweep key: {key}")
        cfg = cls(base=d["base"], methods=list(d["methods"]), edpe=list(d["edpe"]),
                  ssi=list(d["ssi"]), seeds=list(d["seeds"]))
        for name in ("methods", "edpe", "ssi", "seeds"):
            if not getattr(cfg, name):
                raise ValueError(f"{name}: list must be non-empty")
        return cfg

    def combinations(self) -> List[dict]:
        """Run-config dicts in canonical (method, edpe, ssi, seed) order."""
        combos = []
        for method, edpe, ssi, seed in itertools.product(
            self.methods, self.edpe, self.ssi, self.seeds
        ):
            cfg = dict(self.base)
            cfg.update(method=method, edpe=edpe, ssi=ssi, seed=seed)
            combos.append(cfg)
        return combos


def _default_seed() -> int:
    return int(os.environ.get("CORESET_BENCH_SEED", "0"))


def _to_record(cfg: RunConfig, result: RunResult) -> MetricsRecord:
    return MetricsRecord(
        method=cfg.method,
        edpe=result.edpe,
        ssi=cfg.ssi,
        epochs=cfg.epochs,
        seed=cfg.seed,
        training_time_s=result.training_time_s,
        selection_time_s=result.selection_time_s,
        total_time_s=result.total_time_s,
        accuracy=result.final_accuracy,
        kappa=result.final_kappa,
    )


def _load_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ValueError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON: {exc}") from None


def cmd_gen(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    if args.kind == "blobs":
        ds = generate_blobs(
            n_per_class=args.n_per_class, classes=args.classes, dim=args.dim,
            spread=args.spread, seed=seed,
        )
    else:
        ds = generate_composite_sum(
            n_samples=args.n, digit_count_min=args.digit_min,
            digit_count_max=args.digit_max, noise=args.noise, seed=seed,
        )
    try:
        save_csv(ds, args.out)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return _EXIT_RUNTIME
    print(f"wrote {args.out}: n={ds.n} d={ds.dim} classes={ds.class_count}")
    return _EXIT_OK


def _write_run_dir(run_dir, cfg: RunConfig, result: RunResult, train) -> None:
    path = Path(run_dir)
    path.mkdir(parents=True, exist_ok=True)
    with open(path / "config.json", "w", encoding="utf-8") as fh:
        json.dump(dataclasses.asdict(cfg), fh, indent=2)
        fh.write("\n")
    save_csv(train, path / "train.csv")
    coresets = [
        {
            "epoch": cs.selected_at_epoch,
            "method": cs.method,
            "indices": cs.indices.tolist(),
            "weights": cs.weights.tolist(),
        }
        for cs in result.coreset_history
    ]
    with open(path / "coresets.json", "w", encoding="utf-8") as fh:
        json.dump(coresets, fh)
        fh.write("\n")


def cmd_run(args) -> int:
    cfg_dict = _load_json(args.config)
    for key in ("seed", "method", "edpe", "ssi", "epochs"):
        value = getattr(args, key)
        if value is not None:
            cfg_dict[key] = value
    if "seed" not in cfg_dict:
        cfg_dict["seed"] = _default_seed()
    cfg = RunConfig.from_dict(cfg_dict)
    cfg.validate()

    ds = resolve_dataset(cfg)
    result = run(cfg, dataset=ds)
    record = _to_record(cfg, result)
    write_results([record], args.out, fmt="csv", append=True)
    if args.run_dir:
        _write_run_dir(args.run_dir, cfg, result, train_split(cfg, ds).train)
    print(
        f"{cfg.method} edpe={record.edpe:.4f} ssi={cfg.ssi}: "
        f"accuracy={record.accuracy:.4f} total_time={record.total_time_s:.3f}s "
        f"(selection {record.selection_time_s:.3f}s)"
    )
    return _EXIT_OK


def _sweep_worker(cfg_dict: dict) -> MetricsRecord:
    cfg = RunConfig.from_dict(cfg_dict)
    result = run(cfg)
    return _to_record(cfg, result)


def cmd_sweep(args) -> int:
    sweep = SweepConfig.from_dict(_load_json(args.config))
    combos = sweep.combinations()
    for combo in combos:
        if "seed" not in combo or combo["seed"] is None:
            combo["seed"] = _default_seed()
        RunConfig.from_dict(combo).validate()

    outcomes: List = [None] * len(combos)
    failures = []
    if args.jobs <= 1:
        for i, combo in enumerate(combos):
            try:
                outcomes[i] = _sweep_worker(combo)
            except Exception as exc:  # noqa: BLE001 - collected into the failure report
                failures.append((combo, repr(exc)))
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_sweep_worker, combo) for combo in combos]
            for i, fut in enumerate(futures):
                try:
                    outcomes[i] = fut.result()
                except Exception as exc:  # noqa: BLE001
                    failures.append((combos[i], repr(exc)))

    records = [r for r in outcomes if r is not None]
    write_results(records, args.out, fmt="csv", append=args.append)
    print(f"wrote {len(records)} row(s) to {args.out}")
    if failures:
        print(f"{len(failures)} combination(s) failed:", file=sys.stderr)
        for combo, err in failures:
            tag = (combo.get("method"), combo.get("edpe"), combo.get("ssi"), combo.get("seed"))
            print(f"  method={tag[0]} edpe={tag[1]} ssi={tag[2]} seed={tag[3]}: {err}",
                  file=sys.stderr)
        return _EXIT_RUNTIME
    return _EXIT_OK


def cmd_report(args) -> int:
    records = read_results(args.results)
    if not records:
        print("no records")
        return _EXIT_OK
    rows = sorted(records, key=lambda r: (r.method, r.edpe, r.ssi, r.seed))
    header = f"{'method':<10} {'edpe':>7} {'ssi':>4} {'epochs':>6} {'seed':>5} " \
             f"{'train_s':>9} {'select_s':>9} {'total_s':>9} {'accuracy':>9} {'kappa':>7}"
    print(header)
    print("-" * len(header))
    for r in rows:
        kappa = f"{r.kappa:.4f}" if r.kappa is not None else "-"
        print(
            f"{r.method:<10} {r.edpe:>7.4f} {r.ssi:>4d} {r.epochs:>6d} {r.seed:>5d} "
            f"{r.training_time_s:>9.3f} {r.selection_time_s:>9.3f} "
            f"{r.total_time_s:>9.3f} {r.accuracy:>9.4f} {kappa:>7}"
        )
    return _EXIT_OK


def cmd_churn(args) -> int:
    run_dir = Path(args.run_dir)
    coresets_path = run_dir / "coresets.json"
    train_path = run_dir / "train.csv"
    if not coresets_path.exists() or not train_path.exists():
        print(f"error: {run_dir} is not a run directory (need coresets.json and train.csv)",
              file=sys.stderr)
        return _EXIT_RUNTIME
    ds = load_csv(train_path)
    if ds.combo_keys is None:
        print(
            "error: stored dataset has no combo column; churn analysis needs a "
            "combination-keyed dataset (e.g. composite-sum)",
            file=sys.stderr,
        )
        return _EXIT_RUNTIME
    with open(coresets_path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    history = [
        Coreset(
            indices=np.asarray(c["indices"], dtype=np.int64),
            weights=np.asarray(c["weights"], dtype=np.float64),
            selected_at_epoch=c["epoch"],
            method=c["method"],
        )
        for c in raw
    ]
    report: ChurnReport = churn_analysis(history, ds, args.class_label)
    payload = {
        "class": report.class_label,
        "coreset_epochs": [c.selected_at_epoch for c in history],
        "histograms": report.histograms,
        "dropped_keys": report.dropped_keys,
    }
    text = json.dumps(payload, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return _EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coreset-bench",
        description="Benchmark kit for gradient-based coreset selection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a dataset CSV")
    gen.add_argument("--kind", choices=["blobs", "composite-sum"], required=True)
    gen.add_argument("--out", required=True)
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--n-per-class", type=int, default=100)
    gen.add_argument("--classes", type=int, default=10)
    gen.add_argument("--dim", type=int, default=10)
    gen.add_argument("--spread", type=float, default=0.5)
    gen.add_argument("--n", type=int, default=5000)
    gen.add_argument("--digit-min", type=int, default=3)
    gen.add_argument("--digit-max", type=int, default=5)
    gen.add_argument("--noise", type=float, default=0.1)
    gen.set_defaults(func=cmd_gen)

    runp = sub.add_parser("run", help="execute one training run")
    runp.add_argument("--config", required=True)
    runp.add_argument("--out", required=True)
    runp.add_argument("--run-dir", default=None,
                      help="directory for coreset history / churn artifacts")
    runp.add_argument("--seed", type=int, default=None)
    runp.add_argument("--method", default=None)
    runp.add_argument("--edpe", type=float, default=None)
    runp.add_argument("--ssi", type=int, default=None)
    runp.add_argument("--epochs", type=int, default=None)
    runp.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="run a method x edpe x ssi x seed grid")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--out", required=True)
    sweep.add_argument("--jobs", type=int, default=1)
    sweep.add_argument("--append", action="store_true")
    sweep.set_defaults(func=cmd_sweep)

    report = sub.add_parser("report", help="print a results table")
    report.add_argument("--results", required=True)
    report.set_defaults(func=cmd_report)

    churn = sub.add_parser("churn", help="emit combination-churn JSON for a class")
    churn.add_argument("--run-dir", required=True)
    churn.add_argument("--class", dest="class_label", type=int, required=True)
    churn.add_argument("--out", default=None)
    churn.set_defaults(func=cmd_churn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
