"""End-to-end two-stage experiment: base forecaster, look-ahead augmented
refinement pool, step-wise ensemble, and a per-horizon report.

Configs are YAML documents with a ``schema_version`` key. Unknown keys are
rejected so typos never silently fall back to defaults.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .augment import default_segment_width, enumerate_segments, first_stage_forecasts, save_forecasts
from .data import DatasetSpec, load_csv
from .ensemble import DEFAULT_EPS, KGrid, select_k
from .errors import ConfigError, ParameterError, PipelineError
from .linear import TrainConfig, init_model, train
from .metrics import evaluate
from .records import atomic_write
from .refine import pool_predict, resolve_workers, save_pool, segment_adjustments, train_pool
from .timeseries import SplitSpec, fit_scaler, make_windows, split_series

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
REPORT_VERSION = 1
KIND_LABELS = {"plain": "Linear", "dlinear": "DLinear"}


def default_lookback(dataset_name: str) -> int:
    name = dataset_name.lower()
    return 104 if ("ili" in name or "illness" in name) else 336


@dataclass(frozen=True)
class TrainSettings:
    learning_rate: float = 5e-3
    batch_size: int = 32
    max_epochs: int = 20
    patience: int = 3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def config(self, strategy: str, seed: int) -> TrainConfig:
        return TrainConfig(strategy=strategy, seed=seed, **asdict(self))


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSpec
    horizons: tuple[int, ...]
    lookback: int | None = None
    base_kind: str = "plain"
    kernel: int = 25
    stage1_strategy: str = "ES"
    stage2_strategy: str = "1E"
    segment_window: int | None = None
    strides: tuple[int, ...] = (1,)
    step_M: int = 5
    eps: float = DEFAULT_EPS
    base_seed: int = 0
    selection_split: str = "test"
    raw_metrics: bool = False
    split: SplitSpec = field(default_factory=SplitSpec)
    train: TrainSettings = field(default_factory=TrainSettings)
    output: str | None = None
    work_dir: str | None = None
    workers: int | None = None

    def __post_init__(self):
        if not self.horizons:
            raise ConfigError("at least one horizon is required")
        if self.base_kind not in KIND_LABELS:
            raise ConfigError(f"base_kind must be one of {sorted(KIND_LABELS)}, got {self.base_kind!r}")
        for s in (self.stage1_strategy, self.stage2_strategy):
            if s not in ("ES", "1E"):
                raise ConfigError(f"strategies must be 'ES' or '1E', got {s!r}")
        for H in self.horizons:
            if self.segment_window is None and H < 3:
                raise ConfigError(f"horizon {H} < 3 leaves no room for a one-third segment")
            if self.segment_window is not None and not 1 <= self.segment_window <= H:
                raise ConfigError(f"segment_window {self.segment_window} not in [1, {H}]")
        if self.lookback is not None and self.lookback < 1:
            raise ConfigError(f"lookback must be >= 1, got {self.lookback}")
        if self.step_M < 1:
            raise ConfigError(f"step_M must be >= 1, got {self.step_M}")
        if not self.eps > 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.selection_split not in ("test", "val"):
            raise ConfigError(f"selection_split must be 'test' or 'val', got {self.selection_split!r}")
        if not self.strides or any(s < 1 for s in self.strides):
            raise ConfigError(f"strides must be positive, got {self.strides}")
        if self.base_kind == "dlinear" and (self.kernel < 1 or self.kernel % 2 == 0):
            raise ConfigError(f"kernel must be odd and >= 1, got {self.kernel}")
        # fail early on invalid optimisation settings
        for strategy in (self.stage1_strategy, self.stage2_strategy):
            self.train.config(strategy, self.base_seed)

    @property
    def L(self) -> int:
        return self.lookback if self.lookback is not None else default_lookback(self.dataset.label)

    @property
    def strategy_label(self) -> str:
        return f"{self.stage1_strategy}-{self.stage2_strategy}"

    def resolved(self) -> dict:
        """Every setting with defaults filled in, as plain JSON types."""
        d = asdict(self)
        d["dataset"]["name"] = self.dataset.label
        d["lookback"] = self.L
        d["horizons"] = list(self.horizons)
        d["strides"] = sorted(self.strides)
        d["segment_windows"] = {str(H): self.segment_width(H) for H in self.horizons}
        d.pop("workers")
        d.pop("output")
        return d

    def segment_width(self, H: int) -> int:
        return self.segment_window if self.segment_window is not None else default_segment_width(H)


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}; allowed: {sorted(known)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


_SPLIT_KEYS = {"train": "train_ratio", "val": "val_ratio", "test": "test_ratio", "overlap": "overlap",
               "borders": "borders"}


def config_from_dict(data: dict, base_dir: Path | None = None) -> ExperimentConfig:
    data = dict(data)
    version = data.pop("schema_version", None)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    if "dataset" not in data or "horizons" not in data:
        raise ConfigError("config requires 'dataset' and 'horizons'")
    dataset = _build(DatasetSpec, data.pop("dataset"), "dataset")
    if base_dir is not None and not Path(dataset.path).is_absolute():
        dataset = replace(dataset, path=str(base_dir / dataset.path))
    split_raw = data.pop("split", {})
    unknown = sorted(set(split_raw) - set(_SPLIT_KEYS))
    if unknown:
        raise ConfigError(f"split: unknown key(s) {unknown}; allowed: {sorted(_SPLIT_KEYS)}")
    try:
        split = SplitSpec(**{_SPLIT_KEYS[k]: v for k, v in split_raw.items()})
    except (ParameterError, TypeError) as exc:
        raise ConfigError(f"split: {exc}") from None
    settings = _build(TrainSettings, data.pop("train", {}), "train")
    for key in ("horizons", "strides"):
        if key in data:
            data[key] = tuple(int(v) for v in data[key])
    return _build(ExperimentConfig, dict(data, dataset=dataset, split=split, train=settings), "config")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data or {}, base_dir=path.parent)


@contextmanager
def _stage(name: str):
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, exc) from exc


class _Timer:
    def __init__(self):
        self.times: dict[str, float] = {}

    @contextmanager
    def __call__(self, key: str):
        t0 = time.perf_counter()
        yield
        self.times[key] = time.perf_counter() - t0


def run_horizon(config: ExperimentConfig, series, H: int, workers: int = 1,
                compare_sequential: bool = False) -> dict:
    """One horizon of the two-stage pipeline; returns its report record."""
    L = config.L
    timer = _Timer()
    work = Path(config.work_dir) / f"H{H}" if config.work_dir else None
    kind_label = KIND_LABELS[config.base_kind]

    with _stage("split"):
        train_s, val_s, test_s = split_series(series, config.split, L, H)
    with _stage("scale"):
        scaler = fit_scaler(train_s)
        train_s, val_s, test_s = (scaler.transform(s) for s in (train_s, val_s, test_s))
    with _stage("window"):
        windows = {name: make_windows(s, L, H) for name, s in
                   (("train", train_s), ("val", val_s), ("test", test_s))}

    with _stage("stage1"), timer("stage1"):
        base = init_model(config.base_kind, L, H, config.kernel, config.base_seed)
        cfg1 = config.train.config(config.stage1_strategy, config.base_seed)
        base, report1 = train(base, windows["train"], windows["val"], cfg1)
    with _stage("forecast"):
        forecasts = {name: first_stage_forecasts(base, w) for name, w in windows.items()}
        digest = base.digest()
        if work is not None:
            base.save(work / "stage1.bin")
            for name, matrix in forecasts.items():
                save_forecasts(work / f"forecasts_{name}.bin", matrix, digest, name)

    with _stage("segments"):
        W = config.segment_width(H)
        segments = enumerate_segments(H, W, config.strides)

    with _stage("stage2"):
        cfg2 = config.train.config(config.stage2_strategy, config.base_seed)
        args = (windows["train"], forecasts["train"], windows["val"], forecasts["val"], segments, cfg2)
        kwargs = dict(base_seed=config.base_seed, kind=config.base_kind, kernel=config.kernel)
        parallel_equal = None
        if compare_sequential:
            with timer("stage2_sequential"):
                seq_pool = train_pool(*args, workers=1, **kwargs)
            with timer("stage2_parallel"):
                pool = train_pool(*args, workers=workers, **kwargs)
            parallel_equal = seq_pool.to_bytes() == pool.to_bytes()
            if not parallel_equal:
                raise RuntimeError("parallel and sequential refinement pools differ")
            timer.times["stage2"] = timer.times["stage2_parallel"]
        else:
            with timer("stage2"):
                pool = train_pool(*args, workers=workers, **kwargs)
        if work is not None:
            save_pool(pool, work / "pool", digest)

    with _stage("selection"), timer("selection"):
        test_tensor = pool_predict(pool, windows["test"], forecasts["test"])
        select_tensor = test_tensor
        if config.selection_split == "val":
            select_tensor = pool_predict(pool, windows["val"], forecasts["val"])
        grid = KGrid(config.step_M, len(pool))
        selection = select_k(select_tensor, grid, config.eps)
        final = test_tensor[:selection.K].mean(axis=0)

    with _stage("metrics"):
        targets = windows["test"].targets
        base_pred = forecasts["test"]
        if config.raw_metrics:
            targets, base_pred, final = (scaler.invert(a) for a in (targets, base_pred, final))
        base_eval = evaluate(base_pred, targets, kind_label)
        bttf_eval = evaluate(final, targets, f"{kind_label}+BTTF ({config.strategy_label})").relative_to(base_eval)
        adjustments = segment_adjustments(pool, test_tensor, forecasts["test"])
        val_by_index = {e.segment.index: e.val_mse for e in pool.entries}
        for row in adjustments:
            row["val_mse"] = val_by_index[row["segment"]["index"]]

    record = {
        "horizon": H,
        "status": "ok",
        "strategy": config.strategy_label,
        "lookback": L,
        "segment_window": W,
        "N": len(pool),
        "K_star": selection.K,
        "grid": list(grid.candidates),
        "selection_split": config.selection_split,
        "base": base_eval.to_dict(),
        "bttf": bttf_eval.to_dict(),
        "ensemble_stats": selection.rows(),
        "pool": sorted(adjustments, key=lambda r: r["rank"]),
        "stage1_training": report1.to_dict(),
        "first_stage_model": digest,
        "windows": {name: len(w) for name, w in windows.items()},
        "scaler": {"mean": scaler.mean, "std": scaler.std},
        "timings": {k: round(v, 6) for k, v in sorted(timer.times.items())},
    }
    if parallel_equal is not None:
        record["parallel_equal"] = parallel_equal
        record["workers"] = workers
    return record


def run_experiment(config: ExperimentConfig, workers: int | None = None,
                   compare_sequential: bool = False) -> dict:
    """Run every configured horizon and return the full report.

    A failing horizon is recorded with the stage that failed; the remaining
    horizons still run. Loading failures abort the whole run.
    """
    workers = resolve_workers(workers if workers is not None else config.workers)
    with _stage("load"):
        series = load_csv(config.dataset)
    t0 = time.perf_counter()
    records = []
    for H in config.horizons:
        try:
            records.append(run_horizon(config, series, H, workers, compare_sequential))
        except PipelineError as exc:
            log.error("horizon %d failed: %s", H, exc)
            records.append({"horizon": H, "status": "error",
                            "error": {"stage": exc.stage, "message": str(exc.cause)}})
    report = {
        "report_version": REPORT_VERSION,
        "dataset": config.dataset.label,
        "series_length": len(series),
        "config": config.resolved(),
        "assumptions": {
            "optimizer": config.train.optimizer,
            "learning_rate": config.train.learning_rate,
            "batch_size": config.train.batch_size,
            "max_epochs": config.train.max_epochs,
            "patience": config.train.patience,
            "lookback": config.L,
            "segment_window": "floor(H/3)" if config.segment_window is None else config.segment_window,
            "eps": config.eps,
            "kernel": config.kernel,
            "split": (list(config.split.borders) if config.split.borders is not None else
                      [config.split.train_ratio, config.split.val_ratio, config.split.test_ratio]),
            "metric_space": "raw" if config.raw_metrics else "standardized",
        },
        "horizons": records,
        "timings": {"total": round(time.perf_counter() - t0, 6)},
    }
    if config.output:
        emit_report(report, config.output)
    return report


def strip_timings(obj):
    """Drop every ``timings`` field, for run-to-run comparisons."""
    if isinstance(obj, dict):
        return {k: strip_timings(v) for k, v in obj.items() if k != "timings"}
    if isinstance(obj, list):
        return [strip_timings(v) for v in obj]
    return obj


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=True) + "\n"


CSV_COLUMNS = ["dataset", "horizon", "model", "mse", "mae", "gain_mse_pct", "gain_mae_pct"]


def report_csv(report: dict) -> str:
    """One row per model and horizon; gain cells stay empty when no base is attached."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in report["horizons"]:
        if rec.get("status") != "ok":
            continue
        for key in ("base", "bttf"):
            r = rec[key]
            gains = ["" if r[g] is None else f"{r[g]:.1f}" for g in ("gain_mse_pct", "gain_mae_pct")]
            writer.writerow([report["dataset"], rec["horizon"], r["model"],
                             f"{r['mse']:.4f}", f"{r['mae']:.4f}", *gains])
    return buf.getvalue()


def emit_report(report: dict, path, fmt: str | None = None) -> Path:
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "json")
    if fmt == "json":
        text = report_json(report)
    elif fmt == "csv":
        text = report_csv(report)
    else:
        raise ParameterError(f"unknown report format {fmt!r}")
    return atomic_write(path, text)
