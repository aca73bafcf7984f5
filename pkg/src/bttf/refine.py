"""Parallel self-refinement: one second-stage forecaster per augmentation
segment, ranked by validation MSE.

Members are independent. Each is initialised and shuffled with its own seed
(``base_seed + segment.index``), so a pool is bit-identical no matter how
many worker processes trained it.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import records
from .augment import SegmentSpec, build_augmented
from .errors import DataFormatError, ParameterError, PoolError, ShapeError
from .linear import LinearForecaster, TrainConfig, init_model, loss_mse, train
from .timeseries import Windows

log = logging.getLogger(__name__)

MANIFEST_FORMAT = "bttf-pool"
MANIFEST_VERSION = 1


@dataclass(frozen=True)
class PoolEntry:
    segment: SegmentSpec
    model: LinearForecaster
    val_mse: float
    rank: int


@dataclass(frozen=True)
class RefinementPool:
    """Second-stage members sorted by rank (rank 1 first)."""

    entries: tuple[PoolEntry, ...]
    base_seed: int

    def __len__(self) -> int:
        return len(self.entries)

    def to_bytes(self) -> bytes:
        header = {
            "base_seed": self.base_seed,
            "entries": [
                {"rank": e.rank, "segment": e.segment.to_dict(), "val_mse": e.val_mse}
                for e in self.entries
            ],
        }
        parts = [records.pack(b"POOL", header, np.zeros(0))]
        parts.extend(e.model.to_bytes() for e in self.entries)
        return b"".join(parts)


def assign_ranks(segments: Sequence[SegmentSpec], val_mse: Sequence[float]) -> list[int]:
    """Rank 1 = smallest validation MSE; ties by segment start, then index.

    >>> segs = [SegmentSpec(i, i + 1, i + 1) for i in range(3)]
    >>> assign_ranks(segs, [0.5, 0.2, 0.9])
    [2, 1, 3]
    """
    if len(segments) != len(val_mse):
        raise ParameterError("one validation score per segment is required")
    order = sorted(range(len(segments)),
                   key=lambda i: (val_mse[i], segments[i].start, segments[i].index))
    ranks = [0] * len(segments)
    for r, i in enumerate(order, start=1):
        ranks[i] = r
    return ranks


def make_pool(members: Sequence[tuple[SegmentSpec, LinearForecaster, float]], base_seed: int) -> RefinementPool:
    segments = [m[0] for m in members]
    ranks = assign_ranks(segments, [m[2] for m in members])
    entries = [PoolEntry(seg, model, float(v), r) for (seg, model, v), r in zip(members, ranks)]
    entries.sort(key=lambda e: e.rank)
    return RefinementPool(tuple(entries), base_seed)


# Worker-side state, installed once per process by the pool initializer.
_shared: dict = {}


def _install(shared: dict) -> None:
    _shared.clear()
    _shared.update(shared)


def _train_member(segment: SegmentSpec) -> tuple[SegmentSpec, bytes, float]:
    s = _shared
    seed = s["base_seed"] + segment.index
    try:
        aug_train = build_augmented(s["train_windows"], s["train_forecasts"], segment)
        aug_val = None
        if s["val_windows"] is not None:
            aug_val = build_augmented(s["val_windows"], s["val_forecasts"], segment)
        model = init_model(s["kind"], aug_train.inputs.shape[1], aug_train.targets.shape[1],
                           s["kernel"], seed)
        model, _ = train(model, aug_train, aug_val, replace(s["config"], seed=seed))
        val_mse = loss_mse(model.predict(aug_val.inputs), aug_val.targets) if aug_val is not None else float("nan")
    except Exception as exc:
        raise PoolError(segment.index, exc) from exc
    return segment, model.to_bytes(), val_mse


def resolve_workers(workers: int | None) -> int:
    """Explicit value, else the ``BTTF_WORKERS`` environment variable, else 1."""
    if workers is None:
        raw = os.environ.get("BTTF_WORKERS", "1")
        try:
            workers = int(raw)
        except ValueError:
            raise ParameterError(f"BTTF_WORKERS must be an integer, got {raw!r}") from None
    if workers < 1:
        raise ParameterError(f"worker count must be >= 1, got {workers}")
    return workers


def train_pool(
    train_windows: Windows,
    train_forecasts: np.ndarray,
    val_windows: Windows,
    val_forecasts: np.ndarray,
    segments: Sequence[SegmentSpec],
    config: TrainConfig,
    base_seed: int = 0,
    kind: str = "plain",
    kernel: int = 25,
    workers: int | None = 1,
) -> RefinementPool:
    """Train one member per segment on its augmented dataset and rank them.

    Parameters
    ----------
    train_windows, val_windows : Windows
        Base windows of the train and validation splits.
    train_forecasts, val_forecasts : ndarray
        First-stage forecasts aligned row-for-row with the windows.
    segments : sequence of SegmentSpec
    config : TrainConfig
        Shared by all members; the seed is overridden per member.
    workers : int, optional
        Process count. ``None`` reads ``BTTF_WORKERS``.

    Raises
    ------
    PoolError
        If any member fails; the pool is never silently shrunk.
    """
    if not segments:
        raise ParameterError("at least one segment is required")
    workers = resolve_workers(workers)
    shared = {
        "train_windows": train_windows,
        "train_forecasts": np.asarray(train_forecasts, dtype=np.float64),
        "val_windows": val_windows,
        "val_forecasts": None if val_forecasts is None else np.asarray(val_forecasts, dtype=np.float64),
        "config": config,
        "base_seed": base_seed,
        "kind": kind,
        "kernel": kernel,
    }
    if workers == 1:
        saved = dict(_shared)
        _install(shared)
        try:
            results = [_train_member(seg) for seg in segments]
        finally:
            _install(saved)
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=_install, initargs=(shared,)) as ex:
            results = list(ex.map(_train_member, segments))
    # deterministic reduce by segment index
    results.sort(key=lambda r: r[0].index)
    members = [(seg, LinearForecaster.from_bytes(blob), v) for seg, blob, v in results]
    log.debug("trained %d refinement members with %d worker(s)", len(members), workers)
    return make_pool(members, base_seed)


def pool_predict(pool: RefinementPool, windows: Windows, forecasts: np.ndarray) -> np.ndarray:
    """``(N, n_windows, H)`` predictions; slice ``k`` is the rank-``k+1`` member."""
    forecasts = np.asarray(forecasts, dtype=np.float64)
    if forecasts.shape[0] != len(windows):
        raise ShapeError("forecast rows", len(windows), forecasts.shape[0])
    out = []
    for e in pool.entries:
        aug = build_augmented(windows, forecasts, e.segment)
        if aug.inputs.shape[1] != e.model.input_len:
            raise ShapeError(f"augmented input for segment {e.segment.index}", e.model.input_len,
                             aug.inputs.shape[1])
        out.append(e.model.predict(aug.inputs))
    return np.stack(out)


def refinement_delta(stage2, stage1) -> np.ndarray:
    """Implicit correction applied by a second-stage member to the first stage."""
    stage2 = np.asarray(stage2, dtype=np.float64)
    stage1 = np.asarray(stage1, dtype=np.float64)
    if stage2.shape != stage1.shape:
        raise ShapeError("stage-2 vs stage-1 prediction", stage1.shape, stage2.shape)
    return stage2 - stage1


def segment_adjustments(pool: RefinementPool, ranked_preds: np.ndarray, forecasts: np.ndarray) -> list[dict]:
    """Mean absolute refinement per member, in segment-index order."""
    rows = []
    for e, preds in zip(pool.entries, ranked_preds):
        delta = refinement_delta(preds, forecasts)
        rows.append({"segment": e.segment.to_dict(), "rank": e.rank,
                     "mean_abs_delta": float(np.mean(np.abs(delta)))})
    return sorted(rows, key=lambda r: r["segment"]["index"])


def save_pool(pool: RefinementPool, directory, first_stage_digest: str = "") -> Path:
    """Write member models and a ``manifest.json`` index; return the manifest path."""
    directory = Path(directory)
    entries = []
    for e in pool.entries:
        rel = f"members/segment_{e.segment.index:04d}.bin"
        e.model.save(directory / rel)
        entries.append({
            "rank": e.rank,
            "segment": e.segment.to_dict(),
            "val_mse": e.val_mse,
            "model_path": rel,
        })
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "base_seed": pool.base_seed,
        "first_stage_model": first_stage_digest,
        "entries": entries,
    }
    return records.atomic_write(directory / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True))


def read_manifest(path) -> dict:
    manifest = json.loads(Path(path).read_text())
    if manifest.get("format") != MANIFEST_FORMAT:
        raise DataFormatError(f"{path} is not a refinement pool manifest")
    if manifest.get("version") != MANIFEST_VERSION:
        raise DataFormatError(f"unsupported pool manifest version {manifest.get('version')}")
    return manifest


def load_pool(path) -> RefinementPool:
    path = Path(path)
    manifest = read_manifest(path)
    entries = []
    for item in manifest["entries"]:
        seg = SegmentSpec(item["segment"]["start"], item["segment"]["end"], item["segment"]["index"])
        model = LinearForecaster.load(path.parent / item["model_path"])
        entries.append(PoolEntry(seg, model, float(item["val_mse"]), int(item["rank"])))
    entries.sort(key=lambda e: e.rank)
    return RefinementPool(tuple(entries), int(manifest["base_seed"]))
