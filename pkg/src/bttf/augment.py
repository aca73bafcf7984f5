"""Look-ahead augmentation: append slices of a first-stage forecast to the
input windows they were produced from."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from . import records
from .errors import DataFormatError, ParameterError, ShapeError
from .linear import LinearForecaster
from .timeseries import WindowPair, Windows


@dataclass(frozen=True, order=True)
class SegmentSpec:
    """Half-open offsets ``[start, end)`` into the forecast horizon.

    ``index`` is 1-based and follows the (start, end) sort order of the
    enumeration that produced the segment.
    """

    start: int
    end: int
    index: int

    @property
    def width(self) -> int:
        return self.end - self.start

    def to_dict(self) -> dict:
        return {"index": self.index, "start": self.start, "end": self.end}


def default_segment_width(H: int) -> int:
    return max(1, H // 3)


def enumerate_segments(H: int, W: int, strides: Iterable[int] = (1,)) -> list[SegmentSpec]:
    """Pooled, de-duplicated fixed-width segments for every stride.

    >>> [s.start for s in enumerate_segments(24, 8, {8})]
    [0, 8, 16]
    """
    strides = sorted(set(int(s) for s in strides))
    if not strides:
        raise ParameterError("at least one stride is required")
    if any(s < 1 for s in strides):
        raise ParameterError(f"strides must be >= 1, got {strides}")
    if W < 1 or W > H:
        raise ParameterError(f"segment width must satisfy 1 <= W <= H, got W={W}, H={H}")
    pairs = sorted({(s, s + W) for stride in strides for s in range(0, H - W + 1, stride)})
    return [SegmentSpec(s, e, i) for i, (s, e) in enumerate(pairs, start=1)]


def first_stage_forecasts(model: LinearForecaster, windows: Windows) -> np.ndarray:
    """``(n_windows, H)`` forecasts, row ``j`` for window ``j``."""
    if model.input_len != windows.L:
        raise ShapeError("first-stage input length", model.input_len, windows.L)
    return model.predict(windows.inputs)


@dataclass(frozen=True)
class AugmentedWindow:
    base: WindowPair
    segment: SegmentSpec
    input_aug: np.ndarray


@dataclass(frozen=True)
class AugmentedWindows:
    """Stacked augmented inputs for one segment; targets are the base targets."""

    base: Windows
    segment: SegmentSpec
    inputs: np.ndarray  # (n, L + W)

    @property
    def targets(self) -> np.ndarray:
        return self.base.targets

    def __len__(self) -> int:
        return len(self.base)

    def __getitem__(self, j: int) -> AugmentedWindow:
        return AugmentedWindow(self.base[j], self.segment, self.inputs[j])

    def __iter__(self) -> Iterator[AugmentedWindow]:
        return (self[j] for j in range(len(self)))


def build_augmented(windows: Windows, forecasts: np.ndarray, segment: SegmentSpec) -> AugmentedWindows:
    forecasts = np.asarray(forecasts, dtype=np.float64)
    if forecasts.ndim != 2 or forecasts.shape[0] != len(windows):
        raise ShapeError("forecast matrix rows", len(windows), forecasts.shape)
    if not (0 <= segment.start < segment.end <= forecasts.shape[1]):
        raise ParameterError(
            f"segment [{segment.start}, {segment.end}) outside horizon of length {forecasts.shape[1]}"
        )
    inputs = np.concatenate([windows.inputs, forecasts[:, segment.start:segment.end]], axis=1)
    inputs.setflags(write=False)
    return AugmentedWindows(windows, segment, inputs)


def save_forecasts(path, forecasts: np.ndarray, model_digest: str, split: str) -> Path:
    """Cache a forecast matrix keyed by first-stage model digest and split."""
    return records.save_matrix(path, np.asarray(forecasts, dtype=np.float64), model=model_digest, split=split)


def load_forecasts(path, model_digest: str | None = None, split: str | None = None) -> np.ndarray:
    header, matrix = records.load_matrix(path)
    if model_digest is not None and header.get("model") != model_digest:
        raise DataFormatError(f"forecast cache {path} belongs to another first-stage model")
    if split is not None and header.get("split") != split:
        raise DataFormatError(f"forecast cache {path} holds split {header.get('split')!r}, not {split!r}")
    if matrix.ndim != 2:
        raise DataFormatError(f"forecast cache {path} is not a matrix")
    return matrix
