"""Univariate series, chronological splits, standardization and windowing.

Index convention: documentation uses 1-based positions (x_1 .. x_T) to match
the usual forecasting notation; every array and every stored anchor is
0-based. A window anchored at 0-based index ``t`` uses ``x[t-L+1 : t+1]`` as
input and ``x[t+1 : t+H+1]`` as target.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import InsufficientDataError, ParameterError


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeSeries:
    """A named univariate sequence of finite observations."""

    name: str
    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.values)
        if arr.ndim != 1:
            raise ParameterError(f"series {self.name!r} must be 1-D, got shape {arr.shape}")
        if arr.size < 1:
            raise ParameterError(f"series {self.name!r} is empty")
        if not np.all(np.isfinite(arr)):
            raise ParameterError(f"series {self.name!r} contains non-finite values")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return int(self.values.size)

    def with_values(self, values, name: str | None = None) -> "TimeSeries":
        return TimeSeries(self.name if name is None else name, values)


@dataclass(frozen=True)
class SplitSpec:
    """Chronological split fractions.

    ``borders`` optionally fixes the train, val and test lengths in
    observations (the ETT hourly convention is ``(8640, 2880, 2880)``). The
    ratios are then ignored and anything after the test block is dropped.
    With ``overlap`` on, the validation and test segments are prefixed with
    the ``L`` observations that precede their nominal start so their first
    window is constructible from data strictly in the past.
    """

    train_ratio: float = 0.7
    val_ratio: float = 0.1
    test_ratio: float = 0.2
    overlap: bool = True
    borders: tuple[int, int, int] | None = None

    def __post_init__(self):
        if self.borders is not None:
            if len(self.borders) != 3 or any(int(b) < 1 for b in self.borders):
                raise ParameterError(f"borders must be three positive lengths, got {self.borders}")
            object.__setattr__(self, "borders", tuple(int(b) for b in self.borders))
        ratios = (self.train_ratio, self.val_ratio, self.test_ratio)
        if not all(0.0 < r < 1.0 for r in ratios):
            raise ParameterError(f"split ratios must lie in (0, 1), got {ratios}")
        if abs(sum(ratios) - 1.0) > 1e-9:
            raise ParameterError(f"split ratios must sum to 1, got {sum(ratios)!r}")


def split_bounds(T: int, spec: SplitSpec, L: int) -> dict[str, tuple[int, int]]:
    """Half-open 0-based ``(start, stop)`` bounds of each split.

    Train and test sizes are floored, validation takes the remainder.
    """
    if spec.borders is not None:
        n_train, n_val, n_test = spec.borders
        if n_train + n_val + n_test > T:
            raise InsufficientDataError(
                f"borders {spec.borders} need {n_train + n_val + n_test} observations, series has {T}",
                splits=("val", "test", "train"))
        T = n_train + n_val + n_test
    else:
        n_train = int(T * spec.train_ratio + 1e-9)
        n_test = int(T * spec.test_ratio + 1e-9)
        n_val = T - n_train - n_test
    shift = L if spec.overlap else 0
    return {
        "train": (0, n_train),
        "val": (max(0, n_train - shift), n_train + n_val),
        "test": (max(0, n_train + n_val - shift), T),
    }


def split_series(
    series: TimeSeries, spec: SplitSpec, L: int, horizon: int = 1
) -> tuple[TimeSeries, TimeSeries, TimeSeries]:
    """Partition a series chronologically into train, val and test.

    Parameters
    ----------
    series : TimeSeries
    spec : SplitSpec
    L : int
        Lookback length. Used for the overlap prefix and the sufficiency check.
    horizon : int
        Forecast horizon used for the sufficiency check; each split must hold
        at least ``L + horizon`` observations.

    Raises
    ------
    InsufficientDataError
        When any split cannot form a single window. ``err.splits`` names the
        offending splits in the order val, test, train.
    """
    if L < 0 or horizon < 0:
        raise ParameterError(f"L and horizon must be non-negative, got L={L}, horizon={horizon}")
    bounds = split_bounds(len(series), spec, L)
    need = L + horizon
    short = [n for n in ("val", "test", "train") if bounds[n][1] - bounds[n][0] < max(need, 1)]
    if short:
        sizes = ", ".join(f"{n}={bounds[n][1] - bounds[n][0]}" for n in short)
        raise InsufficientDataError(
            f"insufficient data for split(s) {', '.join(short)} of {series.name!r}: "
            f"{sizes} observations, need at least {max(need, 1)}",
            splits=tuple(short),
        )
    return tuple(  # type: ignore[return-value]
        TimeSeries(f"{series.name}/{n}", series.values[a:b]) for n, (a, b) in bounds.items()
    )


@dataclass(frozen=True)
class Scaler:
    mean: float
    std: float

    def __post_init__(self):
        if not (self.std > 0 and np.isfinite(self.std)):
            raise ParameterError(f"scaler std must be positive, got {self.std}")

    def apply(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def invert(self, z):
        return np.asarray(z, dtype=np.float64) * self.std + self.mean

    def transform(self, series: TimeSeries) -> TimeSeries:
        return series.with_values(self.apply(series.values))


def fit_scaler(train: TimeSeries) -> Scaler:
    """Mean and population standard deviation of the training values."""
    x = train.values
    if x.size < 2:
        raise ParameterError(f"need at least 2 observations to fit a scaler, got {x.size}")
    std = float(np.std(x))
    if std == 0.0:
        raise ParameterError(f"zero variance in {train.name!r}; cannot standardize")
    return Scaler(float(np.mean(x)), std)


@dataclass(frozen=True)
class WindowPair:
    input: np.ndarray
    target: np.ndarray
    anchor: int  # 0-based index of the last input observation


@dataclass(frozen=True)
class Windows:
    """An ordered batch of supervised windows stored as stacked arrays.

    Behaves as a sequence of :class:`WindowPair`.
    """

    inputs: np.ndarray   # (n, L)
    targets: np.ndarray  # (n, H)
    anchors: np.ndarray  # (n,)
    source: str = field(default="")

    def __post_init__(self):
        for name in ("inputs", "targets", "anchors"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (len(self.inputs) == len(self.targets) == len(self.anchors)):
            raise ParameterError("inputs, targets and anchors must have equal length")

    @property
    def L(self) -> int:
        return int(self.inputs.shape[1])

    @property
    def H(self) -> int:
        return int(self.targets.shape[1])

    def __len__(self) -> int:
        return int(self.inputs.shape[0])

    def __getitem__(self, j: int) -> WindowPair:
        return WindowPair(self.inputs[j], self.targets[j], int(self.anchors[j]))

    def __iter__(self) -> Iterator[WindowPair]:
        return (self[j] for j in range(len(self)))

    @classmethod
    def from_pairs(cls, pairs: Sequence[WindowPair], source: str = "") -> "Windows":
        if not pairs:
            raise ParameterError("cannot build Windows from an empty list")
        return cls(
            np.stack([p.input for p in pairs]),
            np.stack([p.target for p in pairs]),
            np.array([p.anchor for p in pairs], dtype=np.int64),
            source,
        )


def make_windows(series: TimeSeries, L: int, H: int) -> Windows:
    """All ``T - L - H + 1`` sliding windows, in anchor order.

    >>> w = make_windows(TimeSeries("s", [1, 2, 3, 4, 5]), L=2, H=1)
    >>> w.inputs.tolist(), w.targets.tolist()
    ([[1.0, 2.0], [2.0, 3.0], [3.0, 4.0]], [[3.0], [4.0], [5.0]])
    """
    if L < 1 or H < 1:
        raise ParameterError(f"L and H must be >= 1, got L={L}, H={H}")
    T = len(series)
    if T < L + H:
        raise InsufficientDataError(
            f"insufficient data in {series.name!r}: T={T} < L+H={L + H}", splits=(series.name,)
        )
    x = series.values
    frames = np.lib.stride_tricks.sliding_window_view(x, L + H)
    return Windows(
        frames[:, :L].copy(),
        frames[:, L:].copy(),
        np.arange(L - 1, T - H, dtype=np.int64),
        series.name,
    )
