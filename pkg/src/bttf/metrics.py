"""Point-forecast accuracy and relative gain."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ParameterError, ShapeError


@dataclass(frozen=True)
class EvalResult:
    mse: float
    mae: float
    horizon: int
    model_label: str = ""
    gain_mse_pct: float | None = None
    gain_mae_pct: float | None = None

    def relative_to(self, base: "EvalResult") -> "EvalResult":
        """Copy with gains over ``base`` attached."""
        return replace(self, gain_mse_pct=gain_percent(base.mse, self.mse),
                       gain_mae_pct=gain_percent(base.mae, self.mae))

    def to_dict(self) -> dict:
        return {
            "model": self.model_label,
            "horizon": self.horizon,
            "mse": self.mse,
            "mae": self.mae,
            "gain_mse_pct": self.gain_mse_pct,
            "gain_mae_pct": self.gain_mae_pct,
        }


def evaluate(preds, targets, model_label: str = "") -> EvalResult:
    """MSE and MAE over every window and step of an ``(n, H)`` forecast."""
    P = np.asarray(preds, dtype=np.float64)
    Y = np.asarray(targets, dtype=np.float64)
    if P.shape != Y.shape:
        raise ShapeError("predictions vs targets", Y.shape, P.shape)
    if P.size == 0:
        raise ParameterError("cannot evaluate an empty forecast")
    err = P - Y
    horizon = P.shape[-1] if P.ndim > 1 else P.size
    return EvalResult(float(np.mean(err ** 2)), float(np.mean(np.abs(err))), int(horizon), model_label)


def gain_percent(base: float, improved: float) -> float:
    """Percentage reduction from ``base`` to ``improved``; positive is better.

    >>> round(gain_percent(1.6197, 0.7097), 1)
    56.2
    """
    if not base > 0:
        raise ParameterError(f"base error must be positive, got {base}")
    return 100.0 * (base - improved) / base
