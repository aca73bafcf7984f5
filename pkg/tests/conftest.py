import numpy as np
import pytest

from bttf.augment import enumerate_segments, first_stage_forecasts
from bttf.linear import TrainConfig, init_model, train
from bttf.timeseries import SplitSpec, TimeSeries, fit_scaler, make_windows, split_series


def seasonal_series(n=400, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    return TimeSeries("toy", 0.01 * t + np.sin(2 * np.pi * t / 24) + 0.2 * rng.normal(size=n))


@pytest.fixture(scope="session")
def small_problem():
    """Windows, first-stage forecasts and segments for a short seasonal series."""
    L, H = 24, 12
    tr, va, te = split_series(seasonal_series(), SplitSpec(), L, H)
    sc = fit_scaler(tr)
    windows = {k: make_windows(sc.transform(s), L, H) for k, s in (("train", tr), ("val", va), ("test", te))}
    base, _ = train(init_model("plain", L, H, seed=0), windows["train"], windows["val"],
                    TrainConfig(strategy="1E"))
    forecasts = {k: first_stage_forecasts(base, w) for k, w in windows.items()}
    segments = enumerate_segments(H, H // 3, (1,))
    return {"L": L, "H": H, "windows": windows, "forecasts": forecasts,
            "segments": segments, "base": base}
