"""Deterministic stand-ins for the benchmark files, for tests and demos.

The real datasets are not redistributed with the package. ``write_ili_csv``
produces a file with the public ILI header (weekly rows, 2002 onwards) whose
``OT`` column mimics total patient visits: the reporting-provider count grows
over the years with occasional enrolment jumps, visits per provider carry a
mild winter bump and a holiday dip, and weekly noise is multiplicative. The
``% WEIGHTED ILI`` column carries the sharper flu-season peaks.
"""

from __future__ import annotations

import datetime as dt

import numpy as np

from .data import DatasetSpec
from .records import atomic_write

ILI_COLUMNS = ["date", "% WEIGHTED ILI", "%UNWEIGHTED ILI", "AGE 0-4", "AGE 5-24",
               "ILITOTAL", "NUM. OF PROVIDERS", "OT"]


def _winter_bump(week: np.ndarray, centre: np.ndarray, width: float) -> np.ndarray:
    d = np.abs(week - centre)
    d = np.minimum(d, 52.0 - d)
    return np.exp(-0.5 * (d / width) ** 2)


def ili_like(n: int = 966, seed: int = 0) -> dict[str, np.ndarray]:
    """Columns of an ILI-style weekly table, keyed by header name."""
    rng = np.random.default_rng(seed)
    t = np.arange(n, dtype=np.float64)
    week = t % 52.0
    season = (t // 52.0).astype(int)
    n_seasons = season.max() + 1

    # provider enrolment: slow growth plus a handful of step jumps
    growth = 750.0 * np.exp(1.2 * t / n)
    jumps = np.zeros(n)
    for at in np.sort(rng.choice(np.arange(52, n - 52), size=5, replace=False)):
        jumps[at:] += rng.uniform(60.0, 220.0)
    providers = np.round(growth + jumps + rng.normal(0.0, 15.0, n))

    flu_centre = 5.0 + rng.normal(0.0, 2.0, n_seasons)
    severity = rng.uniform(0.5, 1.5, n_seasons)
    flu = severity[season] * _winter_bump(week, flu_centre[season], 4.0)
    pct_ili = 1.0 + 4.0 * flu + rng.normal(0.0, 0.08, n)

    per_provider = 230.0 * (1.0 + 0.25 * flu - 0.12 * _winter_bump(week, 51.5, 0.7))
    visits = providers * per_provider * np.exp(rng.normal(0.0, 0.04, n))
    return {
        "% WEIGHTED ILI": pct_ili,
        "%UNWEIGHTED ILI": pct_ili * rng.uniform(0.92, 1.05, n),
        "ILITOTAL": np.round(visits * pct_ili / 100.0),
        "NUM. OF PROVIDERS": providers,
        "OT": np.round(visits),
    }


def write_ili_csv(path, n: int = 966, seed: int = 0) -> DatasetSpec:
    """Write an ILI-layout CSV and return a spec targeting ``OT``."""
    cols = ili_like(n, seed)
    start = dt.date(2002, 1, 1)
    lines = [",".join(ILI_COLUMNS)]
    for i in range(n):
        total = cols["ILITOTAL"][i]
        lines.append(",".join([
            (start + dt.timedelta(weeks=i)).isoformat() + " 00:00:00",
            f"{cols['% WEIGHTED ILI'][i]:.5f}",
            f"{cols['%UNWEIGHTED ILI'][i]:.5f}",
            str(int(total * 0.3)),
            str(int(total * 0.45)),
            str(int(total)),
            str(int(cols["NUM. OF PROVIDERS"][i])),
            str(int(cols["OT"][i])),
        ]))
    atomic_write(path, "\n".join(lines) + "\n")
    return DatasetSpec(str(path), "ILI", "OT", "date")
