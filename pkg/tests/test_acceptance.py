"""Acceptance suite: ten criteria, one PASS/FAIL line each.

Run on its own with ``pytest tests/test_acceptance.py -v`` (or
``python tests/test_acceptance.py``). Every criterion prints its verdict and
measured values even when pytest captures output, then asserts.
"""

import os
import time
from dataclasses import replace

import numpy as np
import pytest

from bttf.augment import enumerate_segments, first_stage_forecasts
from bttf.ensemble import KGrid, decompose_error, select_k
from bttf.experiment import config_from_dict, report_json, run_experiment, strip_timings
from bttf.linear import TrainConfig, decompose, grad_mse, init_model, loss_mse, train
from bttf.metrics import gain_percent
from bttf.refine import train_pool
from bttf.synthetic import write_ili_csv
from bttf.timeseries import (SplitSpec, TimeSeries, fit_scaler, make_windows, split_bounds,
                             split_series)
from oracles import brute_force_select, central_difference, moving_average, segments_by_enumeration

# tolerances
GAIN_TOL = 0.05
GRAD_REL_TOL = 1e-5
DECOMP_TOL = 1e-12
SELECT_TOL = 1e-10
ERROR_SPLIT_TOL = 1e-8
SPEEDUP_MAX = 0.6
ILI_MIN_GAIN_H24 = 20.0
ILI_RUNTIME_MAX_S = 300.0


@pytest.fixture
def verdict(capsys):
    def emit(criterion, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
        assert ok, detail
    return emit


@pytest.fixture(scope="module")
def ili_path(tmp_path_factory):
    return write_ili_csv(tmp_path_factory.mktemp("accept") / "national_illness.csv").path


def ili_config(path):
    return config_from_dict({
        "schema_version": 1,
        "dataset": {"path": path, "name": "ILI"},
        "horizons": [24, 36, 48, 60],
        "stage1_strategy": "1E",
        "stage2_strategy": "1E",
    })


def test_c01_ili_improvement(ili_path, verdict):
    t0 = time.perf_counter()
    report = run_experiment(ili_config(ili_path), workers=1)
    elapsed = time.perf_counter() - t0
    rows = {h["horizon"]: h for h in report["horizons"]}
    improved = [H for H, h in rows.items() if h["bttf"]["mse"] <= h["base"]["mse"]]
    gain24 = rows[24]["bttf"]["gain_mse_pct"]
    per_h = ", ".join(f"H={H} {h['base']['mse']:.4f}->{h['bttf']['mse']:.4f}" for H, h in rows.items())
    ok = len(improved) >= 3 and gain24 >= ILI_MIN_GAIN_H24 and elapsed < ILI_RUNTIME_MAX_S
    verdict(1, ok, f"improved on {len(improved)}/4 horizons, H=24 gain {gain24:.1f}% "
                   f"(need >= {ILI_MIN_GAIN_H24}%), {elapsed:.1f}s; {per_h}")


def test_c02_gain_arithmetic(verdict):
    a = gain_percent(1.6197, 0.7097)
    b = gain_percent(0.7035, 0.6475)
    ok = abs(a - 56.2) <= GAIN_TOL and abs(b - 8.0) <= GAIN_TOL
    verdict(2, ok, f"gain(1.6197, 0.7097) = {a:.4f}, gain(0.7035, 0.6475) = {b:.4f}")


def test_c03_segment_counts(verdict):
    cases = [(24, 8, (1,), 17), (60, 20, (1,), 41), (96, 32, (1, 2, 4, 8), 65)]
    found = []
    ok = True
    for H, W, strides, expected in cases:
        segs = enumerate_segments(H, W, strides)
        oracle = segments_by_enumeration(H, W, strides)
        same = [(s.start, s.end) for s in segs] == oracle
        ok &= same and len(segs) == expected and [s.index for s in segs] == list(range(1, len(segs) + 1))
        found.append(f"H={H} N={len(segs)} (expect {expected}, oracle {'agrees' if same else 'DIFFERS'})")
    verdict(3, ok, "; ".join(found))


def _pool_workload():
    rng = np.random.default_rng(0)
    t = np.arange(6000)
    x = np.sin(2 * np.pi * t / 24) + 0.5 * np.sin(2 * np.pi * t / 168) + 0.3 * rng.normal(size=t.size)
    L, H = 336, 48
    tr, va, _ = split_series(TimeSeries("load", x), SplitSpec(), L, H)
    sc = fit_scaler(tr)
    w = {k: make_windows(sc.transform(s), L, H) for k, s in (("train", tr), ("val", va))}
    cfg = TrainConfig(strategy="1E")
    base, _ = train(init_model("plain", L, H), w["train"], w["val"], cfg)
    f = {k: first_stage_forecasts(base, v) for k, v in w.items()}
    return (w["train"], f["train"], w["val"], f["val"], enumerate_segments(H, H // 3, (1,)), cfg)


def test_c04_parallel_speedup_and_equality(verdict):
    args = _pool_workload()
    N = len(args[4])
    t0 = time.perf_counter()
    seq = train_pool(*args, workers=1)
    t_seq = time.perf_counter() - t0
    t0 = time.perf_counter()
    par = train_pool(*args, workers=4)
    t_par = time.perf_counter() - t0
    equal = seq.to_bytes() == par.to_bytes()
    ratio = t_par / t_seq
    ok = N >= 16 and equal and ratio <= SPEEDUP_MAX
    verdict(4, ok, f"N={N}, byte-identical={equal}, 1 worker {t_seq:.2f}s, 4 workers {t_par:.2f}s, "
                   f"ratio {ratio:.2f} (need <= {SPEEDUP_MAX}; {os.cpu_count()} CPU(s) visible)")


def test_c05_gradients(verdict):
    worst = {}
    pairs = 0
    for kind, seed in (("plain", 5), ("dlinear", 6)):
        rng = np.random.default_rng(seed)
        worst[kind] = 0.0
        for trial in range(100):
            L, H, n = int(rng.integers(2, 12)), int(rng.integers(1, 6)), int(rng.integers(1, 16))
            m = init_model(kind, L, H, int(rng.choice([1, 3, 5, 25])), seed=trial)
            m = replace(m, params={k: v + rng.normal(size=v.shape) for k, v in m.params.items()})
            X, Y = rng.normal(size=(n, L)), rng.normal(size=(n, H))
            _, analytic = grad_mse(m, X, Y)
            numeric = central_difference(lambda p: loss_mse(replace(m, params=p).predict(X), Y),
                                         {k: v.copy() for k, v in m.params.items()})
            for name, a in analytic.items():
                f = numeric[name]
                rel = np.abs(a - f) / np.maximum(np.maximum(np.abs(a), np.abs(f)), 1e-6)
                worst[kind] = max(worst[kind], float(rel.max()))
            pairs += 1
    ok = all(w < GRAD_REL_TOL for w in worst.values())
    verdict(5, ok, f"{pairs} model/batch pairs, worst relative error plain {worst['plain']:.2e}, "
                   f"dlinear {worst['dlinear']:.2e} (tol {GRAD_REL_TOL})")


def test_c06_decomposition_identity(verdict):
    rng = np.random.default_rng(6)
    worst, worst_oracle = 0.0, 0.0
    for i in range(1000):
        kernel = (1, 3, 25)[i % 3]
        x = rng.normal(size=int(rng.integers(1, 60))) * rng.uniform(0.1, 100)
        trend, seasonal = decompose(x, kernel)
        worst = max(worst, float(np.max(np.abs(trend + seasonal - x))))
        worst_oracle = max(worst_oracle, float(np.max(np.abs(trend - moving_average(list(x), kernel)))))
    ok = worst <= DECOMP_TOL
    verdict(6, ok, f"1000 windows, kernels {{1,3,25}}: max |trend + seasonal - x| = {worst:.1e}, "
                   f"trend vs loop oracle {worst_oracle:.1e}")


def test_c07_selection_oracle(verdict):
    rng = np.random.default_rng(7)
    k_agree, worst = 0, 0.0
    for _ in range(200):
        N = int(rng.integers(1, 11))
        P = rng.normal(size=(N, int(rng.integers(1, 6)), int(rng.integers(1, 6)))) * rng.uniform(0.1, 5)
        grid = KGrid(int(rng.integers(1, 5)), N)
        K, V, R, S, final = brute_force_select(P.tolist(), list(grid.candidates), 1e-8)
        sel = select_k(P, grid, 1e-8)
        k_agree += sel.K == K
        for got, ref in (([s.V for s in sel.stats], V), ([s.R for s in sel.stats], R),
                         ([s.S for s in sel.stats], S), (sel.final, final)):
            worst = max(worst, float(np.max(np.abs(np.asarray(got) - np.asarray(ref)))))
    ok = k_agree == 200 and worst <= SELECT_TOL
    verdict(7, ok, f"K* agrees on {k_agree}/200 pools, max stat deviation {worst:.1e} (tol {SELECT_TOL})")


def test_c08_error_decomposition(verdict):
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        K = int(rng.integers(1, 12))
        y = rng.normal(size=(int(rng.integers(1, 20)), int(rng.integers(1, 8))))
        shared = rng.normal(size=y.shape) * rng.uniform(0, 1)
        P = y + rng.normal() + shared + rng.normal(size=(K,) + y.shape) * rng.uniform(0.01, 2)
        d = decompose_error(P, y)
        direct = float(np.mean((P.mean(axis=0) - y) ** 2))
        worst = max(worst, abs(d.bias_sq + d.variance_term + d.covariance_term - direct))
    ok = worst <= ERROR_SPLIT_TOL
    verdict(8, ok, f"100 cases, max |bias^2 + var/K + cov term - ensemble MSE| = {worst:.1e}")


def test_c09_determinism(ili_path, verdict):
    cfg = replace(ili_config(ili_path), horizons=(24, 48))
    a = report_json(strip_timings(run_experiment(cfg)))
    b = report_json(strip_timings(run_experiment(cfg)))
    verdict(9, a == b, f"two runs, {len(a)} report bytes each, identical={a == b}")


def test_c10_leakage_and_counts(verdict):
    rng = np.random.default_rng(10)
    checked, failures = 0, []
    for _ in range(1000):
        T, L, H = int(rng.integers(1, 400)), int(rng.integers(1, 60)), int(rng.integers(1, 60))
        s = TimeSeries("pos", np.arange(T, dtype=float))  # values are their own positions
        if T < L + H:
            try:
                make_windows(s, L, H)
                failures.append((T, L, H, "no error on short series"))
            except ValueError:
                pass
            checked += 1
            continue
        w = make_windows(s, L, H)
        if len(w) != T - L - H + 1:
            failures.append((T, L, H, "count"))
        if not np.all(w.inputs.max(axis=1) < w.targets.min(axis=1)):
            failures.append((T, L, H, "window leak"))
        b = split_bounds(T, SplitSpec(), L)
        try:
            parts = split_series(s, SplitSpec(), L, H)
        except ValueError:
            parts = None
        if parts is not None:
            ends = {"train": b["train"][1], "val": b["val"][1]}
            tw, vw, xw = (make_windows(p, L, H) for p in parts)
            if tw.targets.max() >= ends["train"] or vw.targets.min() < ends["train"] \
                    or vw.targets.max() >= ends["val"] or xw.targets.min() < ends["val"]:
                failures.append((T, L, H, "split leak"))
        checked += 1
    verdict(10, checked == 1000 and not failures,
            f"{checked} (T, L, H) triples, {len(failures)} violations {failures[:3]}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
