"""How look-ahead segments feed the second stage.

We train a base forecaster on a noisy seasonal series, enumerate the
segments of its horizon, and follow one segment through augmentation and
refinement. The last part shows how much each pool member moves the
first-stage forecast.
"""

import numpy as np

from bttf import (SplitSpec, TimeSeries, TrainConfig, build_augmented, enumerate_segments,
                  evaluate, first_stage_forecasts, fit_scaler, init_model, make_windows,
                  pool_predict, split_series, train, train_pool)
from bttf.refine import segment_adjustments

rng = np.random.default_rng(3)
t = np.arange(1500)
series = TimeSeries("hourly", np.sin(2 * np.pi * t / 24) + 0.002 * t + 0.4 * rng.normal(size=t.size))
L, H = 96, 24

train_s, val_s, test_s = split_series(series, SplitSpec(), L, H)
scaler = fit_scaler(train_s)
windows = {name: make_windows(scaler.transform(s), L, H)
           for name, s in (("train", train_s), ("val", val_s), ("test", test_s))}
print({name: len(w) for name, w in windows.items()}, "windows per split")

# Stage one: a single linear map from 96 inputs to 24 outputs.
cfg = TrainConfig(strategy="1E")
base, _ = train(init_model("plain", L, H, seed=0), windows["train"], windows["val"], cfg)
forecasts = {name: first_stage_forecasts(base, w) for name, w in windows.items()}

# With W = H // 3 = 8 and stride 1 there are H - W + 1 = 17 segments.
# Adding strides only adds new (start, end) pairs; duplicates collapse.
segments = enumerate_segments(H, 8, (1,))
print(f"{len(segments)} segments: first {segments[0]}, last {segments[-1]}")
print(f"strides (1, 2, 4): {len(enumerate_segments(H, 8, (1, 2, 4)))} segments, same set")

# One augmented dataset: 96 observed values followed by 8 forecast values.
seg = segments[5]
aug = build_augmented(windows["train"], forecasts["train"], seg)
print(f"segment {seg.index} covers forecast steps [{seg.start}, {seg.end}); "
      f"augmented input shape {aug.inputs.shape}, target shape {aug.targets.shape}")
assert np.array_equal(aug.inputs[0, L:], forecasts["train"][0, seg.start:seg.end])

# Stage two: one model per segment, ranked by validation MSE.
pool = train_pool(windows["train"], forecasts["train"], windows["val"], forecasts["val"],
                  segments, cfg, base_seed=0)
ranked = pool_predict(pool, windows["test"], forecasts["test"])
targets = windows["test"].targets

print("\nrank  segment  val MSE   test MSE  mean |stage2 - stage1|")
for row, member_pred in zip(segment_adjustments(pool, ranked, forecasts["test"]), ranked):
    s = row["segment"]
    print(f"{row['rank']:>4}  [{s['start']:>2},{s['end']:>2})  "
          f"{pool.entries[row['rank'] - 1].val_mse:8.4f}  "
          f"{evaluate(member_pred, targets).mse:8.4f}  {row['mean_abs_delta']:.4f}")

print(f"\nfirst stage test MSE {evaluate(forecasts['test'], targets).mse:.4f}")
