"""Quickstart: the full two-stage pipeline on an ILI-shaped weekly series.

There is no bundled copy of the public influenza-like-illness file, so this
script writes a synthetic stand-in with the same column layout and roughly
the same size (966 weeks), then runs every horizon with one-epoch training
in both stages.

    python demos/01_ili_quickstart.py [output_dir]
"""

import sys
import tempfile
from pathlib import Path

from bttf.experiment import config_from_dict, report_csv, run_experiment
from bttf.synthetic import write_ili_csv

out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="bttf-ili-"))
out_dir.mkdir(parents=True, exist_ok=True)

# Weekly patient-visit totals in the "OT" column, preceded by the usual
# age-bucket and provider-count columns.
dataset = write_ili_csv(out_dir / "national_illness.csv")
print(f"wrote {dataset.path}")

# The config mirrors what `bttf run --config ...` reads from YAML. The
# dataset name contains "ILI", so the lookback defaults to 104 weeks.
config = config_from_dict({
    "schema_version": 1,
    "dataset": {"path": dataset.path, "name": "ILI"},
    "horizons": [24, 36, 48, 60],
    "stage1_strategy": "1E",
    "stage2_strategy": "1E",
    "work_dir": str(out_dir / "work"),
})
report = run_experiment(config)

print()
print(report_csv(report))

# Each horizon also records the pool size N and the chosen ensemble size K*.
for h in report["horizons"]:
    print(f"H={h['horizon']:>2}: N={h['N']:>2} members, K*={h['K_star']:>2}, "
          f"grid {h['grid']}, stage-2 time {h['timings']['stage2']:.2f}s")

# Pools and first-stage forecasts are cached per horizon; inspect one with
#   bttf inspect-pool --manifest <out_dir>/work/H24/pool/manifest.json
print(f"\npool manifests under {out_dir / 'work'}")
