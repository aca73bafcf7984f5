"""Command line entry point.

    bttf run --config exp.yaml [--format json|csv] [--parallel N]
             [--compare-sequential] [--out PATH]
    bttf inspect-pool --manifest work/H24/pool/manifest.json

``BTTF_WORKERS`` sets the worker count when ``--parallel`` is not given.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError, ParameterError, PipelineError
from .experiment import emit_report, load_config, report_csv, report_json, run_experiment
from .refine import read_manifest, resolve_workers


def _run(args) -> int:
    try:
        config = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"[config] {exc}", file=sys.stderr)
        return 2
    out = args.out or config.output
    try:
        workers = resolve_workers(args.parallel if args.parallel is not None else config.workers)
    except ParameterError as exc:
        print(f"[config] {exc}", file=sys.stderr)
        return 2
    try:
        report = run_experiment(replace(config, output=None), workers=workers,
                                compare_sequential=args.compare_sequential)
    except PipelineError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    if out:
        fmt = args.format or ("csv" if str(out).endswith(".csv") else "json")
        emit_report(report, out, fmt)
        print(f"report written to {out}", file=sys.stderr)
    else:
        sys.stdout.write(report_csv(report) if args.format == "csv" else report_json(report))
    failed = [r for r in report["horizons"] if r["status"] != "ok"]
    for r in failed:
        print(f"horizon {r['horizon']} failed in [{r['error']['stage']}]: {r['error']['message']}",
              file=sys.stderr)
    return 1 if failed else 0


def _inspect(args) -> int:
    try:
        manifest = read_manifest(args.manifest)
    except (OSError, ValueError) as exc:
        print(f"[inspect-pool] {exc}", file=sys.stderr)
        return 1
    print(f"pool: {len(manifest['entries'])} members, base_seed={manifest['base_seed']}, "
          f"first-stage model {manifest['first_stage_model'][:12] or '-'}")
    print(f"{'rank':>4}  {'segment':>7}  {'range':>11}  {'val_mse':>12}  model")
    for e in sorted(manifest["entries"], key=lambda e: e["rank"]):
        seg = e["segment"]
        print(f"{e['rank']:>4}  {seg['index']:>7}  [{seg['start']:>3}, {seg['end']:>3})  "
              f"{e['val_mse']:>12.6f}  {e['model_path']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bttf", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a YAML config")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--format", choices=("json", "csv"))
    run.add_argument("--parallel", type=int, default=None, metavar="N",
                     help="worker processes for second-stage training")
    run.add_argument("--compare-sequential", action="store_true",
                     help="also train the pool sequentially, time both and check equality")
    run.add_argument("--out", type=Path)
    run.set_defaults(func=_run)

    inspect = sub.add_parser("inspect-pool", help="print ranks, scores and segments of a saved pool")
    inspect.add_argument("--manifest", required=True, type=Path)
    inspect.set_defaults(func=_inspect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
