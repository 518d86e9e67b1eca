"""Command-line entry point.

Subcommands: ingest (build the daily panel from raw sources), calibrate
(compartment-parameter fit report), train (joint training, writes
checkpoints), forecast (rolling out-of-sample evaluation), policy (255-way
reopening sweep with frontier and marginal statistics), blm (protest-index
counterfactual), serve (JSON-over-HTTP scenario service).

Exit codes: 0 success, 2 usage, 3 data errors, 4 numeric failures. Failures
also emit one machine-readable JSON object on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from datetime import date
from pathlib import Path

import numpy as np

from . import policy as policy_lab
from .calibrate import calibrate
from .config import RunConfig, git_blob_hash, load_run_config
from .errors import (BracketError, DataFormatError, DateOrderError, DomainError,
                     EpieconError, NumericError, RangeError, StabilityError, WindowError)
from .panel import Panel, build_panel, ingest_sources, read_demographics_json
from .simulate import ModelBundle, joint_train, rolling_forecast

DATA_ERRORS = (DataFormatError, DateOrderError, DomainError, RangeError, WindowError,
               FileNotFoundError)
NUMERIC_ERRORS = (NumericError, StabilityError, BracketError)

SOURCE_FILES = {
    "mobility": "mobility.csv",
    "oxford": "oxford.csv",
    "claims": "claims.csv",
    "epi": "epi_national.csv",
    "state_epi": "epi_state.csv",
    "protests": "protests.csv",
    "demographics": "demographics.json",
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epiecon",
        description="Coupled epidemic-economy simulation lab")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--data-dir", type=Path, required=True)
        p.add_argument("--out-dir", type=Path, required=True)
        p.add_argument("--config", type=Path, default=None)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("ingest", help="parse raw sources into the daily panel")
    common(p)

    p = sub.add_parser("calibrate", help="fit the compartment parameters")
    common(p)

    p = sub.add_parser("train", help="joint training, writes model checkpoints")
    common(p)

    p = sub.add_parser("forecast", help="rolling out-of-sample evaluation")
    common(p)

    p = sub.add_parser("policy", help="255-scenario reopening sweep")
    common(p)
    p.add_argument("--bundle", type=Path, default=None)
    p.add_argument("--start", type=date.fromisoformat, required=True)
    p.add_argument("--end", type=date.fromisoformat, required=True)
    p.add_argument("--horizon", type=int, default=14)

    p = sub.add_parser("blm", help="protest-index counterfactual report")
    common(p)
    p.add_argument("--bundle", type=Path, default=None)
    p.add_argument("--start", type=date.fromisoformat, required=True)
    p.add_argument("--end", type=date.fromisoformat, required=True)

    p = sub.add_parser("serve", help="JSON-over-HTTP scenario service")
    common(p)
    p.add_argument("--bundle", type=Path, default=None)
    p.add_argument("--bind", default="127.0.0.1:8910")
    p.add_argument("--ui-dir", type=Path, default=None)
    return parser


def _load_panel(data_dir: Path):
    panel_path = data_dir / "panel.csv"
    if not panel_path.exists():
        raise DataFormatError(f"{panel_path} not found; run `epiecon ingest` first")
    panel = Panel.load_csv(panel_path)
    demographics = read_demographics_json(data_dir / "demographics.json")
    return panel, demographics, git_blob_hash(panel_path)


def _load_bundle(args) -> ModelBundle:
    bundle_dir = args.bundle or (args.data_dir / "bundle")
    if not Path(bundle_dir).exists():
        raise DataFormatError(f"bundle directory {bundle_dir} not found; run `epiecon train`")
    return ModelBundle.load(bundle_dir)


def _run_config(args) -> RunConfig:
    cfg = load_run_config(args.config)
    cfg.reseed(args.seed)
    return cfg


def cmd_ingest(args) -> int:
    paths = {k: args.data_dir / v for k, v in SOURCE_FILES.items()}
    bundle, demographics = ingest_sources(
        paths["mobility"], paths["oxford"], paths["claims"], paths["epi"],
        paths["state_epi"], paths["demographics"], paths["protests"])
    panel, demographics = build_panel(bundle, demographics)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    out_panel = args.out_dir / "panel.csv"
    panel.save_csv(out_panel)
    (args.out_dir / "demographics.json").write_text(
        (args.data_dir / SOURCE_FILES["demographics"]).read_text())
    report = {
        "rows": len(panel),
        "start": panel.dates[0].isoformat(),
        "end": panel.dates[-1].isoformat(),
        "rejected_rows": bundle.rejected,
        "panel_hash": git_blob_hash(out_panel),
    }
    (args.out_dir / "ingest_report.json").write_text(json.dumps(report, indent=2))
    print(json.dumps(report))
    return 0


def cmd_calibrate(args) -> int:
    panel, demographics, panel_hash = _load_panel(args.data_dir)
    pop = demographics.population
    result = calibrate(panel.cum_confirmed / pop, panel.cum_removed / pop)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    report = dict(result.report(), panel_hash=panel_hash)
    (args.out_dir / "calibration.json").write_text(json.dumps(report, indent=2))
    print(json.dumps(report))
    return 0


def cmd_train(args) -> int:
    panel, demographics, panel_hash = _load_panel(args.data_dir)
    cfg = _run_config(args)
    result = joint_train(panel, demographics, cfg.joint)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    result.bundle.save(args.out_dir / "bundle")
    report = {
        "sweep_losses": result.sweep_losses,
        "best_sweep": result.best_sweep,
        "calibration": result.calibration.report(),
        "panel_hash": panel_hash,
        "seed": args.seed,
    }
    (args.out_dir / "train_report.json").write_text(json.dumps(report, indent=2))
    print(json.dumps({"best_sweep": result.best_sweep, "sweep_losses": result.sweep_losses}))
    return 0


def cmd_forecast(args) -> int:
    panel, demographics, panel_hash = _load_panel(args.data_dir)
    cfg = _run_config(args)
    result = rolling_forecast(panel, demographics, cfg.rolling)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    metrics = dict(result.metrics_payload(), panel_hash=panel_hash, seed=args.seed)
    (args.out_dir / "metrics.json").write_text(json.dumps(metrics, indent=2))
    for i, window in enumerate(result.windows):
        window.trajectory.save_csv(args.out_dir / f"trajectory_w{i:02d}.csv")
    print(json.dumps(metrics))
    return 0


def cmd_policy(args) -> int:
    panel, demographics, panel_hash = _load_panel(args.data_dir)
    bundle = _load_bundle(args)
    cfg = _run_config(args)
    start_dates = []
    d = args.start
    while d <= args.end:
        start_dates.append(d)
        d = date.fromordinal(d.toordinal() + 1)
    outcomes = policy_lab.run_policy_sweep(bundle, panel, start_dates,
                                           horizon=args.horizon, workers=cfg.workers)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    with (args.out_dir / "scenarios.csv").open("w") as fh:
        fh.write("mask,d_employment_pp,d_cases\n")
        for bits, out in sorted(outcomes.items()):
            fh.write(f"{bits},{out.d_employment!r},{out.d_cases!r}\n")
    frontier = policy_lab.efficient_frontier(outcomes)
    frontier_payload = {
        "schema_version": 1,
        "panel_hash": panel_hash,
        "horizon": args.horizon,
        "start": args.start.isoformat(),
        "end": args.end.isoformat(),
        "points": [{"mask": p.mask_bits, "d_cases": p.d_cases,
                    "d_employment_pp": p.d_employment} for p in frontier],
    }
    (args.out_dir / "frontier.json").write_text(json.dumps(frontier_payload, indent=2))
    stats = policy_lab.marginal_policy_stats(outcomes)
    (args.out_dir / "marginal_stats.json").write_text(json.dumps(
        {"schema_version": 1, "panel_hash": panel_hash,
         "stats": [asdict(s) for s in stats]}, indent=2))
    print(json.dumps({"scenarios": len(outcomes), "frontier_points": len(frontier)}))
    return 0


def cmd_blm(args) -> int:
    panel, demographics, panel_hash = _load_panel(args.data_dir)
    bundle = _load_bundle(args)
    dates, d_cases, d_employment = policy_lab.blm_counterfactual(
        bundle, panel, args.start, args.end)
    equivalence = None
    if d_cases[-1] > 0:
        try:
            equivalence = policy_lab.employment_value_equivalence(
                bundle, panel, args.start,
                (panel.index_of(dates[-1]) - panel.index_of(args.start)) + 1,
                float(d_cases[-1]))
        except BracketError:
            equivalence = None
    report = {
        "schema_version": 1,
        "panel_hash": panel_hash,
        "dates": [d.isoformat() for d in dates],
        "d_cases": list(map(float, d_cases)),
        "d_employment_pp": list(map(float, d_employment)),
        "total_extra_cases": float(d_cases[-1]),
        "employment_equivalence_pp": equivalence,
    }
    args.out_dir.mkdir(parents=True, exist_ok=True)
    (args.out_dir / "blm_report.json").write_text(json.dumps(report, indent=2))
    print(json.dumps({"total_extra_cases": report["total_extra_cases"],
                      "employment_equivalence_pp": equivalence}))
    return 0


def cmd_serve(args) -> int:
    from .server import serve
    panel, demographics, panel_hash = _load_panel(args.data_dir)
    bundle = _load_bundle(args)
    cfg = _run_config(args)
    host, _, port = args.bind.rpartition(":")
    serve(bundle, panel, panel_hash, host or "127.0.0.1", int(port),
          workers=cfg.workers, ui_dir=args.ui_dir)
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "calibrate": cmd_calibrate,
    "train": cmd_train,
    "forecast": cmd_forecast,
    "policy": cmd_policy,
    "blm": cmd_blm,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    np.random.seed(args.seed % (2 ** 32))
    try:
        return COMMANDS[args.command](args)
    except NUMERIC_ERRORS as exc:
        _emit_error(exc)
        return 4
    except DATA_ERRORS as exc:
        _emit_error(exc)
        return 3
    except EpieconError as exc:
        _emit_error(exc)
        return 3


def _emit_error(exc) -> None:
    sys.stderr.write(json.dumps(
        {"error": {"type": type(exc).__name__, "message": str(exc)}}) + "\n")


if __name__ == "__main__":
    sys.exit(main())
