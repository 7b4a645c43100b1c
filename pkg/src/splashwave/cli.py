"""Command-line front end: ``splashwave {simulate,diagnose,stability,validate,export}``."""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import os
import shutil
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .curve import PeriodicCurve, validate_splash_curve
from .errors import IOFailure, ParseError, SplashwaveError
from .evolution import Integrator, initial_state, run
from .persistence import (
    TrajectoryWriter,
    config_from_dict,
    export_csv,
    export_svg,
    load_snapshot,
    load_trajectory,
    parse_config,
    parse_config_entries,
    save_snapshot,
)
from .presets import PRESETS, FourierTable, load_preset

EXIT_OK, EXIT_FAIL, EXIT_ERROR, EXIT_ABORTED = 0, 1, 2, 3


def _thread_limit():
    """Cap BLAS/OpenMP pools at SPLASHWAVE_THREADS when set."""
    value = os.environ.get("SPLASHWAVE_THREADS")
    if not value:
        return contextlib.nullcontext()
    try:
        limit = int(value)
    except ValueError:
        raise SplashwaveError(f"SPLASHWAVE_THREADS must be an integer, got {value!r}") from None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=max(1, limit))


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc


# --------------------------------------------------------------- simulate


def cmd_simulate(args) -> int:
    text = _read(args.config) if args.config else ""
    config = parse_config(text)
    entries = parse_config_entries(text)
    preset = args.preset or entries.get("preset", ("paper_splash", 0))[0]
    table = None
    table_path = args.preset_table or entries.get("preset_table", (None, 0))[0]
    if table_path:
        table = FourierTable.parse(_read(table_path))
        preset = "custom"
    out = Path(args.out)
    first_step = 0
    if args.resume:
        rec = load_snapshot(args.resume)
        initial = rec.state
        first_step = rec.step
        remaining = config.t_final - initial.time
        if remaining < -0.5 * config.dt:
            raise SplashwaveError("snapshot time is already past t_final")
        # the stored state already runs in the requested direction
        config = replace(config, t_final=max(remaining, 0.0), direction="forward", n=initial.n)
    else:
        curve, psi = load_preset(preset, config.n, table)
        initial = initial_state(curve, psi, config.formulation, config.solver)
    writer = TrajectoryWriter(out, config, preset)
    traj = run(config, initial, on_snapshot=writer, first_step=first_step)
    writer.write_manifest(traj.records)
    print(f"wrote {len(traj.snapshots)} snapshots to {out} ({traj.wall_time:.1f} s)")
    if traj.abort_cause:
        print(f"run aborted: {traj.abort_cause}", file=sys.stderr)
        return EXIT_ABORTED
    return EXIT_OK


# --------------------------------------------------------------- diagnose


def _local_rows(rec, dt: float, integ: Integrator) -> dict:
    win = dg.local_window(rec.state, dt, integ)
    e = dg.energy(win, at=0)
    res = dg.residuals(win)[0]
    row = {"time": rec.time, "step": rec.step}
    row.update(e.components())
    row.update(total=e.total, min_q2_sigma=e.min_q2_sigma,
               negative_rayleigh_taylor=int(e.negative_rayleigh_taylor),
               f_norm=res.f_norm, g_norm=res.g_norm, delta=res.delta(),
               analyticity_radius=dg.analyticity_radius(rec.state.curve))
    return row


def diagnose_records(records, config) -> list[dict]:
    integ = Integrator(config.formulation, opts=config.solver,
                       filter_threshold=config.filter_threshold, gauge=config.gauge)
    return [_local_rows(r, config.dt, integ) for r in records]


def _write_rows(rows: list[dict], path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            for r in rows:
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def cmd_diagnose(args) -> int:
    manifest, records = load_trajectory(args.trajectory)
    config = config_from_dict(manifest["config"])
    rows = diagnose_records(records, config)
    out = Path(args.out) if args.out else Path(args.trajectory)
    _write_rows(rows, out / "energy.csv")
    print(f"wrote {out / 'energy.csv'} ({len(rows)} rows)")
    return EXIT_OK


# -------------------------------------------------------------- stability


def cmd_stability(args) -> int:
    m_ref, ref = load_trajectory(args.reference)
    m_app, app = load_trajectory(args.approximate)
    cfg_ref = config_from_dict(m_ref["config"])
    cfg_app = config_from_dict(m_app["config"])
    recs = dg.stability_energy([r.state for r in ref], [r.state for r in app], sigma_dt=cfg_ref.dt)
    integ = Integrator(cfg_app.formulation, opts=cfg_app.solver,
                       filter_threshold=cfg_app.filter_threshold, gauge=cfg_app.gauge)
    deltas = [dg.residuals(dg.local_window(r.state, cfg_app.dt, integ))[0].delta() for r in app]
    E = [r.energy for r in recs]
    times = np.array([r.time for r in recs])
    rows = [dict(time=r.time, energy=r.energy, delta=d, **r.terms) for r, d in zip(recs, deltas)]
    out = Path(args.out) if args.out else Path(args.approximate)
    _write_rows(rows, out / "stability.csv")
    summary = {"samples": len(E)}
    if len(E) >= 3:
        fit = dg.gronwall_fit(E, deltas, float(np.mean(np.diff(times))))
        summary.update(c1=fit.c1, eps2=fit.eps2, max_violation=fit.max_violation, degenerate=fit.degenerate)
    print(json.dumps(summary))
    (out / "gronwall.json").write_text(json.dumps(summary, indent=1) + "\n")
    return EXIT_OK


# --------------------------------------------------------------- validate


def load_curve_file(path) -> PeriodicCurve:
    """Physical curve from a snapshot JSON or a CSV with x,y (or z1,z2) columns."""
    path = Path(path)
    if path.suffix == ".json":
        rec = load_snapshot(path)
        if rec.state.curve.physical:
            return rec.state.curve
        if rec.physical is None:
            raise SplashwaveError("snapshot has no physical curve")
        return PeriodicCurve.from_points(rec.physical, "physical_periodic")
    rows = list(csv.DictReader(_read(path).splitlines()))
    if not rows:
        raise ParseError("empty curve file", 1)
    keys = ("x", "y") if "x" in rows[0] else ("z1_phys", "z2_phys") if "z1_phys" in rows[0] else ("z1", "z2")
    try:
        z = np.array([float(r[keys[0]]) + 1j * float(r[keys[1]]) for r in rows])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad curve row: {exc}", 2) from None
    return PeriodicCurve.from_points(z, "physical_periodic")


def cmd_validate(args) -> int:
    if args.curve:
        curve = load_curve_file(args.curve)
    else:
        curve, _ = load_preset(args.preset or "paper_splash", args.n)
    report = validate_splash_curve(curve)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_FAIL


# ----------------------------------------------------------------- export


def cmd_export(args) -> int:
    src = Path(args.source)
    if src.is_dir():
        _, records = load_trajectory(src)
        steps = src / "steps.csv"
    else:
        records, steps = [load_snapshot(src)], None
    out = Path(args.out) if args.out else (src if src.is_dir() else src.parent)
    written = []
    if args.format == "csv":
        written = export_csv(records, out)
        if steps is not None and steps.exists():
            target = out / steps.name
            if target.resolve() != steps.resolve():
                shutil.copyfile(steps, target)
            written.append(target)
    elif args.format == "svg":
        for r in records:
            written.append(export_svg(r, out / f"snapshot_{r.step:08d}_{args.frame}.svg", args.frame))
    else:
        for r in records:
            written.append(save_snapshot(out / f"snapshot_{r.step:08d}.json", r))
    print(f"wrote {len(written)} files to {out}")
    return EXIT_OK


# ------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="splashwave", description="Splash-singularity water-wave simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a configuration and write a trajectory directory")
    s.add_argument("--config", help="key = value configuration file")
    s.add_argument("--preset", choices=PRESETS, help="initial data (default paper_splash)")
    s.add_argument("--preset-table", help="Fourier table for a custom preset")
    s.add_argument("--out", default="trajectory", help="output directory")
    s.add_argument("--resume", help="continue from a snapshot file")
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("diagnose", help="energy, Rayleigh-Taylor and residual table for a trajectory")
    d.add_argument("trajectory")
    d.add_argument("--out")
    d.set_defaults(func=cmd_diagnose)

    st = sub.add_parser("stability", help="distance functional and Gronwall fit for two trajectories")
    st.add_argument("reference")
    st.add_argument("approximate")
    st.add_argument("--out")
    st.set_defaults(func=cmd_stability)

    v = sub.add_parser("validate", help="check the splash-curve conditions")
    v.add_argument("curve", nargs="?", help="snapshot .json or curve .csv")
    v.add_argument("--preset", choices=PRESETS)
    v.add_argument("--n", type=int, default=256)
    v.set_defaults(func=cmd_validate)

    e = sub.add_parser("export", help="write CSV, SVG or JSON from snapshots")
    e.add_argument("source", help="trajectory directory or snapshot file")
    e.add_argument("--out")
    e.add_argument("--format", choices=("csv", "svg", "json"), default="csv")
    e.add_argument("--frame", choices=("tilde", "physical"), default="tilde")
    e.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with _thread_limit():
            return args.func(args)
    except (SplashwaveError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
