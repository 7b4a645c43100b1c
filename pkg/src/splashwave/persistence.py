"""Configuration parsing, snapshot files and exports.

Snapshots are JSON documents with a schema name and version.  The evolved
curve is stored twice: ``curve_data`` holds the periodic representation that
is read back, ``tilde`` the node positions for other tools.  Floats are
written with Python's shortest round-trip repr, so a save/load cycle is
bit-exact.  A trajectory is a directory holding ``manifest.json``, one
snapshot file per stored time and ``steps.csv`` with the per-step monitors.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .birkhoff_rott import SolveOptions
from .conformal import SINGULAR_POINTS, map_curve
from .curve import PeriodicCurve
from .errors import IOFailure, ParseError, SchemaMismatch, SplashwaveError
from .evolution import (
    RunConfig,
    Snapshot,
    StepRecord,
    WaveState,
    state_omega,
    state_phi,
)

SCHEMA = "splashwave.snapshot"
MANIFEST_SCHEMA = "splashwave.trajectory"
VERSION = 1
CONFIG_EXTRAS = ("preset", "preset_table")

_SOLVER_KEYS = {"max_iterations": int, "residual_tolerance": float, "solver_method": str}
_CONFIG_KEYS = {
    "n": int,
    "dt": float,
    "t_final": float,
    "formulation": str,
    "filter_threshold": float,
    "direction": str,
    "snapshot_stride": int,
    "gauge": str,
}


# ------------------------------------------------------------------ config


def parse_config_entries(text: str) -> dict[str, tuple[str, int]]:
    """Flat ``key = value`` lines; ``#`` starts a comment.  Returns key -> (value, line)."""
    out: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {line!r}", lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        if not key or not value:
            raise ParseError("empty key or value", lineno)
        if key in out:
            raise ParseError(f"duplicate key {key!r}", lineno)
        out[key] = (value, lineno)
    return out


def _convert(key: str, value: str, kind, lineno: int):
    try:
        if kind is int:
            v = float(value)
            if v != int(v):
                raise ValueError(f"{key} must be an integer")
            return int(v)
        if kind is float:
            v = float(value)
            if not math.isfinite(v):
                raise ValueError(f"{key} must be finite")
            return v
        return value
    except ValueError as exc:
        raise ParseError(f"{key}: {exc}", lineno) from None


def parse_config(text: str) -> RunConfig:
    """RunConfig from config text; ``preset`` keys are accepted and left to the caller."""
    entries = parse_config_entries(text)
    kw, solver = {}, {}
    for key, (value, lineno) in entries.items():
        if key in _CONFIG_KEYS:
            kw[key] = _convert(key, value, _CONFIG_KEYS[key], lineno)
        elif key in _SOLVER_KEYS:
            solver[key] = _convert(key, value, _SOLVER_KEYS[key], lineno)
        elif key not in CONFIG_EXTRAS:
            raise ParseError(f"unknown key {key!r}", lineno)
    if "solver_method" in solver:
        solver["method"] = solver.pop("solver_method")
    try:
        if solver:
            kw["solver"] = SolveOptions(**solver)
        return RunConfig(**kw)
    except ValueError as exc:
        line = min((ln for _, ln in entries.values()), default=0)
        raise ParseError(str(exc), line) from None


def config_to_dict(config: RunConfig) -> dict:
    d = {f.name: getattr(config, f.name) for f in fields(config) if f.name != "solver"}
    s = config.solver
    d.update(max_iterations=s.max_iterations, residual_tolerance=s.residual_tolerance, solver_method=s.method)
    return d


def config_from_dict(d: dict) -> RunConfig:
    text = "\n".join(f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}" for k, v in d.items())
    return parse_config(text)


# --------------------------------------------------------------- snapshots


@dataclass(frozen=True)
class SnapshotRecord:
    """Everything written for one stored time."""

    step: int
    state: WaveState
    omega: np.ndarray
    phi: np.ndarray
    physical: np.ndarray | None  # complex node positions in the physical frame
    diagnostics: dict
    cause: str | None = None

    @property
    def time(self) -> float:
        return self.state.time


def snapshot_record(snap: Snapshot) -> SnapshotRecord:
    st = snap.state
    try:
        omega = state_omega(st)
    except SplashwaveError:
        omega = np.full(st.n, np.nan)
    phys = st.curve.z if st.curve.physical else None
    if not st.curve.physical:
        try:
            phys = map_curve(st.curve, "from_tilde").z
        except SplashwaveError:
            phys = None
    return SnapshotRecord(snap.step, st, omega, state_phi(st), phys, asdict(snap.record), snap.cause)


def _floats(a) -> list[float]:
    return [float(v) for v in np.asarray(a, dtype=float)]


def snapshot_to_dict(rec: SnapshotRecord) -> dict:
    st = rec.state
    z = st.curve.z
    doc = {
        "schema": SCHEMA,
        "version": VERSION,
        "time": float(st.time),
        "step": int(rec.step),
        "n": st.n,
        "formulation": st.formulation,
        "curve_kind": st.curve.kind,
        "field": _floats(st.field),
        "curve_data": {"re": _floats(st.curve.data.real), "im": _floats(st.curve.data.imag)},
        "tilde": {"x": _floats(z.real), "y": _floats(z.imag)},
        "physical": None,
        "omega": _floats(rec.omega),
        "phi": _floats(rec.phi),
        "diagnostics": {k: float(v) if isinstance(v, float) else v for k, v in rec.diagnostics.items()},
        "cause": rec.cause,
    }
    if rec.physical is not None:
        p = rec.physical
        doc["physical"] = {"x": _floats(p.real), "y": _floats(p.imag)}
    return doc


def snapshot_from_dict(doc: dict) -> SnapshotRecord:
    if doc.get("schema") != SCHEMA:
        raise SchemaMismatch(f"not a snapshot document (schema {doc.get('schema')!r})")
    if doc.get("version") != VERSION:
        raise SchemaMismatch(f"snapshot version {doc.get('version')!r}, expected {VERSION}")
    try:
        n = int(doc["n"])
        x = np.array(doc["curve_data"]["re"], dtype=float)
        y = np.array(doc["curve_data"]["im"], dtype=float)
        curve = PeriodicCurve(x + 1j * y, doc.get("curve_kind", "tilde_closed"))
        state = WaveState(curve, np.array(doc["field"], dtype=float), float(doc["time"]), doc["formulation"])
        phys = None
        if doc.get("physical") is not None:
            p = doc["physical"]
            phys = np.array(p["x"], dtype=float) + 1j * np.array(p["y"], dtype=float)
        omega = np.array(doc["omega"], dtype=float)
        phi = np.array(doc["phi"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaMismatch(f"malformed snapshot: {exc}") from None
    if not (len(x) == len(y) == len(omega) == len(phi) == n):
        raise SchemaMismatch("array lengths disagree with n")
    return SnapshotRecord(int(doc["step"]), state, omega, phi, phys, dict(doc.get("diagnostics", {})),
                          doc.get("cause"))


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def _read_text(path: Path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc


def save_snapshot(path, rec: SnapshotRecord | Snapshot) -> Path:
    if isinstance(rec, Snapshot):
        rec = snapshot_record(rec)
    path = Path(path)
    _write_text(path, json.dumps(snapshot_to_dict(rec)))
    return path


def load_snapshot(path) -> SnapshotRecord:
    try:
        doc = json.loads(_read_text(Path(path)))
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path}: not JSON ({exc})") from None
    return snapshot_from_dict(doc)


# -------------------------------------------------------------- trajectory


class TrajectoryWriter:
    """Streams snapshots of a run into a directory and keeps the manifest current."""

    def __init__(self, out, config: RunConfig, preset: str | None = None):
        self.out = Path(out)
        self.config = config
        self.preset = preset
        self.files: list[str] = []
        self.times: list[float] = []
        self.abort_cause: str | None = None

    def __call__(self, snap: Snapshot) -> None:
        name = f"snapshot_{snap.step:08d}.json"
        save_snapshot(self.out / "snapshots" / name, snap)
        self.files.append(f"snapshots/{name}")
        self.times.append(float(snap.state.time))
        if snap.cause is not None:
            self.abort_cause = snap.cause
        self.write_manifest()

    def write_manifest(self, records: list[StepRecord] | None = None) -> None:
        doc = {
            "schema": MANIFEST_SCHEMA,
            "version": VERSION,
            "config": config_to_dict(self.config),
            "preset": self.preset,
            "snapshots": self.files,
            "times": self.times,
            "abort_cause": self.abort_cause,
        }
        _write_text(self.out / "manifest.json", json.dumps(doc, indent=1))
        if records is not None:
            write_step_records(self.out / "steps.csv", records)


def write_step_records(path, records: list[StepRecord]) -> None:
    names = [f.name for f in fields(StepRecord)]
    rows = [",".join(names)]
    rows += [",".join(repr(getattr(r, k)) for k in names) for r in records]
    _write_text(Path(path), "\n".join(rows) + "\n")


def load_manifest(out) -> dict:
    path = Path(out) / "manifest.json"
    try:
        doc = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path}: not JSON ({exc})") from None
    if doc.get("schema") != MANIFEST_SCHEMA or doc.get("version") != VERSION:
        raise SchemaMismatch(f"{path}: unexpected schema {doc.get('schema')!r} v{doc.get('version')!r}")
    return doc


def load_trajectory(out) -> tuple[dict, list[SnapshotRecord]]:
    doc = load_manifest(out)
    return doc, [load_snapshot(Path(out) / f) for f in doc["snapshots"]]


# ------------------------------------------------------------------ export


CSV_COLUMNS = ("alpha", "z1_tilde", "z2_tilde", "z1_phys", "z2_phys", "omega", "phi")


def export_csv(records: list[SnapshotRecord], out, diagnostics_rows: list[dict] | None = None) -> list[Path]:
    """One CSV per snapshot plus ``diagnostics.csv`` indexed by time."""
    out = Path(out)
    written = []
    for rec in records:
        st = rec.state
        z = st.curve.z
        p = rec.physical if rec.physical is not None else np.full(st.n, np.nan + 0j)
        cols = [st.curve.alpha, z.real, z.imag, p.real, p.imag, rec.omega, rec.phi]
        lines = [",".join(CSV_COLUMNS)]
        lines += [",".join(repr(float(c[i])) for c in cols) for i in range(st.n)]
        path = out / f"snapshot_{rec.step:08d}.csv"
        _write_text(path, "\n".join(lines) + "\n")
        written.append(path)
    rows = diagnostics_rows
    if rows is None:
        rows = [dict(time=r.time, step=r.step, **{k: v for k, v in r.diagnostics.items() if k not in ("step", "time")},
                     cause=r.cause or "") for r in records]
    if rows:
        path = out / "diagnostics.csv"
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=list(rows[0]))
                w.writeheader()
                for r in rows:
                    w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
        except OSError as exc:
            raise IOFailure(f"cannot write {path}: {exc}") from exc
        written.append(path)
    return written


def export_svg(rec: SnapshotRecord, path, frame: str = "tilde", size: int = 640) -> Path:
    """Polyline of the interface in one frame; the tilde frame also marks the five q^l."""
    if frame == "tilde":
        z = rec.state.curve.z
        marks = SINGULAR_POINTS
    elif frame == "physical":
        if rec.physical is None:
            raise ValueError("snapshot has no physical curve")
        z = rec.physical
        marks = np.array([], dtype=complex)
    else:
        raise ValueError(f"unknown frame {frame!r}")
    pts = np.concatenate([z, marks])
    lo = complex(pts.real.min(), pts.imag.min())
    span = max(np.ptp(pts.real), np.ptp(pts.imag), 1e-12) * 1.1
    pad = 0.05 * span

    def xy(w):
        return (size * (w.real - lo.real + pad) / span, size * (1.0 - (w.imag - lo.imag + pad) / span))

    poly = " ".join("%.6f,%.6f" % xy(w) for w in np.append(z, z[0]))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<title>t = {rec.time!r} ({frame})</title>',
        f'<polyline fill="none" stroke="#1f4e9c" stroke-width="1.2" points="{poly}"/>',
    ]
    for l, q in enumerate(marks):
        cx, cy = xy(q)
        parts.append(f'<circle cx="{cx:.6f}" cy="{cy:.6f}" r="3" fill="#b22222"><title>q{l}</title></circle>')
    parts.append("</svg>")
    path = Path(path)
    _write_text(path, "\n".join(parts) + "\n")
    return path
