"""Binary field snapshots and CSV reports."""

from __future__ import annotations

import csv
import math
import os
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .spectral import GridSpec, RealField

MAGIC = b"KGH1"
HEADER = struct.Struct("<4sIdddB")
POSITION, VELOCITY = 0, 1

PROBE_COLUMNS = ("probe", "j", "q", "r", "theta", "h", "T", "dt", "seed", "value")
EXPERIMENT_COLUMNS = ("experiment", "gamma", "s", "J", "dt", "T", "quantity", "value", "seed")
INDEX_COLUMNS = ("step", "t", "E", "H", "quartic")


class SnapshotError(ValueError):
    pass


def write_snapshot(path, f: RealField, t: float = 0.0, kind: int = POSITION) -> Path:
    """Header then ``n^3`` little-endian doubles with x varying fastest."""
    if kind not in (POSITION, VELOCITY):
        raise ValueError("kind must be 0 (position) or 1 (velocity)")
    g = f.grid
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, g.n, g.box_length, g.gamma, float(t), kind))
        fh.write(np.asarray(f.values, dtype="<f8").ravel(order="F").tobytes())
    return path


def read_snapshot(path) -> tuple[RealField, float, int]:
    data = Path(path).read_bytes()
    if len(data) < HEADER.size:
        raise SnapshotError(f"{path}: truncated header")
    magic, n, L, gamma, t, kind = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError(f"{path}: bad magic {magic!r}")
    if kind not in (POSITION, VELOCITY):
        raise SnapshotError(f"{path}: unknown kind {kind}")
    body = data[HEADER.size:]
    if len(body) != 8 * n ** 3:
        raise SnapshotError(f"{path}: expected {8 * n ** 3} payload bytes, found {len(body)}")
    grid = GridSpec(n, L, gamma)
    values = np.frombuffer(body, dtype="<f8").reshape(grid.shape, order="F")
    return RealField(grid, values.astype(float)), t, kind


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(float(v))
    return str(v)


def write_rows(path, columns: Sequence[str], rows: Iterable[dict]) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            unknown = set(row) - set(columns)
            if unknown:
                raise ValueError(f"unexpected columns {sorted(unknown)}")
            w.writerow([_fmt(row.get(c)) for c in columns])
    return path


def read_rows(path) -> tuple[list[str], list[dict]]:
    """Parse a report CSV; rows with a wrong field count are rejected."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return [], []
        if not header or any(not h.strip() for h in header):
            raise ValueError(f"{path}: malformed header")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            rows.append(dict(zip(header, rec)))
    return header, rows


def probe_report_rows(report, param_names: Sequence[str] | None = None) -> tuple[list[str], list[dict]]:
    """One row per measured ratio: probe, params..., ratio, max, min, maxmin_ratio, seed."""
    names = list(param_names if param_names is not None else report.params)
    cols = ["probe", *names, "ratio", "max", "min", "maxmin_ratio", "seed"]
    rows = []
    for r in report.ratios:
        row = {"probe": report.probe, "ratio": r, "max": report.max, "min": report.min,
               "maxmin_ratio": report.maxmin_ratio, "seed": report.seed}
        row.update({k: report.params.get(k) for k in names})
        rows.append(row)
    return cols, rows


def write_probe_report(path, report, param_names=None) -> Path:
    cols, rows = probe_report_rows(report, param_names)
    return write_rows(path, cols, rows)


def export_trajectory(directory, traj, gamma: float | None = None, every: int = 1) -> Path:
    """Snapshot pairs for every ``every``-th sample plus ``index.csv``."""
    from .dynamics import energy_history

    directory = Path(directory)
    os.makedirs(directory, exist_ok=True)
    hist = energy_history(traj, gamma)
    rows = []
    for k in range(0, len(traj), every):
        pair = traj[k]
        write_snapshot(directory / f"step{k:06d}_pos.kgh", pair.position, pair.time_stamp, POSITION)
        write_snapshot(directory / f"step{k:06d}_vel.kgh", pair.velocity, pair.time_stamp, VELOCITY)
        e = hist[k]
        rows.append({"step": k, "t": pair.time_stamp, "E": e.E, "H": e.H, "quartic": e.quartic})
    return write_rows(directory / "index.csv", INDEX_COLUMNS, rows)
