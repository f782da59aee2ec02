"""Parsers for the solver's CSV outputs.

Two schemas are consumed, both produced by the qflow CLI:

snapshot: node_id, x, y, q1, q2, lambda_plus, dir_x, dir_y, boundary_flag
energy:   step, time, f1..f6, total, diss_residual, fp_iters, update_norm

Malformed files raise ParseError naming the file and 1-based row number.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SNAPSHOT_COLUMNS = ["node_id", "x", "y", "q1", "q2", "lambda_plus",
                    "dir_x", "dir_y", "boundary_flag"]


class ParseError(ValueError):
    """A CSV row or header that does not match the expected schema."""


@dataclass
class SnapshotFrame:
    """One nodal field dump: positions, scalar order parameter, directors."""

    label: str
    x: np.ndarray
    y: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    lambda_plus: np.ndarray
    dir_x: np.ndarray
    dir_y: np.ndarray
    boundary_flag: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.x.size


@dataclass
class EnergyTrace:
    """Total energy vs time for one run."""

    label: str
    time: np.ndarray
    total: np.ndarray


def _time_label(path: Path) -> str:
    """Human label for a snapshot, from the _t<value> filename suffix."""
    m = re.search(r"_t([0-9][0-9.eE+-]*)$", path.stem)
    return f"t = {m.group(1)}" if m else path.stem


def load_snapshot(path) -> SnapshotFrame:
    """Parse one snapshot CSV; directors must be unit where order is nonzero."""
    p = Path(path)
    with open(p, newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ParseError(f"{p}:1: empty snapshot file")
    if rows[0] != SNAPSHOT_COLUMNS:
        raise ParseError(f"{p}:1: bad snapshot header {rows[0]!r}, "
                         f"expected {SNAPSHOT_COLUMNS}")
    data = np.empty((len(rows) - 1, 8))
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != 9:
            raise ParseError(f"{p}:{n}: expected 9 fields, got {len(row)}")
        try:
            data[n - 2] = [float(v) for v in row[1:]]
        except ValueError:
            raise ParseError(f"{p}:{n}: non-numeric field in {row!r}") from None
        dx, dy, lam = data[n - 2, 5], data[n - 2, 6], data[n - 2, 4]
        if lam > 1e-12 and abs(math.hypot(dx, dy) - 1.0) > 1e-6:
            raise ParseError(f"{p}:{n}: director ({dx}, {dy}) is not a unit vector")
    if data.shape[0] < 3:
        raise ParseError(f"{p}: snapshot needs at least 3 nodes, got {data.shape[0]}")
    return SnapshotFrame(label=_time_label(p), x=data[:, 0], y=data[:, 1],
                         q1=data[:, 2], q2=data[:, 3], lambda_plus=data[:, 4],
                         dir_x=data[:, 5], dir_y=data[:, 6],
                         boundary_flag=data[:, 7].astype(int))


def load_energy(path) -> EnergyTrace:
    """Parse one energy CSV into a (time, total) trace."""
    p = Path(path)
    with open(p, newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ParseError(f"{p}:1: empty energy file")
    header = rows[0]
    try:
        ti = header.index("time")
        ei = header.index("total")
    except ValueError:
        raise ParseError(f"{p}:1: header must contain 'time' and 'total' "
                         f"columns, got {header!r}") from None
    times, totals = [], []
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(f"{p}:{n}: expected {len(header)} fields, got {len(row)}")
        try:
            times.append(float(row[ti]))
            totals.append(float(row[ei]))
        except ValueError:
            raise ParseError(f"{p}:{n}: non-numeric time/total in {row!r}") from None
    if not times:
        raise ParseError(f"{p}: energy file has no data rows")
    return EnergyTrace(label=p.stem, time=np.array(times), total=np.array(totals))
