"""Offline rendering of qflow snapshot and energy CSVs."""

from .frames import EnergyTrace, ParseError, SnapshotFrame, load_energy, load_snapshot
from .render import DEFAULT_STRIDE, DEFAULT_VMAX, render_energy, render_snapshot

__all__ = [
    "EnergyTrace",
    "ParseError",
    "SnapshotFrame",
    "load_energy",
    "load_snapshot",
    "DEFAULT_STRIDE",
    "DEFAULT_VMAX",
    "render_energy",
    "render_snapshot",
]
