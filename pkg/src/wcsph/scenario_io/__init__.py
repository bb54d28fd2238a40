"""Scenario construction, config files and on-disk output."""

from .config import ConfigError, load_config, parse_config, serialize_config
from .dambreak import DamBreakSpec, build_dam_break, lattice_count, particle_count
from .output import (TIMING_HEADER, VTKSnapshotSink, read_vtk_points, write_timings_csv,
                     write_vtk_snapshot)

__all__ = [
    "ConfigError", "load_config", "parse_config", "serialize_config",
    "DamBreakSpec", "build_dam_break", "lattice_count", "particle_count",
    "TIMING_HEADER", "VTKSnapshotSink", "read_vtk_points", "write_timings_csv",
    "write_vtk_snapshot",
]
