"""VTK legacy particle snapshots and CSV timing tables."""

from __future__ import annotations

import csv
import os
from pathlib import Path

import numpy as np

from ..core import ParticleSystem

TIMING_HEADER = ["step", "time", "dt", "neighbor_s", "interact_s", "update_s",
                 "max_vel", "max_rho_dev"]

_FMT = "%.17g"


def _rows(arr: np.ndarray) -> str:
    if arr.size == 0:
        return ""
    buf = np.char.mod(_FMT, arr)
    if buf.ndim == 1:
        return "\n".join(buf.tolist()) + "\n"
    return "\n".join(" ".join(r) for r in buf.tolist()) + "\n"


def vtk_text(sys: ParticleSystem, title: str = "wcsph particles") -> str:
    n = sys.count
    parts = [
        "# vtk DataFile Version 3.0\n",
        title.replace("\n", " ")[:255] + "\n",
        "ASCII\n",
        "DATASET POLYDATA\n",
        f"POINTS {n} double\n",
        _rows(np.asarray(sys.position)),
        f"POINT_DATA {n}\n",
        "SCALARS density double 1\nLOOKUP_TABLE default\n",
        _rows(np.asarray(sys.density)),
        "SCALARS pressure double 1\nLOOKUP_TABLE default\n",
        _rows(np.asarray(sys.pressure)),
        "SCALARS kind int 1\nLOOKUP_TABLE default\n",
        "".join(f"{int(k)}\n" for k in np.asarray(sys.kind)),
        "VECTORS velocity double\n",
        _rows(np.asarray(sys.velocity)),
    ]
    return "".join(parts)


def write_vtk_snapshot(sys: ParticleSystem, path, title: str = "wcsph particles") -> Path:
    """Write an ASCII legacy-VTK POLYDATA file with per-point fields."""
    path = Path(path)
    text = vtk_text(sys, title)
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write VTK snapshot {path}: {exc}") from exc
    return path


def read_vtk_points(path) -> dict[str, np.ndarray]:
    """Minimal reader for the files written above: points and point-data arrays."""
    with open(path, encoding="ascii") as fh:
        tokens_by_line = [ln.split() for ln in fh.read().splitlines()]
    if not tokens_by_line or " ".join(tokens_by_line[0][:2]) != "# vtk":
        raise ValueError(f"{path}: not a legacy VTK file")
    out: dict[str, np.ndarray] = {}
    i = 4
    n = 0
    while i < len(tokens_by_line):
        head = tokens_by_line[i]
        if not head:
            i += 1
            continue
        if head[0] == "POINTS":
            n = int(head[1])
            block = tokens_by_line[i + 1: i + 1 + n]
            out["points"] = np.array(block, dtype=np.float64).reshape(n, 3)
            i += 1 + n
        elif head[0] == "POINT_DATA":
            i += 1
        elif head[0] == "SCALARS":
            block = tokens_by_line[i + 2: i + 2 + n]
            out[head[1]] = np.array([b[0] for b in block], dtype=np.float64)
            i += 2 + n
        elif head[0] == "VECTORS":
            block = tokens_by_line[i + 1: i + 1 + n]
            out[head[1]] = np.array(block, dtype=np.float64).reshape(n, 3)
            i += 1 + n
        else:
            raise ValueError(f"{path}: unexpected line {' '.join(head)!r}")
    return out


def write_timings_csv(stats, path) -> Path:
    """One row per step with the fixed timing header."""
    stats = list(stats)
    if not stats:
        raise ValueError("no step statistics to write")
    path = Path(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TIMING_HEADER)
            for s in stats:
                w.writerow([s.step, repr(s.time), repr(s.dt), repr(s.neighbor_s),
                            repr(s.interact_s), repr(s.update_s), repr(s.max_vel),
                            repr(s.max_rho_dev)])
    except OSError as exc:
        raise OSError(f"cannot write timings {path}: {exc}") from exc
    return path


class VTKSnapshotSink:
    """Output sink writing ``snapshot_000000.vtk``, ``snapshot_000001.vtk``, ..."""

    def __init__(self, output_dir, prefix: str = "snapshot"):
        self.output_dir = Path(output_dir)
        self.prefix = prefix
        self.paths: list[Path] = []
        os.makedirs(self.output_dir, exist_ok=True)

    def __call__(self, stats, snapshot: ParticleSystem) -> None:
        path = self.output_dir / f"{self.prefix}_{len(self.paths):06d}.vtk"
        write_vtk_snapshot(snapshot, path, title=f"step {stats.step} time {stats.time!r}")
        self.paths.append(path)
