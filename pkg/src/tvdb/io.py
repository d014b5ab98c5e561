"""Binary field dumps, CSV writers, run manifests and gnuplot companions."""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .grid import GridSpec, StateVector

MAGIC = b"TVDB"
KIND_BULK, KIND_BOUNDARY, KIND_STATE = 1, 2, 3
_HEADER = struct.Struct("<4sIII")


class FormatError(ValueError):
    """A file does not follow the binary dump layout."""


def write_field(path, array: np.ndarray, nx: int, ny: int, kind: int) -> None:
    data = np.ascontiguousarray(array, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, nx, ny, kind))
        fh.write(data.tobytes(order="C"))


def write_state(path, state: StateVector) -> None:
    """Dump ``state`` as bulk rows followed by the bottom and the top boundary fields."""
    g = state.grid
    write_field(path, state.flat(), g.nx, g.ny, KIND_STATE)


def read_field(path):
    """Return ``(kind, nx, ny, payload)`` with the payload shaped by kind."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, nx, ny, kind = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    sizes = {KIND_BULK: nx * (ny + 1), KIND_BOUNDARY: nx, KIND_STATE: nx * (ny + 3)}
    if kind not in sizes:
        raise FormatError(f"{path}: unknown kind tag {kind}")
    if data.size != sizes[kind]:
        raise FormatError(f"{path}: expected {sizes[kind]} values, found {data.size}")
    if kind == KIND_BULK:
        data = data.reshape(nx, ny + 1)
    return kind, nx, ny, data.astype(float)


def read_state(path, lx: float = 1.0, ly: float = 1.0) -> StateVector:
    kind, nx, ny, data = read_field(path)
    if kind != KIND_STATE:
        raise FormatError(f"{path}: kind tag {kind} is not a state dump")
    return StateVector.from_flat(GridSpec(nx, ny, lx, ly), data)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


ENERGY_HEADER = ("m", "t", "tv", "kappa_term", "jump", "surface", "total", "step_residual")


def energy_rows(traj):
    for m, (t, b, res) in enumerate(zip(traj.times, traj.energies, traj.residuals)):
        yield (m, t, b.tv_or_fdelta, b.kappa_dirichlet, b.jump, b.surface_dirichlet, b.total, res)


def write_manifest(path, config_echo: dict, version: str, wall_time: float, **extra) -> None:
    body = {"config": config_echo, "version": version, "wall_time_s": wall_time, **extra}
    Path(path).write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")


def write_gnuplot(path, csv_name: str, x_col: str, y_cols, header, logscale: bool = False) -> None:
    """Emit a gnuplot script plotting ``y_cols`` of ``csv_name`` against ``x_col``."""
    idx = {name: i + 1 for i, name in enumerate(header)}
    lines = ["set datafile separator ','", "set key autotitle columnhead",
             f"set xlabel '{x_col}'"]
    if logscale:
        lines.append("set logscale y")
    plots = [f"'{csv_name}' using {idx[x_col]}:{idx[c]} with linespoints title '{c}'"
             for c in y_cols]
    lines.append("plot " + ", \\\n     ".join(plots))
    Path(path).write_text("\n".join(lines) + "\n")
