"""Writers for diagnostics CSV, snapshots and the config echo.

Numbers are written with ``repr`` (shortest round-trip decimal), so output
from identical single-threaded runs is byte-identical.  Every file starts
with a comment header carrying the config hash.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .diagnostics import DiagnosticsRow
from .flow import GraphState, embed, geom_fields

__all__ = ["num", "write_echo", "DiagnosticsWriter", "write_snapshot", "write_csv_table"]


def num(x) -> str:
    x = float(x)
    return repr(x) if x == x else "nan"


def _header(config_hash: str) -> str:
    return f"# config_sha256={config_hash}\n"


def write_echo(path, echo_text: str, config_hash: str) -> Path:
    path = Path(path)
    path.write_text(_header(config_hash) + echo_text, encoding="utf-8")
    return path


def write_csv_table(path, columns, rows, config_hash: str) -> Path:
    """Plain CSV with hash header; floats via :func:`num`, other values via ``str``."""
    path = Path(path)
    lines = [_header(config_hash).rstrip("\n"), ",".join(columns)]
    for row in rows:
        lines.append(",".join(num(v) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


class DiagnosticsWriter:
    """Streams :class:`DiagnosticsRow` records to ``diagnostics.csv``."""

    def __init__(self, path, config_hash: str):
        self.path = Path(path)
        self.config_hash = config_hash
        self._fh = None
        self._columns = None

    def write(self, row: DiagnosticsRow):
        rec = row.as_record()
        if self._fh is None:
            self._columns = list(rec)
            self._fh = open(self.path, "w", encoding="utf-8", newline="\n")
            self._fh.write(_header(self.config_hash))
            self._fh.write(",".join(self._columns) + "\n")
        self._fh.write(",".join(num(rec[c]) for c in self._columns) + "\n")

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_snapshot(directory, index: int, state: GraphState, config_hash: str) -> Path:
    """``snap_NNNN.vtk`` (2D, structured grid) or ``snap_NNNN.csv`` (1D)."""
    directory = Path(directory)
    gf = geom_fields(state)
    X = embed(state)
    if state.grid.dim == 1:
        path = directory / f"snap_{index:04d}.csv"
        z = np.zeros_like(state.u)
        lines = [_header(config_hash).rstrip("\n"), f"# t={num(state.t)}", "r,u,vtilde,H,x,y,z"]
        for i in range(state.u.size):
            vals = (state.grid.r[i], state.u[i], gf.vtilde[i], gf.H[i], X[i, 0], X[i, 1], z[i])
            lines.append(",".join(num(v) for v in vals))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    path = directory / f"snap_{index:04d}.vtk"
    ns, nphi = state.grid.shape
    # close the periodic direction by repeating the first angular column
    cols = np.r_[np.arange(nphi), 0]

    def periodic(a):
        return a[:, cols]

    pts = periodic(X).reshape(-1, 3)
    lines = [
        "# vtk DataFile Version 3.0",
        f"torusflow t={num(state.t)} config_sha256={config_hash}",
        "ASCII",
        "DATASET STRUCTURED_GRID",
        f"DIMENSIONS {nphi + 1} {ns} 1",
        f"POINTS {pts.shape[0]} double",
    ]
    lines += [" ".join(num(c) for c in p) for p in pts]
    lines.append(f"POINT_DATA {pts.shape[0]}")
    for name, field in (("u", state.u), ("vtilde", gf.vtilde), ("H", gf.H)):
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [num(v) for v in periodic(field).ravel()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
