"""Delimited text files for signals, profiles, tables and flat configs.

Tables are comma separated with a single header line. Lines starting with
``#`` are comments; comments of the form ``# key = value`` carry metadata
(grid spacing, wavelength) so that write -> read -> write is exact.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .errors import DimensionError, ParseError
from .grid import AltitudeGrid, ExtinctionProfile, LidarSignal

__all__ = [
    "read_table",
    "write_table",
    "parse_signal_file",
    "write_signal_file",
    "parse_profile_file",
    "write_profile_file",
    "read_config",
    "write_config",
    "grid_from_altitudes",
]

UNIFORM_RTOL = 1e-6


def _fmt(value) -> str:
    if isinstance(value, (str, bool)) or value is None:
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_table(path, columns, rows, meta: dict | None = None, comments=()) -> Path:
    """Write ``rows`` (2-d array or list of sequences) under ``columns``."""
    path = Path(path)
    lines = [f"# {c}" for c in comments]
    for key, value in (meta or {}).items():
        lines.append(f"# {key} = {_fmt(value)}")
    lines.append(",".join(columns))
    for row in rows:
        if len(row) != len(columns):
            raise DimensionError(f"row has {len(row)} fields, header has {len(columns)}")
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_table(path):
    """Read a table written by :func:`write_table`.

    Returns ``(columns, data, meta, line_numbers)``; ``data`` is a float
    array with one row per data line and ``line_numbers`` gives the file
    line (1-based) of each row.
    """
    path = Path(path)
    columns = None
    meta = {}
    rows, line_numbers = [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].partition("=")
                if sep:
                    meta[key.strip()] = value.strip()
                continue
            fields = [f.strip() for f in line.split(",")]
            if columns is None:
                columns = fields
                continue
            if len(fields) != len(columns):
                raise ParseError(
                    f"{path}:{lineno}: expected {len(columns)} fields, found {len(fields)}"
                )
            try:
                rows.append([float(f) for f in fields])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric field in {line!r}") from None
            line_numbers.append(lineno)
    if columns is None:
        raise ParseError(f"{path}: no header line")
    data = np.array(rows, dtype=float).reshape(len(rows), len(columns))
    return columns, data, meta, line_numbers


def grid_from_altitudes(z, line_numbers=None, meta=None, quadrature=None) -> AltitudeGrid:
    """Uniform grid matching altitudes ``z``, or a ParseError saying why not."""
    z = np.asarray(z, dtype=float)
    lines = line_numbers or list(range(1, z.size + 1))
    if z.size < 2:
        raise ParseError("a profile needs at least 2 altitudes")
    dzs = np.diff(z)
    for i, d in enumerate(dzs):
        if not d > 0:
            raise ParseError(
                f"altitude not increasing at data row {i + 2} (line {lines[i + 1]}): "
                f"z={z[i + 1]!r} after z={z[i]!r}"
            )
    meta = meta or {}
    if "z_min" in meta and "dz" in meta:
        z_min, dz = float(meta["z_min"]), float(meta["dz"])
    else:
        z_min, dz = float(z[0]), float((z[-1] - z[0]) / (z.size - 1))
    bad = np.flatnonzero(np.abs(dzs - dz) > UNIFORM_RTOL * dz)
    if bad.size:
        i = int(bad[0])
        raise ParseError(
            f"non-uniform grid: interval between data rows {i + 1} and {i + 2} "
            f"(lines {lines[i]}-{lines[i + 1]}, z={z[i]!r}..{z[i + 1]!r}) is "
            f"{dzs[i]!r}, expected {dz!r}"
        )
    if abs(z[0] - z_min) > UNIFORM_RTOL * dz:
        raise ParseError(f"first altitude {z[0]!r} disagrees with z_min={z_min!r}")
    quad = quadrature or meta.get("quadrature", "rectangle")
    return AltitudeGrid(z_min, dz, z.size, quad)


def _column(columns, data, name, path):
    try:
        return data[:, columns.index(name)]
    except ValueError:
        raise ParseError(f"{path}: missing column {name!r} (have {columns})") from None


def _grid_meta(grid: AltitudeGrid) -> dict:
    return {"z_min": grid.z_min, "dz": grid.dz, "quadrature": grid.quadrature}


def parse_signal_file(path, wavelength: float | None = None) -> LidarSignal:
    """Read a ``z_m,P,sigma`` file into a LidarSignal."""
    columns, data, meta, lines = read_table(path)
    z = _column(columns, data, "z_m", path)
    P = _column(columns, data, "P", path)
    sigma = _column(columns, data, "sigma", path)
    grid = grid_from_altitudes(z, lines, meta)
    if wavelength is None:
        wavelength = float(meta.get("wavelength", 355.0))
    return LidarSignal(grid, P, sigma, wavelength)


def write_signal_file(path, signal: LidarSignal) -> Path:
    meta = _grid_meta(signal.grid) | {"wavelength": signal.wavelength}
    rows = np.column_stack([signal.grid.z, signal.P, signal.sigma])
    return write_table(path, ["z_m", "P", "sigma"], rows, meta)


def parse_profile_file(path) -> ExtinctionProfile:
    """Read a ``z_m,alpha[,band_low,band_high]`` file."""
    columns, data, meta, lines = read_table(path)
    z = _column(columns, data, "z_m", path)
    alpha = _column(columns, data, "alpha", path)
    grid = grid_from_altitudes(z, lines, meta)
    low = data[:, columns.index("band_low")] if "band_low" in columns else None
    high = data[:, columns.index("band_high")] if "band_high" in columns else None
    return ExtinctionProfile(grid, alpha, low, high)


def write_profile_file(path, profile: ExtinctionProfile) -> Path:
    cols = ["z_m", "alpha"]
    arrays = [profile.grid.z, profile.alpha]
    if profile.band_low is not None and profile.band_high is not None:
        cols += ["band_low", "band_high"]
        arrays += [profile.band_low, profile.band_high]
    return write_table(path, cols, np.column_stack(arrays), _grid_meta(profile.grid))


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment. Values stay strings."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise ParseError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            out[key.strip()] = value.strip()
    return out


def write_config(path, values: dict) -> Path:
    path = Path(path)
    lines = [f"{k} = {_fmt(v)}" for k, v in values.items()]
    path.write_text("\n".join(lines) + "\n")
    return path


def ensure_dir(path) -> Path:
    path = Path(path)
    os.makedirs(path, exist_ok=True)
    return path
