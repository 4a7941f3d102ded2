"""File formats: binary operator dumps and the CSV/JSON export surfaces.

The binary matrix dump is row-major complex128, little-endian, with a
16-byte header of two little-endian int64 (rows, cols), for cross-checks
against alternate implementations. All text outputs use fixed formats so
identical inputs produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .hilbert import HermitianOperator
from .params import ParameterError

__all__ = [
    "save_operator",
    "load_operator",
    "branch_csv",
    "crossings_json",
    "stark_csv",
    "section_csv",
    "separatrix_csv",
    "chaos_json",
    "iq_csv",
    "envelope_csv",
    "calibration_json",
    "read_points_csv",
    "write_points_csv",
]

_FMT = "%.12g"


def _fmt(x) -> str:
    return _FMT % float(x)


def save_operator(op, path) -> None:
    """Write a matrix as little-endian complex128 with an int64 dims header."""
    data = op.data if isinstance(op, HermitianOperator) else np.asarray(op)
    if data.ndim != 2:
        raise ParameterError("operator dump expects a 2-D matrix")
    header = np.asarray(data.shape, dtype="<i8")
    body = np.ascontiguousarray(data, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(body.tobytes())


def load_operator(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise ParameterError(f"{path}: too short for a matrix dump header")
    rows, cols = np.frombuffer(raw[:16], dtype="<i8")
    expected = 16 + rows * cols * 16
    if len(raw) != expected:
        raise ParameterError(
            f"{path}: expected {expected} bytes for a {rows}x{cols} matrix, got {len(raw)}"
        )
    return np.frombuffer(raw[16:], dtype="<c16").reshape(rows, cols).copy()


def _write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# branch exports
# ---------------------------------------------------------------------------

def branch_csv(table, path) -> None:
    """Columns: flux, j, n_c, energy_GHz, nt, confidence."""
    lines = ["flux,j,n_c,energy_GHz,nt,confidence"]
    for j in range(table.D):
        for n in range(table.d_c):
            if table.state_index[j, n] < 0:
                continue
            lines.append(
                ",".join(
                    [
                        _fmt(table.flux_ext),
                        str(j),
                        str(n),
                        _fmt(table.energy[j, n]),
                        _fmt(table.nt[j, n]),
                        _fmt(table.label_confidence[j, n]),
                    ]
                )
            )
    Path(path).write_text("\n".join(lines) + "\n")


def crossings_json(events, path) -> None:
    records = [
        {
            "pair": list(e.branch_pair),
            "flux": e.flux_ext,
            "n_c_star": e.n_c_star,
            "gap_MHz": e.gap_mhz,
            "kind": e.kind,
            "delta_photons": e.delta_photons,
        }
        for e in events
    ]
    _write_json(records, path)


def stark_csv(curve, path) -> None:
    lines = ["n_c,omega_GHz"]
    for n, w in zip(curve.n, curve.omega):
        lines.append(f"{int(n)},{_fmt(w)}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# classical exports
# ---------------------------------------------------------------------------

def section_csv(section, path, gnuplot: bool = False) -> None:
    """Columns: trajectory_id, period_index, phi, n.

    With ``gnuplot=True`` the file is whitespace-separated with a blank
    line between trajectories, directly plottable with ``plot ... w dots``.
    """
    n_periods, n_traj = section.phi.shape
    if gnuplot:
        chunks = ["# phi n (blank-line separated trajectories)"]
        for k in range(n_traj):
            rows = [
                f"{_fmt(section.phi[p, k])} {_fmt(section.n[p, k])}"
                for p in range(n_periods)
            ]
            chunks.append("\n".join(rows))
        Path(path).write_text("\n\n".join(chunks) + "\n")
        return
    lines = ["trajectory_id,period_index,phi,n"]
    for k in range(n_traj):
        for p in range(n_periods):
            lines.append(f"{k},{p},{_fmt(section.phi[p, k])},{_fmt(section.n[p, k])}")
    Path(path).write_text("\n".join(lines) + "\n")


def separatrix_csv(separatrices, path) -> None:
    lines = ["m,psi,n_plus,n_minus"]
    for s in separatrices:
        for psi, np_, nm in zip(s.psi, s.n_plus, s.n_minus):
            lines.append(f"{s.m},{_fmt(psi)},{_fmt(np_)},{_fmt(nm)}")
    Path(path).write_text("\n".join(lines) + "\n")


def chaos_json(report, path, extra: dict | None = None) -> None:
    obj = {
        "threshold_per_period": report.threshold,
        "chaotic_fraction": report.chaotic_fraction,
        "lambdas_per_ns": [float(x) for x in report.lambdas],
        "lambda_per_period": [float(x) for x in report.lambda_per_period],
        "chaotic": [bool(x) for x in report.chaotic],
    }
    if extra:
        obj.update(extra)
    _write_json(obj, path)


# ---------------------------------------------------------------------------
# readout exports
# ---------------------------------------------------------------------------

def iq_csv(points, path) -> None:
    """Columns: I, Q. Accepts complex values or (I, Q) pairs."""
    pts = np.asarray(points)
    if np.iscomplexobj(pts):
        rows = [(z.real, z.imag) for z in pts.ravel()]
    else:
        rows = [tuple(map(float, p)) for p in np.atleast_2d(pts)]
    lines = ["I,Q"] + [f"{_fmt(i)},{_fmt(q)}" for i, q in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def envelope_csv(response, path) -> None:
    """Columns: t_ns, re, im of the cavity field."""
    lines = ["t_ns,re,im"]
    for t, a in zip(response.t, response.alpha):
        lines.append(f"{_fmt(t)},{_fmt(a.real)},{_fmt(a.imag)}")
    Path(path).write_text("\n".join(lines) + "\n")


def calibration_json(cal, path) -> None:
    _write_json(
        {
            "slope_photons_per_power_unit": cal.slope,
            "intercept": cal.intercept,
            "p_range": list(cal.p_range),
        },
        path,
    )


# ---------------------------------------------------------------------------
# fitting exchange format
# ---------------------------------------------------------------------------

def write_points_csv(points, path) -> None:
    """Columns: flux, transition_id, freq_GHz, band_GHz."""
    lines = ["flux,transition_id,freq_GHz,band_GHz"]
    for p in points:
        lines.append(
            f"{_fmt(p.flux_ext)},{p.transition_id},{_fmt(p.freq)},{_fmt(p.band_weight)}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_points_csv(path):
    from .fitting import DigitizedPoint

    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0].split(",")[:2] != ["flux", "transition_id"]:
        raise ParameterError(f"{path}: expected header 'flux,transition_id,freq_GHz,band_GHz'")
    points = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != 4:
            raise ParameterError(f"{path}:{lineno}: expected 4 columns")
        points.append(
            DigitizedPoint(
                flux_ext=float(cells[0]),
                transition_id=cells[1].strip(),
                freq=float(cells[2]),
                band_weight=float(cells[3]),
            )
        )
    return tuple(points)
