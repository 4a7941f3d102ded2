"""Batch command-line front-end.

Every analysis is a subcommand writing deterministic CSV/JSON files into
an output directory, plus a ``manifest.json`` recording the parameters,
seed, package version and wall time (the manifest is written even when a
command fails, with the error recorded). Re-running into a non-empty
directory requires ``--overwrite``.

Thread count for flux sweeps and multi-start fits is controlled by the
``COSPHI_THREADS`` environment variable (default 1).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import branch as br
from . import classical as cl
from . import fitting as ft
from . import io as cio
from . import readout as ro
from .hilbert import (
    build_cosphi_two_mode,
    build_transverse_two_mode,
    matched_transverse_coupling,
    normal_modes,
    transmon_eigensystem,
)
from .params import DESK, FULL, CircuitParams, HilbertSpec, load_circuit_params

SCALES = {"desk": DESK, "full": FULL}


def _load_params(args) -> CircuitParams:
    if args.params:
        return load_circuit_params(args.params)
    return CircuitParams()


def _spec(args) -> HilbertSpec:
    spec = SCALES[args.scale]
    if args.scale == "full":
        warnings.warn(
            "full-scale preset (D=20, d_c=500): expect long runtimes and "
            "multi-GB memory use",
            stacklevel=2,
        )
    if getattr(args, "d_c", None):
        spec = spec.replace(d_c=args.d_c)
    if getattr(args, "D", None):
        spec = spec.replace(D=args.D)
    return spec


def _prepare_outdir(args) -> Path:
    out = Path(args.out)
    if out.exists():
        if any(out.iterdir()) and not args.overwrite:
            raise FileExistsError(
                f"output directory {out} is not empty; pass --overwrite to reuse it"
            )
    else:
        out.mkdir(parents=True)
    return out


def _parse_pairs(text: str):
    pairs = []
    for chunk in text.split(";"):
        a, b = chunk.split(",")
        pairs.append((int(a), int(b)))
    return pairs


def _two_mode_table(params, spec, model, flux):
    p = params.replace(flux_ext=flux)
    tr = transmon_eigensystem(p, spec)
    modes = normal_modes(p)
    if model == "cosphi":
        H = build_cosphi_two_mode(p, modes, spec, transmon=tr)
    else:
        H = build_transverse_two_mode(
            p, matched_transverse_coupling(modes), spec,
            omega_c=modes.omega_c_pol, transmon=tr,
        )
    return br.diagonalize_and_label(H, spec.D, spec.d_c, flux_ext=flux)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_branches(args, params, out):
    spec = _spec(args)
    table = _two_mode_table(params, spec, args.model, args.flux)
    crossings = br.find_crossings(table, _parse_pairs(args.pairs))
    cio.branch_csv(table, out / "branches.csv")
    cio.crossings_json(crossings, out / "crossings.json")
    return ["branches.csv", "crossings.json"]


def cmd_mist_map(args, params, out):
    spec = _spec(args)
    flux_grid = np.linspace(args.flux_min, args.flux_max, args.flux_points)
    result = br.mist_map_over_flux(
        params, flux_grid, _parse_pairs(args.pairs), spec=spec, model=args.model
    )
    lines = ["flux,pair,n_c_star,gap_MHz,zero_detuning_GHz"]
    for p in result.pairs:
        for i, flux in enumerate(result.flux_grid):
            lines.append(
                ",".join(
                    [
                        "%.12g" % flux,
                        f"{p[0]}-{p[1]}",
                        "%.12g" % result.n_c_star[p][i],
                        "%.12g" % result.gap_mhz[p][i],
                        "%.12g" % result.zero_detuning[p][i],
                    ]
                )
            )
    (out / "mist_map.csv").write_text("\n".join(lines) + "\n")
    summary = {
        f"{p[0]}-{p[1]}": {"disappearance_flux": result.disappearance_flux[p]}
        for p in result.pairs
    }
    (out / "mist_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n"
    )
    return ["mist_map.csv", "mist_summary.json"]


def cmd_poincare(args, params, out):
    modes = normal_modes(params.replace(flux_ext=args.flux))
    series = cl.harmonic_coefficients(
        args.model, params.replace(flux_ext=args.flux), modes, args.nbar
    )
    section = cl.poincare_section(
        series,
        n_periods=args.periods,
        steps_per_period=args.steps,
        chaos_threshold=args.chaos_threshold,
        include_separatrix_rings=args.rings,
    )
    cio.section_csv(section, out / "section.csv", gnuplot=args.gnuplot)
    cio.separatrix_csv(section.separatrices, out / "separatrices.csv")
    cio.chaos_json(
        section.chaos, out / "chaos.json",
        extra={"model": args.model, "n_bar": args.nbar, "eta": series.eta},
    )
    return ["section.csv", "separatrices.csv", "chaos.json"]


def cmd_chirikov(args, params, out):
    modes = normal_modes(params)
    rows = ["n_bar,margin_cosphi,margin_transverse"]
    nb, mc = cl.chirikov_margin_curve("cosphi", params, modes, args.nbar_max, args.num)
    _, mt = cl.chirikov_margin_curve("transverse", params, modes, args.nbar_max, args.num)
    for n, a, b in zip(nb, mc, mt):
        rows.append(f"%.12g,%.12g,%.12g" % (n, a, b))
    (out / "chirikov.csv").write_text("\n".join(rows) + "\n")
    summary = {
        "min_margin_cosphi": float(mc.min()),
        "min_margin_transverse": float(mt.min()),
        "argmin_nbar_cosphi": float(nb[int(np.argmin(mc))]),
        "argmin_nbar_transverse": float(nb[int(np.argmin(mt))]),
        "n_bar_max": args.nbar_max,
    }
    (out / "chirikov_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n"
    )
    return ["chirikov.csv", "chirikov_summary.json"]


def cmd_stark(args, params, out):
    spec = _spec(args)
    table = _two_mode_table(params, spec, args.model, args.flux)
    outputs = []
    summary = {}
    for pair in _parse_pairs(args.pairs):
        curve = br.ac_stark_curve(table, pair, fit_window=args.window)
        name = f"stark_{pair[0]}{pair[1]}.csv"
        cio.stark_csv(curve, out / name)
        outputs.append(name)
        ladder = table.ladder_frequency(0)
        summary[f"{pair[0]}-{pair[1]}"] = {
            "slope_MHz_per_photon": curve.slope * 1e3,
            "intercept_GHz": curve.intercept,
            "ladder_GHz": ladder,
            "extrapolated_crossing_nbar": curve.extrapolated_crossing(ladder),
        }
    (out / "stark_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n"
    )
    return outputs + ["stark_summary.json"]


def cmd_readout(args, params, out):
    rng = np.random.default_rng(args.seed)
    chi = params.chi_qc_target
    chi_states = [k * chi for k in range(args.n_states)]
    states = ro.pointer_positions(params, chi_states, snr=args.snr)
    cio.iq_csv([s.center for s in states], out / "pointers.csv")

    resolved = [s for s in states if s.k <= 5]
    draws, truth = [], []
    for s in resolved:
        z = s.center + s.sigma * (
            rng.standard_normal(args.shots) + 1j * rng.standard_normal(args.shots)
        ) / np.sqrt(2.0)
        draws.append(z)
        truth.append(np.full(args.shots, s.k))
    z = np.concatenate(draws)
    truth = np.concatenate(truth)
    labels = ro.classify(z, states)
    confusion = {}
    for k in range(len(resolved)):
        sel = truth == k
        adjacent = np.isin(labels[sel], [k - 1, k + 1])
        confusion[str(k)] = {
            "correct": float(np.mean(labels[sel] == k)),
            "adjacent": float(np.mean(adjacent)),
            "outlier": float(np.mean(labels[sel] == ro.OUTLIER)),
        }
    (out / "confusion.json").write_text(
        json.dumps(confusion, indent=2, sort_keys=True) + "\n"
    )

    square = ro.square_pulse(args.pulse_ns, 1.0)
    clear = ro.optimize_clear(params.kappa_c, 1.0, args.pulse_ns)
    resp_square = ro.cavity_response(square, params.kappa_c)
    resp_clear = ro.cavity_response(clear, params.kappa_c)
    cio.envelope_csv(resp_square, out / "response_square.csv")
    cio.envelope_csv(resp_clear, out / "response_clear.csv")
    (out / "pulse_times.json").write_text(
        json.dumps(
            {
                "square_ring_up_ns": resp_square.ring_up_ns,
                "square_ring_down_ns": resp_square.ring_down_ns,
                "clear_ring_up_ns": resp_clear.ring_up_ns,
                "clear_ring_down_ns": resp_clear.ring_down_ns,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    return [
        "pointers.csv", "confusion.json",
        "response_square.csv", "response_clear.csv", "pulse_times.json",
    ]


def cmd_fit(args, params, out):
    flux_grid = np.linspace(-0.2, 0.2, args.flux_points)
    if args.data:
        points = cio.read_points_csv(args.data)
    else:
        points = ft.synthetic_points(
            params, flux_grid, noise=args.noise, seed=args.seed
        )
        cio.write_points_csv(points, out / "points.csv")
    anchors = (
        ("omega_q", 2.0687, 0.005),
        ("omega_c", 7.294, 0.010),
        ("chi_qc", -0.00202, 0.0002),
    ) if args.anchors else ()
    problem = ft.FitProblem(points=tuple(points), anchors=anchors)
    initial = params if args.data else params.replace(
        E_J=params.E_J * (1.0 + args.offset)
    )
    result = ft.fit(problem, initial, n_starts=args.starts, seed=args.seed)
    _, cond = ft.transition_jacobian(result.params, flux_grid[:: max(len(flux_grid) // 7, 1)])
    report = {
        "fitted": result.fitted,
        "cost": result.cost,
        "converged": result.converged,
        "n_evaluations": result.n_evaluations,
        "condition_number": cond,
        "residuals": [float(r) for r in result.residuals],
    }
    (out / "fit_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n"
    )
    outputs = ["fit_report.json"]
    if not args.data:
        outputs.append("points.csv")
    return outputs


def cmd_calib(args, params, out):
    if args.data:
        data = np.loadtxt(args.data, delimiter=",", skiprows=1)
        shifts = [(row[0], row[1]) for row in np.atleast_2d(data)]
    else:
        power = np.linspace(0.0, 10.0, 11)
        shifts = [(p, params.chi_qc_target * p) for p in power]
    cal = ro.photon_calibration(shifts, params.chi_qc_target)
    cio.calibration_json(cal, out / "calibration.json")
    rows = ["power,n_bar"]
    for p, n in zip(cal.power, cal.n_bar):
        rows.append("%.12g,%.12g" % (p, n))
    (out / "calibration.csv").write_text("\n".join(rows) + "\n")
    return ["calibration.json", "calibration.csv"]


# ---------------------------------------------------------------------------
# parser / driver
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cosphi",
        description="cos-phi transmon readout analyses; deterministic file outputs",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--params", help="flat key=value circuit parameter file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--overwrite", action="store_true")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--scale", choices=sorted(SCALES), default="desk")

    p = sub.add_parser("branches", help="branch analysis of one model at one flux")
    common(p)
    p.add_argument("--model", choices=["cosphi", "transverse"], default="cosphi")
    p.add_argument("--flux", type=float, default=0.0)
    p.add_argument("--pairs", default="0,4;1,5")
    p.add_argument("--d-c", dest="d_c", type=int)
    p.add_argument("--D", dest="D", type=int)
    p.set_defaults(func=cmd_branches)

    p = sub.add_parser("mist-map", help="crossing photon numbers over a flux sweep")
    common(p)
    p.add_argument("--model", choices=["cosphi", "transverse"], default="cosphi")
    p.add_argument("--flux-min", type=float, default=-0.2)
    p.add_argument("--flux-max", type=float, default=0.2)
    p.add_argument("--flux-points", type=int, default=21)
    p.add_argument("--pairs", default="0,4;1,5")
    p.add_argument("--d-c", dest="d_c", type=int)
    p.add_argument("--D", dest="D", type=int)
    p.set_defaults(func=cmd_mist_map)

    p = sub.add_parser("poincare", help="stroboscopic section and chaos report")
    common(p)
    p.add_argument("--model", choices=["cosphi", "transverse"], default="cosphi")
    p.add_argument("--nbar", type=float, default=300.0)
    p.add_argument("--flux", type=float, default=0.0)
    p.add_argument("--periods", type=int, default=2000)
    p.add_argument("--steps", type=int, default=1024)
    p.add_argument("--chaos-threshold", type=float, default=cl.CHAOS_THRESHOLD)
    p.add_argument("--rings", action="store_true",
                   help="add rings of initial conditions around each separatrix")
    p.add_argument("--gnuplot", action="store_true",
                   help="write the section as gnuplot-ready blank-line separated blocks")
    p.set_defaults(func=cmd_poincare)

    p = sub.add_parser("chirikov", help="resonance-overlap margins vs drive power")
    common(p)
    p.add_argument("--nbar-max", type=float, default=750.0)
    p.add_argument("--num", type=int, default=7501)
    p.set_defaults(func=cmd_chirikov)

    p = sub.add_parser("stark", help="AC Stark curves of branch transitions")
    common(p)
    p.add_argument("--model", choices=["cosphi", "transverse"], default="cosphi")
    p.add_argument("--flux", type=float, default=0.0)
    p.add_argument("--pairs", default="0,1")
    p.add_argument("--window", type=int, default=20)
    p.add_argument("--d-c", dest="d_c", type=int)
    p.add_argument("--D", dest="D", type=int)
    p.set_defaults(func=cmd_stark)

    p = sub.add_parser("readout", help="pointer states, classification, pulses")
    common(p)
    p.add_argument("--snr", type=float, default=ro.DEFAULT_SNR)
    p.add_argument("--n-states", type=int, default=13)
    p.add_argument("--shots", type=int, default=4000)
    p.add_argument("--pulse-ns", type=float, default=500.0)
    p.set_defaults(func=cmd_readout)

    p = sub.add_parser("fit", help="circuit-parameter fit (synthetic round trip by default)")
    common(p)
    p.add_argument("--data", help="points CSV (flux,transition_id,freq_GHz,band_GHz)")
    p.add_argument("--flux-points", type=int, default=21)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--offset", type=float, default=0.05,
                   help="relative E_J offset of the synthetic-round-trip start")
    p.add_argument("--starts", type=int, default=8)
    p.add_argument("--anchors", action="store_true", default=True)
    p.add_argument("--no-anchors", dest="anchors", action="store_false")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("calib", help="photon-number calibration from Stark shifts")
    common(p)
    p.add_argument("--data", help="CSV with header and columns power,shift_GHz")
    p.set_defaults(func=cmd_calib)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.time()
    manifest = {
        "command": args.command,
        "argv": sys.argv[1:] if argv is None else list(argv),
        "seed": args.seed,
        "version": __version__,
        "outputs": [],
        "error": None,
    }
    try:
        out = _prepare_outdir(args)
    except FileExistsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        params = _load_params(args)
        manifest["params"] = params.to_dict()
        manifest["outputs"] = args.func(args, params, out)
        code = 0
    except Exception as exc:  # noqa: BLE001 - manifest must record any failure
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        print(f"error: {manifest['error']}", file=sys.stderr)
        code = 1
    manifest["wall_time_s"] = round(time.time() - t0, 3)
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    return code


if __name__ == "__main__":
    raise SystemExit(main())
