"""Branch analysis of the undriven coupled models.

Dressed eigenstates are labeled |j, n_c> along the cavity photon ladder:
the n_c = 0 rung is assigned by maximal overlap with the bare product
states, and each subsequent rung by the largest normalized matrix element
|<psi| c^dag |j, n_c>|. Avoided and exact crossings between branches are
then located from local minima of the inter-branch gap, which is the
spectral signature of measurement-induced state transitions.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from .hilbert import (
    HermitianOperator,
    build_cosphi_two_mode,
    build_transverse_two_mode,
    matched_transverse_coupling,
    normal_modes,
    transmon_eigensystem,
)
from .params import CircuitParams, HilbertSpec, ParameterError

__all__ = [
    "BranchTable",
    "CrossingEvent",
    "StarkCurve",
    "MistMap",
    "diagonalize_and_label",
    "nt_expectation",
    "find_crossings",
    "ac_stark_curve",
    "mist_map_over_flux",
]

#: branches are cut where the ladder confidence falls below this
LADDER_BREAK_CONFIDENCE = 0.1
#: two candidates closer than this in confidence log an ambiguity event
AMBIGUITY_CONFIDENCE = 1e-3
#: fraction of the Fock space excluded at the top of the ladder
USABLE_MARGIN = 0.1
#: default exact-vs-avoided classification gap in MHz (50 kHz)
EXACT_GAP_MHZ = 0.05
#: default detection window: gap minima above this are not reported (MHz)
DETECTION_WINDOW_MHZ = 100.0


@dataclass
class BranchTable:
    """Labeled dressed states over the photon ladder.

    ``energy``, ``nt`` and ``label_confidence`` are (D, d_c) arrays with
    NaN past a branch truncation; ``state_index`` maps a label (j, n_c) to
    the eigenstate column, -1 where unassigned.
    """

    D: int
    d_c: int
    d_c_usable: int
    energy: np.ndarray
    nt: np.ndarray
    label_confidence: np.ndarray
    state_index: np.ndarray
    eigenvalues: np.ndarray
    flux_ext: float = 0.0
    events: list = field(default_factory=list)

    def ladder_frequency(self, j: int = 0) -> float:
        """Photon ladder spacing E(j,1) - E(j,0) in GHz."""
        return float(self.energy[j, 1] - self.energy[j, 0])

    def transition(self, j: int, j2: int, n: int = 0) -> float:
        return float(self.energy[j2, n] - self.energy[j, n])


@dataclass(frozen=True)
class CrossingEvent:
    """A located inter-branch crossing."""

    branch_pair: tuple
    n_c_star: float
    gap_mhz: float
    kind: str  # "exact" | "avoided"
    flux_ext: float = 0.0
    delta_photons: int = 1


@dataclass(frozen=True)
class StarkCurve:
    """Transition frequency versus photon number with a linear low-n fit."""

    j_pair: tuple
    n: np.ndarray
    omega: np.ndarray
    slope: float
    intercept: float
    window: tuple

    def extrapolated_crossing(self, omega_ref: float) -> float:
        """Photon number where the linear fit meets ``omega_ref``."""
        if self.slope == 0.0:
            return float("inf")
        return (omega_ref - self.intercept) / self.slope


def nt_expectation(table_or_D, eigvecs: np.ndarray, d_c: int | None = None):
    """Bare transmon occupation <N_t> of eigenvectors in the product basis.

    Called with a :class:`BranchTable` and the eigenvector matrix, returns
    the (D, d_c) matrix of <N_t> per labeled state; called with integers
    ``(D, eigvecs, d_c)``, returns <N_t> per eigenvector column.
    """
    if isinstance(table_or_D, BranchTable):
        table = table_or_D
        per_state = nt_expectation(table.D, eigvecs, table.d_c)
        out = np.full((table.D, table.d_c), np.nan)
        mask = table.state_index >= 0
        out[mask] = per_state[table.state_index[mask]]
        return out
    D = int(table_or_D)
    if d_c is None:
        d_c = eigvecs.shape[0] // D
    jgrid = np.repeat(np.arange(D), d_c).astype(float)
    return jgrid @ (np.abs(eigvecs) ** 2)


def _apply_cdag(eigvecs: np.ndarray, D: int, d_c: int) -> np.ndarray:
    """(I_D (x) c^dag) @ eigvecs without forming the Kronecker product."""
    V3 = eigvecs.reshape(D, d_c, eigvecs.shape[1])
    out = np.zeros_like(V3)
    root = np.sqrt(np.arange(1.0, d_c))
    out[:, 1:, :] = root[None, :, None] * V3[:, :-1, :]
    return out.reshape(D * d_c, eigvecs.shape[1])


def diagonalize_and_label(
    H: HermitianOperator | np.ndarray,
    D: int,
    d_c: int,
    flux_ext: float = 0.0,
    usable_margin: float = USABLE_MARGIN,
) -> BranchTable:
    """Diagonalize an undriven two-mode Hamiltonian and ladder-label it.

    Branch j starts from the eigenstate with maximal overlap with the bare
    |j, 0>; rung n_c + 1 is the unassigned eigenstate maximizing the
    normalized |<psi| c^dag |j, n_c>|. Rungs within one drop are assigned
    greedily in descending confidence, with collisions resolved by the
    next-best candidate. A branch is truncated when its best confidence
    falls below ``LADDER_BREAK_CONFIDENCE``; near-degenerate candidate
    scores log an ambiguity event and are broken by lower eigenvalue.
    """
    data = H.data if isinstance(H, HermitianOperator) else np.asarray(H)
    dim = data.shape[0]
    if D * d_c != dim:
        raise ParameterError(f"D*d_c = {D * d_c} does not match dim(H) = {dim}")
    w, V = eigh(data)
    w = w - w[0]
    return _label_eigensystem(w, V, D, d_c, flux_ext, usable_margin)


def _label_eigensystem(w, V, D, d_c, flux_ext=0.0, usable_margin=USABLE_MARGIN):
    dim = D * d_c
    CdV = _apply_cdag(V, D, d_c)
    # W[m, k] = |<psi_m| c^dag |psi_k>| ; norms[k] = ||c^dag |psi_k>||
    W = np.abs(V.conj().T @ CdV)
    norms = np.linalg.norm(CdV, axis=0)
    nt_all = nt_expectation(D, V, d_c)

    energy = np.full((D, d_c), np.nan)
    nt = np.full((D, d_c), np.nan)
    conf = np.full((D, d_c), np.nan)
    index = np.full((D, d_c), -1, dtype=np.int64)
    used = np.zeros(dim, dtype=bool)
    events: list = []
    alive = np.ones(D, dtype=bool)

    def _assign(j, n, m, score):
        used[m] = True
        index[j, n] = m
        energy[j, n] = w[m]
        nt[j, n] = nt_all[m]
        conf[j, n] = score

    # rung 0: bare product overlap, greedy in descending overlap
    overlaps = np.abs(V[(np.arange(D) * d_c), :]) ** 2  # rows: j, cols: eigenstate
    order = np.argsort(-overlaps.max(axis=1))
    for j in order:
        scores = np.where(used, -1.0, overlaps[j])
        m = _pick(scores, w, j, 0, events)
        _assign(j, 0, m, float(np.sqrt(scores[m])))

    for n in range(d_c - 1):
        cand = {}
        for j in range(D):
            if not alive[j] or index[j, n] < 0:
                continue
            k = index[j, n]
            if norms[k] == 0:
                continue
            cand[j] = np.where(used, -1.0, W[:, k] / norms[k])
        for j in sorted(cand, key=lambda jj: -cand[jj].max()):
            scores = np.where(used, -1.0, cand[j])
            m = _pick(scores, w, j, n + 1, events)
            if scores[m] < LADDER_BREAK_CONFIDENCE:
                alive[j] = False
                events.append(
                    {"event": "ladder-break", "j": int(j), "n_c": int(n + 1),
                     "confidence": float(max(scores[m], 0.0))}
                )
                continue
            _assign(j, n + 1, m, float(scores[m]))

    d_c_usable = int(np.floor((1.0 - usable_margin) * d_c))
    return BranchTable(
        D=D, d_c=d_c, d_c_usable=d_c_usable,
        energy=energy, nt=nt, label_confidence=conf,
        state_index=index, eigenvalues=w, flux_ext=flux_ext, events=events,
    )


def _pick(scores: np.ndarray, w: np.ndarray, j: int, n: int, events: list) -> int:
    """Argmax with near-degenerate tie-break by lower eigenvalue."""
    m = int(np.argmax(scores))
    runner = np.argsort(scores)[-2] if scores.size > 1 else m
    if scores[runner] >= 0 and abs(scores[m] - scores[runner]) < AMBIGUITY_CONFIDENCE:
        chosen = m if w[m] <= w[runner] else int(runner)
        events.append(
            {"event": "ambiguous-label", "j": int(j), "n_c": int(n),
             "candidates": [int(m), int(runner)],
             "scores": [float(scores[m]), float(scores[runner])],
             "chosen": int(chosen)}
        )
        return chosen
    return m


# ---------------------------------------------------------------------------
# crossings
# ---------------------------------------------------------------------------

def _pair_detuning(table: BranchTable, pair, delta_photons: int):
    """Signed gap E(j_hi, n) - E(j_lo, n + delta) over the usable ladder.

    j_hi is the branch with the higher zero-photon energy, so the detuning
    starts at omega_(j_lo j_hi)(0) - delta * omega_ladder and sweeps through
    zero at a resonance.
    """
    j1, j2 = pair
    if table.energy[j2, 0] >= table.energy[j1, 0]:
        j_lo, j_hi = j1, j2
    else:
        j_lo, j_hi = j2, j1
    n_max = table.d_c_usable - delta_photons
    det = table.energy[j_hi, :n_max] - table.energy[j_lo, delta_photons:table.d_c_usable]
    return det, (j_lo, j_hi)


def find_crossings(
    table: BranchTable,
    pairs,
    gap_threshold_mhz: float = EXACT_GAP_MHZ,
    detection_window_mhz: float = DETECTION_WINDOW_MHZ,
    delta_photons: int = 1,
) -> list:
    """Locate crossings between branch pairs.

    All interior local minima of |E(j', n) - E(j, n + delta)| below
    ``detection_window_mhz`` are reported, with n_c_star and the minimum
    gap interpolated from a parabola through the squared detuning. Minima
    with a gap below ``gap_threshold_mhz`` are classified ``"exact"``
    (parity protected), the rest ``"avoided"``. An empty result is valid.
    """
    out = []
    for pair in pairs:
        det, ordered = _pair_detuning(table, tuple(pair), delta_photons)
        absdet = np.abs(det)
        valid = ~np.isnan(det)
        for n in range(1, len(det) - 1):
            if not (valid[n - 1] and valid[n] and valid[n + 1]):
                continue
            if not (absdet[n] <= absdet[n - 1] and absdet[n] < absdet[n + 1]):
                continue
            if absdet[n] * 1e3 > detection_window_mhz:
                continue
            y = det[n - 1 : n + 2] ** 2
            a, b, c = np.polyfit(np.arange(n - 1, n + 2, dtype=float), y, 2)
            if a <= 0:
                n_star, gap2 = float(n), float(det[n] ** 2)
            else:
                n_star = float(-b / (2.0 * a))
                gap2 = float(c - b**2 / (4.0 * a))
            gap_mhz = float(np.sqrt(max(gap2, 0.0)) * 1e3)
            kind = "exact" if gap_mhz < gap_threshold_mhz else "avoided"
            out.append(
                CrossingEvent(
                    branch_pair=(min(pair), max(pair)),
                    n_c_star=n_star,
                    gap_mhz=gap_mhz,
                    kind=kind,
                    flux_ext=table.flux_ext,
                    delta_photons=delta_photons,
                )
            )
    return out


def ac_stark_curve(
    table: BranchTable,
    j_pair: tuple = (0, 1),
    fit_window: int = 20,
) -> StarkCurve:
    """Transition frequency omega_jj'(n_c) with a linear fit at low n_c."""
    j, j2 = j_pair
    n_max = table.d_c_usable
    omega = table.energy[j2, :n_max] - table.energy[j, :n_max]
    valid = ~np.isnan(omega)
    n = np.arange(n_max)
    upper = min(fit_window, n_max - 1)
    sel = valid & (n <= upper)
    if sel.sum() < 2:
        raise ParameterError(
            f"branch pair {j_pair} truncated before the fit window end"
        )
    slope, intercept = np.polyfit(n[sel], omega[sel], 1)
    return StarkCurve(
        j_pair=j_pair, n=n[valid], omega=omega[valid],
        slope=float(slope), intercept=float(intercept), window=(0, upper),
    )


# ---------------------------------------------------------------------------
# MIST map over flux
# ---------------------------------------------------------------------------

@dataclass
class MistMap:
    """Per-flux crossing photon numbers and zero-photon resonance fluxes."""

    pairs: list
    flux_grid: np.ndarray
    n_c_star: dict       # pair -> array (NaN where not found)
    gap_mhz: dict        # pair -> array
    zero_detuning: dict  # pair -> array of omega_jj'(0) - delta*omega_ladder
    disappearance_flux: dict  # pair -> list of interpolated root fluxes
    model: str = "cosphi"


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("COSPHI_THREADS", "1")))
    except ValueError:
        return 1


def mist_map_over_flux(
    params: CircuitParams,
    flux_grid,
    pairs,
    spec: HilbertSpec | None = None,
    model: str = "cosphi",
    delta_photons: int = 1,
    detection_window_mhz: float = DETECTION_WINDOW_MHZ,
) -> MistMap:
    """Crossing photon number versus flux for the requested branch pairs.

    For each flux the two-mode model is rebuilt (the normal modes pick up
    the weak L_a flux dependence and the displaced offset), labeled, and
    scanned for crossings; fluxes where a crossing lies beyond the usable
    ladder are reported as not-found (NaN). The flux where each pair's
    zero-photon detuning changes sign is the photon-free resonance at
    which the MIST reaches zero photons.
    """
    if spec is None:
        spec = HilbertSpec()
    flux_grid = np.asarray(flux_grid, dtype=float)
    if np.any(np.abs(flux_grid) > 0.2):
        raise ParameterError("flux grid must stay within +-0.2 Phi0")
    pairs = [tuple(p) for p in pairs]

    def solve(flux):
        p = params.replace(flux_ext=float(flux))
        tr = transmon_eigensystem(p, spec)
        if model == "cosphi":
            H = build_cosphi_two_mode(p, normal_modes(p), spec, transmon=tr)
        elif model == "transverse":
            m = normal_modes(p)
            H = build_transverse_two_mode(
                p, matched_transverse_coupling(m), spec,
                omega_c=m.omega_c_pol, transmon=tr,
            )
        else:
            raise ParameterError(f"unknown model {model!r}")
        table = diagonalize_and_label(H, spec.D, spec.d_c, flux_ext=float(flux))
        return table

    workers = _worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            tables = list(ex.map(solve, flux_grid))
    else:
        tables = [solve(f) for f in flux_grid]

    n_star = {p: np.full(len(flux_grid), np.nan) for p in pairs}
    gaps = {p: np.full(len(flux_grid), np.nan) for p in pairs}
    zero_det = {p: np.full(len(flux_grid), np.nan) for p in pairs}
    for i, table in enumerate(tables):
        events = find_crossings(
            table, pairs, delta_photons=delta_photons,
            detection_window_mhz=detection_window_mhz,
        )
        for p in pairs:
            det, _ = _pair_detuning(table, p, delta_photons)
            if not np.isnan(det[0]):
                zero_det[p][i] = det[0]
            mine = [e for e in events if e.branch_pair == (min(p), max(p))]
            if mine:
                first = min(mine, key=lambda e: e.n_c_star)
                n_star[p][i] = first.n_c_star
                gaps[p][i] = first.gap_mhz
    roots = {}
    for p in pairs:
        z = zero_det[p]
        rr = []
        for i in range(len(flux_grid) - 1):
            a, b = z[i], z[i + 1]
            if np.isnan(a) or np.isnan(b) or a * b > 0:
                continue
            f = flux_grid[i] + (flux_grid[i + 1] - flux_grid[i]) * a / (a - b)
            rr.append(float(f))
        roots[p] = rr
    return MistMap(
        pairs=pairs, flux_grid=flux_grid, n_c_star=n_star, gap_mhz=gaps,
        zero_detuning=zero_det, disappearance_flux=roots, model=model,
    )
