"""Semiclassical driven-transmon dynamics: drive harmonics, separatrices,
resonance-overlap margins, symplectic integration and Poincare sections.

The reduced classical Hamiltonian is

    H(t) = 4 E_Cq n^2 - sum_m A_m cos(phi - m w_d t),

where the harmonic amplitudes ``A_m`` follow from a Jacobi-Anger expansion
of the drive-displaced Josephson cosine. For the cos-phi coupling only the
even harmonics survive at zero flux; the flux-odd channel populates the
odd ones. The harmonic sum resums exactly to

    cos-phi:     V(phi, t) = -2 E_J cos(phi_ext_bar + eta cos(w t)) cos(phi)
    transverse:  V(phi, t) = -2 E_J cos(phi - eta sin(w t))

and the integrator propagates these closed forms.

Unit bridge: circuit energies arrive in GHz; the equations of motion use
angular units (2 pi GHz = rad/ns) so that times are in ns. ``n`` is in
Cooper pairs and ``phi`` in radians. All conversions happen inside this
module only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import jv

from .hilbert import DerivedModes, matched_transverse_coupling
from .params import CircuitParams, ParameterError

__all__ = [
    "HarmonicSeries",
    "Separatrix",
    "Trajectory",
    "ChaosReport",
    "PoincareSection",
    "harmonic_coefficients",
    "separatrices",
    "chirikov_margin",
    "chirikov_margin_curve",
    "integrate_trajectory",
    "poincare_section",
    "harmonic_sum",
    "plasma_frequency",
]

TWO_PI = 2.0 * math.pi
#: reject drive amplitudes outside the modeled regime
ETA_MAX = 50.0
#: coefficients below this (relative to 2 E_J) are truncated
SERIES_TOL = 1e-12
MIN_STEPS_PER_PERIOD = 64
#: per-drive-period Lyapunov threshold separating layer chaos from
#: sticky-web transients (see ChaosReport)
CHAOS_THRESHOLD = 0.05
LYAPUNOV_PERTURBATION = 1e-8


def plasma_frequency(params: CircuitParams) -> float:
    """Equivalent plasma frequency sqrt(16 E_J E_Cq) in GHz."""
    return math.sqrt(16.0 * params.E_J * params.E_Cq)


@dataclass(frozen=True)
class HarmonicSeries:
    """Drive-harmonic amplitudes A_m of the reduced classical Hamiltonian."""

    coupling_kind: str  # "cosphi" | "transverse"
    eta: float
    flux_ext_bar: float
    A: dict  # m -> A_m in GHz, |m| <= N_h
    E_J2: float  # 2 E_J in GHz
    E_Cq: float
    omega_d: float

    @property
    def N_h(self) -> int:
        return max(abs(m) for m in self.A)

    def amplitude(self, m: int) -> float:
        return self.A.get(m, 0.0)


@dataclass(frozen=True)
class Separatrix:
    """Nonlinear resonance boundary of the m-th drive harmonic."""

    m: int
    center_n: float
    width: float
    psi: np.ndarray
    n_plus: np.ndarray
    n_minus: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    """Stroboscopic samples of one classical trajectory."""

    times: np.ndarray
    phi: np.ndarray       # wrapped to [-pi, pi)
    n: np.ndarray
    winding: np.ndarray   # integer winding numbers of the unwrapped phase
    energy: np.ndarray    # H at the strobe phase of the drive
    final_state: tuple    # (phi_unwrapped, n) at the last step
    steps_per_period: int
    order: int

    @property
    def energy_drift(self) -> float:
        """Max relative energy excursion; meaningful for the undriven case."""
        scale = max(abs(self.energy[0]), 1e-300)
        return float(np.max(np.abs(self.energy - self.energy[0])) / scale)


@dataclass(frozen=True)
class ChaosReport:
    """Largest-Lyapunov classification of the sampled initial conditions.

    ``lambdas`` are Benettin estimates in 1/ns; a trajectory is chaotic
    when ``lambda * T_drive`` exceeds ``threshold``. The default threshold
    selects macroscopic chaotic layers and leaves thin sticky resonance
    webs classified regular.
    """

    lambdas: np.ndarray
    lambda_per_period: np.ndarray
    chaotic: np.ndarray
    threshold: float

    @property
    def chaotic_fraction(self) -> float:
        return float(np.mean(self.chaotic))


@dataclass(frozen=True)
class PoincareSection:
    """Stroboscopic phase-space portrait plus separatrices and chaos report."""

    period: float
    initial_conditions: np.ndarray  # (n_traj, 2) of (phi, n)
    phi: np.ndarray                 # (n_strobes, n_traj), wrapped
    n: np.ndarray
    chaos: ChaosReport | None
    separatrices: list = field(default_factory=list)

    @property
    def chaotic_fraction(self) -> float:
        if self.chaos is None:
            raise ParameterError("section was computed without a chaos report")
        return self.chaos.chaotic_fraction


# ---------------------------------------------------------------------------
# harmonics
# ---------------------------------------------------------------------------

def _bessel(m: int, x: float) -> float:
    return float(jv(m, x))


def harmonic_coefficients(
    kind: str,
    params: CircuitParams,
    modes: DerivedModes,
    n_bar: float,
) -> HarmonicSeries:
    """Jacobi-Anger amplitudes for the chosen coupling at drive power n_bar.

    cos-phi: ``eta = 2 phi_c sqrt(n_bar)``, even harmonics carry
    ``(-1)^(m/2) 2 E_J cos(phi_ext_bar) J_m(eta)`` and odd ones
    ``(-1)^((m+1)/2) 2 E_J sin(phi_ext_bar) J_m(eta)``; at zero flux all
    odd amplitudes vanish identically. Transverse:
    ``eta = 2 g_qc sqrt(n_bar) / omega_d`` and ``A_m = 2 E_J J_m(eta)``.
    The cutoff grows from ceil(eta) + 12 until the tail is below
    ``SERIES_TOL * 2 E_J``.
    """
    if kind not in ("cosphi", "transverse"):
        raise ParameterError(f"unknown coupling kind {kind!r}")
    if n_bar < 0:
        raise ParameterError("n_bar must be nonnegative")
    E_J2 = 2.0 * params.E_J
    phibar = modes.phi_ext_bar
    if kind == "cosphi":
        eta = 2.0 * abs(modes.phi_c) * math.sqrt(n_bar)
    else:
        g_qc = matched_transverse_coupling(modes)
        eta = 2.0 * g_qc * math.sqrt(n_bar) / params.omega_d
        phibar = 0.0
    if eta > ETA_MAX:
        raise ParameterError(f"eta = {eta:.2f} outside the modeled regime (<= {ETA_MAX})")

    N_h = int(math.ceil(eta)) + 12
    while abs(_bessel(N_h, eta)) >= SERIES_TOL and N_h < 500:
        N_h += 4

    A: dict = {}
    cosb, sinb = math.cos(phibar), math.sin(phibar)
    for m in range(-N_h, N_h + 1):
        if kind == "transverse":
            A[m] = E_J2 * _bessel(m, eta)
        elif m % 2 == 0:
            A[m] = (-1.0) ** (m // 2) * E_J2 * cosb * _bessel(m, eta)
        else:
            A[m] = (-1.0) ** ((m + 1) // 2) * E_J2 * sinb * _bessel(m, eta)
    return HarmonicSeries(
        coupling_kind=kind, eta=eta, flux_ext_bar=phibar, A=A,
        E_J2=E_J2, E_Cq=params.E_Cq, omega_d=params.omega_d,
    )


def harmonic_sum(series: HarmonicSeries, phi, t):
    """Direct evaluation of sum_m A_m cos(phi - m w_d t) in GHz."""
    phi = np.asarray(phi, dtype=float)
    t = np.asarray(t, dtype=float)
    w = TWO_PI * series.omega_d
    total = np.zeros(np.broadcast(phi, t).shape)
    for m, A_m in series.A.items():
        total = total + A_m * np.cos(phi - m * w * t)
    return total


def _closed_form_sum(series: HarmonicSeries, phi, t):
    """Resummed harmonic sum (equals -V); used by the integrator."""
    w = TWO_PI * series.omega_d
    if series.coupling_kind == "cosphi":
        return series.E_J2 * np.cos(
            series.flux_ext_bar + series.eta * np.cos(w * t)
        ) * np.cos(phi)
    return series.E_J2 * np.cos(phi - series.eta * np.sin(w * t))


# ---------------------------------------------------------------------------
# separatrices and Chirikov margins
# ---------------------------------------------------------------------------

def separatrices(series: HarmonicSeries, m_max: int, n_psi: int = 256) -> list:
    """Resonance separatrices for |m| <= m_max with nonzero amplitude.

    The m-th resonance is centered at ``m w_d / (8 E_Cq)`` along n and has
    full width ``sqrt(2 |A_m| / E_Cq)``; the curve is sampled on at least
    256 points of the slow phase psi.
    """
    if series.E_Cq <= 0:
        raise ParameterError("E_Cq must be positive")
    n_psi = max(n_psi, 256)
    psi = np.linspace(-math.pi, math.pi, n_psi)
    out = []
    for m in range(-m_max, m_max + 1):
        A_m = series.amplitude(m)
        if A_m == 0.0:
            continue
        center = m * series.omega_d / (8.0 * series.E_Cq)
        width = math.sqrt(2.0 * abs(A_m) / series.E_Cq)
        arc = np.sqrt(np.abs(A_m) * (1.0 + np.cos(psi)) / (4.0 * series.E_Cq))
        out.append(
            Separatrix(
                m=m, center_n=center, width=width,
                psi=psi, n_plus=center + arc, n_minus=center - arc,
            )
        )
    return out


def chirikov_margin(series: HarmonicSeries, params: CircuitParams) -> float:
    """Resonance-overlap margin lhs/rhs for the series' own drive amplitude.

    cos-phi compares the m = 0 and m = +-2 separatrices,
    ``(w_d/w_p) / (sqrt|J_0(eta)| + sqrt|J_2(eta)|)``; the transverse
    coupling has the odd harmonics, so the relevant pair is m = 0, +-1 and
    the lhs becomes ``w_d / (2 w_p)``. Margins well above 1 preclude
    separatrix overlap.
    """
    w_p = plasma_frequency(params)
    eta = series.eta
    if series.coupling_kind == "cosphi":
        rhs = math.sqrt(abs(_bessel(0, eta))) + math.sqrt(abs(_bessel(2, eta)))
        lhs = series.omega_d / w_p
    else:
        rhs = math.sqrt(abs(_bessel(0, eta))) + math.sqrt(abs(_bessel(1, eta)))
        lhs = series.omega_d / (2.0 * w_p)
    return lhs / rhs


def chirikov_margin_curve(
    kind: str,
    params: CircuitParams,
    modes: DerivedModes,
    n_bar_max: float,
    num: int = 7501,
):
    """Margin versus n_bar on a dense grid; returns (n_bar, margin)."""
    n_bar = np.linspace(0.0, n_bar_max, num)
    if kind == "cosphi":
        eta = 2.0 * abs(modes.phi_c) * np.sqrt(n_bar)
        rhs = np.sqrt(np.abs(jv(0, eta))) + np.sqrt(np.abs(jv(2, eta)))
        lhs = params.omega_d / plasma_frequency(params)
    elif kind == "transverse":
        g_qc = matched_transverse_coupling(modes)
        eta = 2.0 * g_qc * np.sqrt(n_bar) / params.omega_d
        rhs = np.sqrt(np.abs(jv(0, eta))) + np.sqrt(np.abs(jv(1, eta)))
        lhs = params.omega_d / (2.0 * plasma_frequency(params))
    else:
        raise ParameterError(f"unknown coupling kind {kind!r}")
    return n_bar, lhs / rhs


# ---------------------------------------------------------------------------
# symplectic integration
# ---------------------------------------------------------------------------

def _force(series: HarmonicSeries, phi, t, EJ2_ang, w_ang):
    """dn/dt = -dV/dphi in angular units (resummed closed form)."""
    if series.coupling_kind == "cosphi":
        return -EJ2_ang * np.cos(
            series.flux_ext_bar + series.eta * np.cos(w_ang * t)
        ) * np.sin(phi)
    return -EJ2_ang * np.sin(phi - series.eta * np.sin(w_ang * t))


_YOSHIDA_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_STAGE_COEFFS = {2: (1.0,), 4: (_YOSHIDA_W1, 1.0 - 2.0 * _YOSHIDA_W1, _YOSHIDA_W1)}


def _propagate(series, phi, n, t0, n_periods, steps_per_period, order, strobe_cb=None):
    """Strang-split propagation over whole drive periods (vectorized).

    ``order=2`` is plain Strang; ``order=4`` the triple-Strang composition.
    Negative ``n_periods`` integrates backward. ``strobe_cb(p, phi, n)``
    is invoked after each period.
    """
    EC_ang = TWO_PI * series.E_Cq
    EJ2_ang = TWO_PI * series.E_J2
    w_ang = TWO_PI * series.omega_d
    T = TWO_PI / w_ang
    sign = 1.0 if n_periods >= 0 else -1.0
    dt = sign * T / steps_per_period
    coeffs = _STAGE_COEFFS[order]
    t = t0
    for p in range(abs(n_periods)):
        for _ in range(steps_per_period):
            for c in coeffs:
                h = c * dt
                phi = phi + 4.0 * EC_ang * n * h
                n = n + h * _force(series, phi, t + 0.5 * h, EJ2_ang, w_ang)
                phi = phi + 4.0 * EC_ang * n * h
                t = t + h
        if strobe_cb is not None:
            strobe_cb(p, phi, n)
    return phi, n, t


def integrate_trajectory(
    series: HarmonicSeries,
    ic: tuple,
    n_periods: int,
    steps_per_period: int = 1024,
    order: int = 2,
    t0: float = 0.0,
) -> Trajectory:
    """Propagate one initial condition, sampling once per drive period.

    Hamilton's equations ``dphi/dt = 8 E_Cq n``,
    ``dn/dt = -sum_m A_m sin(phi - m w_d t)`` (evaluated in resummed form)
    are integrated with fixed-step kinetic/potential Strang splitting;
    ``order=4`` composes three Strang stages for higher accuracy. Negative
    ``n_periods`` integrates backward in time, which undoes a forward run
    exactly up to roundoff.
    """
    if steps_per_period < MIN_STEPS_PER_PERIOD:
        raise ParameterError(
            f"steps_per_period must be >= {MIN_STEPS_PER_PERIOD}"
        )
    if order not in _STAGE_COEFFS:
        raise ParameterError("order must be 2 or 4")
    T = 1.0 / series.omega_d
    count = abs(int(n_periods))
    phi_s = np.empty(count + 1)
    n_s = np.empty(count + 1)
    phi0, n0 = float(ic[0]), float(ic[1])
    phi_s[0], n_s[0] = phi0, n0

    def cb(p, phi, n):
        phi_s[p + 1] = phi
        n_s[p + 1] = n

    phi_end, n_end, t_end = _propagate(
        series, phi0, n0, t0, int(n_periods), steps_per_period, order, cb
    )
    sign = 1.0 if n_periods >= 0 else -1.0
    times = t0 + sign * T * np.arange(count + 1)
    winding = np.floor((phi_s + math.pi) / TWO_PI).astype(int)
    wrapped = (phi_s + math.pi) % TWO_PI - math.pi
    EC_ang = TWO_PI * series.E_Cq
    energy = 4.0 * EC_ang * n_s**2 - TWO_PI * _closed_form_sum(series, phi_s, times)
    return Trajectory(
        times=times, phi=wrapped, n=n_s, winding=winding, energy=energy,
        final_state=(float(phi_end), float(n_end)),
        steps_per_period=steps_per_period, order=order,
    )


def default_ic_grid(series: HarmonicSeries, count: int = 81, m_max: int = 2):
    """Default section grid: phi = 0, n spanning the m_max-th resonance.

    n runs symmetrically over ``+-(center(m_max) + 2 width(m_max))``, which
    covers the principal resonance and the harmonics entering the
    resonance-overlap margins.
    """
    center = m_max * series.omega_d / (8.0 * series.E_Cq)
    A_m = series.amplitude(m_max)
    width = math.sqrt(2.0 * abs(A_m) / series.E_Cq)
    span = center + 2.0 * width
    n_vals = np.linspace(-span, span, count)
    return np.column_stack([np.zeros(count), n_vals])


def separatrix_ring(series: HarmonicSeries, m: int, count: int = 8, offset: float = 0.05):
    """Initial conditions ringing the m-th separatrix (probes its layer)."""
    sep = [s for s in separatrices(series, abs(m)) if s.m == m]
    if not sep:
        return np.zeros((0, 2))
    s = sep[0]
    psi = np.linspace(-math.pi * 0.9, math.pi * 0.9, count)
    arc = np.sqrt(abs(series.amplitude(m)) * (1.0 + np.cos(psi)) / (4.0 * series.E_Cq))
    n = s.center_n + arc * (1.0 + offset)
    return np.column_stack([psi, n])


def poincare_section(
    series: HarmonicSeries,
    ic_grid=None,
    n_periods: int = 2000,
    steps_per_period: int = 1024,
    order: int = 2,
    lyapunov: bool = True,
    perturbation: float = LYAPUNOV_PERTURBATION,
    chaos_threshold: float = CHAOS_THRESHOLD,
    include_separatrix_rings: bool = False,
    m_max: int = 2,
) -> PoincareSection:
    """Stroboscopic section over a grid of initial conditions.

    Each trajectory gets a companion displaced by ``perturbation`` along n;
    the companion is renormalized to that distance once per drive period
    and the accumulated stretching gives the Benettin estimate of the
    largest Lyapunov exponent used for the regular/chaotic classification.
    """
    if steps_per_period < MIN_STEPS_PER_PERIOD:
        raise ParameterError(f"steps_per_period must be >= {MIN_STEPS_PER_PERIOD}")
    if ic_grid is None:
        ic_grid = default_ic_grid(series, m_max=m_max)
        if include_separatrix_rings:
            rings = [
                separatrix_ring(series, s.m)
                for s in separatrices(series, m_max)
            ]
            ic_grid = np.vstack([ic_grid] + rings)
    ic_grid = np.atleast_2d(np.asarray(ic_grid, dtype=float))
    n_traj = ic_grid.shape[0]
    T = 1.0 / series.omega_d

    phi = ic_grid[:, 0].copy()
    n = ic_grid[:, 1].copy()
    if lyapunov:
        phi = np.concatenate([phi, phi])
        n = np.concatenate([n, n + perturbation])
    strobe_phi = np.empty((n_periods + 1, n_traj))
    strobe_n = np.empty((n_periods + 1, n_traj))
    strobe_phi[0] = ic_grid[:, 0]
    strobe_n[0] = ic_grid[:, 1]
    stretch = np.zeros(n_traj)

    def cb(p, phi_now, n_now):
        if lyapunov:
            dphi = phi_now[n_traj:] - phi_now[:n_traj]
            dn = n_now[n_traj:] - n_now[:n_traj]
            d = np.maximum(np.sqrt(dphi**2 + dn**2), 1e-300)
            np.add(stretch, np.log(d / perturbation), out=stretch)
            phi_now[n_traj:] = phi_now[:n_traj] + dphi / d * perturbation
            n_now[n_traj:] = n_now[:n_traj] + dn / d * perturbation
        strobe_phi[p + 1] = phi_now[:n_traj]
        strobe_n[p + 1] = n_now[:n_traj]

    phi_run, n_run = phi.copy(), n.copy()
    EC_ang = TWO_PI * series.E_Cq
    EJ2_ang = TWO_PI * series.E_J2
    w_ang = TWO_PI * series.omega_d
    dt = (TWO_PI / w_ang) / steps_per_period
    coeffs = _STAGE_COEFFS[order]
    t = 0.0
    for p in range(n_periods):
        for _ in range(steps_per_period):
            for c in coeffs:
                h = c * dt
                phi_run += 4.0 * EC_ang * n_run * h
                n_run += h * _force(series, phi_run, t + 0.5 * h, EJ2_ang, w_ang)
                phi_run += 4.0 * EC_ang * n_run * h
                t += h
        cb(p, phi_run, n_run)

    wrapped = (strobe_phi + math.pi) % TWO_PI - math.pi
    chaos = None
    if lyapunov:
        lam = stretch / (n_periods * T)
        lam_T = lam * T
        chaos = ChaosReport(
            lambdas=lam, lambda_per_period=lam_T,
            chaotic=lam_T > chaos_threshold, threshold=chaos_threshold,
        )
    seps = separatrices(series, m_max)
    return PoincareSection(
        period=T, initial_conditions=ic_grid,
        phi=wrapped, n=strobe_n, chaos=chaos, separatrices=seps,
    )
