"""Measurement-chain models: IQ pointer states, multi-state classification,
thermal population fits, photon-number calibration and pulsed cavity
response.

The readout mode is modeled as a Lorentzian of width ``kappa_c``; the
complex transmission at the drive frequency, conditioned on the transmon
state through its dispersive pull, gives the pointer-state positions in
the IQ plane. Keeping ``chi_qc / kappa_c`` small makes the pointer chain
regular enough to resolve the first six transmon states in single shot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .params import CircuitParams, GHZ_TO_MK, ParameterError

__all__ = [
    "PointerState",
    "ThermalFitResult",
    "PhotonCalibration",
    "PulseEnvelope",
    "CavityResponse",
    "pointer_positions",
    "classify",
    "thermal_fit",
    "photon_calibration",
    "cavity_response",
    "square_pulse",
    "clear_pulse",
    "optimize_clear",
    "SIX_PLUS",
    "OUTLIER",
]

#: classification codes beyond the resolved states
SIX_PLUS = 6
OUTLIER = -1

#: default amplitude signal-to-noise: sigma = 1/snr on the unit-transmission circle
DEFAULT_SNR = 50.0
#: disc radius for the unresolved high-state blob, in units of sigma
SIX_PLUS_RADIUS_FACTOR = 6.0

RING_TOLERANCE = 0.05
MIN_SEGMENT_NS = 2.0


@dataclass(frozen=True)
class PointerState:
    """IQ-plane pointer for one transmon state."""

    k: int
    center: complex
    sigma: float

    @property
    def I(self) -> float:
        return self.center.real

    @property
    def Q(self) -> float:
        return self.center.imag


@dataclass(frozen=True)
class ThermalFitResult:
    T_eff_mK: float
    populations: np.ndarray  # fitted model populations over the fit states
    residual: float
    flags: tuple = ()


@dataclass(frozen=True)
class PhotonCalibration:
    """Linear photon-number calibration n_bar(P) from AC-Stark data."""

    power: np.ndarray
    n_bar: np.ndarray
    slope: float      # photons per power unit
    intercept: float
    p_range: tuple

    def predict(self, power: float) -> tuple:
        """Calibrated n_bar and whether the point is an extrapolation."""
        extrapolated = not (self.p_range[0] <= power <= self.p_range[1])
        return self.slope * power + self.intercept, extrapolated


def _lorentzian_transmission(detuning: float, kappa_c: float) -> complex:
    return 1.0 / (1.0 + 2.0j * detuning / kappa_c)


def pointer_positions(
    params: CircuitParams,
    chi_per_state,
    omega_drive: float | None = None,
    omega_c: float | None = None,
    snr: float = DEFAULT_SNR,
) -> list:
    """Pointer-state centers from the dispersively pulled transmission.

    ``chi_per_state[k]`` is the cavity pull with the transmon in state k
    (GHz); the linear model is ``chi_k = k * chi_qc``, branch analysis
    supplies the exact values. The transmission at the drive frequency is
    a Lorentzian of width ``kappa_c`` centered at ``omega_c + chi_k``;
    its magnitude and phase give the IQ coordinates, and the radial blob
    width is ``1 / snr``.
    """
    if omega_drive is None:
        omega_drive = params.omega_d
    if omega_c is None:
        from .hilbert import normal_modes

        omega_c = normal_modes(params).omega_c_pol
    sigma = 1.0 / snr
    out = []
    for k, chi_k in enumerate(chi_per_state):
        t = _lorentzian_transmission(omega_drive - (omega_c + chi_k), params.kappa_c)
        out.append(PointerState(k=k, center=complex(t), sigma=sigma))
    return out


def classify(
    points,
    states,
    radius_factor: float = 2.0,
    six_plus_radius_factor: float = SIX_PLUS_RADIUS_FACTOR,
) -> np.ndarray:
    """Assign IQ points to transmon states by circular thresholds.

    States with k <= 5 get discs of radius ``radius_factor * sigma``;
    states with k >= 6 are merged into one wide ``SIX_PLUS`` disc at their
    mean position. Points inside no disc are ``OUTLIER``. Overlapping
    discs among the resolved states violate the multi-state operating
    point and are rejected.
    """
    resolved = [s for s in states if s.k <= 5]
    high = [s for s in states if s.k >= 6]
    for i, a in enumerate(resolved):
        for b in resolved[i + 1 :]:
            dist = abs(a.center - b.center)
            if dist <= radius_factor * (a.sigma + b.sigma):
                raise ParameterError(
                    f"pointer discs for states {a.k} and {b.k} overlap "
                    f"(separation {dist:.4f}); not a valid multi-state operating point"
                )
    z = np.asarray([complex(p[0], p[1]) if not np.iscomplexobj(p) and np.ndim(p) else p
                    for p in points])
    labels = np.full(len(z), OUTLIER, dtype=int)
    for s in sorted(resolved, key=lambda s: s.k):
        inside = np.abs(z - s.center) <= radius_factor * s.sigma
        labels[(labels == OUTLIER) & inside] = s.k
    if high:
        center = np.mean([s.center for s in high])
        sigma = np.mean([s.sigma for s in high])
        inside = np.abs(z - center) <= six_plus_radius_factor * sigma
        labels[(labels == OUTLIER) & inside] = SIX_PLUS
    return labels


# ---------------------------------------------------------------------------
# thermal populations
# ---------------------------------------------------------------------------

T_LOWER_MK = 0.5
T_UPPER_MK = 50000.0


def thermal_fit(populations, transition_energies) -> ThermalFitResult:
    """Least-squares effective temperature from state populations.

    ``transition_energies[k]`` is the k-th level energy in GHz referenced
    to the ground state; Boltzmann weights are normalized over the fitted
    states only, and so are the measured populations, so an excluded
    remainder (outliers, higher states) does not bias the fit.
    """
    p = np.asarray(populations, dtype=float)
    E = np.asarray(transition_energies, dtype=float)[: len(p)]
    if np.any(p < 0):
        raise ParameterError("populations must be nonnegative")
    total = p.sum()
    if total <= 0:
        raise ParameterError("populations sum to zero")
    q = p / total
    flags = []
    if np.any(np.diff(p) > 0):
        flags.append("non-monotonic-populations")

    def model(T_mK):
        w = np.exp(-E * GHZ_TO_MK / T_mK)
        return w / w.sum()

    def cost(T_mK):
        return float(np.sum((model(T_mK) - q) ** 2))

    res = minimize_scalar(
        cost, bounds=(T_LOWER_MK, T_UPPER_MK), method="bounded",
        options={"xatol": 1e-4},
    )
    T = float(res.x)
    residual = float(res.fun)
    if T > 0.98 * T_UPPER_MK:
        flags.append("unphysical-temperature")
    if T < 1.0:
        flags.append("below-1mK")
    if residual > 1e-4:
        flags.append("large-residual")
    return ThermalFitResult(
        T_eff_mK=T, populations=model(T), residual=residual, flags=tuple(flags)
    )


# ---------------------------------------------------------------------------
# photon-number calibration
# ---------------------------------------------------------------------------

def photon_calibration(stark_shifts, chi_qc: float) -> PhotonCalibration:
    """Convert AC-Stark shifts to photon numbers, ``n_bar = d_omega / chi``.

    ``stark_shifts`` is a list of (power, d_omega_q) with the shift in the
    same units as ``chi_qc``. Any point with a shift of sign opposite to
    ``chi_qc`` indicates a miscalibrated input and raises. A linear fit of
    n_bar versus power supports extrapolation with a flag.
    """
    if chi_qc == 0:
        raise ParameterError("chi_qc must be nonzero")
    data = np.asarray(stark_shifts, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ParameterError("stark_shifts must be a list of (power, shift) pairs")
    power, shift = data[:, 0], data[:, 1]
    n_bar = shift / chi_qc
    if np.any(n_bar < 0):
        bad = power[n_bar < 0]
        raise ParameterError(
            f"Stark shift and chi_qc have opposite signs at power(s) {bad}: "
            "miscalibrated input"
        )
    if len(power) == 1:
        slope, intercept = n_bar[0] / power[0], 0.0
    else:
        slope, intercept = np.polyfit(power, n_bar, 1)
    return PhotonCalibration(
        power=power, n_bar=n_bar,
        slope=float(slope), intercept=float(intercept),
        p_range=(float(power.min()), float(power.max())),
    )


# ---------------------------------------------------------------------------
# pulsed cavity response
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PulseEnvelope:
    """Piecewise-constant complex drive envelope."""

    segments: tuple  # of (duration_ns, complex amplitude)

    def __post_init__(self):
        for dur, _ in self.segments:
            if dur <= 0:
                raise ParameterError("segment durations must be positive")

    @property
    def total_duration(self) -> float:
        return float(sum(d for d, _ in self.segments))


@dataclass(frozen=True)
class CavityResponse:
    """Linear input-output response alpha(t) to a segmented drive."""

    t: np.ndarray
    alpha: np.ndarray
    steady_alpha: complex
    ring_up_ns: float
    ring_down_ns: float


def square_pulse(duration_ns: float, amplitude: complex = 1.0) -> PulseEnvelope:
    return PulseEnvelope(segments=((duration_ns, amplitude),))


def clear_pulse(
    hold_amplitude: complex,
    hold_ns: float,
    up_segments,
    down_segments=None,
) -> PulseEnvelope:
    """Segmented readout pulse: overshoot, compensate, hold, mirrored tail.

    ``up_segments`` is a pair of (duration, amplitude) used before the
    hold; ``down_segments`` (defaulting to the mirror image of the ring-up
    pair about the hold level, ending at zero) follows the hold.
    """
    up = tuple((float(d), complex(a)) for d, a in up_segments)
    if down_segments is None:
        down_segments = tuple(
            (d, hold_amplitude - a) for d, a in up
        )
    down = tuple((float(d), complex(a)) for d, a in down_segments)
    segs = up + ((float(hold_ns), complex(hold_amplitude)),) + down
    return PulseEnvelope(segments=segs)


def _propagate_segments(envelope, kappa_ang, delta_ang, dt):
    lam = 1j * delta_ang - 0.5 * kappa_ang
    ts = [np.array([0.0])]
    alphas = [np.array([0.0 + 0.0j])]
    t0 = 0.0
    alpha0 = 0.0 + 0.0j
    for dur, amp in envelope.segments:
        n_pts = max(int(math.ceil(dur / dt)), 2)
        tl = np.linspace(0.0, dur, n_pts + 1)[1:]
        a_ss = -amp / lam
        seg = a_ss + (alpha0 - a_ss) * np.exp(lam * tl)
        ts.append(t0 + tl)
        alphas.append(seg)
        t0 += dur
        alpha0 = seg[-1]
    return np.concatenate(ts), np.concatenate(alphas), lam


def cavity_response(
    envelope: PulseEnvelope,
    kappa_c: float,
    detuning: float = 0.0,
    dt_ns: float = 0.25,
    tail_ns: float | None = None,
) -> CavityResponse:
    """Integrate ``d alpha/dt = (i Delta - kappa/2) alpha + drive(t)``.

    ``kappa_c`` and ``detuning`` are in GHz (linewidth and offset divided
    by 2 pi); the evolution is exact per constant-amplitude segment. The
    ring-up time is the first time after which |alpha| stays within 5% of
    the hold steady state until the drive changes; the ring-down time is
    measured from the end of the drive to |alpha| falling below 5% of the
    steady state for good.
    """
    if kappa_c <= 0:
        raise ParameterError("kappa_c must be positive")
    kappa_ang = 2.0 * math.pi * kappa_c
    delta_ang = 2.0 * math.pi * detuning
    if tail_ns is None:
        tail_ns = 8.0 / kappa_ang * math.log(1.0 / RING_TOLERANCE)
    # hold segment = the longest one; its steady state defines the targets
    hold_idx = int(np.argmax([d for d, _ in envelope.segments]))
    hold_amp = envelope.segments[hold_idx][1]
    lam = 1j * delta_ang - 0.5 * kappa_ang
    steady = -hold_amp / lam

    padded = PulseEnvelope(
        segments=tuple(envelope.segments) + ((tail_ns, 0.0 + 0.0j),)
    )
    t, alpha, _ = _propagate_segments(padded, kappa_ang, delta_ang, dt_ns)

    drive_end = envelope.total_duration
    hold_start = sum(d for d, _ in envelope.segments[:hold_idx])
    hold_end = hold_start + envelope.segments[hold_idx][0]

    ring_up = math.nan
    if abs(steady) > 0:
        during = (t <= hold_end)
        dev = np.abs(alpha - steady) > RING_TOLERANCE * abs(steady)
        bad = np.where(during & dev)[0]
        last_bad_t = t[bad[-1]] if bad.size else 0.0
        ring_up = float(last_bad_t)
        after = (t >= drive_end)
        high = np.abs(alpha) > RING_TOLERANCE * abs(steady)
        bad_down = np.where(after & high)[0]
        ring_down = float(t[bad_down[-1]] - drive_end) if bad_down.size else 0.0
    else:
        ring_down = 0.0
    return CavityResponse(
        t=t, alpha=alpha, steady_alpha=complex(steady),
        ring_up_ns=ring_up, ring_down_ns=ring_down,
    )


def optimize_clear(
    kappa_c: float,
    hold_amplitude: complex,
    hold_ns: float,
    detuning: float = 0.0,
    max_overshoot: float = 12.0,
    max_segment_ns: float = 40.0,
) -> PulseEnvelope:
    """Optimize a two-segment overshoot/compensation ring-up.

    Segment durations are bounded below by 2 ns; amplitudes by
    ``max_overshoot`` times the hold level. The objective is the 5%
    ring-up time of the resulting four-segment pulse.
    """

    def build(x):
        d1, a1, d2, a2 = x
        d1 = min(max(d1, MIN_SEGMENT_NS), max_segment_ns)
        d2 = min(max(d2, MIN_SEGMENT_NS), max_segment_ns)
        a1 = np.clip(a1, -max_overshoot, max_overshoot)
        a2 = np.clip(a2, -max_overshoot, max_overshoot)
        return clear_pulse(
            hold_amplitude, hold_ns,
            up_segments=((d1, a1 * hold_amplitude), (d2, a2 * hold_amplitude)),
        )

    def objective(x):
        resp = cavity_response(build(x), kappa_c, detuning, dt_ns=0.1)
        return resp.ring_up_ns

    kappa_ang = 2.0 * math.pi * kappa_c
    tau = 2.0 / kappa_ang
    x0 = np.array([max(2.0, 0.8 * tau), 3.0, max(2.0, 0.4 * tau), 0.2])
    res = minimize(objective, x0, method="Nelder-Mead",
                   options={"maxiter": 400, "xatol": 1e-3, "fatol": 1e-3})
    return build(res.x)
