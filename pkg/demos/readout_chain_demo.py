"""Readout-chain walkthrough: pointer states, single-shot classification,
thermal-population fitting, photon calibration and CLEAR pulse shaping."""

from pathlib import Path

import numpy as np

from cosphi.params import CircuitParams, HilbertSpec, GHZ_TO_MK
from cosphi.hilbert import transmon_eigensystem
from cosphi.readout import (
    cavity_response,
    classify,
    optimize_clear,
    photon_calibration,
    pointer_positions,
    square_pulse,
    thermal_fit,
    OUTLIER,
)

OUT = Path(__file__).resolve().parent / "out_readout"
OUT.mkdir(exist_ok=True)
rng = np.random.default_rng(0)

params = CircuitParams()
chi = params.chi_qc_target
print(f"operating point chi/kappa = {chi / params.kappa_c:+.3f}")

# pointer states for transmon levels 0..12 with the linear dispersive model
states = pointer_positions(params, [k * chi for k in range(13)])
for s in states[:7]:
    print(f"  |{s.k}>: I = {s.I:+.3f}, Q = {s.Q:+.3f}")

# single-shot sample of a 72 mK thermal state
transmon = transmon_eigensystem(params, HilbertSpec(D=8, d_c=2))
E = transmon.energies[:6]
weights = np.exp(-E * GHZ_TO_MK / 72.0)
weights /= weights.sum()
truth = rng.choice(6, size=20000, p=weights)
shots = np.array(
    [states[k].center for k in truth]
) + states[0].sigma * (rng.standard_normal(20000) + 1j * rng.standard_normal(20000)) / np.sqrt(2)
labels = classify(shots, states)
kept = labels != OUTLIER
populations = np.array([(labels == k).sum() for k in range(5)], dtype=float)
populations /= kept.sum()
fit = thermal_fit(populations, E[:5])
print(f"thermal fit: T_eff = {fit.T_eff_mK:.1f} mK "
      f"(outlier rate {1 - kept.mean():.3%})")

# photon-number calibration from synthetic Stark-shift data
power = np.linspace(0.0, 8.0, 17)
shifts = 18.0 * power * chi
cal = photon_calibration(list(zip(power, shifts)), chi)
print(f"calibration: {cal.slope:.2f} photons per power unit")

# CLEAR pulse vs square pulse
square = cavity_response(square_pulse(500.0, 1.0), params.kappa_c, dt_ns=0.1)
clear = cavity_response(
    optimize_clear(params.kappa_c, 1.0, 500.0), params.kappa_c, dt_ns=0.1
)
print(f"ring-up: square {square.ring_up_ns:.1f} ns -> CLEAR {clear.ring_up_ns:.1f} ns")
print(f"ring-down: square {square.ring_down_ns:.1f} ns -> CLEAR {clear.ring_down_ns:.1f} ns")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    axes[0].plot(shots[:4000].real, shots[:4000].imag, ",", alpha=0.3)
    for s in states[:6]:
        circle = plt.Circle((s.I, s.Q), 2 * s.sigma, fill=False, color="C3")
        axes[0].add_patch(circle)
    axes[0].set_xlabel("I")
    axes[0].set_ylabel("Q")
    axes[0].set_aspect("equal")
    axes[0].set_title("thermal-state single shots")
    axes[1].plot(square.t, np.abs(square.alpha), label="square")
    axes[1].plot(clear.t, np.abs(clear.alpha), label="CLEAR")
    axes[1].set_xlabel("t (ns)")
    axes[1].set_ylabel(r"$|\alpha|$")
    axes[1].legend()
    fig.tight_layout()
    fig.savefig(OUT / "readout_chain.png", dpi=150)
    print(f"wrote {OUT / 'readout_chain.png'}")
except ImportError:
    pass
