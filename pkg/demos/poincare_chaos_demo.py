"""Poincare sections of the driven transmon: cos-phi versus transverse.

At equal AC-Stark-matched drive strength the transverse coupling develops
macroscopic chaotic layers around its odd-harmonic resonances while the
cos-phi coupling, which only carries even drive harmonics, stays regular.
"""

from pathlib import Path

import numpy as np

from cosphi.classical import (
    chirikov_margin,
    harmonic_coefficients,
    poincare_section,
)
from cosphi.hilbert import normal_modes
from cosphi.io import chaos_json, section_csv, separatrix_csv
from cosphi.params import CircuitParams

OUT = Path(__file__).resolve().parent / "out_poincare"
OUT.mkdir(exist_ok=True)

params = CircuitParams()
modes = normal_modes(params)
N_BAR = 300.0

sections = {}
for kind in ("cosphi", "transverse"):
    series = harmonic_coefficients(kind, params, modes, N_BAR)
    section = poincare_section(series, n_periods=1200)
    sections[kind] = section
    print(f"{kind:10s}: eta = {series.eta:.3f}, "
          f"Chirikov margin = {chirikov_margin(series, params):.2f}, "
          f"chaotic fraction = {section.chaotic_fraction:.3f}")
    section_csv(section, OUT / f"section_{kind}.csv", gnuplot=True)
    separatrix_csv(section.separatrices, OUT / f"separatrices_{kind}.csv")
    chaos_json(section.chaos, OUT / f"chaos_{kind}.json")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(11, 4.5), sharey=True)
    for ax, kind in zip(axes, ("cosphi", "transverse")):
        s = sections[kind]
        ax.plot(s.phi[1:], s.n[1:], ",", color="#333333", alpha=0.4)
        for sep in s.separatrices:
            ax.plot(sep.psi, sep.n_plus, "r-", lw=0.8)
            ax.plot(sep.psi, sep.n_minus, "r-", lw=0.8)
        ax.set_title(f"{kind} (chaotic fraction "
                     f"{s.chaotic_fraction:.2f})")
        ax.set_xlabel(r"$\varphi_q$")
    axes[0].set_ylabel(r"$n_q$")
    fig.tight_layout()
    fig.savefig(OUT / "sections.png", dpi=160)
    print(f"wrote {OUT / 'sections.png'}")
except ImportError:
    pass

print(f"outputs in {OUT}")
