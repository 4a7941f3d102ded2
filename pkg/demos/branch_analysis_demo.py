"""Branch analysis of the cos-phi readout at zero and broken flux symmetry.

Diagonalizes the two-mode model, labels the dressed states along the
photon ladder, and locates the parity-protected (exact) crossings at zero
flux versus the flux-activated avoided crossings responsible for
measurement-induced state transitions. Writes plot-ready CSV files and,
when matplotlib is importable, a PNG of the <N_t> branches.
"""

from pathlib import Path

import numpy as np

from cosphi.branch import diagonalize_and_label, find_crossings
from cosphi.hilbert import build_cosphi_two_mode, normal_modes, transmon_eigensystem
from cosphi.io import branch_csv, crossings_json
from cosphi.params import CircuitParams, HilbertSpec

OUT = Path(__file__).resolve().parent / "out_branch"
OUT.mkdir(exist_ok=True)

params = CircuitParams()
spec = HilbertSpec(D=10, d_c=120)

for flux in (0.0, -0.04):
    p = params.replace(flux_ext=flux)
    H = build_cosphi_two_mode(p, normal_modes(p), spec,
                              transmon=transmon_eigensystem(p, spec))
    table = diagonalize_and_label(H, spec.D, spec.d_c, flux_ext=flux)
    events = find_crossings(table, [(0, 4), (1, 5)])
    tag = f"flux{flux:+.2f}"
    branch_csv(table, OUT / f"branches_{tag}.csv")
    crossings_json(events, OUT / f"crossings_{tag}.json")

    print(f"flux = {flux:+.2f} Phi0")
    print(f"  qubit 0-1: {table.transition(0, 1):.4f} GHz, "
          f"ladder: {table.ladder_frequency():.4f} GHz")
    for e in events:
        print(f"  crossing {e.branch_pair}: n_c* = {e.n_c_star:6.1f}, "
              f"gap = {e.gap_mhz:7.3f} MHz  ({e.kind})")
    if not events:
        print("  no crossings found")

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(6, 4))
        n = np.arange(table.d_c_usable)
        for j in range(8):
            ax.plot(n, table.nt[j, : table.d_c_usable], lw=1,
                    label=f"j={j}" if j < 6 else None)
        ax.set_xlabel("cavity photon number $n_c$")
        ax.set_ylabel(r"$\langle N_t \rangle$")
        ax.set_title(f"branches at flux {flux:+.2f} $\\Phi_0$")
        ax.legend(ncol=3, fontsize=8)
        fig.tight_layout()
        fig.savefig(OUT / f"branches_{tag}.png", dpi=150)
        plt.close(fig)
    except ImportError:
        pass

print(f"\noutputs in {OUT}")
