"""cosphi: numerical toolkit for cos-phi-coupled transmon readout.

Submodules
----------
hilbert
    Truncated Hilbert spaces, transmon eigensystem, polariton normal modes
    and the coupled Hamiltonian models.
branch
    Dressed-state ladder labeling, crossing detection and MIST maps.
classical
    Drive harmonics, separatrices, Chirikov margins, symplectic dynamics
    and Poincare sections.
readout
    Pointer states, multi-state classification, thermal fits, photon
    calibration and pulsed cavity response.
fitting
    Weighted least-squares circuit-parameter fits on flux-swept spectra.
io / cli
    File formats and the batch command-line front-end.
"""

__version__ = "0.1.0"

from .params import CircuitParams, HilbertSpec, DESK, FULL  # noqa: F401
