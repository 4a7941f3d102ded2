"""Circuit parameters, truncation settings and the flat parameter-file format.

Unit conventions used throughout the package:

* all energies are stored divided by Planck's constant, in GHz (so an
  energy and the corresponding transition frequency are the same number),
* inductances are in nH, fluxes are reduced (``flux_ext`` in units of Phi0,
  ``phi_ext = 2*pi*flux_ext`` in radians),
* times are in ns; the classical module converts to angular units
  (rad/ns) internally.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, asdict, replace
from pathlib import Path

# physical constants (SI)
HBAR = 1.054571817e-34
ECHARGE = 1.602176634e-19
HPLANCK = 6.62607015e-34
PHI0_REDUCED = HBAR / (2.0 * ECHARGE)  # reduced flux quantum, Wb

# h * 1 GHz / k_B in mK; converts GHz energies to temperature units
GHZ_TO_MK = HPLANCK * 1e9 / 1.380649e-23 * 1e3


class ParameterError(ValueError):
    """Raised when circuit or truncation parameters are inconsistent."""


@dataclass(frozen=True)
class CircuitParams:
    """All circuit energies, frequencies, couplings, flux and drive settings.

    Defaults are the fitted sample parameters of the measured device; any
    subset can be overridden via :meth:`replace` or keyword arguments.

    Attributes
    ----------
    E_Cq : float
        Transmon charging energy in GHz. The transmon Josephson energy is
        ``2*E_J`` (two junctions).
    E_J : float
        Single-junction Josephson energy in GHz.
    n_g : float
        Dimensionless offset charge.
    E_Ca : float
        Ancilla charging energy in GHz.
    L_a0 : float
        Zero-flux shunt inductance in nH.
    omega_c_bare : float
        Bare cavity frequency in GHz.
    g_ac : float
        Ancilla-cavity coupling in GHz.
    flux_ext : float
        External flux in units of Phi0 (``phi_ext = 2*pi*flux_ext``).
    n_bar : float
        Mean drive photon number.
    omega_d : float
        Drive frequency in GHz.
    kappa_c : float
        Cavity linewidth in GHz.
    chi_qc_target : float
        Measured transmon-cavity cross-Kerr in GHz, used by calibration
        and fitting anchors.
    """

    E_Cq: float = 0.0734
    E_J: float = 3.96
    n_g: float = 0.0
    E_Ca: float = 0.0335
    L_a0: float = 4.24
    omega_c_bare: float = 7.23
    g_ac: float = 0.215
    flux_ext: float = 0.0
    n_bar: float = 0.0
    omega_d: float = 7.294
    kappa_c: float = 0.0172
    chi_qc_target: float = -0.00202

    def __post_init__(self):
        for name in ("E_Cq", "E_J", "E_Ca", "L_a0", "omega_c_bare"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_bar < 0:
            raise ParameterError(f"n_bar must be nonnegative, got {self.n_bar}")
        ratio = 2.0 * self.E_J / self.E_Cq
        if ratio <= 20.0:
            warnings.warn(
                f"2E_J/E_Cq = {ratio:.1f} <= 20: outside the transmon regime, "
                "charge dispersion will not be negligible",
                stacklevel=2,
            )

    @property
    def phi_ext(self) -> float:
        """Reduced external flux 2*pi*Phi/Phi0 in radians."""
        import math

        return 2.0 * math.pi * self.flux_ext

    @property
    def L_J(self) -> float:
        """Single-junction Josephson inductance in nH."""
        return PHI0_REDUCED**2 / (self.E_J * 1e9 * HPLANCK) * 1e9

    def L_a(self, flux_ext: float | None = None) -> float:
        """Flux-dependent shunt inductance in nH.

        The inductance is a SQUID chain whose loop area is 28 times smaller
        than the main loop, giving a weak modulation
        ``L_a = L_a0 / |cos(pi * phi_ext / 28)|``.
        """
        import math

        if flux_ext is None:
            flux_ext = self.flux_ext
        phi_ext = 2.0 * math.pi * flux_ext
        return self.L_a0 / abs(math.cos(math.pi * phi_ext / 28.0))

    def replace(self, **kwargs) -> "CircuitParams":
        return replace(self, **kwargs)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class HilbertSpec:
    """Truncation settings for the quantum models.

    ``fock_buffer`` extra Fock states are used while building matrix
    cosines of cavity/ancilla quadratures, then discarded, so that the
    retained block carries no truncation artifacts.
    """

    n_charge: int = 501
    D: int = 10
    d_c: int = 200
    d_a: int = 1
    fock_buffer: int = 40

    def __post_init__(self):
        if self.n_charge % 2 == 0:
            raise ParameterError(f"n_charge must be odd, got {self.n_charge}")
        if self.D < 6:
            raise ParameterError(f"D must be >= 6, got {self.D}")
        if self.d_c < 2:
            raise ParameterError(f"d_c must be >= 2, got {self.d_c}")
        if self.d_a < 1:
            raise ParameterError(f"d_a must be >= 1, got {self.d_a}")
        if self.fock_buffer < 0:
            raise ParameterError("fock_buffer must be nonnegative")

    def validate_against(self, params: CircuitParams) -> None:
        """Check basis-size requirements that depend on circuit parameters."""
        import math

        min_charge = 4.0 * math.sqrt(2.0 * params.E_J / params.E_Cq)
        if self.n_charge < min_charge:
            raise ParameterError(
                f"n_charge = {self.n_charge} is below the convergence bound "
                f"4*sqrt(2E_J/E_Cq) = {min_charge:.1f}"
            )
        if self.D > self.n_charge:
            raise ParameterError("D cannot exceed n_charge")

    def replace(self, **kwargs) -> "HilbertSpec":
        return replace(self, **kwargs)


#: desk-scale preset used by CI and most analyses
DESK = HilbertSpec(n_charge=501, D=10, d_c=200, d_a=3, fock_buffer=40)
#: full-scale preset; large memory/runtime, opt in explicitly
FULL = HilbertSpec(n_charge=501, D=20, d_c=500, d_a=3, fock_buffer=40)


def _parse_scalar(text: str):
    text = text.strip()
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    if text.startswith('"') and text.endswith('"') and len(text) >= 2:
        return text[1:-1]
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def load_params_file(path) -> dict:
    """Parse a flat ``key = value`` parameter file.

    Lines starting with ``#`` and blank lines are ignored; values are
    interpreted as int, float, bool or (optionally quoted) string.
    """
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = _parse_scalar(value)
    return values


def load_circuit_params(path) -> CircuitParams:
    """Load a :class:`CircuitParams` from a flat parameter file.

    Unknown keys raise; missing keys fall back to the sample defaults.
    """
    values = load_params_file(path)
    known = set(CircuitParams.__dataclass_fields__)
    unknown = set(values) - known
    if unknown:
        raise ParameterError(f"unknown parameter keys in {path}: {sorted(unknown)}")
    return CircuitParams(**values)


def save_circuit_params(params: CircuitParams, path) -> None:
    """Write a :class:`CircuitParams` as a flat ``key = value`` file."""
    lines = ["# circuit parameters (energies/frequencies in GHz, L in nH)"]
    for key, value in params.to_dict().items():
        lines.append(f"{key} = {value!r}")
    Path(path).write_text("\n".join(lines) + "\n")
