"""Hilbert-space construction: transmon eigensystem, polariton normal modes
and the coupled Hamiltonian models.

Three Hamiltonians are built here, all undriven and expressed in GHz:

``build_cosphi_two_mode``
    transmon (x) readout polariton with the nonlinear cos-phi coupling,
    obtained from the three-mode circuit by freezing the ancilla-like
    polariton in its vacuum (exact zeroth normal-ordered reduction),
``build_transverse_two_mode``
    the standard charge-coupled reference model on the same basis,
``build_three_mode``
    transmon (x) ancilla polariton (x) cavity polariton with the full
    two-quadrature Josephson cosine.

Matrix cosines of mode quadratures are evaluated by spectral decomposition
of the quadrature in an enlarged Fock space (``fock_buffer`` extra states)
and truncated back, so the retained block is free of edge artifacts.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal

from .params import CircuitParams, HilbertSpec, ParameterError

__all__ = [
    "HermitianOperator",
    "TransmonEigenbasis",
    "DerivedModes",
    "ChiEstimate",
    "transmon_eigensystem",
    "normal_modes",
    "build_cosphi_two_mode",
    "build_transverse_two_mode",
    "build_three_mode",
    "matched_transverse_coupling",
    "perturbative_chi",
    "charge_basis_hamiltonian",
    "quadrature_cosine",
]

HERMITICITY_TOL = 1e-12
BUFFER_CONVERGENCE_TOL = 1e-8


class TruncationWarning(UserWarning):
    """Emitted when a Fock buffer is too small for the requested accuracy."""


@dataclass(frozen=True)
class HermitianOperator:
    """Dense Hermitian matrix tagged with its tensor-product basis.

    ``basis`` is an ordered tuple of ``(label, dim)`` factors, e.g.
    ``(("transmon-eigen", 10), ("cavity-fock", 200))``.
    """

    data: np.ndarray
    basis: tuple

    def __post_init__(self):
        data = np.asarray(self.data)
        object.__setattr__(self, "data", data)
        dims = [d for _, d in self.basis]
        if data.shape != (int(np.prod(dims)), int(np.prod(dims))):
            raise ParameterError(
                f"operator shape {data.shape} does not match basis dims {dims}"
            )
        scale = np.abs(data).max()
        if scale > 0:
            dev = np.abs(data - data.conj().T).max()
            if dev > HERMITICITY_TOL * scale:
                raise ParameterError(
                    f"matrix is not Hermitian: max |M - M^dag| = {dev:.3e} "
                    f"(tolerance {HERMITICITY_TOL * scale:.3e})"
                )

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def factor_dim(self, label: str) -> int:
        for name, d in self.basis:
            if name == label:
                return d
        raise KeyError(label)


@dataclass(frozen=True)
class TransmonEigenbasis:
    """Lowest transmon eigenstates with operators in that basis.

    ``energies`` are ground-referenced, in GHz. ``cos_phi``, ``sin_phi``
    and ``n_op`` are the D x D matrices of cos(phi_q), sin(phi_q) and n_q.
    """

    energies: np.ndarray
    cos_phi: np.ndarray
    sin_phi: np.ndarray
    n_op: np.ndarray

    @property
    def D(self) -> int:
        return len(self.energies)

    @property
    def omega_q(self) -> float:
        """0-1 transition frequency in GHz."""
        return float(self.energies[1] - self.energies[0])

    @property
    def alpha_q(self) -> float:
        """Anharmonicity E_2 - 2 E_1 + E_0 in GHz."""
        return float(self.energies[2] - 2.0 * self.energies[1] + self.energies[0])


@dataclass(frozen=True)
class DerivedModes:
    """Polariton normal modes of the linearized ancilla-cavity pair.

    The quadrature mixing follows
    ``X_bare_a = u_aa X_a + u_ac X_c`` (and analogous rows for the cavity
    and the conjugate ``v`` coefficients), with ``X = a + a^dag``.
    ``phi_a`` is the ancilla zero-point phase; the effective cavity
    zero-point phase is ``phi_c = phi_a * u_ac``. Flux enters through the
    displaced offset ``phi_ext_bar`` (radians) inside every Josephson
    cosine and weakly through L_a.
    """

    omega_a_pol: float
    omega_c_pol: float
    theta: float
    u: np.ndarray
    v: np.ndarray
    phi_a: float
    phi_c: float
    E_J_bar: float
    phi_ext_bar: float
    alpha_a: float
    alpha_c: float
    omega_a_bare: float
    omega_c_bare: float

    @property
    def gauss_a(self) -> float:
        """Vacuum Gaussian factor exp(-phi_a^2 u_aa^2 / 2) of the frozen ancilla."""
        return math.exp(-(self.phi_a**2) * (self.u[0, 0] ** 2) / 2.0)


@dataclass(frozen=True)
class ChiEstimate:
    """Perturbative cross-Kerr estimate plus the convention it was made in."""

    chi_qc: float
    phi_q: float
    phi_c: float
    convention: str


# ---------------------------------------------------------------------------
# transmon
# ---------------------------------------------------------------------------

def charge_basis_hamiltonian(E_Cq: float, E_J2: float, n_g: float, n_charge: int):
    """Diagonal and off-diagonal of the transmon Hamiltonian in the charge basis.

    ``E_J2`` is the full Josephson energy multiplying cos(phi), i.e. 2 E_J
    for the two-junction transmon mode. Returns ``(diag, offdiag, k)`` with
    ``k`` the charge quantum numbers.
    """
    if n_charge % 2 == 0:
        raise ParameterError("n_charge must be odd")
    k = np.arange(-(n_charge // 2), n_charge // 2 + 1)
    diag = 4.0 * E_Cq * (k - n_g) ** 2
    offdiag = -0.5 * E_J2 * np.ones(n_charge - 1)
    return diag, offdiag, k


def _fix_eigenvector_signs(V: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def transmon_eigensystem(params: CircuitParams, spec: HilbertSpec) -> TransmonEigenbasis:
    """Diagonalize the transmon in the charge basis and truncate.

    The lowest ``spec.D`` eigenpairs are kept and cos(phi_q), sin(phi_q),
    n_q are re-expressed in the truncated eigenbasis. Energies are
    ground-referenced.
    """
    spec.validate_against(params)
    D = spec.D
    diag, offdiag, k = charge_basis_hamiltonian(
        params.E_Cq, 2.0 * params.E_J, params.n_g, spec.n_charge
    )
    try:
        w, V = eigh_tridiagonal(diag, offdiag, select="i", select_range=(0, D - 1))
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise ParameterError(f"transmon eigensolve failed: {exc}") from exc
    order = np.argsort(w)
    w = w[order] - w[order[0]]
    V = _fix_eigenvector_signs(V[:, order])

    # cos = (S + S^dag)/2, sin = (S - S^dag)/(2i) with S the charge raising shift
    S = V[1:, :].T @ V[:-1, :]
    cos_phi = 0.5 * (S + S.T)
    sin_phi = (-0.5j * (S - S.T)).astype(complex)
    n_op = V.T @ (k[:, None] * V)
    if not np.all(np.diff(w) > 0):
        raise ParameterError("transmon energies are not strictly increasing")
    return TransmonEigenbasis(
        energies=w, cos_phi=cos_phi, sin_phi=sin_phi, n_op=n_op
    )


# ---------------------------------------------------------------------------
# normal modes
# ---------------------------------------------------------------------------

DEGENERACY_TOL = 1e-6


def normal_modes(params: CircuitParams) -> DerivedModes:
    """Polariton transformation of the ancilla-cavity quadratic Hamiltonian.

    The bare ancilla frequency includes both the shunt inductor and the
    linearized junction, ``omega_a = sqrt(16 E_J E_Ca (1 + 2 L_J/L_a))``,
    consistent with the zero-point phase
    ``phi_a = [E_Ca / (E_J (1 + 2 L_J/L_a))]^(1/4)``. The residual
    (beyond-quadratic) junction terms are restored by the Hamiltonian
    builders, which subtract the quadratic part counted here.
    """
    L_a = params.L_a()
    r = params.L_J / L_a
    E_J, E_Ca = params.E_J, params.E_Ca
    w_a_bare = math.sqrt(16.0 * E_J * E_Ca * (1.0 + 2.0 * r))
    w_c_bare = params.omega_c_bare
    if abs(w_c_bare - w_a_bare) < DEGENERACY_TOL:
        raise ParameterError(
            "bare ancilla and cavity modes are degenerate "
            f"({w_a_bare:.6f} vs {w_c_bare:.6f} GHz): mixing angle ill-defined"
        )
    g = params.g_ac
    theta = 0.5 * math.atan(
        4.0 * g * math.sqrt(w_a_bare * w_c_bare) / (w_c_bare**2 - w_a_bare**2)
    )
    c, s = math.cos(theta), math.sin(theta)
    gterm = 2.0 * g * math.sqrt(w_a_bare * w_c_bare) * math.sin(2.0 * theta)
    w_a = math.sqrt(w_a_bare**2 * c**2 + w_c_bare**2 * s**2 - gterm)
    w_c = math.sqrt(w_c_bare**2 * c**2 + w_a_bare**2 * s**2 + gterm)
    s1 = (w_c_bare / w_a_bare) ** 0.25
    s2 = (w_a**2 / (w_a_bare * w_c_bare)) ** 0.25
    s3 = (w_c**2 / (w_a_bare * w_c_bare)) ** 0.25
    u = np.array([[s1 * s2 * c, s1 * s3 * s], [-s2 * s / s1, s3 * c / s1]])
    v = np.array([[c / (s1 * s2), s / (s1 * s3)], [-s1 * s / s2, s1 * c / s3]])

    phi_a = (E_Ca / (E_J * (1.0 + 2.0 * r))) ** 0.25
    phi_c = phi_a * u[0, 1]
    phi_ext = params.phi_ext
    alpha_a = phi_ext * phi_a * u[0, 0] * r * (2.0 * E_J / w_a)
    alpha_c = phi_ext * phi_a * u[0, 1] * r * (2.0 * E_J / w_c)
    phi_ext_bar = 2.0 * phi_a * (u[0, 0] * alpha_a + u[0, 1] * alpha_c)
    E_J_bar = E_J * math.exp(-(phi_a**2) * (u[0, 0] ** 2 + u[0, 1] ** 2) / 2.0)
    return DerivedModes(
        omega_a_pol=w_a,
        omega_c_pol=w_c,
        theta=theta,
        u=u,
        v=v,
        phi_a=phi_a,
        phi_c=phi_c,
        E_J_bar=E_J_bar,
        phi_ext_bar=phi_ext_bar,
        alpha_a=alpha_a,
        alpha_c=alpha_c,
        omega_a_bare=w_a_bare,
        omega_c_bare=w_c_bare,
    )


def matched_transverse_coupling(modes: DerivedModes) -> float:
    """Transverse coupling strength giving the same drive-renormalized
    Josephson energy as the cos-phi model: ``g_qc = |phi_c| * omega_c``."""
    return abs(modes.phi_c) * modes.omega_c_pol


def perturbative_chi(params: CircuitParams, modes: DerivedModes) -> ChiEstimate:
    """Leading-order analytic cross-Kerr ``chi = -2 EJbar phi_q^2 phi_c^2 / 4``.

    Phase amplitudes here are sqrt(2) times the zero-point values of the
    ``a + a^dag`` convention, so the /4 cancels against the two sqrt(2)
    factors; the returned value equals ``-2 EJbar phi_q_zp^2 phi_c_zp^2``.
    """
    phi_q = math.sqrt(2.0) * (params.E_Cq / params.E_J) ** 0.25
    phi_c = math.sqrt(2.0) * modes.phi_c
    chi = -2.0 * modes.E_J_bar * phi_q**2 * phi_c**2 / 4.0
    return ChiEstimate(
        chi_qc=chi,
        phi_q=phi_q,
        phi_c=phi_c,
        convention="phi amplitudes are sqrt(2) * zero-point of X = a + a^dag",
    )


# ---------------------------------------------------------------------------
# quadrature cosines
# ---------------------------------------------------------------------------

def _fock_quadrature(dim: int) -> np.ndarray:
    off = np.sqrt(np.arange(1.0, dim))
    return np.diag(off, 1) + np.diag(off, -1)


def _spectral_cosine(scaled_quadrature: np.ndarray, offset: float) -> np.ndarray:
    lam, U = eigh(scaled_quadrature)
    return (U * np.cos(lam + offset)) @ U.T


def quadrature_cosine(
    d_keep: int, amplitude: float, offset: float, fock_buffer: int,
    check_buffer: bool = True,
) -> np.ndarray:
    """cos(amplitude * (c + c^dag) + offset) on the lowest ``d_keep`` Fock states.

    Built by spectral decomposition of the quadrature in dimension
    ``d_keep + fock_buffer`` and truncated. A convergence probe with a
    larger buffer warns if the retained block is not converged to
    ``BUFFER_CONVERGENCE_TOL``.
    """
    d = d_keep + fock_buffer
    M = _spectral_cosine(amplitude * _fock_quadrature(d), offset)[:d_keep, :d_keep]
    if check_buffer:
        d2 = d_keep + fock_buffer + 16
        M2 = _spectral_cosine(amplitude * _fock_quadrature(d2), offset)[:d_keep, :d_keep]
        err = np.abs(M - M2).max()
        if err > BUFFER_CONVERGENCE_TOL:
            warnings.warn(
                f"fock_buffer={fock_buffer} too small: retained cosine block "
                f"changes by {err:.2e} when the buffer grows",
                TruncationWarning,
                stacklevel=2,
            )
    return M


def _truncated_x_squared(d_keep: int, fock_buffer: int) -> np.ndarray:
    X = _fock_quadrature(d_keep + max(fock_buffer, 2))
    return (X @ X)[:d_keep, :d_keep]


# ---------------------------------------------------------------------------
# Hamiltonian builders
# ---------------------------------------------------------------------------

def build_cosphi_two_mode(
    params: CircuitParams,
    modes: DerivedModes,
    spec: HilbertSpec,
    transmon: TransmonEigenbasis | None = None,
) -> HermitianOperator:
    """Undriven transmon (x) cavity-polariton Hamiltonian with cos-phi coupling.

    Frozen-ancilla reduction of the three-mode model: with
    ``G_a = exp(-phi_a^2 u_aa^2 / 2)`` and
    ``C = cos(phi_c (c + c^dag) + phi_ext_bar)``,

    ``H = H_q + omega_c n_c - 2 E_J G_a C - E_J phi_c^2 X^2
          - 2 E_J [cos(phi_q) - 1] (x) (G_a C - 1)``.

    The ``E_J phi_c^2 X^2`` subtraction removes the quadratic part of the
    junction cosine already absorbed into the polariton frequency; the
    quartic remainder supplies the small cavity self-Kerr.
    """
    if transmon is None:
        transmon = transmon_eigensystem(params, spec)
    D, d_c = transmon.D, spec.d_c
    E_J = params.E_J
    G_a = modes.gauss_a
    C = quadrature_cosine(d_c, modes.phi_c, modes.phi_ext_bar, spec.fock_buffer)
    X2 = _truncated_x_squared(d_c, spec.fock_buffer)
    n_c = np.diag(np.arange(d_c, dtype=float))
    Id_q, Id_c = np.eye(D), np.eye(d_c)

    H_c = modes.omega_c_pol * n_c - 2.0 * E_J * G_a * C - E_J * modes.phi_c**2 * X2
    H = (
        np.kron(np.diag(transmon.energies), Id_c)
        + np.kron(Id_q, H_c)
        - 2.0 * E_J * np.kron(transmon.cos_phi - Id_q, G_a * C - Id_c)
    )
    return HermitianOperator(
        data=H, basis=(("transmon-eigen", D), ("cavity-fock", d_c))
    )


def build_transverse_two_mode(
    params: CircuitParams,
    g_qc: float,
    spec: HilbertSpec,
    omega_c: float | None = None,
    transmon: TransmonEigenbasis | None = None,
) -> HermitianOperator:
    """Undriven transversely coupled reference model on the same basis.

    ``H = H_q + omega_c n_c - i g_qc n_q (c - c^dag)`` with the same
    two-junction transmon as the cos-phi model.
    """
    if transmon is None:
        transmon = transmon_eigensystem(params, spec)
    if omega_c is None:
        omega_c = normal_modes(params).omega_c_pol
    D, d_c = transmon.D, spec.d_c
    c_op = np.diag(np.sqrt(np.arange(1.0, d_c)), 1)
    momentum = -1j * (c_op - c_op.T)
    n_c = np.diag(np.arange(d_c, dtype=float))
    H = (
        np.kron(np.diag(transmon.energies), np.eye(d_c)).astype(complex)
        + omega_c * np.kron(np.eye(D), n_c)
        + g_qc * np.kron(transmon.n_op, momentum)
    )
    return HermitianOperator(
        data=H, basis=(("transmon-eigen", D), ("cavity-fock", d_c))
    )


def build_three_mode(
    params: CircuitParams,
    modes: DerivedModes,
    spec: HilbertSpec,
    transmon: TransmonEigenbasis | None = None,
    max_dim: int = 8192,
    ancilla_buffer: int = 6,
) -> HermitianOperator:
    """Full transmon (x) ancilla (x) cavity Hamiltonian.

    The two-quadrature Josephson cosine
    ``cos(phi_a [u_aa X_a + u_ac X_c] + phi_ext_bar)`` is built by spectral
    decomposition of the joint quadrature in a buffered Fock space. As in
    the two-mode model, the quadratic part already absorbed into the
    polariton frequencies is subtracted.
    """
    if spec.d_a < 2:
        raise ParameterError("build_three_mode requires d_a >= 2")
    if transmon is None:
        transmon = transmon_eigensystem(params, spec)
    D, d_a, d_c = transmon.D, spec.d_a, spec.d_c
    dim = D * d_a * d_c
    if dim > max_dim:
        raise ParameterError(
            f"three-mode dimension D*d_a*d_c = {dim} exceeds the cap {max_dim}; "
            "reduce d_c or freeze the ancilla (build_cosphi_two_mode), "
            "or raise max_dim explicitly"
        )
    E_J = params.E_J
    da_b, dc_b = d_a + ancilla_buffer, d_c + spec.fock_buffer
    # the joint quadrature separates: its eigenbasis is the product of the
    # single-mode quadrature eigenbases, so the spectral decomposition only
    # needs the two small factors
    xa, Ua = eigh(_fock_quadrature(da_b))
    xc, Uc = eigh(_fock_quadrature(dc_b))
    lam = modes.phi_a * (
        modes.u[0, 0] * xa[:, None] + modes.u[0, 1] * xc[None, :]
    ).ravel()
    B = np.kron(Ua[:d_a, :], Uc[:d_c, :])  # kept rows of the joint eigenbasis
    cos_Y = (B * np.cos(lam + modes.phi_ext_bar)) @ B.T
    Y2 = (B * lam**2) @ B.T

    n_a = np.kron(np.diag(np.arange(d_a, dtype=float)), np.eye(d_c))
    n_c = np.kron(np.eye(d_a), np.diag(np.arange(d_c, dtype=float)))
    Id_ac = np.eye(d_a * d_c)
    H_ac = (
        modes.omega_a_pol * n_a
        + modes.omega_c_pol * n_c
        - 2.0 * E_J * cos_Y
        - E_J * Y2
    )
    H = (
        np.kron(np.diag(transmon.energies), Id_ac)
        + np.kron(np.eye(D), H_ac)
        - 2.0 * E_J * np.kron(transmon.cos_phi - np.eye(D), cos_Y - Id_ac)
    )
    return HermitianOperator(
        data=H,
        basis=(("transmon-eigen", D), ("ancilla-fock", d_a), ("cavity-fock", d_c)),
    )
