"""Shared fixtures. Expensive diagonalizations are session-scoped."""

import numpy as np
import pytest
from scipy.linalg import eigh

from cosphi.branch import diagonalize_and_label
from cosphi.hilbert import (
    build_cosphi_two_mode,
    build_transverse_two_mode,
    matched_transverse_coupling,
    normal_modes,
    transmon_eigensystem,
)
from cosphi.params import CircuitParams, HilbertSpec


@pytest.fixture(scope="session")
def params():
    return CircuitParams()


@pytest.fixture(scope="session")
def modes(params):
    return normal_modes(params)


@pytest.fixture(scope="session")
def transmon(params):
    return transmon_eigensystem(params, HilbertSpec(D=12, d_c=2))


@pytest.fixture(scope="session")
def two_mode_small(params, modes):
    """cos-phi model at flux 0, D=10, d_c=40: enough for low-lying spectra."""
    spec = HilbertSpec(D=10, d_c=40)
    tr = transmon_eigensystem(params, spec)
    H = build_cosphi_two_mode(params, modes, spec, transmon=tr)
    w, V = eigh(H.data)
    return H, w - w[0], V


@pytest.fixture(scope="session")
def table_flux0(params, modes):
    """Labeled cos-phi branch table at flux 0, d_c=80."""
    spec = HilbertSpec(D=10, d_c=80)
    tr = transmon_eigensystem(params, spec)
    H = build_cosphi_two_mode(params, modes, spec, transmon=tr)
    return diagonalize_and_label(H, spec.D, spec.d_c, flux_ext=0.0)


@pytest.fixture(scope="session")
def table_flux04(params):
    """Labeled cos-phi branch table at flux -0.04, d_c=80."""
    spec = HilbertSpec(D=10, d_c=80)
    p = params.replace(flux_ext=-0.04)
    tr = transmon_eigensystem(p, spec)
    H = build_cosphi_two_mode(p, normal_modes(p), spec, transmon=tr)
    return diagonalize_and_label(H, spec.D, spec.d_c, flux_ext=-0.04)


def product_label(V, dims):
    """Max-overlap label helper for low-lying product states."""

    def lab(*indices):
        flat = np.ravel_multi_index(indices, dims)
        return int(np.argmax(np.abs(V[flat, :]) ** 2))

    return lab
