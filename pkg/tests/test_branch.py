import numpy as np
import pytest
from scipy.linalg import eigh
from scipy.optimize import linear_sum_assignment

from cosphi.branch import (
    BranchTable,
    ac_stark_curve,
    diagonalize_and_label,
    find_crossings,
    mist_map_over_flux,
    nt_expectation,
    _label_eigensystem,
)
from cosphi.hilbert import build_cosphi_two_mode, normal_modes, transmon_eigensystem
from cosphi.params import CircuitParams, HilbertSpec, ParameterError


# ---------------------------------------------------------------------------
# labeling
# ---------------------------------------------------------------------------

def _toy_coupled_hamiltonian(D=3, d_c=4, coupling=0.02):
    """Weakly coupled transmon-like (x) cavity toy model."""
    eps = np.array([0.0, 2.1, 4.1])[:D]
    X = np.diag(np.sqrt(np.arange(1.0, d_c)), 1)
    X = X + X.T
    q = np.diag(np.sqrt(np.arange(1.0, D)), 1)
    H = np.kron(np.diag(eps), np.eye(d_c)) + 7.3 * np.kron(
        np.eye(D), np.diag(np.arange(d_c, dtype=float))
    )
    H += coupling * np.kron(q + q.T, X)
    return H


def test_small_instance_matches_global_assignment_oracle():
    # oracle: Hungarian assignment of all 12 eigenstates to product labels
    D, d_c = 3, 4
    H = _toy_coupled_hamiltonian(D, d_c)
    table = diagonalize_and_label(H, D, d_c, usable_margin=0.0)
    w, V = eigh(H)
    row, col = linear_sum_assignment(-np.abs(V) ** 2)
    oracle = np.empty(D * d_c, dtype=int)
    oracle[row] = col
    np.testing.assert_array_equal(table.state_index.ravel(), oracle)


def test_decoupled_labels_product_basis(params):
    from cosphi.hilbert import build_transverse_two_mode

    spec = HilbertSpec(D=6, d_c=8)
    jgrid = np.tile(np.arange(6)[:, None], (1, 8)).astype(float)
    # transverse model at g = 0 is exactly a tensor sum
    H = build_transverse_two_mode(params, 0.0, spec)
    table = diagonalize_and_label(H, 6, 8)
    np.testing.assert_allclose(table.nt, jgrid, atol=1e-10)
    assert np.nanmin(table.label_confidence) > 0.999
    # cos-phi model with the linear coupling off: the junction still dresses
    # the transmon through the frozen ancilla, at the 1e-4 level
    p = params.replace(g_ac=0.0)
    H = build_cosphi_two_mode(p, normal_modes(p), spec)
    table = diagonalize_and_label(H, 6, 8)
    np.testing.assert_allclose(table.nt, jgrid, atol=1e-3)


def test_labels_are_a_bijection(table_flux0):
    assigned = table_flux0.state_index[table_flux0.state_index >= 0]
    assert len(assigned) == len(set(assigned.tolist()))


def test_label_permutation_invariance():
    D, d_c = 3, 4
    H = _toy_coupled_hamiltonian(D, d_c)
    w, V = eigh(H)
    w -= w[0]
    table = _label_eigensystem(w, V, D, d_c)
    rng = np.random.default_rng(7)
    perm = rng.permutation(D * d_c)
    shuffled = _label_eigensystem(w[perm], V[:, perm], D, d_c)
    np.testing.assert_allclose(shuffled.energy, table.energy, atol=1e-14)
    np.testing.assert_allclose(shuffled.nt, table.nt, atol=1e-14)


def test_energy_bookkeeping(table_flux0):
    assigned = table_flux0.state_index[table_flux0.state_index >= 0]
    total = np.nansum(table_flux0.energy)
    trace = table_flux0.eigenvalues[assigned].sum()
    assert total == pytest.approx(trace, rel=1e-8)


def test_low_rung_confidence_is_unity_at_weak_dressing(table_flux0):
    assert table_flux0.label_confidence[0, 0] > 0.99
    assert table_flux0.nt[1, 0] == pytest.approx(1.0, abs=0.05)


# ---------------------------------------------------------------------------
# <N_t> expectation
# ---------------------------------------------------------------------------

def test_nt_of_product_and_superposition_states():
    D, d_c = 5, 3
    dim = D * d_c
    vec = np.zeros((dim, 2))
    vec[np.ravel_multi_index((3, 1), (D, d_c)), 0] = 1.0  # |3, 1>
    vec[np.ravel_multi_index((0, 2), (D, d_c)), 1] = 1.0 / np.sqrt(2)
    vec[np.ravel_multi_index((4, 0), (D, d_c)), 1] = 1.0 / np.sqrt(2)
    nt = nt_expectation(D, vec, d_c)
    assert nt[0] == pytest.approx(3.0, abs=1e-14)
    assert nt[1] == pytest.approx(2.0, abs=1e-14)


def test_nt_table_wrapper(table_flux0, params, modes):
    spec = HilbertSpec(D=10, d_c=80)
    tr = transmon_eigensystem(params, spec)
    H = build_cosphi_two_mode(params, modes, spec, transmon=tr)
    w, V = eigh(H.data)
    nt = nt_expectation(table_flux0, V)
    np.testing.assert_allclose(nt, table_flux0.nt, atol=1e-12)


def test_flat_branches_at_zero_flux(table_flux0):
    # no discernible structure on the computational branches
    top = int(0.95 * table_flux0.d_c_usable)
    assert np.nanmax(np.abs(table_flux0.nt[0, :top])) < 0.1
    assert np.nanmax(np.abs(table_flux0.nt[1, :top] - 1.0)) < 0.1


def test_nt_interchange_across_avoided_crossing(table_flux04):
    """Branches 1 and 5 exchange transmon character across their crossing."""
    ev = [e for e in find_crossings(table_flux04, [(1, 5)]) if e.kind == "avoided"]
    assert len(ev) == 1
    n_star = int(round(ev[0].n_c_star))
    before = slice(max(n_star - 4, 0), n_star - 1)
    after = slice(n_star + 2, n_star + 5)
    assert np.nanmax(np.abs(table_flux04.nt[1, before] - 1.0)) < 0.3
    assert np.nanmax(np.abs(table_flux04.nt[5, before] - 5.0)) < 0.3
    assert np.nanmax(np.abs(table_flux04.nt[1, after] - 5.0)) < 0.3
    assert np.nanmax(np.abs(table_flux04.nt[5, after] - 1.0)) < 0.3


def test_hybridization_at_04_crossing(table_flux04):
    # the (0,4) crossing is narrower than one rung: the branches mix near
    # n_c_star and recover their character past it
    ev = [e for e in find_crossings(table_flux04, [(0, 4)]) if e.kind == "avoided"]
    n_star = int(round(ev[0].n_c_star))
    window = slice(n_star - 2, n_star + 3)
    assert np.nanmax(table_flux04.nt[0, window]) > 0.3
    assert np.nanmin(table_flux04.nt[4, window]) < 3.7
    assert abs(table_flux04.nt[0, n_star + 6]) < 0.1


# ---------------------------------------------------------------------------
# crossings
# ---------------------------------------------------------------------------

def test_flux_activated_crossings(table_flux04):
    events = find_crossings(table_flux04, [(0, 4), (1, 5)])
    by_pair = {e.branch_pair: e for e in events}
    e04 = by_pair[(0, 4)]
    assert e04.kind == "avoided"
    assert e04.n_c_star == pytest.approx(54.6, abs=2.0)
    assert e04.gap_mhz == pytest.approx(4.0, abs=1.0)
    e15 = by_pair[(1, 5)]
    assert e15.kind == "avoided"
    assert e15.n_c_star == pytest.approx(13, abs=8)


def test_zero_flux_crossings_are_exact(table_flux0):
    events = find_crossings(table_flux0, [(0, 4), (1, 5)])
    assert all(e.kind == "exact" for e in events)
    assert all(e.gap_mhz < 0.05 for e in events)
    assert any(e.branch_pair == (0, 4) for e in events)


def test_gap_symmetry(table_flux04):
    fwd = find_crossings(table_flux04, [(0, 4)])
    rev = find_crossings(table_flux04, [(4, 0)])
    assert len(fwd) == len(rev)
    for a, b in zip(fwd, rev):
        assert a.n_c_star == b.n_c_star
        assert a.gap_mhz == b.gap_mhz


def test_empty_result_is_valid(table_flux0):
    assert find_crossings(table_flux0, [(0, 2)]) == []


def test_decoupled_analytic_crossing_with_artificial_detuning():
    # closed form: E(j, n) = eps_j + w n + eps2 n^2 crosses (0,4) with one
    # exchanged photon at n* = (w_04 - w - eps2) / (2 eps2)
    D, d_c = 5, 90
    eps = np.array([0.0, 2.07, 4.08, 6.0, 7.8])
    w_c, eps2 = 7.3, 0.004
    n = np.arange(d_c, dtype=float)
    H = np.diag(
        (eps[:, None] + w_c * n[None, :] + eps2 * n[None, :] ** 2).ravel()
    )
    table = diagonalize_and_label(H, D, d_c)
    events = find_crossings(table, [(0, 4)], detection_window_mhz=1e5)
    n_star_exact = (eps[4] - w_c - eps2) / (2 * eps2)
    assert len(events) == 1
    assert events[0].n_c_star == pytest.approx(n_star_exact, abs=0.5)
    assert events[0].kind == "exact"


def test_crossing_convergence_in_d_c(params):
    stars = {}
    for d_c in (120, 150):
        spec = HilbertSpec(D=10, d_c=d_c)
        p = params.replace(flux_ext=-0.04)
        H = build_cosphi_two_mode(p, normal_modes(p), spec)
        table = diagonalize_and_label(H, 10, d_c, flux_ext=-0.04)
        ev = find_crossings(table, [(0, 4)])
        stars[d_c] = [e for e in ev if e.kind == "avoided"][0].n_c_star
    assert abs(stars[120] - stars[150]) < 2.0


# ---------------------------------------------------------------------------
# AC Stark curves
# ---------------------------------------------------------------------------

def test_stark_slope_is_cross_kerr(table_flux0):
    curve = ac_stark_curve(table_flux0, (0, 1), fit_window=20)
    assert curve.slope * 1e3 == pytest.approx(-2.02, rel=0.10)


def test_stark_extrapolated_crossing(table_flux04):
    curve = ac_stark_curve(table_flux04, (0, 4), fit_window=30)
    ladder = table_flux04.ladder_frequency(0)
    detuning_mhz = (curve.intercept - ladder) * 1e3
    assert detuning_mhz == pytest.approx(450, abs=10)  # frozen model value
    n_star = curve.extrapolated_crossing(ladder)
    events = find_crossings(table_flux04, [(0, 4)])
    assert n_star == pytest.approx(events[0].n_c_star, abs=4.0)


def test_stark_curve_truncated_branch_raises():
    energy = np.full((2, 10), np.nan)
    energy[0, :] = np.arange(10.0)
    energy[1, 0] = 2.0  # branch 1 truncated after the first rung
    table = BranchTable(
        D=2, d_c=10, d_c_usable=9,
        energy=energy, nt=np.zeros((2, 10)),
        label_confidence=np.ones((2, 10)),
        state_index=np.zeros((2, 10), dtype=int),
        eigenvalues=np.arange(20.0),
    )
    with pytest.raises(ParameterError, match="truncated"):
        ac_stark_curve(table, (0, 1), fit_window=5)


# ---------------------------------------------------------------------------
# MIST map over flux
# ---------------------------------------------------------------------------

def test_mist_map_rejects_out_of_range_flux(params):
    with pytest.raises(ParameterError, match="0.2"):
        mist_map_over_flux(params, [0.3], [(0, 4)], spec=HilbertSpec(D=6, d_c=8))


def test_zero_photon_disappearance_fluxes(params):
    spec = HilbertSpec(D=10, d_c=16)
    mm04 = mist_map_over_flux(params, [0.12, 0.15, 0.18], [(0, 4)], spec=spec)
    roots04 = mm04.disappearance_flux[(0, 4)]
    assert len(roots04) == 1
    assert roots04[0] == pytest.approx(0.16, abs=0.02)
    mm15 = mist_map_over_flux(params, [0.05, 0.075, 0.10], [(1, 5)], spec=spec)
    roots15 = mm15.disappearance_flux[(1, 5)]
    assert len(roots15) == 1
    assert roots15[0] == pytest.approx(0.07, abs=0.02)


def test_mist_map_flux_symmetry(params):
    spec = HilbertSpec(D=10, d_c=70)
    mm = mist_map_over_flux(params, [-0.04, 0.04], [(0, 4)], spec=spec)
    stars = mm.n_c_star[(0, 4)]
    assert np.all(np.isfinite(stars))
    assert stars[0] == pytest.approx(stars[1], abs=0.5)
