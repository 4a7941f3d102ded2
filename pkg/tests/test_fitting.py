import numpy as np
import pytest

from cosphi.fitting import (
    FIT_SPEC,
    DigitizedPoint,
    FitProblem,
    fit,
    model_transitions,
    synthetic_points,
    transition_jacobian,
    weighted_cost,
)
from cosphi.params import CircuitParams, ParameterError


@pytest.fixture(scope="module")
def flux_grid():
    return np.linspace(-0.2, 0.2, 9)


@pytest.fixture(scope="module")
def clean_points(params, flux_grid):
    return synthetic_points(params, flux_grid)


# ---------------------------------------------------------------------------
# forward model
# ---------------------------------------------------------------------------

def test_model_transitions_at_zero_flux(params):
    model = model_transitions(params, [0.0])
    assert model["q01"][0] == pytest.approx(2.0693, abs=0.005)
    assert model["c01"][0] == pytest.approx(7.2938, abs=0.010)
    assert model["a01"][0] == pytest.approx(6.502, abs=0.015)


def test_q04_transition_near_readout_mode(params):
    model = model_transitions(params.replace(), [-0.04], ids=("q04",))
    assert model["q04"][0] == pytest.approx(7.728, abs=0.030)


def test_decoupled_cavity_line_is_flux_flat(params, flux_grid):
    p = params.replace(g_ac=0.0)
    model = model_transitions(p, flux_grid, ids=("c01",))
    np.testing.assert_allclose(model["c01"], p.omega_c_bare, atol=1e-9)


def test_unknown_transition_id_rejected(params):
    with pytest.raises(ParameterError, match="unknown transition"):
        model_transitions(params, [0.0], ids=("q03",))


def test_point_validation():
    with pytest.raises(ParameterError):
        DigitizedPoint(0.0, "q01", -1.0, 0.01)
    with pytest.raises(ParameterError):
        DigitizedPoint(0.0, "q01", 2.0, 0.0)


# ---------------------------------------------------------------------------
# cost
# ---------------------------------------------------------------------------

def test_cost_vanishes_at_generator_params(params, clean_points):
    problem = FitProblem(points=clean_points, anchors=())
    assert weighted_cost(problem, params) < 1e-6


def test_single_point_shift_costs_one_unit(params, clean_points):
    p0 = clean_points[0]
    shifted = (
        DigitizedPoint(p0.flux_ext, p0.transition_id, p0.freq + p0.band_weight, p0.band_weight),
    ) + clean_points[1:]
    problem = FitProblem(points=shifted, anchors=())
    assert weighted_cost(problem, params) == pytest.approx(1.0, abs=1e-6)


def test_band_weight_quadratic_scaling(params, clean_points):
    noisy = tuple(
        DigitizedPoint(p.flux_ext, p.transition_id, p.freq * 1.0001, p.band_weight)
        for p in clean_points
    )
    cost1 = weighted_cost(FitProblem(points=noisy, anchors=()), params)
    doubled = tuple(
        DigitizedPoint(p.flux_ext, p.transition_id, p.freq, 2 * p.band_weight)
        for p in noisy
    )
    cost2 = weighted_cost(FitProblem(points=doubled, anchors=()), params)
    assert cost2 == pytest.approx(cost1 / 4, rel=1e-9)


def test_cost_permutation_invariance(params, clean_points):
    problem = FitProblem(points=clean_points, anchors=())
    rng = np.random.default_rng(0)
    perm = tuple(clean_points[i] for i in rng.permutation(len(clean_points)))
    shuffled = FitProblem(points=perm, anchors=())
    assert weighted_cost(problem, params) == weighted_cost(shuffled, params)


def test_pathological_trial_is_penalized(params, clean_points):
    problem = FitProblem(points=clean_points, anchors=())
    # ancilla pushed onto the cavity: labeling/normal modes break down
    bad = params.replace(omega_c_bare=6.59, g_ac=0.0001)
    assert weighted_cost(problem, bad) > 1e3


def test_anchor_windows_validated(clean_points):
    with pytest.raises(ParameterError, match="window"):
        FitProblem(points=clean_points, anchors=(("omega_q", 2.0687, 0.0),))
    with pytest.raises(ParameterError, match="observable"):
        FitProblem(points=clean_points, anchors=(("omega_p", 2.0687, 0.01),))


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def test_single_parameter_round_trip(params, clean_points):
    problem = FitProblem(points=clean_points, anchors=(), free_params=("E_J",))
    start = params.replace(E_J=params.E_J * 1.10)
    result = fit(problem, start, n_starts=1)
    assert abs(result.fitted["E_J"] / params.E_J - 1.0) < 0.005
    assert result.cost < 1e-8


def test_initial_outside_bounds_rejected(params, clean_points):
    problem = FitProblem(
        points=clean_points, free_params=("E_J",), bounds={"E_J": (3.9, 4.0)}
    )
    with pytest.raises(ParameterError, match="outside bounds"):
        fit(problem, params.replace(E_J=4.4), n_starts=1)


def test_jacobian_full_rank(params):
    flux = np.linspace(-0.2, 0.2, 7)
    J, cond = transition_jacobian(params, flux)
    assert J.shape == (35, 6)
    s = np.linalg.svd(J, compute_uv=False)
    assert s[-1] > 0
    assert np.isfinite(cond)
    assert cond < 1e7
