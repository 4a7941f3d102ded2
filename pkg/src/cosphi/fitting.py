"""Weighted least-squares fit of circuit parameters to flux-swept
transition-frequency data.

The forward model is the small three-mode Hamiltonian (transmon, ancilla
polariton, cavity polariton) whose eigenstates are labeled by maximal
overlap against the bare product states; transition frequencies for the
requested identifiers (``q01``, ``q02``, ``q04``, ``a01``, ``c01``) are
read off the labeled spectrum. The cost rescales each point's distance by
its bandwidth so every digitized point weighs equally, plus anchor terms
for precisely measured observables.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import linear_sum_assignment, minimize

from .hilbert import build_three_mode, normal_modes, transmon_eigensystem
from .params import CircuitParams, HilbertSpec, ParameterError

__all__ = [
    "DigitizedPoint",
    "FitProblem",
    "FitResult",
    "FIT_SPEC",
    "model_transitions",
    "weighted_cost",
    "fit",
    "transition_jacobian",
    "synthetic_points",
]

#: truncation used by the forward model: plenty for single-excitation lines
FIT_SPEC = HilbertSpec(n_charge=201, D=8, d_c=3, d_a=3, fock_buffer=16)

#: cost added per point whose labeling failed at pathological trial params
INVALID_POINT_PENALTY = 1.0e6

TRANSITION_IDS = ("q01", "q02", "q04", "a01", "c01")
ANCHOR_IDS = ("omega_q", "omega_c", "chi_qc")
DEFAULT_FREE = ("E_Cq", "E_Ca", "E_J", "L_a0", "omega_c_bare", "g_ac")


@dataclass(frozen=True)
class DigitizedPoint:
    """One digitized spectroscopy point."""

    flux_ext: float
    transition_id: str
    freq: float        # GHz
    band_weight: float  # GHz

    def __post_init__(self):
        if self.freq <= 0:
            raise ParameterError(f"freq must be positive, got {self.freq}")
        if self.band_weight <= 0:
            raise ParameterError(f"band_weight must be positive, got {self.band_weight}")


@dataclass(frozen=True)
class FitProblem:
    """Digitized points, anchored observables and the free-parameter set."""

    points: tuple
    anchors: tuple = ()      # of (observable_id, target_GHz, window_GHz)
    free_params: tuple = DEFAULT_FREE
    bounds: dict = field(default_factory=dict)

    def __post_init__(self):
        for oid, _, window in self.anchors:
            if window <= 0:
                raise ParameterError(f"anchor window for {oid} must be positive")
            if oid not in ANCHOR_IDS:
                raise ParameterError(f"unknown anchor observable {oid!r}")
        for name in self.free_params:
            if name not in CircuitParams.__dataclass_fields__:
                raise ParameterError(f"unknown free parameter {name!r}")

    def bounds_for(self, initial: CircuitParams) -> list:
        """Per-free-parameter bounds, defaulting to +-50% around initial."""
        out = []
        for name in self.free_params:
            if name in self.bounds:
                out.append(tuple(self.bounds[name]))
            else:
                x0 = getattr(initial, name)
                out.append((0.5 * x0, 1.5 * x0))
        return out


@dataclass
class FitResult:
    params: CircuitParams
    fitted: dict
    cost: float
    residuals: np.ndarray  # per-point weighted residuals
    n_evaluations: int
    n_starts: int
    converged: bool
    start_costs: list


# ---------------------------------------------------------------------------
# forward model
# ---------------------------------------------------------------------------

def _label_product_states(H_data: np.ndarray, dims: tuple):
    """Globally assign eigenstates to product labels by maximal overlap.

    Returns (energies, index) where ``index[j, n_a, n_c]`` is the
    eigenstate assigned to that product label; the assignment is a
    bijection maximizing the total squared overlap.
    """
    w, V = eigh(H_data)
    w = w - w[0]
    dim = V.shape[0]
    overlap2 = np.abs(V) ** 2  # rows: product basis, cols: eigenstates
    row, col = linear_sum_assignment(-overlap2)
    index = np.empty(dim, dtype=int)
    index[row] = col
    return w, index.reshape(dims)


def _spectrum_observables(params: CircuitParams, spec: HilbertSpec, transmon=None):
    """Labeled single-excitation energies of the three-mode model."""
    if transmon is None:
        transmon = transmon_eigensystem(params, spec)
    modes = normal_modes(params)
    H = build_three_mode(params, modes, spec, transmon=transmon)
    dims = tuple(d for _, d in H.basis)
    w, index = _label_product_states(H.data, dims)

    def level(j, n_a, n_c):
        return w[index[j, n_a, n_c]]

    E0 = level(0, 0, 0)
    out = {
        "q01": level(1, 0, 0) - E0,
        "q02": level(2, 0, 0) - E0,
        "q04": level(4, 0, 0) - E0,
        "a01": level(0, 1, 0) - E0,
        "c01": level(0, 0, 1) - E0,
    }
    out["chi_qc"] = level(1, 0, 1) - level(1, 0, 0) - level(0, 0, 1) + E0
    return out


def model_transitions(
    params: CircuitParams,
    flux_grid,
    ids=TRANSITION_IDS,
    spec: HilbertSpec = FIT_SPEC,
):
    """Predicted transition frequencies on a flux grid.

    Returns ``{transition_id: array}``; entries are NaN where the labeling
    failed (pathological trial parameters), which the cost treats as an
    invalid point with a large penalty.
    """
    flux_grid = np.asarray(flux_grid, dtype=float)
    unknown = set(ids) - set(TRANSITION_IDS)
    if unknown:
        raise ParameterError(f"unknown transition ids: {sorted(unknown)}")
    out = {tid: np.full(len(flux_grid), np.nan) for tid in ids}
    try:
        transmon = transmon_eigensystem(params, spec)  # flux independent
    except (ParameterError, np.linalg.LinAlgError, ValueError):
        return out
    for i, flux in enumerate(flux_grid):
        try:
            obs = _spectrum_observables(
                params.replace(flux_ext=float(flux)), spec, transmon=transmon
            )
        except (ParameterError, np.linalg.LinAlgError, ValueError):
            continue
        for tid in ids:
            out[tid][i] = obs[tid]
    return out


def weighted_cost(
    problem: FitProblem,
    trial: CircuitParams,
    spec: HilbertSpec = FIT_SPEC,
    return_residuals: bool = False,
):
    """Sum of squared bandwidth-rescaled distances plus anchor terms."""
    points = sorted(
        problem.points, key=lambda p: (p.flux_ext, p.transition_id, p.freq)
    )
    flux_values = sorted({p.flux_ext for p in points} | ({0.0} if problem.anchors else set()))
    try:
        transmon = transmon_eigensystem(trial, spec)  # flux independent
    except (ParameterError, np.linalg.LinAlgError, ValueError):
        transmon = None
    cache = {}
    for flux in flux_values:
        if transmon is None:
            cache[flux] = None
            continue
        try:
            cache[flux] = _spectrum_observables(
                trial.replace(flux_ext=flux), spec, transmon=transmon
            )
        except (ParameterError, np.linalg.LinAlgError, ValueError):
            cache[flux] = None
    residuals = np.empty(len(points))
    for i, p in enumerate(points):
        obs = cache[p.flux_ext]
        if obs is None or not np.isfinite(obs.get(p.transition_id, np.nan)):
            residuals[i] = np.sqrt(INVALID_POINT_PENALTY)
        else:
            residuals[i] = (obs[p.transition_id] - p.freq) / p.band_weight
    cost = float(np.sum(residuals**2))
    if problem.anchors:
        obs0 = cache[0.0]
        for oid, target, window in problem.anchors:
            if obs0 is None:
                cost += INVALID_POINT_PENALTY
                continue
            value = obs0["q01"] if oid == "omega_q" else (
                obs0["c01"] if oid == "omega_c" else obs0["chi_qc"]
            )
            cost += ((value - target) / window) ** 2
    if return_residuals:
        return cost, residuals
    return cost


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("COSPHI_THREADS", "1")))
    except ValueError:
        return 1


def fit(
    problem: FitProblem,
    initial: CircuitParams,
    spec: HilbertSpec = FIT_SPEC,
    n_starts: int = 8,
    seed: int = 0,
    perturbation: float = 0.05,
    maxiter: int = 800,
    xatol: float = 1e-7,
    fatol: float = 1e-10,
) -> FitResult:
    """Bounded derivative-free local fit with multi-start.

    ``n_starts - 1`` additional starts are drawn by perturbing the free
    parameters uniformly by up to ``perturbation`` (relative), clipped to
    the bounds; each start runs a bounded Nelder-Mead simplex and the best
    final cost wins. Raises only if every start fails to produce a finite
    cost; otherwise the best effort is returned with ``converged`` from
    the winning start.
    """
    free = list(problem.free_params)
    bounds = problem.bounds_for(initial)
    x0 = np.array([getattr(initial, name) for name in free], dtype=float)
    for x, (lo, hi), name in zip(x0, bounds, free):
        if not (lo <= x <= hi):
            raise ParameterError(f"initial {name} = {x} outside bounds ({lo}, {hi})")

    evaluations = [0]

    def cost_of(x):
        evaluations[0] += 1
        trial = initial.replace(**{n: float(v) for n, v in zip(free, x)})
        return weighted_cost(problem, trial, spec)

    rng = np.random.default_rng(seed)
    starts = [x0]
    for _ in range(n_starts - 1):
        x = x0 * (1.0 + perturbation * rng.uniform(-1.0, 1.0, size=len(free)))
        starts.append(np.clip(x, [b[0] for b in bounds], [b[1] for b in bounds]))

    def run(x_start):
        return minimize(
            cost_of, x_start, method="Nelder-Mead", bounds=bounds,
            options={"maxiter": maxiter, "xatol": xatol, "fatol": fatol},
        )

    workers = _worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run, starts))
    else:
        results = [run(x) for x in starts]

    finite = [r for r in results if np.isfinite(r.fun)]
    if not finite:
        raise ParameterError("all fit starts failed to converge")
    best = min(finite, key=lambda r: r.fun)
    fitted = {n: float(v) for n, v in zip(free, best.x)}
    final = initial.replace(**fitted)
    cost, residuals = weighted_cost(problem, final, spec, return_residuals=True)
    return FitResult(
        params=final, fitted=fitted, cost=cost, residuals=residuals,
        n_evaluations=evaluations[0], n_starts=n_starts,
        converged=bool(best.success), start_costs=[float(r.fun) for r in results],
    )


def transition_jacobian(
    params: CircuitParams,
    flux_grid,
    ids=TRANSITION_IDS,
    free_params=DEFAULT_FREE,
    spec: HilbertSpec = FIT_SPEC,
    rel_step: float = 1e-4,
):
    """Finite-difference Jacobian of the stacked transitions and its
    condition number; full column rank certifies identifiability."""
    flux_grid = np.asarray(flux_grid, dtype=float)

    def stack(p):
        model = model_transitions(p, flux_grid, ids, spec)
        return np.concatenate([model[tid] for tid in ids])

    base = stack(params)
    J = np.empty((base.size, len(free_params)))
    for k, name in enumerate(free_params):
        x = getattr(params, name)
        h = rel_step * abs(x)
        up = stack(params.replace(**{name: x + h}))
        dn = stack(params.replace(**{name: x - h}))
        J[:, k] = (up - dn) / (2.0 * h)
    # scale columns by parameter magnitude for a dimensionless condition number
    scales = np.array([abs(getattr(params, n)) for n in free_params])
    s = np.linalg.svd(J * scales, compute_uv=False)
    cond = float(s[0] / s[-1]) if s[-1] > 0 else float("inf")
    return J, cond


def synthetic_points(
    params: CircuitParams,
    flux_grid,
    ids=TRANSITION_IDS,
    band_weight: float = 0.010,
    noise: float = 0.0,
    seed: int = 0,
    spec: HilbertSpec = FIT_SPEC,
):
    """Generate noiseless or multiplicatively noisy digitized points."""
    model = model_transitions(params, flux_grid, ids, spec)
    rng = np.random.default_rng(seed)
    points = []
    for tid in ids:
        for flux, freq in zip(flux_grid, model[tid]):
            if not np.isfinite(freq):
                continue
            f = freq * (1.0 + noise * rng.standard_normal()) if noise else freq
            points.append(DigitizedPoint(float(flux), tid, float(f), band_weight))
    return tuple(points)
