"""End-to-end parameter fitting: initialization plus damped least squares.

Both estimators share one entry shape: start from a canonical parameter
set, minimize over the gauge-reduced free vector, re-canonicalize the
result.  The likelihood estimator optimizes weights explicitly (one
component frozen); the cross-relation estimator defaults to the two-step
split, re-solving the weights in closed form inside every evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import ccr as _ccr
from . import cml as _cml
from .channel import Observation, PathParameterSet, canonicalize
from .gauge import ParameterPacking, reflect_elevation
from .lm import LmOptions, LmResult, central_difference_jacobian, minimize


@dataclass(frozen=True)
class InitPolicy:
    """How trial fits are started.

    ``perturbed_truth`` draws a Gaussian perturbation around the known
    generating parameters (local-estimation studies); ``coarse_grid`` runs
    the blind successive-extraction search and ignores the scales below.
    """

    mode: str = "perturbed_truth"
    angle_sigma_deg: float = 5.0
    delay_sigma: float = 0.02
    weight_sigma_rel: float = 0.1

    def __post_init__(self):
        if self.mode not in ("perturbed_truth", "coarse_grid"):
            raise ValueError(f"unknown init mode {self.mode!r}")


def perturbed_truth_init(truth: PathParameterSet, rng: np.random.Generator,
                         policy: InitPolicy = InitPolicy()) -> PathParameterSet:
    """Truth plus zero-mean Gaussian perturbations, back in canonical gauge.

    The first path's delay stays pinned at zero; weight perturbations are
    complex Gaussians scaled to a fraction of each component's magnitude.
    """
    truth = canonicalize(truth)
    p = truth.path_count
    sig_a = np.deg2rad(policy.angle_sigma_deg)
    azimuth = truth.azimuth + sig_a * rng.standard_normal(p)
    elevation = reflect_elevation(truth.elevation + sig_a * rng.standard_normal(p))
    delay = truth.delay.copy()
    if p > 1:
        delay[1:] = (delay[1:] + policy.delay_sigma * rng.standard_normal(p - 1)) % 1.0

    def jitter(w):
        noise = (rng.standard_normal(p) + 1j * rng.standard_normal(p)) / np.sqrt(2.0)
        return w + policy.weight_sigma_rel * np.abs(w) * noise

    return canonicalize(PathParameterSet(azimuth, elevation, jitter(truth.weight_h),
                                         jitter(truth.weight_v), delay))


@dataclass(frozen=True)
class FitResult:
    estimator: str
    params: PathParameterSet
    cost: float
    lm: LmResult


def fit_cml(obs: Observation, array, init: PathParameterSet,
            opts: LmOptions = LmOptions()) -> FitResult:
    """Fit all path parameters by minimizing the projection-residual cost.

    The noise scale is irrelevant to the minimizer under white noise, so
    the optimization runs with unit whitening.
    """
    obs.grid.check_identifiable(init.path_count)
    init = canonicalize(init)
    packing = ParameterPacking.full(init)

    def residual_fn(x):
        return _cml.stacked_real_residual(obs, packing.unpack(x), array, sigma=1.0)

    def jacobian_fn(x):
        return _cml.cml_jacobian(obs, packing.unpack(x), array, packing=packing, sigma=1.0)

    result = minimize(residual_fn, jacobian_fn, packing.pack(init), opts, wrap=packing.wrap)
    return FitResult("cml", canonicalize(packing.unpack(result.x)), result.cost, result)


def fit_ccr(obs: Observation, array, init: PathParameterSet,
            opts: LmOptions = LmOptions(), mode: str = "two_step") -> FitResult:
    """Fit path parameters by minimizing the cross-relation quotient cost.

    ``two_step`` (default) searches angles and delays only, re-solving the
    weights in closed form; ``joint`` keeps the weights in the outer
    parameter vector for A/B comparison.
    """
    if mode not in ("two_step", "joint"):
        raise ValueError(f"unknown ccr mode {mode!r}")
    obs.grid.check_identifiable(init.path_count)
    init = canonicalize(init)
    blocks = _ccr.DstBlocks.from_observation(obs)

    if mode == "two_step":
        packing = ParameterPacking.nonlinear(init)

        def residual_fn(x):
            return _ccr.stacked_real_residual(obs, packing.unpack(x), array, blocks=blocks)
    else:
        packing = ParameterPacking.full(init)

        def residual_fn(x):
            p = packing.unpack(x)
            return _ccr.stacked_real_residual(obs, p, array,
                                              gamma=p.weights_interleaved(), blocks=blocks)

    def jacobian_fn(x):
        return _ccr.ccr_jacobian(obs, packing.unpack(x), array, packing=packing, blocks=blocks)

    result = minimize(residual_fn, jacobian_fn, packing.pack(init), opts, wrap=packing.wrap)
    fitted = packing.unpack(result.x)
    if mode == "two_step":
        a, m = _ccr.ccr_matrices(obs, fitted, array, blocks=blocks)
        gamma = _ccr.solve_gamma(a, m)
        fitted = replace(fitted, weight_h=gamma[0::2], weight_v=gamma[1::2])
    return FitResult("ccr", canonicalize(fitted), result.cost, result)


def _cost_fn(estimator: str):
    if estimator == "cml":
        return lambda obs, params, array: _cml.cml_evaluate(obs, params, array, sigma=1.0).cost
    if estimator == "ccr":
        return lambda obs, params, array: _ccr.ccr_evaluate(obs, params, array).cost
    raise ValueError(f"unknown estimator {estimator!r}")


def delay_rescan(obs: Observation, array, params: PathParameterSet,
                 cost: str = "ccr", window: float = 0.0625,
                 step_bins: float = 0.25, max_sweeps: int = 4) -> PathParameterSet:
    """Coordinate-descent search over the rippled delay landscape.

    The cost of either estimator oscillates along each delay coordinate
    with period 1/K, so a starting point more than half a ripple off the
    true cell strands the gradient optimizer in a side minimum.  This scan
    moves one relative delay at a time over a window of candidate offsets
    (grid spacing ``step_bins / K``) and keeps strict improvements,
    sweeping until no coordinate moves.  The default scoring cost is the
    cross-relation quotient, which needs no weight guess.
    """
    score = _cost_fn(cost) if isinstance(cost, str) else cost
    step = step_bins / obs.grid.k
    offsets = np.arange(-window, window + step / 2.0, step)
    out = params
    # Coordinate 0 shifts every relative delay together, which re-picks the
    # cell of the reference path itself; coordinates 1..P-1 move one path.
    for _ in range(max_sweeps):
        moved = False
        for p in range(out.path_count):
            best, best_cost = out, score(obs, out, array)
            for d in offsets:
                tau = out.delay.copy()
                if p == 0:
                    tau[1:] = (tau[1:] + d) % 1.0
                else:
                    tau[p] = (tau[p] + d) % 1.0
                cand = replace(out, delay=tau)
                c = score(obs, cand, array)
                if c < best_cost:
                    best, best_cost, moved = cand, c, True
            out = best
        if not moved:
            break
    return out


def estimate_paths(obs: Observation, array, init: PathParameterSet, estimator: str,
                   opts: LmOptions = LmOptions(), ccr_mode: str = "two_step",
                   prescan: bool = True, rescue: bool = True) -> FitResult:
    """Robust fit: optional delay rescan, local fit, one rescue round.

    ``prescan`` snaps the starting delays into the best ripple cells (skip
    it when the caller already scanned a shared starting point).  With
    ``rescue`` the fitted point is rescanned with the estimator's own cost
    and refitted once if that finds a better cell.
    """
    cost = _cost_fn(estimator)

    def fit(start):
        if estimator == "cml":
            return fit_cml(obs, array, start, opts=opts)
        return fit_ccr(obs, array, start, opts=opts, mode=ccr_mode)

    if prescan:
        init = delay_rescan(obs, array, canonicalize(init))
    result = fit(init)
    if rescue:
        moved = delay_rescan(obs, array, result.params, cost=estimator, max_sweeps=2)
        if cost(obs, moved, array) < result.cost * (1.0 - 1e-3):
            result = fit(moved)
    return result


def coarse_grid_init(obs: Observation, array, path_count: int,
                     azimuth_step_deg: float = 10.0,
                     elevation_step_deg: float = 10.0,
                     delay_steps: int = 24,
                     refine_opts: LmOptions = LmOptions(max_iterations=40)) -> PathParameterSet:
    """Blind starting point: greedy per-path grid search with refinement.

    Paths are added one at a time.  Each candidate cell extends the current
    path set by one (azimuth, elevation, relative delay) triple and scores
    it with the cross-relation quotient, which needs no transmit spectrum
    and no explicit weights; after every addition the grown set is briefly
    refined.  Heuristic by construction: intended as an optimizer start,
    not an estimate.
    """
    obs.grid.check_identifiable(path_count)
    blocks = _ccr.DstBlocks.from_observation(obs)
    az_grid = np.deg2rad(np.arange(-180.0 + azimuth_step_deg, 180.0 + 1e-9, azimuth_step_deg))
    el_limit = 90.0 - elevation_step_deg / 2.0
    el_grid = np.deg2rad(np.arange(-el_limit, el_limit + 1e-9, elevation_step_deg))
    tau_grid = np.arange(delay_steps) / delay_steps

    current: PathParameterSet | None = None
    for p in range(path_count):
        best_cost = np.inf
        best = None
        taus = tau_grid if p > 0 else np.array([0.0])
        for az in az_grid:
            for el in el_grid:
                for tau in taus:
                    cand = _extend(current, az, el, tau)
                    try:
                        cost = _ccr.ccr_evaluate(obs, cand, array, blocks=blocks).cost
                    except _ccr.IllPosedWeightsError:
                        continue
                    if cost < best_cost:
                        best_cost, best = cost, cand
        if best is None:
            raise RuntimeError("grid search found no well-posed cell")
        current = fit_ccr(obs, array, best, opts=refine_opts).params
    return current


def _extend(current: PathParameterSet | None, az: float, el: float,
            tau: float) -> PathParameterSet:
    if current is None:
        return PathParameterSet([az], [el], [1.0 + 0j], [0.0 + 0j], [tau])
    return PathParameterSet(
        np.append(current.azimuth, az),
        np.append(current.elevation, el),
        np.append(current.weight_h, 1.0 + 0j),
        np.append(current.weight_v, 0.0 + 0j),
        np.append(current.delay, tau),
    )
