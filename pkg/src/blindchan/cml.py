"""Likelihood-based cost with the transmit spectrum projected out.

The unknown transmit spectrum enters the model linearly per frequency bin,
so its best linear unbiased estimate has a closed form.  Substituting it
back leaves a projection residual whose squared norm is the cost driven to
a minimum over the path parameters.

Under white noise the projector decouples per bin, which is the fast path
used everywhere; a generic dense branch accepts an arbitrary noise
covariance for stacked data and is kept as a tested fallback (small
problem sizes only: it materializes the (ports*bins x bins) model matrix).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from .channel import Observation, PathParameterSet, build_channel_matrix
from .gauge import ParameterPacking
from .lm import central_difference_jacobian

FArray = NDArray[np.float64]
CArray = NDArray[np.complex128]

_SINGULAR_FLOOR = 1e-300


class SingularChannelError(ValueError):
    """The modelled channel vanishes at some bin, leaving it unconstrained."""


@dataclass(frozen=True)
class WhitenedObservation:
    """Stacked observation vector after noise whitening.

    ``whitener`` is the representation of the inverse Cholesky factor:
    a scalar 1/sigma for white noise, or the lower-triangular factor
    itself (applied through a triangular solve) for a general covariance.
    """

    y_l: CArray
    whitener: float | CArray

    def apply(self, v: CArray) -> CArray:
        if isinstance(self.whitener, float):
            return self.whitener * v
        return scipy.linalg.solve_triangular(self.whitener, v, lower=True)


@dataclass(frozen=True)
class CmlEvaluation:
    cost: float
    residual: CArray
    s_hat: CArray


def _effective_sigma(obs: Observation, sigma: float | None) -> float:
    if sigma is not None:
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        return float(sigma)
    return float(np.sqrt(obs.noise_variance)) if obs.noise_variance > 0 else 1.0


def whiten_observation(obs: Observation, noise_cov: CArray | None = None,
                       sigma: float | None = None) -> WhitenedObservation:
    """Whiten the stacked data vector.

    With no covariance the whitener is the scalar 1/sigma (sigma taken from
    the observation, or 1 for noiseless data).  A full covariance for the
    stacked vector is Cholesky-factored and applied by triangular solve.
    """
    y = obs.y.flatten(order="F")
    if noise_cov is None:
        s = _effective_sigma(obs, sigma)
        return WhitenedObservation(y_l=y / s, whitener=1.0 / s)
    factor = np.linalg.cholesky(np.asarray(noise_cov, dtype=complex))
    y_l = scipy.linalg.solve_triangular(factor, y, lower=True)
    return WhitenedObservation(y_l=y_l, whitener=factor)


def _stacked_model_matrix(h: CArray) -> CArray:
    """Block-diagonal model matrix for the stacked data: one column per bin."""
    k = h.shape[1]
    return scipy.linalg.khatri_rao(np.eye(k, dtype=complex), h)


def _check_bins(h: CArray) -> FArray:
    hnorm2 = np.sum(np.abs(h) ** 2, axis=0)
    if np.min(hnorm2) < _SINGULAR_FLOOR:
        bad = int(np.argmin(hnorm2))
        raise SingularChannelError(f"modelled channel vanishes at bin {bad}")
    return hnorm2


def blue_estimate(obs: Observation, params: PathParameterSet, array,
                  noise_cov: CArray | None = None) -> CArray:
    """Closed-form transmit-spectrum estimate for the given path parameters.

    White noise reduces the estimator to a per-bin projection
    h(k)^H y(k) / ||h(k)||^2; with ``noise_cov`` the dense stacked form is
    solved instead.
    """
    h = build_channel_matrix(params, array, obs.grid)
    hnorm2 = _check_bins(h)
    if noise_cov is None:
        return np.sum(h.conj() * obs.y, axis=0) / hnorm2
    w = whiten_observation(obs, noise_cov=noise_cov)
    h_l = w.apply(_stacked_model_matrix(h))
    s_hat, *_ = np.linalg.lstsq(h_l, w.y_l, rcond=None)
    return s_hat


def cml_evaluate(obs: Observation, params: PathParameterSet, array,
                 noise_cov: CArray | None = None,
                 sigma: float | None = None) -> CmlEvaluation:
    """Projection-residual cost at the given path parameters.

    The residual is the whitened stacked misfit after substituting the
    estimated transmit spectrum; the cost is its squared norm.  ``sigma``
    overrides the observation's stored noise level (the optimizer runs
    with sigma = 1, which moves no minimizer under white noise).
    """
    h = build_channel_matrix(params, array, obs.grid)
    if noise_cov is None:
        hnorm2 = _check_bins(h)
        s_hat = np.sum(h.conj() * obs.y, axis=0) / hnorm2
        s_eff = _effective_sigma(obs, sigma)
        residual = ((obs.y - h * s_hat[None, :]) / s_eff).flatten(order="F")
    else:
        _check_bins(h)
        w = whiten_observation(obs, noise_cov=noise_cov)
        h_l = w.apply(_stacked_model_matrix(h))
        s_hat, *_ = np.linalg.lstsq(h_l, w.y_l, rcond=None)
        residual = w.y_l - h_l @ s_hat
    cost = float(np.real(np.vdot(residual, residual)))
    return CmlEvaluation(cost=cost, residual=residual, s_hat=s_hat)


def stacked_real_residual(obs: Observation, params: PathParameterSet, array,
                          sigma: float | None = None) -> FArray:
    """Residual as one real vector (real parts, then imaginary parts)."""
    res = cml_evaluate(obs, params, array, sigma=sigma).residual
    return np.concatenate([res.real, res.imag])


def cml_jacobian(obs: Observation, params: PathParameterSet, array,
                 packing: ParameterPacking | None = None,
                 sigma: float | None = None) -> FArray:
    """Central-difference Jacobian of the stacked real residual.

    Differentiation runs over the gauge-reduced free parameters only
    (first-path delay and the frozen weight component are excluded), so the
    column count is the packing's free dimension.
    """
    if packing is None:
        packing = ParameterPacking.full(params)
    x0 = packing.pack(params)

    def fn(x):
        return stacked_real_residual(obs, packing.unpack(x), array, sigma=sigma)

    return central_difference_jacobian(fn, x0, packing.fd_steps())
