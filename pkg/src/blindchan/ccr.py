"""Cross-relation cost: transmitter-independent path-parameter fitting.

Any two receiver channels driven by one transmitter satisfy
``x_i h_j - x_j h_i = 0`` per frequency bin when the model is exact.
Stacking every channel pair over every bin gives a linear relation in the
weight vector whose weighted quotient form is the cost minimized here.
The weights enter linearly, so the default mode re-solves them in closed
form at every outer step (a generalized eigenvector of the two Gram
matrices) and the nonlinear search runs over angles and delays only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from .channel import (
    Observation,
    PathParameterSet,
    build_exponential_matrix,
)
from .antenna import build_steering_matrix
from .gauge import ParameterPacking
from .lm import central_difference_jacobian

FArray = NDArray[np.float64]
CArray = NDArray[np.complex128]


class IllPosedWeightsError(ValueError):
    """Weight solve is ill-posed (rank-deficient steering/delay structure)."""


@dataclass(frozen=True)
class DstBlocks:
    """Pair-indexed view of the data, computed once per observation.

    The per-bin pair-difference operator is never materialized densely:
    each bin keeps the raw data column plus the shared (i, j) pair lists
    with i < j in lexicographic order.
    """

    data: CArray  # ports x bins
    pair_i: NDArray[np.int_]
    pair_j: NDArray[np.int_]

    @classmethod
    def from_observation(cls, obs: Observation) -> "DstBlocks":
        if obs.port_count < 2:
            raise ValueError("cross-relation method needs at least two ports")
        pair_i, pair_j = np.triu_indices(obs.port_count, k=1)
        return cls(data=obs.y, pair_i=pair_i, pair_j=pair_j)

    @property
    def pair_count(self) -> int:
        return self.pair_i.size


def dst_apply(x: CArray, h: CArray) -> CArray:
    """All pairwise cross relations x_i h_j - x_j h_i, pairs (i<j) in order."""
    x = np.asarray(x, dtype=complex)
    h = np.asarray(h, dtype=complex)
    if x.shape != h.shape:
        raise ValueError("vectors must have equal length")
    i, j = np.triu_indices(x.size, k=1)
    return x[i] * h[j] - x[j] * h[i]


def ccr_matrices(obs: Observation, params: PathParameterSet, array,
                 blocks: DstBlocks | None = None) -> tuple[CArray, CArray]:
    """Cross-relation matrix A (pairs*bins x 2P) and weight-mode matrix M.

    ``A @ w`` stacks, bin-major, every pairwise cross relation between the
    data and the modelled channel with weight vector ``w``; ``M @ w`` is
    the stacked modelled channel itself.
    """
    if blocks is None:
        blocks = DstBlocks.from_observation(obs)
    b = build_steering_matrix(array, (params.azimuth, params.elevation))
    e = build_exponential_matrix(params, obs.grid)
    modes = e.T[:, None, :] * b[None, :, :]  # (K, M_R, 2P)
    yt = blocks.data.T  # (K, M_R)
    i, j = blocks.pair_i, blocks.pair_j
    rel = yt[:, i, None] * modes[:, j, :] - yt[:, j, None] * modes[:, i, :]
    k, m_r, n = modes.shape
    return rel.reshape(k * blocks.pair_count, n), modes.reshape(k * m_r, n)


def solve_gamma(a: CArray, m: CArray) -> CArray:
    """Weight vector minimizing ||A w||^2 / ||M w||^2.

    Solved as the generalized eigenvector of (A^H A, M^H M) with the
    smallest eigenvalue; returned with ||M w|| = 1 and the first
    significant component rotated to the positive real axis.
    """
    gram_a = a.conj().T @ a
    gram_m = m.conj().T @ m
    try:
        _, vecs = scipy.linalg.eigh(gram_a, gram_m)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise IllPosedWeightsError(f"weight Gram matrix is not positive definite: {exc}") from exc
    gamma = vecs[:, 0]
    norm = float(np.linalg.norm(m @ gamma))
    if not np.isfinite(norm) or norm < 1e-150:
        raise IllPosedWeightsError("weight mode matrix annihilates the solved weights")
    gamma = gamma / norm
    significant = np.flatnonzero(np.abs(gamma) > 1e-12 * np.max(np.abs(gamma)))
    anchor = gamma[significant[0]]
    return gamma * (abs(anchor) / anchor)


@dataclass(frozen=True)
class CcrEvaluation:
    cost: float
    numerator: float
    denominator: float
    gamma: CArray


def ccr_evaluate(obs: Observation, params: PathParameterSet, array,
                 gamma: CArray | None = None,
                 blocks: DstBlocks | None = None) -> CcrEvaluation:
    """Quotient cost at the given nonlinear parameters.

    Without an explicit ``gamma`` the weights are re-solved in closed form
    (variable-projection mode).
    """
    a, m = ccr_matrices(obs, params, array, blocks=blocks)
    if gamma is None:
        gamma = solve_gamma(a, m)
    num = float(np.linalg.norm(a @ gamma) ** 2)
    den = float(np.linalg.norm(m @ gamma) ** 2)
    if den <= 0.0:
        raise IllPosedWeightsError("weight vector gives a zero-norm modelled channel")
    return CcrEvaluation(cost=num / den, numerator=num, denominator=den, gamma=gamma)


def ccr_residual(obs: Observation, params: PathParameterSet, array,
                 gamma: CArray | None = None,
                 blocks: DstBlocks | None = None) -> CArray:
    """Least-squares residual form: A w / ||M w||, squared norm = cost."""
    a, m = ccr_matrices(obs, params, array, blocks=blocks)
    if gamma is None:
        gamma = solve_gamma(a, m)
    den = float(np.linalg.norm(m @ gamma))
    if den <= 0.0:
        raise IllPosedWeightsError("weight vector gives a zero-norm modelled channel")
    return (a @ gamma) / den


def stacked_real_residual(obs: Observation, params: PathParameterSet, array,
                          gamma: CArray | None = None,
                          blocks: DstBlocks | None = None) -> FArray:
    res = ccr_residual(obs, params, array, gamma=gamma, blocks=blocks)
    return np.concatenate([res.real, res.imag])


def ccr_jacobian(obs: Observation, params: PathParameterSet, array,
                 packing: ParameterPacking | None = None,
                 blocks: DstBlocks | None = None) -> FArray:
    """Central-difference Jacobian of the two-step residual.

    By default differentiation runs over the nonlinear free parameters
    (angles and relative delays), with the weights re-solved inside every
    evaluation.
    """
    if packing is None:
        packing = ParameterPacking.nonlinear(params)
    x0 = packing.pack(params)

    if packing.mode == "nonlinear":
        def fn(x):
            return stacked_real_residual(obs, packing.unpack(x), array, blocks=blocks)
    else:
        def fn(x):
            p = packing.unpack(x)
            return stacked_real_residual(obs, p, array, gamma=p.weights_interleaved(),
                                         blocks=blocks)

    return central_difference_jacobian(fn, x0, packing.fd_steps())
