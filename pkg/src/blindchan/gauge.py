"""Free-parameter packing with gauge constraints removed.

Both cost functions are invariant under a common delay shift and global
weight rescaling, so those directions must not appear in the optimizer's
parameter vector: the first path's delay is pinned at zero, and (for the
full packing) the first path's dominant weight component is frozen at its
initialization value.

Two packings exist:

* ``full``      -- angles, weights (minus the frozen component), delays;
                   used by the likelihood cost and the joint cross-relation
                   mode.
* ``nonlinear`` -- angles and delays only; the cross-relation two-step mode
                   solves the weights internally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .antenna import wrap_azimuth
from .channel import PathParameterSet

FArray = NDArray[np.float64]

KIND_AZIMUTH = "azimuth"
KIND_ELEVATION = "elevation"
KIND_WEIGHT = "weight"
KIND_DELAY = "delay"

# Central-difference steps per coordinate kind, balancing truncation
# against roundoff at typical parameter scales.
FD_STEPS = {
    KIND_AZIMUTH: 1e-6,
    KIND_ELEVATION: 1e-6,
    KIND_WEIGHT: 1e-7,
    KIND_DELAY: 1e-7,
}


def reflect_elevation(theta):
    """Fold angle(s) back into [-pi/2, pi/2]; in-range values untouched."""
    out = np.atleast_1d(np.asarray(theta, dtype=float)).copy()
    bad = np.abs(out) > np.pi / 2
    if np.any(bad):
        t = (out[bad] + np.pi) % (2 * np.pi) - np.pi
        t = np.where(t > np.pi / 2, np.pi - t, t)
        t = np.where(t < -np.pi / 2, -np.pi - t, t)
        out[bad] = t
    return out if np.ndim(theta) else float(out[0])


@dataclass(frozen=True)
class ParameterPacking:
    """Maps between a free real vector and a :class:`PathParameterSet`.

    ``base`` supplies the values of the gauge-fixed coordinates (first-path
    delay, frozen weight component) and, in nonlinear mode, placeholder
    weights.  Layout: azimuths, elevations, free weight (re, im) pairs in
    interleaved H/V order, then delays of paths 2..P.
    """

    base: PathParameterSet
    mode: str
    frozen_weight_index: int | None

    def __post_init__(self):
        if self.mode not in ("full", "nonlinear"):
            raise ValueError(f"unknown packing mode {self.mode!r}")
        if self.base.delay[0] != 0.0:
            raise ValueError("packing requires a canonical base (first delay zero)")
        if self.mode == "full":
            if self.frozen_weight_index not in (0, 1):
                raise ValueError("full packing must freeze one path-1 weight component")
        elif self.frozen_weight_index is not None:
            raise ValueError("nonlinear packing has no weight coordinates to freeze")
        # Gauge safety: the free vector must exclude the first delay and the
        # frozen weight component, nothing else.
        p = self.base.path_count
        kinds = self.kinds
        assert kinds.size == self.n_free
        assert np.count_nonzero(kinds == KIND_DELAY) == p - 1
        expected_w = 2 * (2 * p - 1) if self.mode == "full" else 0
        assert np.count_nonzero(kinds == KIND_WEIGHT) == expected_w

    @classmethod
    def full(cls, init: PathParameterSet) -> "ParameterPacking":
        frozen = 0 if abs(init.weight_h[0]) >= abs(init.weight_v[0]) else 1
        return cls(base=init, mode="full", frozen_weight_index=frozen)

    @classmethod
    def nonlinear(cls, init: PathParameterSet) -> "ParameterPacking":
        return cls(base=init, mode="nonlinear", frozen_weight_index=None)

    @property
    def path_count(self) -> int:
        return self.base.path_count

    @property
    def n_free(self) -> int:
        p = self.path_count
        if self.mode == "full":
            return 7 * p - 3
        return 3 * p - 1

    @property
    def kinds(self) -> NDArray[np.str_]:
        p = self.path_count
        kinds = [KIND_AZIMUTH] * p + [KIND_ELEVATION] * p
        if self.mode == "full":
            kinds += [KIND_WEIGHT] * (2 * (2 * p - 1))
        kinds += [KIND_DELAY] * (p - 1)
        return np.asarray(kinds)

    def fd_steps(self) -> FArray:
        return np.asarray([FD_STEPS[k] for k in self.kinds])

    def pack(self, params: PathParameterSet) -> FArray:
        if params.path_count != self.path_count:
            raise ValueError("path count mismatch")
        parts = [params.azimuth, params.elevation]
        if self.mode == "full":
            w = params.weights_interleaved()
            free = np.concatenate([w[: self.frozen_weight_index], w[self.frozen_weight_index + 1 :]])
            parts.append(np.column_stack([free.real, free.imag]).ravel())
        parts.append(params.delay[1:])
        return np.concatenate(parts)

    def unpack(self, x: FArray) -> PathParameterSet:
        x = np.asarray(x, dtype=float)
        if x.size != self.n_free:
            raise ValueError(f"free vector has {x.size} entries, expected {self.n_free}")
        p = self.path_count
        azimuth = x[:p]
        elevation = x[p : 2 * p]
        pos = 2 * p
        if self.mode == "full":
            n_pairs = 2 * p - 1
            vals = x[pos : pos + 2 * n_pairs].reshape(n_pairs, 2)
            free = vals[:, 0] + 1j * vals[:, 1]
            w = np.empty(2 * p, dtype=complex)
            idx = self.frozen_weight_index
            w[:idx] = free[:idx]
            w[idx] = self.base.weights_interleaved()[idx]
            w[idx + 1 :] = free[idx:]
            weight_h, weight_v = w[0::2], w[1::2]
            pos += 2 * n_pairs
        else:
            weight_h, weight_v = self.base.weight_h, self.base.weight_v
        delay = np.concatenate([[0.0], x[pos:]])
        return PathParameterSet(azimuth, elevation, weight_h, weight_v, delay)

    def wrap(self, x: FArray) -> FArray:
        """Bring angle and delay coordinates back into their domains."""
        out = np.asarray(x, dtype=float).copy()
        p = self.path_count
        out[:p] = wrap_azimuth(out[:p])
        out[p : 2 * p] = reflect_elevation(out[p : 2 * p])
        if p > 1:
            out[-(p - 1) :] %= 1.0
        return out
