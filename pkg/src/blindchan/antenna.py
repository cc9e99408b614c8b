"""Polarimetric receive-array manifold.

The receiver is modelled as a set of ideal electric dipoles, two orthogonal
ports per element.  Every port has a complex response to an incoming plane
wave from direction (azimuth, elevation): the projection of its dipole axis
onto the local spherical unit vectors, times the element phase factor.
Responses are returned separately for horizontal and vertical polarisation
so the steering matrix carries one column pair per propagation path.

Positions are expressed in wavelengths; angles in radians (azimuth in
(-pi, pi], elevation measured from the horizon, zenith at +pi/2).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

TWO_PI = 2.0 * np.pi

FArray = NDArray[np.float64]
CArray = NDArray[np.complex128]


class PatternDomainError(ValueError):
    """Requested direction lies outside the pattern's valid domain."""


def wrap_azimuth(phi):
    """Wrap angle(s) into (-pi, pi]. Values already in range are untouched."""
    phi = np.asarray(phi, dtype=float)
    out = np.where((phi > np.pi) | (phi <= -np.pi), np.pi - (np.pi - phi) % TWO_PI, phi)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Direction:
    """Arrival direction: azimuth in (-pi, pi], elevation in [-pi/2, pi/2]."""

    azimuth: float
    elevation: float

    def __post_init__(self):
        if not np.isfinite(self.azimuth) or not np.isfinite(self.elevation):
            raise ValueError("direction angles must be finite")
        if abs(self.elevation) > np.pi / 2:
            raise ValueError(
                f"elevation {self.elevation!r} outside [-pi/2, pi/2]; "
                "out-of-range elevations are rejected, not clamped"
            )
        object.__setattr__(self, "azimuth", wrap_azimuth(self.azimuth))


def _unit_vectors(phi: FArray, theta: FArray) -> tuple[FArray, FArray, FArray]:
    """Propagation unit vector and the two transverse polarisation vectors.

    Returns (k_hat, e_theta, e_phi), each of shape (..., 3).
    """
    cp, sp = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    k_hat = np.stack([ct * cp, ct * sp, st], axis=-1)
    e_theta = np.stack([-st * cp, -st * sp, ct], axis=-1)
    e_phi = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)
    return k_hat, e_theta, e_phi


@dataclass(frozen=True)
class DipoleElement:
    """Dual-polarised array element: one port per dipole axis."""

    position: FArray  # 3-vector, wavelengths
    dipole_axes: FArray  # (2, 3), orthonormal rows

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        axes = np.asarray(self.dipole_axes, dtype=float).reshape(2, 3)
        gram = axes @ axes.T
        if np.max(np.abs(gram - np.eye(2))) > 1e-12:
            raise ValueError("dipole axes must be orthonormal to within 1e-12")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "dipole_axes", axes)


@dataclass(frozen=True)
class ArrayModel:
    """Receive array built from :class:`DipoleElement` items.

    Ports are ordered element by element, following each element's axis
    order, so ``port_count`` is twice the element count.
    """

    elements: tuple[DipoleElement, ...]

    def __post_init__(self):
        elements = tuple(self.elements)
        if not elements:
            raise ValueError("array needs at least one element (two ports)")
        object.__setattr__(self, "elements", elements)
        positions = np.repeat([e.position for e in elements], 2, axis=0)
        axes = np.concatenate([e.dipole_axes for e in elements], axis=0)
        object.__setattr__(self, "_port_positions", np.asarray(positions, dtype=float))
        object.__setattr__(self, "_port_axes", np.asarray(axes, dtype=float))

    @property
    def port_count(self) -> int:
        return 2 * len(self.elements)

    def response(self, phi, theta) -> tuple[CArray, CArray]:
        """Per-port complex pattern values (b_H, b_V) for given direction(s).

        ``phi`` and ``theta`` may be scalars or equal-length arrays; the
        result has shape (port_count,) or (port_count, n).
        """
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        k_hat, e_theta, e_phi = _unit_vectors(phi, theta)  # (n, 3)
        pos: FArray = self._port_positions  # type: ignore[attr-defined]
        axes: FArray = self._port_axes  # type: ignore[attr-defined]
        rho = np.exp(1j * TWO_PI * (pos @ k_hat.T))  # (M_R, n)
        b_h = (axes @ e_phi.T) * rho
        b_v = (axes @ e_theta.T) * rho
        if b_h.shape[1] == 1:
            return b_h[:, 0], b_v[:, 0]
        return b_h, b_v


def default_array() -> ArrayModel:
    """Three dual-polarised elements (x- and z-dipole each): six ports.

    Elements sit at the origin and half a wavelength along x and along y.
    """
    axes = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    positions = [(0.0, 0.0, 0.0), (0.5, 0.0, 0.0), (0.0, 0.5, 0.0)]
    return ArrayModel(tuple(DipoleElement(np.array(p), axes) for p in positions))


def evaluate_pattern(model, direction: Direction) -> tuple[CArray, CArray]:
    """Per-port (b_H, b_V) of ``model`` for a single validated direction."""
    return model.response(direction.azimuth, direction.elevation)


def build_steering_matrix(model, directions) -> CArray:
    """Steering matrix of shape (port_count, 2P).

    ``directions`` is a sequence of :class:`Direction` or of raw
    ``(azimuth, elevation)`` pairs.  Columns come in per-path (H, V) pairs,
    in path order.
    """
    phi, theta = _direction_arrays(directions)
    if phi.size < 1:
        raise ValueError("need at least one direction")
    b_h, b_v = model.response(phi, theta)
    b_h = np.atleast_2d(b_h.T).T  # (M_R, P) even for P == 1
    b_v = np.atleast_2d(b_v.T).T
    out = np.empty((b_h.shape[0], 2 * phi.size), dtype=complex)
    out[:, 0::2] = b_h
    out[:, 1::2] = b_v
    return out


def _direction_arrays(directions) -> tuple[FArray, FArray]:
    if isinstance(directions, tuple) and len(directions) == 2 and np.ndim(directions[0]) > 0:
        return np.asarray(directions[0], dtype=float), np.asarray(directions[1], dtype=float)
    phi, theta = [], []
    for d in directions:
        if isinstance(d, Direction):
            phi.append(d.azimuth)
            theta.append(d.elevation)
        else:
            phi.append(float(d[0]))
            theta.append(float(d[1]))
    return np.asarray(phi), np.asarray(theta)


@dataclass(frozen=True)
class PatternGrid:
    """Tabulated per-port pattern on a uniform azimuth x elevation grid.

    Azimuth is treated as periodic (wraparound interpolation); elevation
    queries outside the grid raise :class:`PatternDomainError`.  Sample
    arrays have shape (port_count, n_elevation, n_azimuth).
    """

    azimuth: FArray
    elevation: FArray
    b_h: CArray
    b_v: CArray

    def __post_init__(self):
        az = np.asarray(self.azimuth, dtype=float)
        el = np.asarray(self.elevation, dtype=float)
        for name, grid in (("azimuth", az), ("elevation", el)):
            if grid.ndim != 1 or grid.size < 2:
                raise ValueError(f"{name} grid must be 1-D with >= 2 nodes")
            steps = np.diff(grid)
            if np.any(steps <= 0):
                raise ValueError(f"{name} grid must be strictly increasing")
            if np.max(np.abs(steps - steps[0])) > 1e-9:
                raise ValueError(f"{name} grid must be uniform")
        bh = np.asarray(self.b_h, dtype=complex)
        bv = np.asarray(self.b_v, dtype=complex)
        expected = (bh.shape[0], el.size, az.size)
        if bh.shape != expected or bv.shape != expected:
            raise ValueError(
                f"sample arrays must have shape (ports, {el.size}, {az.size}), "
                f"got {bh.shape} and {bv.shape}"
            )
        object.__setattr__(self, "azimuth", az)
        object.__setattr__(self, "elevation", el)
        object.__setattr__(self, "b_h", bh)
        object.__setattr__(self, "b_v", bv)

    @property
    def port_count(self) -> int:
        return self.b_h.shape[0]

    def response(self, phi, theta) -> tuple[CArray, CArray]:
        """Bilinear interpolation of the tabulated pattern, port-wise.

        Real and imaginary parts are interpolated separately; azimuth wraps
        around with the grid's own spacing.
        """
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        el = self.elevation
        if np.any(theta < el[0] - 1e-12) or np.any(theta > el[-1] + 1e-12):
            raise PatternDomainError(
                f"elevation query outside grid hull [{el[0]!r}, {el[-1]!r}]"
            )
        az = self.azimuth
        daz = az[1] - az[0]
        u = ((phi - az[0]) % TWO_PI) / daz
        i0 = np.minimum(u.astype(int), az.size - 1)
        fu = u - i0
        i1 = (i0 + 1) % az.size
        # Queries between the last and first node interpolate across the
        # leftover arc, which equals daz only for full-circle grids.
        in_gap = i0 == az.size - 1
        if np.any(in_gap):
            gap = TWO_PI - (az.size - 1) * daz
            fu = np.where(in_gap, np.clip(fu * daz / gap, 0.0, 1.0), fu)

        v = np.clip((theta - el[0]) / (el[1] - el[0]), 0.0, el.size - 1)
        j0 = np.minimum(v.astype(int), el.size - 2)
        fv = v - j0
        j1 = j0 + 1

        def interp(samples: CArray) -> CArray:
            s00 = samples[:, j0, i0]
            s01 = samples[:, j0, i1]
            s10 = samples[:, j1, i0]
            s11 = samples[:, j1, i1]
            top = s00 * (1 - fu) + s01 * fu
            bot = s10 * (1 - fu) + s11 * fu
            return top * (1 - fv) + bot * fv

        b_h, b_v = interp(self.b_h), interp(self.b_v)
        if phi.size == 1:
            return b_h[:, 0], b_v[:, 0]
        return b_h, b_v


def pattern_from_grid(grid: PatternGrid, direction: Direction) -> tuple[CArray, CArray]:
    """Per-port (b_H, b_V) interpolated from a :class:`PatternGrid`."""
    return grid.response(direction.azimuth, direction.elevation)


def sample_pattern_grid(model, azimuth: FArray, elevation: FArray) -> PatternGrid:
    """Tabulate any pattern source on the given grids (radians)."""
    azimuth = np.asarray(azimuth, dtype=float)
    elevation = np.asarray(elevation, dtype=float)
    pp, tt = np.meshgrid(azimuth, elevation)  # (E, A)
    b_h, b_v = model.response(pp.ravel(), tt.ravel())
    shape = (model.port_count, elevation.size, azimuth.size)
    return PatternGrid(azimuth, elevation, b_h.reshape(shape), b_v.reshape(shape))


def load_pattern_grid(path) -> PatternGrid:
    """Read a pattern grid from its JSON file format (angles in degrees)."""
    with open(path) as fh:
        raw = json.load(fh)
    try:
        az = np.deg2rad(np.asarray(raw["azimuth_deg"], dtype=float))
        el = np.deg2rad(np.asarray(raw["elevation_deg"], dtype=float))
        ports = raw["ports"]
        b_h = np.array([np.asarray(p["bH_re"]) + 1j * np.asarray(p["bH_im"]) for p in ports])
        b_v = np.array([np.asarray(p["bV_re"]) + 1j * np.asarray(p["bV_im"]) for p in ports])
    except KeyError as exc:
        raise ValueError(f"pattern grid file {path}: missing field {exc}") from exc
    return PatternGrid(az, el, b_h, b_v)


def save_pattern_grid(grid: PatternGrid, path) -> None:
    """Write a pattern grid to its JSON file format (angles in degrees)."""
    doc = {
        "azimuth_deg": np.rad2deg(grid.azimuth).tolist(),
        "elevation_deg": np.rad2deg(grid.elevation).tolist(),
        "ports": [
            {
                "bH_re": grid.b_h[m].real.tolist(),
                "bH_im": grid.b_h[m].imag.tolist(),
                "bV_re": grid.b_v[m].real.tolist(),
                "bV_im": grid.b_v[m].imag.tolist(),
            }
            for m in range(grid.port_count)
        ],
    }
    Path(path).write_text(json.dumps(doc))
