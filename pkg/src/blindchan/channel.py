"""Parametric frequency-domain SIMO channel model and data synthesis.

A propagation path is described by its arrival direction, a complex weight
per receive polarisation and a normalized delay in [0, 1) (cycles across the
measured band).  The channel matrix is

    steering(directions) @ diag(weights) @ delay_exponentials(delays)

and noisy observations add i.i.d. circular complex Gaussian noise per port
and bin.  Absolute delay and global weight scale are not observable; the
delay gauge (earliest path at zero) is fixed by :func:`canonicalize`, the
weight gauge only when results are reported.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .antenna import build_steering_matrix, wrap_azimuth

FArray = NDArray[np.float64]
CArray = NDArray[np.complex128]

OBSERVATION_MAGIC = b"BPOB"


class ObservationFormatError(ValueError):
    """Observation file is not in the expected binary format."""


@dataclass(frozen=True)
class PathParameterSet:
    """Per-path azimuth, elevation (radians), H/V weights and delay.

    Delays are normalized to the ambiguity window: a delay of 1 aliases
    onto 0.  A canonical set (see :func:`canonicalize`) is sorted by delay
    with the first path at exactly zero.
    """

    azimuth: FArray
    elevation: FArray
    weight_h: CArray
    weight_v: CArray
    delay: FArray

    def __post_init__(self):
        az = np.atleast_1d(np.asarray(self.azimuth, dtype=float))
        el = np.atleast_1d(np.asarray(self.elevation, dtype=float))
        wh = np.atleast_1d(np.asarray(self.weight_h, dtype=complex))
        wv = np.atleast_1d(np.asarray(self.weight_v, dtype=complex))
        tau = np.atleast_1d(np.asarray(self.delay, dtype=float))
        p = az.size
        if p < 1:
            raise ValueError("need at least one path")
        for name, arr in (("elevation", el), ("weight_h", wh), ("weight_v", wv), ("delay", tau)):
            if arr.size != p:
                raise ValueError(f"{name} has {arr.size} entries, expected {p}")
        for name, arr in (("azimuth", az), ("elevation", el), ("delay", tau)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
        if not (np.all(np.isfinite(wh)) and np.all(np.isfinite(wv))):
            raise ValueError("weights contain non-finite values")
        object.__setattr__(self, "azimuth", az)
        object.__setattr__(self, "elevation", el)
        object.__setattr__(self, "weight_h", wh)
        object.__setattr__(self, "weight_v", wv)
        object.__setattr__(self, "delay", tau)

    @property
    def path_count(self) -> int:
        return self.azimuth.size

    def weights_interleaved(self) -> CArray:
        """Weight vector [h_1, v_1, h_2, v_2, ...] of length 2P."""
        out = np.empty(2 * self.path_count, dtype=complex)
        out[0::2] = self.weight_h
        out[1::2] = self.weight_v
        return out

    def is_canonical(self, tol: float = 0.0) -> bool:
        return bool(self.delay[0] <= tol and np.all(np.diff(self.delay) >= -tol))


def canonicalize(params: PathParameterSet) -> PathParameterSet:
    """Sort paths by delay (stable) and shift so the first delay is zero.

    Weights are untouched; the weight gauge is a reporting convention, not
    a model one.
    """
    order = np.argsort(params.delay, kind="stable")
    tau = params.delay[order]
    return PathParameterSet(
        azimuth=params.azimuth[order],
        elevation=params.elevation[order],
        weight_h=params.weight_h[order],
        weight_v=params.weight_v[order],
        delay=tau - tau[0],
    )


@dataclass(frozen=True)
class FrequencyGrid:
    """K measured bins with normalized frequencies k / K."""

    k: int

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("need at least two frequency bins")

    @property
    def frequencies(self) -> FArray:
        return np.arange(self.k) / self.k

    def check_identifiable(self, path_count: int) -> None:
        if self.k < 2 * path_count:
            raise ValueError(
                f"{self.k} bins cannot identify {path_count} paths (need K >= 2P)"
            )


@dataclass(frozen=True)
class TransmitterSignal:
    """Complex transmit spectrum on the measurement grid."""

    values: CArray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("signal must be a 1-D complex vector")
        if not np.any(v):
            raise ValueError("signal must not be identically zero")
        object.__setattr__(self, "values", v)


def make_signal(kind: str, grid: FrequencyGrid, duty: float | None = None) -> TransmitterSignal:
    """Build a transmit spectrum: 'flat' or 'rect_pulse' with a duty cycle.

    The rectangular pulse occupies the first ceil(duty * K) time samples;
    its spectrum is the DFT of that boxcar.
    """
    if kind == "flat":
        return TransmitterSignal(np.ones(grid.k, dtype=complex))
    if kind == "rect_pulse":
        if duty is None or not 0.0 < duty <= 1.0:
            raise ValueError(f"rect_pulse duty must be in (0, 1], got {duty!r}")
        n_on = int(np.ceil(duty * grid.k))
        pulse = np.zeros(grid.k)
        pulse[:n_on] = 1.0
        return TransmitterSignal(np.fft.fft(pulse))
    raise ValueError(f"unknown signal kind {kind!r}")


@dataclass(frozen=True)
class Observation:
    """Received frequency-domain data: ports x bins, plus noise variance."""

    y: CArray
    grid: FrequencyGrid
    noise_variance: float

    def __post_init__(self):
        y = np.asarray(self.y, dtype=complex)
        if y.ndim != 2:
            raise ValueError("observation matrix must be 2-D (ports x bins)")
        if y.shape[1] != self.grid.k:
            raise ValueError(f"observation has {y.shape[1]} bins, grid has {self.grid.k}")
        if self.noise_variance < 0:
            raise ValueError("noise variance must be >= 0")
        object.__setattr__(self, "y", y)

    @property
    def port_count(self) -> int:
        return self.y.shape[0]


def build_exponential_matrix(params: PathParameterSet, grid: FrequencyGrid) -> CArray:
    """Delay phase matrix of shape (2P, K); H and V rows share each delay.

    Entry for path p at bin k is exp(-2j pi k delay_p).
    """
    k = np.arange(grid.k)
    rows = np.exp(-2j * np.pi * np.outer(params.delay, k))
    return np.repeat(rows, 2, axis=0)


def build_channel_matrix(params: PathParameterSet, array, grid: FrequencyGrid) -> CArray:
    """Channel matrix (ports x bins): steering @ diag(weights) @ exponentials."""
    b = build_steering_matrix(array, (params.azimuth, params.elevation))
    e = build_exponential_matrix(params, grid)
    return (b * params.weights_interleaved()[None, :]) @ e


def khatri_rao_channel_matrix(params: PathParameterSet, array, grid: FrequencyGrid) -> CArray:
    """Column-wise Kronecker factor M with vec(channel) = M @ weights.

    Shape (K * ports, 2P); block k of column j is exponentials[j, k] times
    steering column j, so blocks are stacked bin-major like vec().
    """
    b = build_steering_matrix(array, (params.azimuth, params.elevation))
    e = build_exponential_matrix(params, grid)
    m = e.T[:, None, :] * b[None, :, :]  # (K, M_R, 2P)
    return m.reshape(grid.k * b.shape[0], 2 * params.path_count)


def vec_channel(params: PathParameterSet, array, grid: FrequencyGrid) -> CArray:
    """Column-stacked channel matrix (bin-major vector of length ports*K)."""
    return build_channel_matrix(params, array, grid).flatten(order="F")


def synthesize(
    params: PathParameterSet,
    array,
    grid: FrequencyGrid,
    signal: TransmitterSignal,
    snr_db: float,
    seed: int,
) -> Observation:
    """Generate an observation at the given SNR, reproducibly from ``seed``.

    SNR is mean received sample power over all ports and bins divided by
    the per-sample noise variance.  ``snr_db = inf`` disables noise.
    """
    if signal.values.size != grid.k:
        raise ValueError("signal length does not match frequency grid")
    grid.check_identifiable(params.path_count)
    x = build_channel_matrix(params, array, grid) * signal.values[None, :]
    if np.isinf(snr_db):
        return Observation(x, grid, 0.0)
    m_r, k = x.shape
    sigma2 = float(np.sum(np.abs(x) ** 2) / (m_r * k * 10.0 ** (snr_db / 10.0)))
    rng = np.random.default_rng(seed)
    scale = np.sqrt(sigma2 / 2.0)
    noise = scale * (rng.standard_normal((m_r, k)) + 1j * rng.standard_normal((m_r, k)))
    return Observation(x + noise, grid, sigma2)


# --- observation file format -------------------------------------------------
#
# Binary, little-endian: magic "BPOB", u32 port count, u32 bin count,
# f64 noise variance, then ports*bins complex samples as (re, im) f64
# pairs in column-major (bin-major) order.  A JSON sidecar may carry the
# generating path parameters for ground-truth evaluation.

_HEADER = struct.Struct("<4sIId")


def write_observation(path, obs: Observation) -> None:
    samples = np.ascontiguousarray(obs.y.flatten(order="F"), dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(OBSERVATION_MAGIC, obs.port_count, obs.grid.k, obs.noise_variance))
        fh.write(samples.tobytes())


def read_observation(path) -> Observation:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ObservationFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, m_r, k, sigma2 = _HEADER.unpack_from(raw)
    if magic != OBSERVATION_MAGIC:
        raise ObservationFormatError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 16 * m_r * k
    if len(raw) != expected:
        raise ObservationFormatError(
            f"{path}: expected {expected} bytes for {m_r} ports x {k} bins, got {len(raw)}"
        )
    flat = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size)
    y = flat.reshape((m_r, k), order="F").astype(complex)
    return Observation(y, FrequencyGrid(k), float(sigma2))


def params_to_json_dict(params: PathParameterSet) -> dict:
    """User-facing JSON form: degrees for angles, (re, im) pairs for weights."""
    return {
        "paths": [
            {
                "aoa_deg": float(np.rad2deg(params.azimuth[p])),
                "eoa_deg": float(np.rad2deg(params.elevation[p])),
                "weight_h": [float(params.weight_h[p].real), float(params.weight_h[p].imag)],
                "weight_v": [float(params.weight_v[p].real), float(params.weight_v[p].imag)],
                "delay_norm": float(params.delay[p]),
            }
            for p in range(params.path_count)
        ]
    }


def params_from_json_dict(doc: dict) -> PathParameterSet:
    paths = doc["paths"]
    return PathParameterSet(
        azimuth=wrap_azimuth(np.deg2rad([p["aoa_deg"] for p in paths])),
        elevation=np.deg2rad([p["eoa_deg"] for p in paths]),
        weight_h=np.array([complex(*p["weight_h"]) for p in paths]),
        weight_v=np.array([complex(*p["weight_v"]) for p in paths]),
        delay=np.array([p["delay_norm"] for p in paths], dtype=float),
    )


def write_truth_sidecar(path, params: PathParameterSet) -> None:
    Path(path).write_text(json.dumps(params_to_json_dict(params), indent=2))


def read_truth_sidecar(path) -> PathParameterSet:
    return params_from_json_dict(json.loads(Path(path).read_text()))
