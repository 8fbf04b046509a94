"""Signal filters and extinction by numerical differentiation.

Four stages are available and may be chained in any order:

* ``spike``: replace an isolated spike by the mean of its neighbours;
* ``bin``: average blocks of points onto a coarser grid;
* ``gauss``: truncated, boundary-renormalised Gaussian smoothing;
* ``avg``: centred running mean with shrinking windows at the edges.

Chains are written as comma separated ``stage:param`` tokens, for
example ``spike:0.5,bin:2,gauss:1.5,avg:3``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, DimensionError, EmptyDataError
from ..grid import (
    AltitudeGrid,
    ExtinctionProfile,
    ForwardModelConfig,
    LidarSignal,
    transform_signal,
)

__all__ = [
    "FilterStage",
    "FilterChain",
    "parse_filter_chain",
    "spike_reject",
    "bin_values",
    "gaussian_filter",
    "running_average",
    "apply_filter_chain",
    "derivative_retrieval",
]

STAGES = ("spike", "bin", "gauss", "avg")


@dataclass(frozen=True)
class FilterStage:
    kind: str
    param: float

    def __post_init__(self):
        if self.kind not in STAGES:
            raise ConfigurationError(f"unknown filter stage {self.kind!r}; expected one of {STAGES}")
        if not self.param > 0:
            raise ConfigurationError(f"{self.kind} parameter must be positive, got {self.param}")
        if self.kind in ("bin", "avg"):
            if self.param != int(self.param):
                raise ConfigurationError(f"{self.kind} width must be an integer, got {self.param}")
            object.__setattr__(self, "param", int(self.param))

    def __str__(self):
        return f"{self.kind}:{self.param:g}" if isinstance(self.param, float) else f"{self.kind}:{self.param}"


@dataclass(frozen=True)
class FilterChain:
    stages: tuple = ()

    def __str__(self):
        return ",".join(str(s) for s in self.stages)


def parse_filter_chain(text: str) -> FilterChain:
    """Parse ``"spike:0.5,bin:2"``; an empty string is the empty chain."""
    stages = []
    for token in filter(None, (t.strip() for t in text.split(","))):
        kind, sep, value = token.partition(":")
        if not sep:
            raise ConfigurationError(f"filter token {token!r} is not of the form stage:param")
        try:
            param = float(value)
        except ValueError:
            raise ConfigurationError(f"bad parameter in filter token {token!r}") from None
        stages.append(FilterStage(kind.strip(), param))
    return FilterChain(tuple(stages))


def spike_reject(v, threshold: float) -> np.ndarray:
    """Single left-to-right pass over the original values.

    An interior point is a spike when its differences to both neighbours
    have opposite signs and both exceed ``threshold`` in magnitude.
    """
    v = np.asarray(v, dtype=float)
    if v.size < 3:
        raise DimensionError("spike rejection needs at least 3 points")
    if not threshold > 0:
        raise ConfigurationError("threshold must be positive")
    d1 = v[1:-1] - v[:-2]
    d2 = v[2:] - v[1:-1]
    spike = (d1 * d2 < 0) & (np.minimum(np.abs(d1), np.abs(d2)) > threshold)
    out = v.copy()
    out[1:-1][spike] = 0.5 * (v[:-2] + v[2:])[spike]
    return out


def bin_values(v, width: int) -> np.ndarray:
    """Means of consecutive blocks; a trailing partial block is dropped."""
    v = np.asarray(v, dtype=float)
    if width > v.size:
        raise DimensionError(f"bin width {width} exceeds signal length {v.size}")
    m = v.size // width
    return v[: m * width].reshape(m, width).mean(axis=1)


def _gaussian_kernel(sigma: float, n: int) -> np.ndarray:
    half = min(int(math.ceil(3 * sigma)), n - 1)
    offsets = np.arange(-half, half + 1)
    return np.exp(-0.5 * (offsets / sigma) ** 2)


def gaussian_filter(v, sigma: float, sigma_v=None):
    """Gaussian smoothing with half-width ``ceil(3 sigma)`` samples.

    Weights are renormalised where the kernel overhangs the ends. With
    ``sigma_v`` the propagated uncertainty is returned as well.
    """
    v = np.asarray(v, dtype=float)
    if not sigma > 0:
        raise ConfigurationError("gaussian sigma must be positive")
    k = _gaussian_kernel(sigma, v.size)
    # symmetric kernel: convolution and correlation coincide
    norm = np.convolve(np.ones(v.size), k, mode="same")
    out = np.convolve(v, k, mode="same") / norm
    if sigma_v is None:
        return out
    var = np.convolve(np.asarray(sigma_v, dtype=float) ** 2, k**2, mode="same")
    return out, np.sqrt(var) / norm


def _window_bounds(n: int, width: int):
    left = width // 2
    right = width - 1 - left
    i = np.arange(n)
    return np.maximum(i - left, 0), np.minimum(i + right, n - 1) + 1


def running_average(v, width: int, sigma_v=None):
    """Centred moving mean; windows shrink at the ends."""
    v = np.asarray(v, dtype=float)
    lo, hi = _window_bounds(v.size, width)
    c = np.concatenate([[0.0], np.cumsum(v)])
    count = hi - lo
    out = (c[hi] - c[lo]) / count
    if sigma_v is None:
        return out
    c2 = np.concatenate([[0.0], np.cumsum(np.asarray(sigma_v, dtype=float) ** 2)])
    return out, np.sqrt(c2[hi] - c2[lo]) / count


def apply_filter_chain(signal: LidarSignal, chain: FilterChain) -> LidarSignal:
    """Run ``chain`` over the power and propagate ``sigma``.

    Binning moves the signal to a grid with spacing ``width * dz`` whose
    samples sit at the block centres.
    """
    grid, P, sigma = signal.grid, signal.P, signal.sigma
    for stage in chain.stages:
        if stage.kind == "spike":
            P = spike_reject(P, stage.param)
        elif stage.kind == "bin":
            w = stage.param
            if w > P.size:
                raise DimensionError(f"bin width {w} exceeds signal length {P.size}")
            m = P.size // w
            if m < 2:
                raise DimensionError("binning leaves fewer than 2 samples")
            P = bin_values(P, w)
            sigma = np.sqrt(bin_values(sigma**2, w) * w) / w
            grid = AltitudeGrid(grid.z_min + 0.5 * (w - 1) * grid.dz, w * grid.dz, m, grid.quadrature)
        elif stage.kind == "gauss":
            P, sigma = gaussian_filter(P, stage.param, sigma)
        else:
            P, sigma = running_average(P, stage.param, sigma)
    return LidarSignal(grid, P, sigma, signal.wavelength)


def derivative_retrieval(
    signal: LidarSignal,
    config: ForwardModelConfig,
    chain: FilterChain | None = None,
) -> ExtinctionProfile:
    """Extinction as the altitude derivative of the filtered optical depth.

    Central differences in the interior and second-order one-sided
    differences at the ends, taken over the valid points only. Invalid
    points receive linearly interpolated values. The profile lives on the
    filtered grid, which binning makes coarser.
    """
    filtered = apply_filter_chain(signal, chain or FilterChain())
    data = transform_signal(filtered, config)
    if data.n_valid < 3:
        raise EmptyDataError("numerical differentiation needs at least 3 valid points")
    z = data.grid.z
    zv = z[data.valid]
    alpha_v = np.gradient(data.y[data.valid], zv, edge_order=2)
    alpha = np.interp(z, zv, alpha_v)
    return ExtinctionProfile(data.grid, alpha)
