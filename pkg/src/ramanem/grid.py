"""Altitude grids, molecular atmosphere and the discrete Raman forward model.

The Raman channel power obeys::

    P(z) = C / z**2 * rho(z) * exp(-int_0^z alpha(z') dz')

so the transformed data ``y = -log(P z**2 / (C rho))`` is the optical depth,
a running integral of the extinction ``alpha``. The integral is discretised
as a lower-triangular matrix ``H`` that is never formed in the solvers: both
``H`` and ``H^T`` are applied with (reverse) cumulative sums in O(n).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    ConfigurationError,
    DimensionError,
    EmptyDataError,
    DomainError,
    RangeError,
)

__all__ = [
    "AltitudeGrid",
    "MolecularModel",
    "ForwardModelConfig",
    "LidarSignal",
    "TransformedData",
    "ExtinctionProfile",
    "build_grid",
    "molecular_density",
    "apply_forward",
    "apply_adjoint",
    "forward_matrix",
    "exact_signal",
    "transform_signal",
    "synthesize_signal",
    "make_comb_profile",
]

QUADRATURES = ("rectangle", "trapezoid")

# numpy's Poisson sampler rejects larger rates
_MAX_EXPECTED_COUNTS = 1e18


@dataclass(frozen=True)
class AltitudeGrid:
    """Uniformly spaced altitudes ``z_i = z_min + i*dz``, ``i = 0..n-1``.

    ``quadrature`` selects how ``int_0^{z_i}`` is discretised. With
    ``"rectangle"`` the first sample carries the whole segment ``[0, z_min]``
    and every later sample one spacing, so ``(Hx)_i = z_min*x_0 + dz*sum_{0<j<=i} x_j``.
    ``"trapezoid"`` keeps the same first segment and uses the trapezoid rule
    between samples.
    """

    z_min: float
    dz: float
    n: int
    quadrature: str = "rectangle"

    def __post_init__(self):
        if not (np.isfinite(self.z_min) and self.z_min > 0):
            raise ConfigurationError(f"z_min must be positive, got {self.z_min}")
        if not (np.isfinite(self.dz) and self.dz > 0):
            raise ConfigurationError(f"dz must be positive, got {self.dz}")
        if int(self.n) != self.n or self.n < 2:
            raise ConfigurationError(f"grid needs at least 2 samples, got {self.n}")
        if self.quadrature not in QUADRATURES:
            raise ConfigurationError(
                f"unknown quadrature {self.quadrature!r}, expected one of {QUADRATURES}"
            )
        object.__setattr__(self, "n", int(self.n))

    @property
    def z_max(self) -> float:
        return self.z_min + (self.n - 1) * self.dz

    @cached_property
    def z(self) -> np.ndarray:
        z = self.z_min + self.dz * np.arange(self.n)
        z.flags.writeable = False
        return z

    @cached_property
    def column_weights(self) -> np.ndarray:
        """Weights ``w`` with ``H = tril(ones) * w - diag(d)``."""
        w = np.full(self.n, self.dz)
        w[0] = self.z_min
        if self.quadrature == "trapezoid":
            w[0] += 0.5 * self.dz
        w.flags.writeable = False
        return w

    @cached_property
    def diagonal_correction(self) -> np.ndarray | None:
        """Diagonal ``d`` subtracted from the cumulative sum, None if zero."""
        if self.quadrature == "rectangle":
            return None
        d = np.full(self.n, 0.5 * self.dz)
        d.flags.writeable = False
        return d

    def same_as(self, other: "AltitudeGrid") -> bool:
        return (
            self.n == other.n
            and self.quadrature == other.quadrature
            and np.isclose(self.z_min, other.z_min, rtol=1e-12, atol=0)
            and np.isclose(self.dz, other.dz, rtol=1e-12, atol=0)
        )


def build_grid(z_min, z_max, dz, quadrature="rectangle") -> AltitudeGrid:
    """Grid from ``z_min`` to ``z_max`` inclusive with spacing ``dz``.

    Raises
    ------
    ConfigurationError
        If ``z_min <= 0``, ``z_max <= z_min``, ``dz <= 0`` or the range is
        not an integer multiple of ``dz``.
    """
    if not z_min > 0:
        raise ConfigurationError(f"z_min must be positive (1/z**2 factor), got {z_min}")
    if not dz > 0:
        raise ConfigurationError(f"dz must be positive, got {dz}")
    if not z_max > z_min:
        raise ConfigurationError(f"z_max ({z_max}) must exceed z_min ({z_min})")
    steps = (z_max - z_min) / dz
    k = round(steps)
    if abs(steps - k) > 1e-9 * max(1.0, steps):
        raise ConfigurationError(
            f"range {z_max - z_min} is not an integer multiple of dz={dz}"
        )
    return AltitudeGrid(float(z_min), float(dz), int(k) + 1, quadrature)


@dataclass(frozen=True, eq=False)
class MolecularModel:
    """Molecular number density profile, assumed known.

    The analytic form is ``rho_0 * exp(-(z - z_ref)/scale_height)``. When
    ``table_z``/``table_rho`` are given they take precedence and the density
    is linearly interpolated.
    """

    rho_0: float = 2.5e25
    scale_height: float = 8000.0
    z_ref: float = 0.0
    table_z: np.ndarray | None = None
    table_rho: np.ndarray | None = None

    def __post_init__(self):
        if self.table_z is not None or self.table_rho is not None:
            if self.table_z is None or self.table_rho is None:
                raise ConfigurationError("tabulated model needs both altitudes and densities")
            tz = np.asarray(self.table_z, dtype=float)
            tr = np.asarray(self.table_rho, dtype=float)
            if tz.ndim != 1 or tz.shape != tr.shape or tz.size < 2:
                raise ConfigurationError("density table must be two equal 1-d arrays (>= 2 rows)")
            if np.any(np.diff(tz) <= 0):
                raise ConfigurationError("density table altitudes must be strictly increasing")
            if np.any(tr <= 0):
                raise ConfigurationError("tabulated densities must be positive")
            object.__setattr__(self, "table_z", tz)
            object.__setattr__(self, "table_rho", tr)
        else:
            if not self.rho_0 > 0:
                raise ConfigurationError(f"rho_0 must be positive, got {self.rho_0}")
            if not self.scale_height > 0:
                raise ConfigurationError(
                    f"scale_height must be positive, got {self.scale_height}"
                )

    @classmethod
    def tabulated(cls, z, rho) -> "MolecularModel":
        return cls(table_z=np.asarray(z, float), table_rho=np.asarray(rho, float))

    @property
    def is_tabulated(self) -> bool:
        return self.table_z is not None


def molecular_density(model: MolecularModel, z):
    """Density at altitude(s) ``z`` (scalar or array, metres)."""
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr <= 0):
        raise DomainError("molecular density requested at non-positive altitude")
    if model.is_tabulated:
        lo, hi = model.table_z[0], model.table_z[-1]
        if np.any(z_arr < lo) or np.any(z_arr > hi):
            raise RangeError(f"altitude outside tabulated range [{lo}, {hi}]")
        rho = np.interp(z_arr, model.table_z, model.table_rho)
    else:
        rho = model.rho_0 * np.exp(-(z_arr - model.z_ref) / model.scale_height)
    return rho if rho.ndim else float(rho)


@dataclass(frozen=True)
class ForwardModelConfig:
    """Raman channel parameters.

    Parameters
    ----------
    C : float
        System constant (laser power, efficiency, Raman cross section).
    wavelength : float
        Detection wavelength in nm; a label only.
    molecular : MolecularModel
    counts_per_power : float, optional
        Photon counts per unit of mean power for Poisson simulation. When
        unset it is derived so that the largest expected count of a
        synthesised signal equals ``peak_counts``.
    peak_counts : float
    sigma_floor : float
        Noise-free simulations report ``sigma = sigma_floor * max(P)``.
    """

    C: float
    wavelength: float = 355.0
    molecular: MolecularModel = field(default_factory=MolecularModel)
    counts_per_power: float | None = None
    peak_counts: float = 1e4
    sigma_floor: float = 1e-3

    def __post_init__(self):
        if not (np.isfinite(self.C) and self.C > 0):
            raise ConfigurationError(f"C must be positive, got {self.C}")
        if self.counts_per_power is not None and not self.counts_per_power > 0:
            raise ConfigurationError(
                f"counts_per_power must be positive, got {self.counts_per_power}"
            )
        if not self.peak_counts > 0:
            raise ConfigurationError(f"peak_counts must be positive, got {self.peak_counts}")
        if not self.sigma_floor > 0:
            raise ConfigurationError(f"sigma_floor must be positive, got {self.sigma_floor}")

    def resolved_counts_per_power(self, P_exact: np.ndarray) -> float:
        if self.counts_per_power is not None:
            return float(self.counts_per_power)
        peak = float(np.max(P_exact))
        if not peak > 0:
            raise ConfigurationError("cannot calibrate counts on an all-zero signal")
        return self.peak_counts / peak


def _as_array(values, n, what="values") -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != (n,):
        raise DimensionError(f"{what} has shape {arr.shape}, grid has {n} samples")
    return arr


@dataclass(frozen=True, eq=False)
class LidarSignal:
    """Measured or simulated Raman power with per-altitude uncertainty."""

    grid: AltitudeGrid
    P: np.ndarray
    sigma: np.ndarray
    wavelength: float = 355.0

    def __post_init__(self):
        object.__setattr__(self, "P", _as_array(self.P, self.grid.n, "P"))
        object.__setattr__(self, "sigma", _as_array(self.sigma, self.grid.n, "sigma"))


@dataclass(frozen=True, eq=False)
class TransformedData:
    """Optical depth data ``y`` with a mask of usable points.

    ``source`` keeps the signal the data was computed from, which residual
    based stopping rules compare against.
    """

    grid: AltitudeGrid
    y: np.ndarray
    valid: np.ndarray | None = None
    source: "LidarSignal | None" = None

    def __post_init__(self):
        y = _as_array(self.y, self.grid.n, "y")
        if self.valid is None:
            valid = np.isfinite(y)
        else:
            valid = np.asarray(self.valid, dtype=bool)
            if valid.shape != y.shape:
                raise DimensionError("validity mask does not match y")
        if not np.all(np.isfinite(y[valid])):
            raise DomainError("non-finite y on a valid entry")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "valid", valid)

    @property
    def n_valid(self) -> int:
        return int(np.count_nonzero(self.valid))


@dataclass(frozen=True, eq=False)
class ExtinctionProfile:
    """Extinction coefficient in 1/m, optionally with a confidence band."""

    grid: AltitudeGrid
    alpha: np.ndarray
    band_low: np.ndarray | None = None
    band_high: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", _as_array(self.alpha, self.grid.n, "alpha"))
        for name in ("band_low", "band_high"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, _as_array(val, self.grid.n, name))


def _values_on(grid: AltitudeGrid, x) -> np.ndarray:
    if isinstance(x, ExtinctionProfile):
        if not x.grid.same_as(grid):
            raise DimensionError("profile is defined on a different grid")
        return x.alpha
    return _as_array(x, grid.n)


def apply_forward(grid: AltitudeGrid, x) -> np.ndarray:
    """Discrete running integral ``Hx`` via a cumulative sum."""
    x = _values_on(grid, x)
    out = np.cumsum(grid.column_weights * x)
    d = grid.diagonal_correction
    if d is not None:
        out -= d * x
    return out


def apply_adjoint(grid: AltitudeGrid, v) -> np.ndarray:
    """Transpose ``H^T v`` via a reverse cumulative sum."""
    v = _as_array(v, grid.n)
    out = np.cumsum(v[::-1])[::-1] * grid.column_weights
    d = grid.diagonal_correction
    if d is not None:
        out -= d * v
    return out


def forward_matrix(grid: AltitudeGrid) -> np.ndarray:
    """Dense ``n x n`` matrix of ``H``; for small grids and direct solvers."""
    H = np.tril(np.broadcast_to(grid.column_weights, (grid.n, grid.n)))
    d = grid.diagonal_correction
    if d is not None:
        H = H - np.diag(d)
    return H


def _reference_power(grid: AltitudeGrid, config: ForwardModelConfig) -> np.ndarray:
    z = grid.z
    return config.C * molecular_density(config.molecular, z) / z**2


def exact_signal(grid: AltitudeGrid, alpha, config: ForwardModelConfig) -> np.ndarray:
    """Noise-free power ``C rho(z) exp(-(H alpha)) / z**2``."""
    return _reference_power(grid, config) * np.exp(-apply_forward(grid, alpha))


def transform_signal(signal: LidarSignal, config: ForwardModelConfig) -> TransformedData:
    """Map power to optical depth, masking points where the log is undefined."""
    ref = _reference_power(signal.grid, config)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = signal.P / ref
        valid = np.isfinite(ratio) & (ratio > 0)
        y = np.where(valid, -np.log(np.where(valid, ratio, 1.0)), np.nan)
    if not valid.any():
        raise EmptyDataError("no altitude has a positive, finite signal")
    return TransformedData(signal.grid, y, valid, source=signal)


def synthesize_signal(
    profile: ExtinctionProfile,
    config: ForwardModelConfig,
    noise: str = "none",
    seed=None,
) -> LidarSignal:
    """Simulate a Raman signal for ``profile``.

    Parameters
    ----------
    noise : {"none", "poisson"}
        With ``"poisson"`` the expected counts ``counts_per_power * P`` are
        sampled and converted back to power; ``sigma = sqrt(max(k, 1))``
        in the same units.
    seed : int, numpy.random.Generator or None
        Source of randomness for Poisson noise.
    """
    alpha = profile.alpha
    if np.any(alpha < 0):
        raise DomainError("extinction must be non-negative for simulation")
    grid = profile.grid
    P = exact_signal(grid, alpha, config)
    if noise == "none":
        sigma = np.full(grid.n, config.sigma_floor * float(np.max(P)))
        return LidarSignal(grid, P, sigma, config.wavelength)
    if noise != "poisson":
        raise ConfigurationError(f"unknown noise model {noise!r}")
    scale = config.resolved_counts_per_power(P)
    lam = scale * P
    if not np.all(np.isfinite(lam)) or lam.max() > _MAX_EXPECTED_COUNTS:
        raise ConfigurationError(
            f"expected counts overflow (max {lam.max():.3g}); lower counts_per_power"
        )
    rng = np.random.default_rng(seed)
    k = rng.poisson(lam).astype(float)
    return LidarSignal(grid, k / scale, np.sqrt(np.maximum(k, 1.0)) / scale, config.wavelength)


def make_comb_profile(
    grid: AltitudeGrid,
    period_points: int,
    peak_value: float,
    offset: int = 0,
    n_peaks: int | None = None,
) -> ExtinctionProfile:
    """Train of single-sample peaks every ``period_points`` samples.

    Peaks sit at indices ``offset, offset + period, ...``; ``n_peaks``
    truncates the train.
    """
    if period_points < 1:
        raise ConfigurationError("period_points must be >= 1")
    idx = np.arange(offset, grid.n, period_points)
    if n_peaks is not None:
        idx = idx[:n_peaks]
    alpha = np.zeros(grid.n)
    alpha[idx] = peak_value
    return ExtinctionProfile(grid, alpha)
