"""Cumulative normalised residual stopping rule.

A candidate profile is accepted once the running mean of the normalised
residuals between measured and predicted Raman power,
``Delta_i = (1/i) sum_{j<=i} (P_j - Pbar_j) / sigma_j``, stays below
``K / sqrt(i)`` at every altitude index ``i`` (counted from 1 over valid
points only). Under pure noise ``Delta_i`` is approximately ``N(0, 1/i)``,
so ``K = 3`` is a three standard deviation bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionError, DomainError
from .grid import (
    ExtinctionProfile,
    ForwardModelConfig,
    LidarSignal,
    exact_signal,
)

__all__ = [
    "StoppingRule",
    "predict_signal",
    "cumulative_residuals",
    "criterion_satisfied",
]


@dataclass(frozen=True)
class StoppingRule:
    """Residual criterion bound to a measured signal.

    ``two_sided`` replaces ``Delta_i < K/sqrt(i)`` by ``|Delta_i| < K/sqrt(i)``.
    """

    K: float
    forward_config: ForwardModelConfig
    two_sided: bool = False

    def __post_init__(self):
        if not self.K > 0:
            raise ConfigurationError(f"K must be positive, got {self.K}")

    def deltas(self, measured: LidarSignal, x, valid=None) -> np.ndarray:
        predicted = predict_signal(x, self.forward_config, like=measured)
        return cumulative_residuals(measured, predicted, valid)

    def check(self, measured: LidarSignal, x, valid=None) -> tuple[bool, np.ndarray]:
        """``(satisfied, Delta)`` for candidate ``x`` (profile or array)."""
        delta = self.deltas(measured, x, valid)
        return criterion_satisfied(delta, self.K, self.two_sided), delta


def predict_signal(
    x, config: ForwardModelConfig, like: LidarSignal | None = None
) -> LidarSignal:
    """Noise-free power generated by profile ``x``.

    ``x`` may be an ExtinctionProfile or, together with ``like`` (whose grid
    is used), a bare array.
    """
    if isinstance(x, ExtinctionProfile):
        grid, alpha = x.grid, x.alpha
    elif like is not None:
        grid, alpha = like.grid, np.asarray(x, dtype=float)
    else:
        raise DimensionError("bare arrays need a reference signal for their grid")
    P = exact_signal(grid, alpha, config)
    sigma = np.full(grid.n, config.sigma_floor * float(np.max(P)))
    return LidarSignal(grid, P, sigma, config.wavelength)


def cumulative_residuals(
    measured: LidarSignal, predicted: LidarSignal, valid=None
) -> np.ndarray:
    """Running mean of ``(P - Pbar)/sigma`` over valid points, in altitude order.

    The result has one entry per valid point; entry ``i-1`` is ``Delta_i``.
    """
    if measured.P.shape != predicted.P.shape:
        raise DimensionError("measured and predicted signals differ in length")
    if valid is None:
        valid = np.ones(measured.P.shape, dtype=bool)
    sigma = measured.sigma[valid]
    if np.any(sigma <= 0):
        raise DomainError("zero or negative sigma on a valid entry")
    r = (measured.P[valid] - predicted.P[valid]) / sigma
    return np.cumsum(r) / np.arange(1, r.size + 1)


def criterion_satisfied(delta, K: float, two_sided: bool = False) -> bool:
    """True iff ``Delta_i < K/sqrt(i)`` for every ``i`` (strict)."""
    delta = np.asarray(delta, dtype=float)
    if delta.size == 0:
        return True
    bound = K / np.sqrt(np.arange(1, delta.size + 1))
    stat = np.abs(delta) if two_sided else delta
    return bool(np.all(stat < bound))
