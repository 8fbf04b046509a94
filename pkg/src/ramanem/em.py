"""Expectation-Maximization for the Raman extinction problem.

EM minimises the Kullback-Leibler divergence between the optical depth data
``y`` and ``Hx`` over strictly positive profiles with the multiplicative
update::

    x_{k+1} = x_k / (H^T 1) * H^T (y / (H x_k))

The iteration is regularised by stopping it early with the residual rule
from :mod:`ramanem.stopping`.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .errors import ConfigurationError, DimensionError, DomainError, EmptyDataError
from .grid import (
    AltitudeGrid,
    ExtinctionProfile,
    LidarSignal,
    TransformedData,
    apply_adjoint,
    apply_forward,
)
from .report import CRITERION, MAX_ITERATIONS, SolveReport
from .stopping import StoppingRule

__all__ = ["EmConfig", "kl_divergence", "em_step", "em_solve", "prepare_data"]


@dataclass(frozen=True)
class EmConfig:
    """EM settings.

    ``nonpositive`` decides what happens to valid entries with ``y <= 0``:
    ``"floor"`` replaces them by ``data_floor``, ``"mask"`` drops them.
    """

    max_iterations: int = 100_000
    initial_value: float = 1e-5
    data_floor: float = 1e-12
    check_every: int = 10
    nonpositive: str = "floor"

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be >= 1")
        if not self.initial_value > 0:
            raise ConfigurationError("initial_value must be positive")
        if self.data_floor < 0:
            raise ConfigurationError("data_floor must be non-negative")
        if self.check_every < 1:
            raise ConfigurationError("check_every must be >= 1")
        if self.nonpositive not in ("floor", "mask"):
            raise ConfigurationError(f"nonpositive must be 'floor' or 'mask', got {self.nonpositive!r}")


def prepare_data(y: TransformedData, config: EmConfig | None = None):
    """Masked data vector for EM.

    Returns ``(y_eff, mask, n_floored)`` where ``y_eff`` is zero off the
    mask and non-positive valid entries are floored or masked.
    """
    config = config or EmConfig()
    mask = y.valid.copy()
    values = np.where(mask, y.y, 0.0)
    low = mask & (values <= 0)
    n_low = int(np.count_nonzero(low))
    if config.nonpositive == "mask":
        mask &= ~low
        values[low] = 0.0
    else:
        values[low] = config.data_floor
    return values, mask, n_low


def _data_and_mask(y, grid):
    if isinstance(y, TransformedData):
        if grid is not None and not y.grid.same_as(grid):
            raise DimensionError("data and grid disagree")
        return y.grid, y.y, y.valid
    if grid is None:
        raise DimensionError("bare data arrays need a grid")
    arr = np.asarray(y, dtype=float)
    if arr.shape != (grid.n,):
        raise DimensionError(f"data has shape {arr.shape}, grid has {grid.n} samples")
    return grid, arr, np.ones(grid.n, dtype=bool)


def kl_divergence(y, x, grid: AltitudeGrid | None = None, data_floor: float = 0.0) -> float:
    """Kullback-Leibler discrepancy between data ``y`` and ``Hx``.

    Evaluates ``(2/N) sum_i [y_i log(y_i/(Hx)_i) + (Hx)_i - y_i + y_i log(y_i)]``
    over the N valid entries. The trailing ``y log y`` term does not depend
    on ``x``; it is kept so values match the usual lidar EM formula. Valid
    entries with ``y <= 0`` are replaced by ``data_floor`` (``0 log 0 = 0``).

    Raises
    ------
    DomainError
        If some ``(Hx)_i <= 0`` on a valid entry.
    """
    grid, values, valid = _data_and_mask(y, grid)
    xv = x.alpha if isinstance(x, ExtinctionProfile) else np.asarray(x, dtype=float)
    hx = apply_forward(grid, xv)[valid]
    yv = np.maximum(values[valid], data_floor)
    if yv.size == 0:
        raise EmptyDataError("no valid entries")
    if np.any(hx <= 0):
        raise DomainError("Hx must be strictly positive on valid entries")
    terms = xlogy(yv, yv / hx) + hx - yv + xlogy(yv, yv)
    return 2.0 / yv.size * float(np.sum(terms))


def em_step(x, y, grid: AltitudeGrid | None = None, H=None) -> ExtinctionProfile:
    """One multiplicative EM update restricted to the valid data entries.

    ``H`` optionally replaces the quadrature operator by a dense matrix
    (handy for small oracles such as the identity).
    """
    grid, values, valid = _data_and_mask(y, grid)
    xv = x.alpha if isinstance(x, ExtinctionProfile) else np.asarray(x, dtype=float)
    if np.any(xv <= 0):
        raise DomainError("EM iterates must be strictly positive")
    if H is None:
        fwd = lambda v: apply_forward(grid, v)
        adj = lambda v: apply_adjoint(grid, v)
    else:
        H = np.asarray(H, dtype=float)
        if H.shape != (grid.n, grid.n):
            raise DimensionError(f"H has shape {H.shape}, expected {(grid.n, grid.n)}")
        fwd = lambda v: H @ v
        adj = lambda v: H.T @ v
    sens = adj(valid.astype(float))
    if np.any(sens <= 0):
        raise DomainError("H^T 1 vanishes; some components are not seen by any datum")
    hx = fwd(xv)
    ratio = np.zeros(grid.n)
    ratio[valid] = values[valid] / hx[valid]
    return ExtinctionProfile(grid, xv / sens * adj(ratio))


class _Iteration:
    """Allocation-free EM loop over a fixed mask.

    Components above the highest valid datum do not influence any datum
    (``H^T 1 = 0``); they are held at zero and excluded from the update.
    """

    def __init__(self, grid: AltitudeGrid, values: np.ndarray, mask: np.ndarray):
        last = int(np.flatnonzero(mask)[-1]) + 1
        self.m = last
        self.w = np.array(grid.column_weights[:last])
        d = grid.diagonal_correction
        self.d = None if d is None else np.array(d[:last])
        self.y = values[:last].copy()
        self.mask = mask[:last].copy()
        self.sens = self._adjoint(self.mask.astype(float))
        if np.any(self.sens <= 0):
            raise DomainError("H^T 1 vanishes below the highest valid datum")
        self.hx = np.empty(last)
        self.ratio = np.empty(last)
        self.back = np.empty(last)

    def _adjoint(self, v):
        out = np.cumsum(v[::-1])[::-1] * self.w
        if self.d is not None:
            out -= self.d * v
        return out

    def forward(self, x, out):
        np.multiply(self.w, x, out=out)
        np.cumsum(out, out=out)
        if self.d is not None:
            out -= self.d * x
        return out

    def step(self, x):
        hx, ratio, back = self.hx, self.ratio, self.back
        self.forward(x, hx)
        np.divide(self.y, hx, out=ratio)
        np.cumsum(ratio[::-1], out=back[::-1])
        back *= self.w
        if self.d is not None:
            back -= self.d * ratio
        x *= back
        x /= self.sens
        return x


def em_solve(
    y: TransformedData,
    grid: AltitudeGrid | None = None,
    config: EmConfig | None = None,
    stop: StoppingRule | None = None,
    signal: LidarSignal | None = None,
    callback=None,
):
    """Stopped EM reconstruction.

    Parameters
    ----------
    y : TransformedData
    grid : AltitudeGrid, optional
        Defaults to ``y.grid``.
    config : EmConfig, optional
    stop : StoppingRule, optional
        Checked every ``config.check_every`` iterations against ``signal``
        (default ``y.source``). Without a rule all ``max_iterations`` run.
    callback : callable, optional
        ``callback(k, x)`` at every checkpoint, ``x`` a read-only view.

    Returns
    -------
    profile : ExtinctionProfile
    report : SolveReport
    """
    config = config or EmConfig()
    grid = grid or y.grid
    if not y.grid.same_as(grid):
        raise DimensionError("data and grid disagree")
    values, mask, n_floored = prepare_data(y, config)
    if np.count_nonzero(mask) < 2:
        raise EmptyDataError("EM needs at least 2 valid data points")
    if stop is not None:
        signal = signal if signal is not None else y.source
        if signal is None:
            raise ConfigurationError("a stopping rule needs the measured signal")

    t0 = time.perf_counter()
    it = _Iteration(grid, values, mask)
    x = np.full(it.m, float(config.initial_value))
    full = np.zeros(grid.n)
    report = SolveReport("em", objective="kl")
    report.extras["floored"] = n_floored
    report.extras["unobservable"] = grid.n - it.m

    stopped = MAX_ITERATIONS
    k = 0
    while k < config.max_iterations:
        it.step(x)
        k += 1
        if k % config.check_every and k != config.max_iterations:
            continue
        full[: it.m] = x
        kl = _kl_from_forward(it, x)
        delta = None
        satisfied = False
        if stop is not None:
            satisfied, delta = stop.check(signal, full, mask)
            report.delta_trace = delta
        report.record(k, kl, delta)
        if callback is not None:
            view = full.view()
            view.flags.writeable = False
            callback(k, view)
        if satisfied:
            stopped = CRITERION
            break

    full[: it.m] = x
    report.iterations_used = k
    report.stopped_by = stopped
    report.wall_time = time.perf_counter() - t0
    return ExtinctionProfile(grid, full.copy()), report


def _kl_from_forward(it: _Iteration, x) -> float:
    hx = it.forward(x, np.empty(it.m))[it.mask]
    yv = it.y[it.mask]
    if np.any(hx <= 0):
        raise DomainError("Hx must be strictly positive on valid entries")
    terms = xlogy(yv, yv / hx) + hx - yv + xlogy(yv, yv)
    return 2.0 / yv.size * float(np.sum(terms))
