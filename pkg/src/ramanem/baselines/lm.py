"""Levenberg-Marquardt least squares with a positivity constraint.

Positivity is enforced by writing ``x = s**2`` and running damped
Gauss-Newton on ``s``; the Jacobian of ``r(s) = H s**2 - y`` is
``H diag(2 s)``. Regularisation comes from stopping the iterations with the
residual rule.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ..errors import ConfigurationError, EmptyDataError, NumericalError
from ..grid import AltitudeGrid, ExtinctionProfile, TransformedData
from ..report import CRITERION, MAX_ITERATIONS, SolveReport
from ..stopping import StoppingRule
from ._common import valid_system

__all__ = ["LmConfig", "lm_solve"]


@dataclass(frozen=True)
class LmConfig:
    """Damping schedule and limits.

    ``damping`` is relative to the mean diagonal of ``J^T J``. ``gtol``
    ends the run early (without a stopping rule) once the relative cost
    decrease of an accepted step drops below it.
    """

    damping_initial: float = 1e-3
    damping_up: float = 10.0
    damping_down: float = 0.1
    max_iterations: int = 500
    initial_value: float | None = None
    gtol: float = 1e-15

    def __post_init__(self):
        if not self.damping_initial > 0:
            raise ConfigurationError("damping_initial must be positive")
        if not self.damping_up > 1:
            raise ConfigurationError("damping_up must exceed 1")
        if not 0 < self.damping_down < 1:
            raise ConfigurationError("damping_down must lie in (0, 1)")
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be >= 1")
        if self.initial_value is not None and not self.initial_value > 0:
            raise ConfigurationError("initial_value must be positive")


def lm_solve(
    y: TransformedData,
    grid: AltitudeGrid | None = None,
    config: LmConfig | None = None,
    stop: StoppingRule | None = None,
    signal=None,
    H=None,
):
    """Minimise ``||Hx - y||^2`` over ``x >= 0``.

    The start is uniform: ``config.initial_value`` or the magnitude of
    the constant that best fits the data in the least squares sense. Returns
    ``(profile, report)``; ``report.extras["cost_trace"]`` holds the costs
    of accepted steps.
    """
    config = config or LmConfig()
    grid, Hv, yv = valid_system(y, grid, H)
    if yv.size < 2:
        raise EmptyDataError("Levenberg-Marquardt needs at least 2 valid data points")
    if stop is not None:
        signal = signal if signal is not None else y.source
        if signal is None:
            raise ConfigurationError("a stopping rule needs the measured signal")
    t0 = time.perf_counter()

    if config.initial_value is not None:
        x0 = config.initial_value
    else:
        # magnitude of the best uniform fit; a non-positive scale would put
        # s near 0 where the Jacobian vanishes and LM cannot move
        h1 = Hv.sum(axis=1)
        x0 = abs(float(h1 @ yv / (h1 @ h1))) or float(np.linalg.norm(yv) / np.linalg.norm(h1))
        x0 = max(x0, 1e-300)
    s = np.full(grid.n, np.sqrt(x0))
    r = Hv @ (s * s) - yv
    cost = float(r @ r)
    if not np.isfinite(cost):
        raise NumericalError("non-finite initial cost in Levenberg-Marquardt")
    mu = config.damping_initial
    report = SolveReport("lm", objective="least_squares")
    costs = [cost]
    stopped = MAX_ITERATIONS
    k = 0
    while k < config.max_iterations:
        k += 1
        J = Hv * (2.0 * s)
        JtJ = J.T @ J
        g = J.T @ r
        scale = float(np.mean(np.diag(JtJ))) or 1.0
        accepted = False
        for _ in range(60):
            A = JtJ + (mu * scale) * np.eye(grid.n)
            try:
                step = linalg.cho_solve(linalg.cho_factor(A, check_finite=False), -g, check_finite=False)
            except linalg.LinAlgError:
                mu *= config.damping_up
                continue
            s_new = s + step
            with np.errstate(over="ignore", invalid="ignore"):
                r_new = Hv @ (s_new * s_new) - yv
                cost_new = float(r_new @ r_new)
            # an overflowing trial step is just a rejected one
            if np.isfinite(cost_new) and cost_new <= cost:
                accepted = True
                break
            mu *= config.damping_up
        if not accepted:
            break
        decrease = (cost - cost_new) / cost if cost > 0 else 0.0
        s, r, cost = s_new, r_new, cost_new
        mu = max(mu * config.damping_down, 1e-15)
        costs.append(cost)
        satisfied, delta = (False, None)
        if stop is not None:
            satisfied, delta = stop.check(signal, s * s, y.valid)
            report.delta_trace = delta
        report.record(k, cost, delta)
        if satisfied:
            stopped = CRITERION
            break
        if stop is None and (cost == 0.0 or decrease < config.gtol):
            break

    report.iterations_used = k
    report.stopped_by = stopped
    report.extras["cost_trace"] = costs
    report.wall_time = time.perf_counter() - t0
    return ExtinctionProfile(grid, s * s), report
