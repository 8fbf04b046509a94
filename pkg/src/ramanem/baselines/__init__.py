"""Comparison retrievals: Tikhonov, Levenberg-Marquardt and filtered differentiation."""

from .filters import (
    FilterChain,
    FilterStage,
    apply_filter_chain,
    bin_values,
    derivative_retrieval,
    gaussian_filter,
    parse_filter_chain,
    running_average,
    spike_reject,
)
from .lm import LmConfig, lm_solve
from .tikhonov import TikhonovConfig, normal_residual, tikhonov_auto, tikhonov_solve

__all__ = [
    "FilterChain",
    "FilterStage",
    "LmConfig",
    "TikhonovConfig",
    "apply_filter_chain",
    "bin_values",
    "derivative_retrieval",
    "gaussian_filter",
    "lm_solve",
    "normal_residual",
    "parse_filter_chain",
    "running_average",
    "spike_reject",
    "tikhonov_auto",
    "tikhonov_solve",
]
