"""Raman lidar extinction retrieval by Expectation-Maximization.

The subpackages are:

* :mod:`ramanem.grid` - grids, molecular atmosphere, forward model
* :mod:`ramanem.em` - EM solver and KL divergence
* :mod:`ramanem.stopping` - cumulative residual stopping rule
* :mod:`ramanem.baselines` - Tikhonov, Levenberg-Marquardt, filtered derivative
* :mod:`ramanem.analysis` - resolution, Monte Carlo and comparison harness
* :mod:`ramanem.io` - text file formats
"""

from .em import EmConfig, em_solve, em_step, kl_divergence
from .errors import (
    ConfigurationError,
    DimensionError,
    DomainError,
    EmptyDataError,
    HarnessError,
    NumericalError,
    ParseError,
    RamanEMError,
    RangeError,
)
from .grid import (
    AltitudeGrid,
    ExtinctionProfile,
    ForwardModelConfig,
    LidarSignal,
    MolecularModel,
    TransformedData,
    apply_adjoint,
    apply_forward,
    build_grid,
    make_comb_profile,
    molecular_density,
    synthesize_signal,
    transform_signal,
)
from .report import SolveReport
from .stopping import StoppingRule, criterion_satisfied, cumulative_residuals, predict_signal

__version__ = "0.1.0"
