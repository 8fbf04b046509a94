import numpy as np

from ..errors import DimensionError
from ..grid import AltitudeGrid, TransformedData, forward_matrix


def valid_system(y: TransformedData, grid: AltitudeGrid | None, H=None):
    """Dense rows of ``H`` and data restricted to valid entries."""
    grid = grid or y.grid
    if not y.grid.same_as(grid):
        raise DimensionError("data and grid disagree")
    if H is None:
        H = forward_matrix(grid)
    else:
        H = np.asarray(H, dtype=float)
        if H.shape != (grid.n, grid.n):
            raise DimensionError(f"operator has shape {H.shape}, expected {(grid.n, grid.n)}")
    return grid, H[y.valid], y.y[y.valid]
