"""
Filter chains and the derivative retrieval
==========================================

The classical retrieval smooths the power and then differentiates the
log-transformed signal. Here the chain stages are shown on a toy signal
and the effect of the smoothing width on a two-layer comb is compared
with EM.
"""

import numpy as np

from ramanem import EmConfig, ForwardModelConfig, LidarSignal, build_grid, em_solve, make_comb_profile
from ramanem import synthesize_signal, transform_signal
from ramanem.analysis import find_peaks
from ramanem.baselines import derivative_retrieval, parse_filter_chain, spike_reject, bin_values, running_average

print(spike_reject([1, 5, 1, 2, 3], 2))
print(bin_values([1, 2, 3, 4], 2))
print(running_average([0, 0, 3, 0, 0], 3))

grid = build_grid(15, 3000, 15)
truth = make_comb_profile(grid, period_points=10, peak_value=1e-4)
fwd = ForwardModelConfig(C=1e-20, counts_per_power=None, peak_counts=1e7)
signal = synthesize_signal(truth, fwd, "poisson", seed=3)
peaks = np.flatnonzero(truth.alpha)

for chain in ("avg:1", "avg:5", "gauss:2", "spike:1e-3,avg:5"):
    x = derivative_retrieval(signal, fwd, parse_filter_chain(chain))
    found = np.intersect1d(find_peaks(x.alpha), peaks).size
    print(f"derivative, chain {chain:<16s} layers at exact index: {found}/{peaks.size}")

x, rep = em_solve(transform_signal(signal, fwd), config=EmConfig(max_iterations=20_000))
found = np.intersect1d(find_peaks(x.alpha), peaks).size
print(f"EM, {rep.iterations_used} it{'':>16s} layers at exact index: {found}/{peaks.size}")
