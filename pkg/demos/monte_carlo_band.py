"""
Monte Carlo uncertainty band for the EM profile
===============================================

Thirty repetitions of (simulate 30 noisy shots, average, invert). The
spread of the thirty EM profiles gives a band at every altitude; the
coverage is the fraction of altitudes where the true profile lies inside
mean +- 2 sd.
"""

import numpy as np

from ramanem.analysis import MonteCarloConfig, earlinet_standin, monte_carlo, standin_forward_config

for wavelength in (355, 532):
    truth = earlinet_standin(wavelength)
    fwd = standin_forward_config(truth, wavelength, top_counts=1e5)
    result = monte_carlo(truth, fwd, MonteCarloConfig(n_realizations=30, n_repetitions=30, seed=0))
    iters = [r.iterations_used for r in result.reports]
    print(
        f"{wavelength} nm: coverage {result.coverage:.2f}, RMSE {result.rmse_vs_truth:.2e}, "
        f"median stop {np.median(iters):.0f} it, {result.wall_time:.1f} s"
    )

    z = truth.grid.z
    m = result.mean_profile
    for zk in (500, 1500, 3500, 6000, 8500):
        i = int(np.argmin(np.abs(z - zk)))
        print(f"   z={z[i]:6.0f} m  truth {truth.alpha[i]:.3e}  band [{m.band_low[i]:.3e}, {m.band_high[i]:.3e}]")

    try:
        from ramanem.plotting import plot_band
    except ImportError:
        continue
    plot_band(f"band_{wavelength}.svg", m, truth)
