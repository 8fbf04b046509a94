"""
Stopping EM with the cumulative residual rule
=============================================

Iterating EM on noisy data first improves the profile and then starts
fitting the noise. The rule stops once the running mean of normalised
residuals sits inside K/sqrt(i) at every altitude.
"""

import numpy as np

from ramanem import EmConfig, StoppingRule, em_solve, transform_signal
from ramanem.analysis import earlinet_standin, noisy_average, standin_forward_config

truth = earlinet_standin(355)
fwd = standin_forward_config(truth, 355, top_counts=1e5)
signal = noisy_average(truth, fwd, n=30, seed=1)
data = transform_signal(signal, fwd)

# error against the truth along one long unstopped run
errors = {}
em_solve(
    data,
    config=EmConfig(max_iterations=100_000, check_every=1000),
    callback=lambda k, x: errors.__setitem__(k, np.sqrt(np.mean((x - truth.alpha) ** 2))),
)
best = min(errors, key=errors.get)
print(f"smallest RMSE {errors[best]:.2e} near iteration {best}; at 100000: {errors[100_000]:.2e}")

for two_sided in (False, True):
    rule = StoppingRule(3.0, fwd, two_sided=two_sided)
    x, rep = em_solve(data, config=EmConfig(max_iterations=100_000), stop=rule)
    rmse = np.sqrt(np.mean((x.alpha - truth.alpha) ** 2))
    label = "|Delta_i|" if two_sided else " Delta_i "
    print(f"rule on {label}: stopped at {rep.iterations_used:>6d} ({rep.stopped_by}), RMSE {rmse:.2e}")

# the signed rule accepts early iterates whose predicted signal is too strong
