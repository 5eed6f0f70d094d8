"""
Block length and payload size
=============================

A longer block makes each round more reliable but also longer.  Once the
round error is already negligible, extra channel uses only add delay.
"""

# %%
import matplotlib.pyplot as plt

from urllc_aoi import SystemConfig
from urllc_aoi.experiments import N_GRID, SweepSpec, sweep

# %%
# At the default (very low) noise floor the error is negligible at every
# block length, so the shortest block wins for both payloads.
for k in (10, 100):
    res = sweep(SweepSpec("n_total", N_GRID, SystemConfig(k_bits=k)))
    print(f"k={k}: argmin n = {res.argmin_value:g}")
    plt.plot(res.values(), 1e3 * res.analytic(), label=f"k = {k} bits")

# %%
# With a noisier receiver the trade-off appears: short blocks fail often and
# the optimum moves to a moderate length.
noisy = SystemConfig(noise_dbm=-90.0, k_bits=100, lambda_rate=10.0)
res = sweep(SweepSpec("n_total", N_GRID, noisy))
print(f"noise -90 dBm, k=100: argmin n = {res.argmin_value:g}")
plt.plot(res.values(), 1e3 * res.analytic(), "--", label="k = 100, noise -90 dBm, 10/s")

plt.yscale("log")
plt.xlabel("total channel uses per round")
plt.ylabel("average AoI (ms)")
plt.legend()
plt.show()
