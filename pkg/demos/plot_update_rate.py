"""
Choosing the update rate
========================

Sending updates too rarely lets information go stale between deliveries;
sending too often makes them queue behind each other at the source.  The
average age is minimised somewhere in between.
"""

# %%
# Sweep the Poisson update rate over the default link.
import matplotlib.pyplot as plt

from urllc_aoi import SystemConfig
from urllc_aoi.experiments import LAMBDA_GRID, SweepSpec, find_optimum, sweep

base = SystemConfig()
spec = SweepSpec("lambda_rate", LAMBDA_GRID, base)
result = sweep(spec)
print(f"grid argmin: {result.argmin_value:g} updates/s, AAoI {result.argmin_aaoi * 1e3:.2f} ms")

# %%
# A golden-section search between the neighbouring grid points refines it.
best = find_optimum(spec)
print(f"refined optimum: {best.value:.3f} updates/s ({best.method})")

# %%
# The right edge climbs steeply: one round takes 30 ms, so the queue
# saturates just above 33 updates/s.
plt.plot(result.values(), 1e3 * result.analytic(), "o-")
plt.axvline(best.value, color="grey", ls=":")
plt.xlabel("update rate (1/s)")
plt.ylabel("average AoI (ms)")
plt.show()
