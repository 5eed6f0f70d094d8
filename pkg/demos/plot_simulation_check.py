"""
Simulated versus analytic age
=============================

The simulator draws Poisson arrivals, serves them first come first served
and integrates the age sawtooth exactly.  With the round error fixed to the
analytic value its time average should agree with the closed form.
"""

# %%
import matplotlib.pyplot as plt
import numpy as np

from urllc_aoi import SystemConfig
from urllc_aoi.aoi_analytics import aaoi_analytic
from urllc_aoi.aoi_simulator import fixed_eps, replicate

lams = np.array([5.0, 10.0, 15.0, 22.0, 28.0])
analytic, simulated, half = [], [], []
for lam in lams:
    cfg = SystemConfig(lambda_rate=lam)
    est = aaoi_analytic(cfg)
    summary = replicate(cfg, 5e3, seed=1, replications=10, mode=fixed_eps(est.errors.eps_overall))
    analytic.append(est.aaoi)
    simulated.append(summary.time_avg_aoi)
    half.append(summary.ci_halfwidth)
    print(f"lambda={lam:4.0f}: analytic {est.aaoi:.5f} s, simulated {summary.time_avg_aoi:.5f} +- {summary.ci_halfwidth:.5f} s")

# %%
plt.plot(lams, 1e3 * np.array(analytic), "-", label="analytic")
plt.errorbar(lams, 1e3 * np.array(simulated), yerr=1e3 * np.array(half), fmt="o", label="simulated (95% CI)")
plt.xlabel("update rate (1/s)")
plt.ylabel("average AoI (ms)")
plt.legend()
plt.show()
