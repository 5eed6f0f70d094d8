"""
Splitting block length and power between the hops
=================================================

Each round spends a share ``eta_sr`` of the channel uses and a share
``phi_s`` of the power on the first hop.  With symmetric hops the balanced
split is best, although the curve is flat over a wide middle range.
"""

# %%
import matplotlib.pyplot as plt

from urllc_aoi import SystemConfig
from urllc_aoi.experiments import allocation_study

study = allocation_study(SystemConfig())
for phi, curve in study.curves.items():
    print(f"phi_s={phi}: best eta_sr={curve.argmin_value:g}, AAoI {study.minimum(phi):.12g} s")

# %%
# The differences are tiny at the default noise floor; plotting the excess
# over the overall minimum makes them visible.
floor = min(study.minimum(phi) for phi in study.curves)
for phi, curve in study.curves.items():
    plt.semilogy(curve.values(), curve.analytic() - floor + 1e-15, "o-", label=f"phi_s = {phi}")
plt.xlabel("block-length share of the first hop")
plt.ylabel("AAoI above the best (s)")
plt.legend()
plt.show()
