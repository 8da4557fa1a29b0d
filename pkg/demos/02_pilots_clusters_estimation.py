"""
Pilot assignment, user-centric clusters and LMMSE estimation
============================================================

Each UE ends up with exactly L_k serving APs, no AP serves two UEs on the
same pilot, and the row of the differential code matrix an AP sends is
fixed by the order of channel strength inside the cluster.
"""

import numpy as np

from cfdiff.access import LmmseEstimator, assign_pilots_and_cluster
from cfdiff.geometry import build_large_scale, drop_topology
from cfdiff.mathcore import RandomStream, sample_complex_gaussian

topo = drop_topology(40, 20, 500.0, 11.65, 1.65, RandomStream(10))
ls = build_large_scale(topo, RandomStream(11), N=4)

# %%
# Ten orthogonal pilots for twenty UEs, four APs per UE.
sm = assign_pilots_and_cluster(ls, tau_p=10, L_k=4)
sm.validate()
print("pilot of each UE :", sm.pilot)
print("UEs per AP       :", sm.a.sum(axis=0))
for k in range(3):
    print(f"UE {k}: AP -> row {sm.rows_of_aps(k)}")

# %%
# UEs that share a pilot contaminate each other's estimates. The LMMSE
# error covariance C tells how much is left unknown.
est = LmmseEstimator(ls, sm.pilot, tau_p=10, pilot_power=0.1)
k = 0
l = sm.clusters[k, 0]
R = ls.R[k, l]
print(f"UE {k} at its strongest AP {l}: "
      f"normalized MSE tr(C)/tr(R) = {np.trace(est.C[k, l]).real / np.trace(R).real:.2e}")
far = int(np.argmin(ls.beta[k]))
print(f"UE {k} at its weakest AP {far}: "
      f"{np.trace(est.C[k, far]).real / np.trace(ls.R[k, far]).real:.2f}")

# %%
# One block of uplink training.
h = sample_complex_gaussian(ls.R, RandomStream(12), sqrt_R=ls.sqrt_R)
h_hat = est.estimate(est.observe(h, RandomStream(13))).h_hat
err = np.linalg.norm(h_hat[k, l] - h[k, l]) / np.linalg.norm(h[k, l])
print(f"relative estimation error on that link: {err:.3f}")
