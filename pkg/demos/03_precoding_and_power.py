"""
Partial MMSE precoding and downlink power allocation
====================================================

Distributed processing uses local partial MMSE (LP-MMSE) with
square-root-gain power splitting at every AP; centralized processing uses
partial MMSE (P-MMSE) over each UE's cluster with fractional power control.
"""

import numpy as np

from cfdiff.access import LmmseEstimator, assign_pilots_and_cluster
from cfdiff.geometry import build_large_scale, drop_topology
from cfdiff.mathcore import RandomStream, sample_complex_gaussian
from cfdiff.precoding import (allocate_power_centralized, allocate_power_distributed,
                              lp_mmse, normalize, p_mmse)

topo = drop_topology(40, 20, 500.0, 11.65, 1.65, RandomStream(20))
ls = build_large_scale(topo, RandomStream(21), N=4)
sm = assign_pilots_and_cluster(ls, 10, 4)
est = LmmseEstimator(ls, sm.pilot, 10, 0.1)
rho_d = 0.2  # 200 mW per AP

# %%
# Per-AP budgets: the distributed rule spends the whole budget, the
# centralized one caps the busiest AP at rho_d.
rho_dist = allocate_power_distributed(ls.beta, sm, rho_d)
rho_cent = allocate_power_centralized(ls.beta, sm, rho_d, upsilon=-0.5)
print("per-AP power, distributed (W):", np.round(rho_dist.sum(axis=0)[:8], 4))
print("per-AP power, centralized (W):", np.round(rho_cent.sum(axis=0)[:8], 4))

# %%
# Precoders are scaled so their mean power over a batch of channel draws
# equals rho.
batch = []
for b in range(100):
    h = sample_complex_gaussian(ls.R, RandomStream(22, (b,)), sqrt_R=ls.sqrt_R)
    batch.append(lp_mmse(est.estimate(est.observe(h, RandomStream(23, (b,)))), sm, 0.1,
                         ls.noise_power))
pre = normalize(np.array(batch), rho_dist, mode="lpmmse")
mean_pow = np.mean(np.sum(np.abs(pre.w) ** 2, axis=-1), axis=0)
print("batch-mean power matches rho:", np.allclose(mean_pow, rho_dist, rtol=1e-9))

# %%
# Leakage: how much of UE 0's precoded signal reaches another UE the same AP serves.
h = sample_complex_gaussian(ls.R, RandomStream(24), sqrt_R=ls.sqrt_R)
e = est.estimate(est.observe(h, RandomStream(25)))
for name, W in (("LP-MMSE", lp_mmse(e, sm, 0.1, ls.noise_power)),
                ("P-MMSE", p_mmse(e, sm, 0.1, ls.noise_power))):
    G = np.einsum("kln,iln->ki", np.conj(h), W)
    own = np.abs(np.diag(G)) ** 2
    leak = (np.abs(G) ** 2).sum(axis=1) - own
    print(f"{name}: median desired-to-leakage ratio {10 * np.log10(np.median(own / leak)):.1f} dB")
