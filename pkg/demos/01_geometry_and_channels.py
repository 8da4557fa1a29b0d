"""
Network layout, path loss and spatially correlated fading
=========================================================

A walk through the large-scale part of the model: hard-core AP placement,
the urban-micro path loss with correlated shadowing, and the local
scattering covariance of each AP's uniform linear array.
"""

import numpy as np

from cfdiff.geometry import (build_large_scale, drop_topology, noise_power_dbm,
                             pathloss_umi_db, place_aps_hcpp, spatial_correlation)
from cfdiff.mathcore import RandomStream, sample_complex_gaussian

# %%
# Hard-core placement: 40 APs in a 500 m x 500 m square keep at least
# sqrt(area / L) = 79 m between each other.
aps = place_aps_hcpp(40, 500.0 ** 2, RandomStream(1))
D = np.linalg.norm(aps[:, None] - aps[None], axis=-1)
np.fill_diagonal(D, np.inf)
print(f"smallest AP spacing {D.min():.1f} m (floor {np.sqrt(500 ** 2 / 40):.1f} m)")

# %%
# Path loss grows by 35.3 log10(2) = 10.6 dB per distance doubling.
for d in (25.0, 50.0, 100.0, 200.0):
    print(f"  {d:5.0f} m -> {pathloss_umi_db(d, 3.5, 1.65):6.1f} dB")
print(f"noise power over 20 MHz with an 8 dB noise figure: {noise_power_dbm(20e6, 8):.2f} dBm")

# %%
# A full drop: UE and AP positions, gains beta[k, l] with 4 dB shadowing,
# and N x N covariances R[k, l] with trace N * beta.
topo = drop_topology(40, 20, 500.0, 11.65, 1.65, RandomStream(2))
ls = build_large_scale(topo, RandomStream(3), N=4)
gain_db = 10 * np.log10(ls.beta)
print(f"channel gains span {gain_db.min():.0f} .. {gain_db.max():.0f} dB")
print("strongest AP per UE:", np.argmax(ls.beta, axis=1))

# %%
# The local-scattering covariance around a 30 degree azimuth: the closed
# form against the numerically integrated angular average.
phi = np.deg2rad(30)
ue = [100 * np.cos(phi), 100 * np.sin(phi)]
closed = spatial_correlation([0, 0], ue, 1.0, 15.0, 4)
exact = spatial_correlation([0, 0], ue, 1.0, 15.0, 4, method="integral")
np.set_printoptions(precision=3, suppress=True)
print("first row, closed form :", closed[0])
print("first row, integral    :", exact[0])
print("eigenvalues (integral) :", np.linalg.eigvalsh(exact))

# %%
# Fading draws h ~ CN(0, R): the sample covariance approaches R.
h = sample_complex_gaussian(ls.R[0, 0], RandomStream(4), size=50_000)
emp = h.T @ h.conj() / h.shape[0]
print(f"relative covariance error at 5e4 draws: "
      f"{np.linalg.norm(emp - ls.R[0, 0]) / np.linalg.norm(ls.R[0, 0]):.3f}")
