"""
Differential space-time block codes and DPSK
============================================

Unitary code matrices are chained, C^t = C^{t-1} X^t, and decoded from two
consecutive received codewords without channel knowledge. Per-AP phase
rotations fold into the unknown effective channel, so they never enter
the desired-signal metric.
"""

import numpy as np

from cfdiff.diffcoding import (ALAMOUTI, RATE34, PskConstellation, StbcCodebook,
                               appendix_identity_check, diff_encode_chain, dpsk_encode_chain,
                               dpsk_ml_decode, dstbc_ml_decode_bruteforce,
                               dstbc_ml_decode_fast, stbc_map)

psk = PskConstellation(8)
rng = np.random.default_rng(30)
np.set_printoptions(precision=3, suppress=True)

# %%
# Gray labels: neighbouring 8-PSK points differ in one bit.
print("labels:", [format(v, "03b") for v in psk.labels])

# %%
# The two orthogonal designs. Both give unitary matrices for PSK inputs.
print("Alamouti(1, j) * sqrt(2) =\n", np.sqrt(2) * stbc_map([1, 1j], ALAMOUTI))
X = stbc_map(psk.points[[1, 4, 6]], RATE34)
print("rate-3/4 design, X^H X = I:", np.allclose(X.conj().T @ X, np.eye(4)))

# %%
# Differential chain over one coherence block: 47 codewords, the first
# being the identity reference.
idx = rng.integers(0, 8, size=(46, 3))
C = diff_encode_chain(RATE34.map(psk.points[idx]))
print("chain length", len(C), "- last still unitary:",
      np.allclose(C[-1].conj().T @ C[-1], np.eye(4)))

# %%
# Four APs, one row each, unknown gains g and unknown phases theta.
g = (rng.standard_normal(4) + 1j * rng.standard_normal(4)) / np.sqrt(2)
theta = rng.uniform(0, 2 * np.pi, 4)
g_eff = np.exp(-1j * theta) * g
y = g_eff @ C                                    # noiseless, (47, 4)
dec = dstbc_ml_decode_fast(y[1:], y[:-1], RATE34, psk)
print("noiseless decisions correct:", np.array_equal(dec, idx))
lhs, rhs = appendix_identity_check(g_eff, C[10], RATE34.map(psk.points[idx[10]]))
print(f"desired-signal metric {lhs.real:.6f} = sum |g|^2 {rhs:.6f}")

# %%
# With noise the fast per-symbol decoder still equals exhaustive search.
book = StbcCodebook(ALAMOUTI, psk)
y_t = rng.standard_normal((500, 2)) + 1j * rng.standard_normal((500, 2))
y_p = rng.standard_normal((500, 2)) + 1j * rng.standard_normal((500, 2))
same = np.array_equal(dstbc_ml_decode_fast(y_t, y_p, ALAMOUTI, psk),
                      dstbc_ml_decode_bruteforce(y_t, y_p, book))
print("fast == brute force on 500 random pairs:", same)

# %%
# DPSK is the scalar version: c^p = c^{p-1} s^p.
s = rng.integers(0, 8, size=20)
c = psk.points[dpsk_encode_chain(s, 8)]
y = 0.3 * np.exp(1.2j) * c
print("DPSK decisions correct:", np.array_equal(dpsk_ml_decode(y[1:], y[:-1], psk), s))
