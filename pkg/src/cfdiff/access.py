"""Uplink training: pilots, user-centric AP clusters and LMMSE estimation.

Indices are zero-based throughout: pilots ``0 .. tau_p-1``, DSTBC rows
``0 .. L_k-1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import LargeScaleModel
from .mathcore import hermitian_solve, standard_complex_normal

__all__ = [
    "ChannelEstimate",
    "InfeasibleClustering",
    "LmmseEstimator",
    "ServingMap",
    "assign_pilots_and_cluster",
    "lmmse_estimate",
]


class InfeasibleClustering(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ServingMap:
    """AP-UE association.

    ``clusters[k, r]`` is the AP that transmits row ``r`` of UE ``k``'s
    DSTBC matrix, so the row map is ``m(clusters[k, r], k) = r``. Rows are
    ordered by decreasing channel gain.
    """

    a: np.ndarray         # (K, L) bool
    pilot: np.ndarray     # (K,)
    master: np.ndarray    # (K,)
    clusters: np.ndarray  # (K, L_k)
    tau_p: int

    @property
    def K(self) -> int:
        return self.a.shape[0]

    @property
    def L(self) -> int:
        return self.a.shape[1]

    @property
    def L_k(self) -> int:
        return self.clusters.shape[1]

    @property
    def row_map(self) -> np.ndarray:
        """``m[l, k]``: row sent by AP ``l`` for UE ``k``, or -1."""
        m = np.full((self.L, self.K), -1, dtype=np.int64)
        for k in range(self.K):
            m[self.clusters[k], k] = np.arange(self.L_k)
        return m

    def served_by(self, l: int) -> np.ndarray:
        """``D_l``: UEs served by AP ``l``."""
        return np.flatnonzero(self.a[:, l])

    def rows_of_aps(self, k: int) -> dict:
        return {int(l): r for r, l in enumerate(self.clusters[k])}

    def validate(self) -> None:
        K, L = self.a.shape
        assert self.clusters.shape[0] == K
        for k in range(K):
            assert len(set(self.clusters[k].tolist())) == self.L_k
            assert set(np.flatnonzero(self.a[k]).tolist()) == set(self.clusters[k].tolist())
        assert np.all(self.a.sum(axis=0) <= self.tau_p)
        for l in range(L):
            users = self.served_by(l)
            assert len(set(self.pilot[users].tolist())) == users.size, \
                f"AP {l} serves two UEs on one pilot"


def assign_pilots_and_cluster(large_scale: LargeScaleModel, tau_p: int, L_k: int,
                              rng=None) -> ServingMap:
    """Joint pilot assignment and clustering with exactly ``L_k`` APs per UE.

    1. Master AP of UE ``k``: largest ``beta[k, l]``.
    2. UEs ``0 .. tau_p-1`` get pilots ``0 .. tau_p-1``; every later UE
       takes the pilot with the least summed gain, at its master AP, of
       the UEs already on that pilot.
    3. Every AP serves, on each pilot, the strongest UE using it.
    4. Clusters larger than ``L_k`` keep their strongest APs; smaller ones
       are filled greedily with the next strongest APs that serve fewer
       than ``tau_p`` UEs and none on the same pilot.

    ``rng`` is accepted for interface symmetry; the procedure is
    deterministic (ties go to the lowest index).
    """
    beta = np.asarray(large_scale.beta)
    K, L = beta.shape
    if not 1 <= L_k <= L:
        raise ValueError(f"L_k={L_k} must lie in 1..{L}")
    if tau_p < 1:
        raise ValueError("tau_p must be positive")
    master = np.argmax(beta, axis=1)

    pilot = np.full(K, -1, dtype=np.int64)
    for k in range(K):
        if k < tau_p:
            pilot[k] = k
            continue
        contamination = np.zeros(tau_p)
        for t in range(tau_p):
            contamination[t] = beta[pilot == t, master[k]].sum()
        pilot[k] = int(np.argmin(contamination))

    a = np.zeros((K, L), dtype=bool)
    for t in range(tau_p):
        users = np.flatnonzero(pilot == t)
        if users.size:
            best = users[np.argmax(beta[users], axis=0)]
            a[best, np.arange(L)] = True

    clusters = np.empty((K, L_k), dtype=np.int64)
    for k in range(K):
        served = np.flatnonzero(a[k])
        if served.size > L_k:
            order = served[np.argsort(-beta[k, served], kind="stable")]
            a[k, order[L_k:]] = False
    for k in range(K):
        for l in np.argsort(-beta[k], kind="stable"):
            if a[k].sum() >= L_k:
                break
            if a[k, l]:
                continue
            served = a[:, l]
            if served.sum() >= tau_p or np.any(pilot[served] == pilot[k]):
                continue
            a[k, l] = True
        if a[k].sum() < L_k:
            raise InfeasibleClustering(
                f"UE {k} reaches only {int(a[k].sum())} of {L_k} APs under the pilot cap")
    for k in range(K):
        served = np.flatnonzero(a[k])
        clusters[k] = served[np.argsort(-beta[k, served], kind="stable")]

    return ServingMap(a=a, pilot=pilot, master=master, clusters=clusters, tau_p=tau_p)


@dataclass(frozen=True, eq=False)
class ChannelEstimate:
    h_hat: np.ndarray  # (K, L, N)
    C: np.ndarray      # (K, L, N, N) error covariance


class LmmseEstimator:
    """Setup-constant part of LMMSE estimation.

    With ``Psi[t, l] = sum_{i on pilot t} tau_p p R[i, l] + sigma2 I`` the
    estimate is ``h_hat[k, l] = sqrt(tau_p p) R[k, l] Psi^-1 y[pilot(k), l]``
    and the error covariance ``R - tau_p p R Psi^-1 R``. Both matrices
    depend only on the large-scale model, so they are built once.
    """

    def __init__(self, large_scale: LargeScaleModel, pilot: np.ndarray, tau_p: int,
                 pilot_power: float):
        if pilot_power <= 0:
            raise ValueError("pilot power must be positive")
        R = large_scale.R
        K, L, N, _ = R.shape
        self.large_scale = large_scale
        self.pilot = np.asarray(pilot)
        self.tau_p = tau_p
        self.pilot_power = pilot_power
        self.amp = np.sqrt(tau_p * pilot_power)
        sigma2 = large_scale.noise_power
        Psi = np.empty((tau_p, L, N, N), dtype=np.complex128)
        for t in range(tau_p):
            Psi[t] = tau_p * pilot_power * R[self.pilot == t].sum(axis=0) + sigma2 * np.eye(N)
        self.Psi = Psi
        # R Psi^-1 = (Psi^-1 R)^H for Hermitian R, Psi
        PsiInvR = hermitian_solve(Psi[self.pilot], R)
        self.A = self.amp * np.conj(np.swapaxes(PsiInvR, -1, -2))
        self.C = R - self.amp * self.A @ R

    def observe(self, h: np.ndarray, rng) -> np.ndarray:
        """Despread pilot signals ``y[t, l]`` (``tau_p x L x N``)."""
        K, L, N = h.shape
        y = np.zeros((self.tau_p, L, N), dtype=np.complex128)
        np.add.at(y, self.pilot, self.amp * h)
        noise = np.sqrt(self.large_scale.noise_power) * standard_complex_normal(rng, y.shape)
        return y + noise

    def estimate(self, y: np.ndarray) -> ChannelEstimate:
        h_hat = np.einsum("klab,klb->kla", self.A, y[self.pilot])
        return ChannelEstimate(h_hat=h_hat, C=self.C)


def lmmse_estimate(serving_map: ServingMap, channel_block, pilot_power: float, tau_p: int,
                   large_scale: LargeScaleModel, rng) -> ChannelEstimate:
    """Simulate uplink pilots for one block and return LMMSE estimates.

    Estimates are formed for every UE-AP pair, served or not, since the
    centralized precoder needs them across a cluster.
    """
    est = LmmseEstimator(large_scale, serving_map.pilot, tau_p, pilot_power)
    return est.estimate(est.observe(channel_block.h, rng))
