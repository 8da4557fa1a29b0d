"""MMSE-type precoders and downlink power allocation.

Unnormalized precoders are returned as ``(K, L, N)`` arrays that are zero
wherever AP ``l`` does not serve UE ``k``. :func:`normalize` turns them into
precoders with ``E{||w[k, l]||^2} = rho[k, l]`` against a batch mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .access import ChannelEstimate, ServingMap
from .mathcore import hermitian_solve

__all__ = [
    "PrecoderSet",
    "ZeroNormPrecoder",
    "allocate_power_centralized",
    "allocate_power_distributed",
    "lp_mmse",
    "normalization_scale",
    "normalize",
    "p_mmse",
]


class ZeroNormPrecoder(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PrecoderSet:
    w: np.ndarray    # (..., K, L, N)
    rho: np.ndarray  # (K, L)
    mode: str


def _powers(p, K):
    return np.broadcast_to(np.asarray(p, dtype=float), (K,))


def lp_mmse(estimates: ChannelEstimate, serving_map: ServingMap, p_ul, sigma2: float) -> np.ndarray:
    """Local partial MMSE at every AP.

    ``w[k, l] = p_k (sum_{i in D_l} p_i (h_i h_i^H + C_i) + sigma2 I)^-1 h_k``
    for ``k`` in ``D_l``, using the estimates at AP ``l``.
    """
    h, C = estimates.h_hat, estimates.C
    K, L, N = h.shape
    p = _powers(p_ul, K)
    a = serving_map.a
    weight = a * p[:, None]  # (K, L)
    Z = np.einsum("kl,kla,klb->lab", weight, h, np.conj(h)) \
        + np.einsum("kl,klab->lab", weight, C) + sigma2 * np.eye(N)
    rhs = np.swapaxes(h * p[:, None, None], 0, 1)          # (L, K, N)
    W = hermitian_solve(Z, np.swapaxes(rhs, 1, 2))          # (L, N, K)
    W = np.transpose(W, (2, 0, 1))
    return W * a[:, :, None]


def p_mmse(estimates: ChannelEstimate, serving_map: ServingMap, p_ul, sigma2: float) -> np.ndarray:
    """Partial MMSE computed centrally over each UE's cluster.

    For UE ``k`` the estimates of all UEs ``S_k`` whose clusters overlap
    ``M_k`` are stacked over the ``L_k`` APs of ``M_k``:
    ``w_k = p_k (sum_{i in S_k} p_i (h_i h_i^H + C_i) + sigma2 I)^-1 h_k``,
    with ``C_i`` block diagonal across APs. The result is split back into
    per-AP pieces.
    """
    h, C = estimates.h_hat, estimates.C
    K, L, N = h.shape
    p = _powers(p_ul, K)
    M = serving_map.clusters                             # (K, Lk)
    Lk = M.shape[1]
    a = serving_map.a
    S = a[:, M].any(axis=-1).T                           # S[k, i]: i overlaps M_k
    weight = S * p[None, :]                              # (K, K)
    Hs = h[:, M].transpose(1, 0, 2, 3).reshape(K, K, Lk * N)   # Hs[k, i] = h_i over M_k
    Z = np.einsum("ki,kia,kib->kab", weight, Hs, np.conj(Hs))
    Cblk = np.einsum("ki,ikrab->krab", weight, C[:, M])  # (K, Lk, N, N)
    for r in range(Lk):
        Z[:, r * N:(r + 1) * N, r * N:(r + 1) * N] += Cblk[:, r]
    Z += sigma2 * np.eye(Lk * N)
    own = Hs[np.arange(K), np.arange(K)] * p[:, None]
    wk = hermitian_solve(Z, own).reshape(K, Lk, N)
    W = np.zeros((K, L, N), dtype=np.complex128)
    W[np.arange(K)[:, None], M] = wk
    return W


def allocate_power_distributed(beta, serving_map: ServingMap, rho_d: float) -> np.ndarray:
    """``rho[k, l] = rho_d sqrt(beta[k, l]) / sum_{k' in D_l} sqrt(beta[k', l])``."""
    beta = np.asarray(beta, dtype=float)
    sq = np.sqrt(beta) * serving_map.a
    tot = sq.sum(axis=0, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = np.where(serving_map.a, rho_d * sq / tot, 0.0)
    return rho


def allocate_power_centralized(beta, serving_map: ServingMap, rho_d: float,
                               upsilon: float = -0.5) -> np.ndarray:
    """Fractional power control.

    UE weights ``omega_k = (sum_{l in M_k} beta[k, l])^upsilon`` are scaled by
    ``rho_d`` over the largest per-AP weight sum, so no AP exceeds ``rho_d``.
    """
    beta = np.asarray(beta, dtype=float)
    a = serving_map.a
    omega = (beta * a).sum(axis=1) ** upsilon
    load = (omega[:, None] * a).sum(axis=0)
    return np.where(a, rho_d * omega[:, None] / load.max(), 0.0)


def normalization_scale(wbar_batch, rho) -> np.ndarray:
    """Per-link factor ``sqrt(rho / mean ||wbar||^2)`` from a batch.

    ``wbar_batch`` is ``(B, K, L, N)`` (or ``(K, L, N)`` for a single
    realization). Links with ``rho = 0`` get factor 0.
    """
    wb = np.asarray(wbar_batch)
    if wb.ndim == 3:
        wb = wb[None]
    rho = np.asarray(rho, dtype=float)
    mean_sq = np.mean(np.sum(np.abs(wb) ** 2, axis=-1), axis=0)
    active = rho > 0
    if np.any(active & (mean_sq == 0)):
        raise ZeroNormPrecoder("a served link has an all-zero precoder batch")
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(active, np.sqrt(rho / mean_sq), 0.0)


def normalize(wbar_batch, rho, mode: str = "") -> PrecoderSet:
    """Scale a batch of precoders so its mean power matches ``rho``."""
    wb = np.asarray(wbar_batch)
    scale = normalization_scale(wb, rho)
    return PrecoderSet(w=wb * scale[..., None], rho=np.asarray(rho, dtype=float), mode=mode)
