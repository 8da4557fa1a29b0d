"""Small dense complex linear algebra and reproducible random streams.

Everything here works on plain numpy arrays. Functions accept either a
single matrix of shape ``(n, n)`` or a stack ``(..., n, n)``.

Complex Gaussian convention: ``CN(0, s2)`` has variance ``s2 / 2`` in each
real dimension.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "LinAlgContractError",
    "NotHermitian",
    "NotPositiveDefinite",
    "NotPSD",
    "RandomStream",
    "as_cmatrix",
    "hermitian_solve",
    "psd_sqrt",
    "sample_complex_gaussian",
    "standard_complex_normal",
]

HERMITIAN_RTOL = 1e-10
PSD_FLOOR = 1e-12


class LinAlgContractError(ValueError):
    """Base class for violated input contracts."""


class NotHermitian(LinAlgContractError):
    pass


class NotPositiveDefinite(LinAlgContractError):
    pass


class NotPSD(LinAlgContractError):
    pass


def as_cmatrix(a) -> np.ndarray:
    """Return ``a`` as a finite complex128 array with at least 2 dims."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim == 1:
        arr = arr[:, None]
    if not np.all(np.isfinite(arr)):
        raise LinAlgContractError("matrix has non-finite entries")
    return arr


def _check_hermitian(A: np.ndarray, exc=NotHermitian) -> None:
    if A.shape[-1] != A.shape[-2]:
        raise exc(f"matrix is not square: shape {A.shape}")
    scale = np.max(np.abs(A), axis=(-2, -1))
    dev = np.max(np.abs(A - np.conj(np.swapaxes(A, -1, -2))), axis=(-2, -1))
    if np.any(dev > HERMITIAN_RTOL * np.maximum(scale, np.finfo(float).tiny)):
        raise exc("matrix is not Hermitian to 1e-10 relative")


def hermitian_solve(A, B) -> np.ndarray:
    """Solve ``A X = B`` for Hermitian positive-definite ``A``.

    The solve goes through a Cholesky factor ``A = L L^H``. ``B`` may be a
    vector (shape ``(..., n)``) or a matrix (``(..., n, m)``); the output has
    the same shape as ``B``.

    Raises
    ------
    NotHermitian
        If ``A`` deviates from ``A^H`` by more than 1e-10 relative.
    NotPositiveDefinite
        If a Cholesky pivot is not strictly positive.
    """
    A = np.asarray(A, dtype=np.complex128)
    B = np.asarray(B, dtype=np.complex128)
    if A.ndim < 2:
        raise NotHermitian("expected a matrix")
    _check_hermitian(A)
    vector_rhs = B.ndim == A.ndim - 1
    if vector_rhs:
        B = B[..., None]
    if B.shape[-2] != A.shape[-1]:
        raise LinAlgContractError(
            f"dimension mismatch: A is {A.shape[-2:]}, B has {B.shape[-2]} rows")
    # symmetrize away round-off before factoring
    Ah = 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))
    try:
        Lc = np.linalg.cholesky(Ah)
    except np.linalg.LinAlgError as err:
        raise NotPositiveDefinite("Cholesky pivot <= 0") from err
    Z = np.linalg.solve(Lc, B)
    X = np.linalg.solve(np.conj(np.swapaxes(Lc, -1, -2)), Z)
    return X[..., 0] if vector_rhs else X


def psd_sqrt(R) -> np.ndarray:
    """Hermitian square root ``F`` with ``F F^H = R`` of a PSD matrix (stack).

    Cholesky is tried first; rank-deficient inputs (e.g. co-located users
    or very narrow scattering) fall back to an eigendecomposition with
    eigenvalues below ``1e-12 * trace`` clamped to zero.
    """
    R = np.asarray(R, dtype=np.complex128)
    _check_hermitian(R, exc=NotPSD)
    R = 0.5 * (R + np.conj(np.swapaxes(R, -1, -2)))
    try:
        return np.linalg.cholesky(R)
    except np.linalg.LinAlgError:
        pass
    vals, vecs = np.linalg.eigh(R)
    tr = np.abs(np.trace(R, axis1=-2, axis2=-1))[..., None]
    if np.any(vals < -1e-10 * np.maximum(tr, np.finfo(float).tiny)):
        raise NotPSD("matrix has a significantly negative eigenvalue")
    vals = np.where(vals < PSD_FLOOR * tr, 0.0, vals)
    return vecs * np.sqrt(vals)[..., None, :]


class RandomStream:
    """A numpy ``Generator`` addressed by ``(seed, stream_id)``.

    ``stream_id`` is a tuple of non-negative integers, e.g.
    ``(setup, block, purpose)``. Identical addresses give identical draws;
    distinct addresses give independent streams (``SeedSequence`` spawn
    keys). Streams are cheap; create one per task rather than sharing.
    """

    def __init__(self, seed: int, stream_id: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.stream_id = tuple(int(i) for i in stream_id)
        if self.seed < 0 or any(i < 0 for i in self.stream_id):
            raise ValueError("seed and stream ids must be non-negative")
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream_id)
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def child(self, *ids: int) -> "RandomStream":
        return RandomStream(self.seed, self.stream_id + tuple(ids))

    def __getattr__(self, name):
        # delegate uniform/normal/integers/... to the generator
        if name.startswith("__") or name == "generator":
            raise AttributeError(name)
        return getattr(self.generator, name)

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id})"


def _generator(rng) -> np.random.Generator:
    if isinstance(rng, RandomStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError("rng must be a RandomStream or numpy Generator")


def standard_complex_normal(rng, shape) -> np.ndarray:
    """Draw i.i.d. ``CN(0, 1)`` entries."""
    g = _generator(rng)
    return (g.standard_normal(shape) + 1j * g.standard_normal(shape)) / np.sqrt(2.0)


def sample_complex_gaussian(R, rng, size: int | None = None, *, sqrt_R=None) -> np.ndarray:
    """Draw ``h ~ CN(0, R)``.

    Parameters
    ----------
    R : array, shape (..., n, n)
        Hermitian PSD covariance (or a stack of them).
    rng : RandomStream or numpy Generator
    size : int, optional
        Number of independent draws. When given, a leading axis of that
        length is added to the output.
    sqrt_R : array, optional
        Precomputed factor from :func:`psd_sqrt`; skips the factorization.

    Returns
    -------
    h : array, shape (..., n) or (size, ..., n)
    """
    F = psd_sqrt(R) if sqrt_R is None else np.asarray(sqrt_R)
    shape = F.shape[:-1] if size is None else (size,) + F.shape[:-1]
    z = standard_complex_normal(rng, shape)
    return np.einsum("...ij,...j->...i", F, z)
