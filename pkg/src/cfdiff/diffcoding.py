"""PSK constellations, orthogonal space-time designs, differential encoding
and the matching detectors.

Array conventions
-----------------
Received DSTBC blocks are length-``P`` row vectors; detectors accept any
number of leading batch dimensions. Symbol decisions are returned as
constellation indices (``0 .. M-1``), never as complex values, so that
bit errors can be counted through the Gray labels.

All arg-max / arg-min searches resolve ties toward the lowest index.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ALAMOUTI",
    "RATE34",
    "CodingError",
    "DiffState",
    "EmptyCodebook",
    "MappingNotBijective",
    "NonUnitModulus",
    "NonUnitaryInput",
    "PskConstellation",
    "StbcCodebook",
    "StbcDesign",
    "UnsupportedDesign",
    "WrongSymbolCount",
    "appendix_identity_check",
    "coherent_psk_detect",
    "design_for_rows",
    "diff_encode_chain",
    "diff_encode_step",
    "dpsk_encode_chain",
    "dpsk_encode_step",
    "dpsk_ml_decode",
    "dstbc_ml_decode_bruteforce",
    "dstbc_ml_decode_fast",
    "split_rows",
    "stbc_map",
]

UNIT_TOL = 1e-9


class CodingError(ValueError):
    pass


class WrongSymbolCount(CodingError):
    pass


class NonUnitModulus(CodingError):
    pass


class NonUnitaryInput(CodingError):
    pass


class MappingNotBijective(CodingError):
    pass


class EmptyCodebook(CodingError):
    pass


class UnsupportedDesign(CodingError):
    pass


# ---------------------------------------------------------------------------
# constellation

class PskConstellation:
    """Unit-modulus M-PSK with Gray labels.

    Point ``m`` is ``exp(j 2 pi m / M)`` and carries the label
    ``m ^ (m >> 1)``, so neighbouring points (including ``M-1`` and ``0``)
    differ in one bit.
    """

    def __init__(self, order: int = 8):
        if order < 2 or order & (order - 1):
            raise ValueError("PSK order must be a power of two >= 2")
        self.order = order
        self.bits_per_symbol = order.bit_length() - 1
        m = np.arange(order)
        self.points = np.exp(2j * np.pi * m / order)
        self.labels = m ^ (m >> 1)
        self._index_of_label = np.empty(order, dtype=np.int64)
        self._index_of_label[self.labels] = m
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)
        self.label_bits = ((self.labels[:, None] >> shifts) & 1).astype(np.uint8)

    def __repr__(self):
        return f"PskConstellation(order={self.order})"

    def bits_to_indices(self, bits) -> np.ndarray:
        """Group bits MSB-first into Gray labels and return point indices."""
        bits = np.asarray(bits, dtype=np.int64)
        b = self.bits_per_symbol
        if bits.shape[-1] % b:
            raise ValueError(f"bit count must be a multiple of {b}")
        grouped = bits.reshape(bits.shape[:-1] + (-1, b))
        labels = grouped @ (1 << np.arange(b - 1, -1, -1))
        return self._index_of_label[labels]

    def indices_to_bits(self, idx) -> np.ndarray:
        idx = np.asarray(idx)
        bits = self.label_bits[idx]
        return bits.reshape(idx.shape[:-1] + (-1,)) if idx.ndim else bits

    def bit_errors(self, idx_true, idx_hat) -> np.ndarray:
        """Number of differing label bits, elementwise."""
        x = self.labels[np.asarray(idx_true)] ^ self.labels[np.asarray(idx_hat)]
        return np.bitwise_count(x.astype(np.uint64)).astype(np.int64)

    def index_of(self, s) -> np.ndarray:
        """Index of the point closest to each unit-modulus value ``s``."""
        s = np.asarray(s, dtype=np.complex128)
        _require_unit(s)
        k = np.rint(np.angle(s) * self.order / (2 * np.pi)).astype(np.int64)
        return k % self.order


def _require_unit(s):
    if np.any(np.abs(np.abs(s) - 1.0) > UNIT_TOL):
        raise NonUnitModulus("symbols must have unit modulus")


# ---------------------------------------------------------------------------
# space-time designs

@dataclass(frozen=True, eq=False)
class StbcDesign:
    """Linear orthogonal design ``X = (sum_j A_j s_j + B_j conj(s_j)) / sqrt(n_s)``.

    ``A`` and ``B`` have shape ``(n_s, n_t, P)``.
    """

    name: str
    A: np.ndarray
    B: np.ndarray

    @property
    def n_s(self) -> int:
        return self.A.shape[0]

    @property
    def n_t(self) -> int:
        return self.A.shape[1]

    @property
    def P(self) -> int:
        return self.A.shape[2]

    @property
    def rate(self) -> float:
        return self.n_s / self.P

    def map(self, s) -> np.ndarray:
        """Vectorized mapper: ``(..., n_s)`` symbols to ``(..., n_t, P)``."""
        s = np.asarray(s, dtype=np.complex128)
        X = np.einsum("...j,jab->...ab", s, self.A) + np.einsum(
            "...j,jab->...ab", np.conj(s), self.B)
        return X / np.sqrt(self.n_s)

    def __repr__(self):
        return f"StbcDesign({self.name!r}, n_t={self.n_t}, P={self.P}, n_s={self.n_s})"


def _design(name, n_s, n_t, P, a_entries, b_entries):
    A = np.zeros((n_s, n_t, P))
    B = np.zeros((n_s, n_t, P))
    for (j, r, c, v) in a_entries:
        A[j, r, c] = v
    for (j, r, c, v) in b_entries:
        B[j, r, c] = v
    return StbcDesign(name, A, B)


# [[s1, s2*], [s2, -s1*]] / sqrt(2)
ALAMOUTI = _design(
    "alamouti", 2, 2, 2,
    a_entries=[(0, 0, 0, 1), (1, 1, 0, 1)],
    b_entries=[(0, 1, 1, -1), (1, 0, 1, 1)],
)

# [[ s1,    0,   s2,  -s3 ],
#  [ 0,     s1,  s3*,  s2*],
#  [-s2*,  -s3,  s1*,  0  ],
#  [ s3*,  -s2,  0,    s1*]] / sqrt(3)
RATE34 = _design(
    "rate34", 3, 4, 4,
    a_entries=[(0, 0, 0, 1), (0, 1, 1, 1),
               (1, 0, 2, 1), (1, 3, 1, -1),
               (2, 0, 3, -1), (2, 2, 1, -1)],
    b_entries=[(0, 2, 2, 1), (0, 3, 3, 1),
               (1, 1, 3, 1), (1, 2, 0, -1),
               (2, 1, 2, 1), (2, 3, 0, 1)],
)

DESIGNS = {"alamouti": ALAMOUTI, "rate34": RATE34}


def design_for_rows(n_rows: int) -> StbcDesign:
    for d in DESIGNS.values():
        if d.n_t == n_rows:
            return d
    raise UnsupportedDesign(f"no orthogonal design shipped for {n_rows} rows")


def stbc_map(symbols, design: StbcDesign) -> np.ndarray:
    """Map ``n_s`` unit-modulus symbols to the code matrix of ``design``."""
    s = np.asarray(symbols, dtype=np.complex128)
    if s.shape[-1:] != (design.n_s,):
        raise WrongSymbolCount(f"{design.name} takes {design.n_s} symbols, got {s.shape[-1:]}")
    _require_unit(s)
    return design.map(s)


@dataclass(eq=False)
class StbcCodebook:
    """Every code matrix of a design over a constellation.

    Entry ``c`` corresponds to the lexicographic symbol-index tuple
    ``symbols[c]`` (first symbol most significant).
    """

    design: StbcDesign
    constellation: PskConstellation
    symbols: np.ndarray = field(init=False)
    matrices: np.ndarray = field(init=False)

    def __post_init__(self):
        M = self.constellation.order
        self.symbols = np.array(list(itertools.product(range(M), repeat=self.design.n_s)),
                                dtype=np.int64).reshape(-1, self.design.n_s)
        self.matrices = self.design.map(self.constellation.points[self.symbols])

    def __len__(self):
        return self.symbols.shape[0]


# ---------------------------------------------------------------------------
# differential encoding

@dataclass
class DiffState:
    """Differential encoder memory for one UE.

    ``C`` is the current ``n_t x n_t`` matrix (DSTBC) or a 1x1 matrix
    holding the scalar ``c`` (DPSK); ``t`` counts steps since reset.
    """

    C: np.ndarray
    t: int = 0

    @classmethod
    def dstbc(cls, n_t: int) -> "DiffState":
        return cls(np.eye(n_t, dtype=np.complex128))

    @classmethod
    def dpsk(cls) -> "DiffState":
        return cls(np.ones((1, 1), dtype=np.complex128))

    @property
    def c(self) -> complex:
        return complex(self.C[0, 0])

    def reset(self) -> None:
        self.C = np.eye(self.C.shape[0], dtype=np.complex128)
        self.t = 0


def diff_encode_step(state: DiffState, X) -> np.ndarray:
    """``C_t = C_{t-1} X_t``; updates ``state`` and returns the new matrix."""
    X = np.asarray(X, dtype=np.complex128)
    n = X.shape[-1]
    if X.shape != (state.C.shape[1], n) or n != X.shape[0]:
        raise NonUnitaryInput(f"code matrix of shape {X.shape} does not fit the state")
    if np.linalg.norm(X.conj().T @ X - np.eye(n)) > 1e-8:
        raise NonUnitaryInput("code matrix is not unitary")
    state.C = state.C @ X
    state.t += 1
    return state.C


def diff_encode_chain(X) -> np.ndarray:
    """Run the chain over ``X`` of shape ``(..., T, n, n)``.

    Returns ``(..., T + 1, n, n)`` with the identity reference first.
    """
    X = np.asarray(X, dtype=np.complex128)
    n = X.shape[-1]
    T = X.shape[-3]
    out = np.empty(X.shape[:-3] + (T + 1, n, n), dtype=np.complex128)
    out[..., 0, :, :] = np.eye(n)
    for t in range(T):
        out[..., t + 1, :, :] = out[..., t, :, :] @ X[..., t, :, :]
    return out


def dpsk_encode_step(state: DiffState, s) -> complex:
    """``c_p = c_{p-1} s_p``; updates ``state``."""
    s = complex(s)
    _require_unit(np.array([s]))
    state.C = state.C * s
    state.t += 1
    return state.c


def dpsk_encode_chain(idx, order: int) -> np.ndarray:
    """Differential PSK in the index domain.

    ``idx`` (``(..., T)``) are data-symbol indices; the result
    (``(..., T + 1)``) holds transmitted-point indices with the reference
    ``c_0 = 1`` (index 0) first. Multiplying PSK points adds indices mod M.
    """
    idx = np.asarray(idx, dtype=np.int64)
    zero = np.zeros(idx.shape[:-1] + (1,), dtype=np.int64)
    return np.concatenate([zero, np.cumsum(idx, axis=-1) % order], axis=-1)


def split_rows(C, rows_of_aps) -> dict:
    """Assign row ``m(l)`` of ``C`` to AP ``l``.

    ``rows_of_aps`` maps AP index to a zero-based row index; it must be a
    bijection onto ``range(C.shape[0])``.
    """
    C = np.asarray(C)
    rows = list(rows_of_aps.values())
    if sorted(rows) != list(range(C.shape[0])):
        raise MappingNotBijective(f"row map {rows_of_aps} is not a bijection onto "
                                  f"{C.shape[0]} rows")
    return {l: C[r] for l, r in rows_of_aps.items()}


# ---------------------------------------------------------------------------
# detectors

def dstbc_ml_decode_bruteforce(y_t, y_prev, codebook: StbcCodebook) -> np.ndarray:
    """Exhaustive ML: ``argmax_X Re tr{X y_t^H y_prev}`` over the codebook.

    ``y_t`` and ``y_prev`` are ``(..., P)``. Returns the symbol indices of
    the winning code matrix, shape ``(..., n_s)``.
    """
    if len(codebook) == 0:
        raise EmptyCodebook("codebook has no entries")
    y_t = np.asarray(y_t, dtype=np.complex128)
    y_prev = np.asarray(y_prev, dtype=np.complex128)
    # tr{X y_t^H y_prev} = y_prev X y_t^H
    metric = np.einsum("...i,cia,...a->...c", y_prev, codebook.matrices,
                       np.conj(y_t)).real
    return codebook.symbols[np.argmax(metric, axis=-1)]


def dstbc_ml_decode_fast(y_t, y_prev, design: StbcDesign,
                         constellation: PskConstellation) -> np.ndarray:
    """Symbol-by-symbol ML for linear orthogonal designs.

    The trace metric is linear in each ``s_j`` and ``conj(s_j)``, so it
    splits into ``sum_j Re{s_j q_j}`` with
    ``q_j = y_prev A_j y_t^H + conj(y_prev B_j y_t^H)``; each symbol is
    then decided on its own.
    """
    if design.name not in DESIGNS:
        raise UnsupportedDesign(f"fast decoding needs an orthogonal design, got {design.name}")
    y_t = np.asarray(y_t, dtype=np.complex128)
    y_prev = np.asarray(y_prev, dtype=np.complex128)
    u = np.einsum("...i,jia,...a->...j", y_prev, design.A, np.conj(y_t))
    v = np.einsum("...i,jia,...a->...j", y_prev, design.B, np.conj(y_t))
    q = u + np.conj(v)
    metric = (q[..., None] * constellation.points).real
    return np.argmax(metric, axis=-1)


def dpsk_ml_decode(y_p, y_prev, constellation: PskConstellation) -> np.ndarray:
    """``argmax_s Re{s conj(y_p) y_prev}``; indices, same shape as ``y_p``."""
    z = np.conj(np.asarray(y_p, dtype=np.complex128)) * np.asarray(y_prev)
    return np.argmax((z[..., None] * constellation.points).real, axis=-1)


def coherent_psk_detect(y, constellation: PskConstellation) -> np.ndarray:
    """Nearest point in wrapped phase distance; ``y = 0`` decides index 0."""
    y = np.asarray(y, dtype=np.complex128)
    ang = np.angle(y)[..., None] - np.angle(constellation.points)
    dist = np.abs(np.angle(np.exp(1j * ang)))
    dist = np.where((y == 0)[..., None], 0.0, dist)
    return np.argmin(dist, axis=-1)


def appendix_identity_check(g_eff, C_prev, X, rows=None):
    """Both sides of the desired-signal identity.

    With ``DS_t = sum_l g_l [C_prev]_{m(l),:} X`` and
    ``DS_prev = sum_l g_l [C_prev]_{m(l),:}`` (interference and noise
    removed), returns ``(tr{X DS_t^H DS_prev}, sum_l |g_l|^2)``. ``rows``
    gives ``m(l)`` for each entry of ``g_eff`` (identity by default).
    """
    g = np.asarray(g_eff, dtype=np.complex128).ravel()
    C_prev = np.asarray(C_prev, dtype=np.complex128)
    X = np.asarray(X, dtype=np.complex128)
    rows = np.arange(g.size) if rows is None else np.asarray(rows)
    ds_prev = g @ C_prev[rows]
    ds_t = ds_prev @ X
    lhs = np.trace(X @ np.outer(np.conj(ds_t), ds_prev))
    rhs = float(np.sum(np.abs(g) ** 2))
    return complex(lhs), rhs
