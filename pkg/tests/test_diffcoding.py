import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfdiff.diffcoding import (ALAMOUTI, DESIGNS, RATE34, DiffState, EmptyCodebook,
                               MappingNotBijective, NonUnitaryInput, NonUnitModulus,
                               PskConstellation, StbcCodebook, StbcDesign,
                               UnsupportedDesign, WrongSymbolCount, appendix_identity_check,
                               coherent_psk_detect, diff_encode_chain, diff_encode_step,
                               dpsk_encode_chain, dpsk_encode_step, dpsk_ml_decode,
                               dstbc_ml_decode_bruteforce, dstbc_ml_decode_fast, split_rows,
                               stbc_map)

PSK8 = PskConstellation(8)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_codewords(rng, design, n):
    idx = rng.integers(0, 8, size=(n, design.n_s))
    return idx, design.map(PSK8.points[idx])


# --- constellation -------------------------------------------------------

def test_psk_points_unit_modulus():
    np.testing.assert_allclose(np.abs(PSK8.points), 1.0, atol=1e-15)
    assert PSK8.bits_per_symbol == 3


def test_gray_neighbours_exhaustive():
    for order in (2, 4, 8, 16):
        c = PskConstellation(order)
        for m in range(order):
            assert c.bit_errors(m, (m + 1) % order) == 1
        assert sorted(c.labels.tolist()) == list(range(order))


def test_bits_round_trip():
    rng = np.random.default_rng(0)
    bits = rng.integers(0, 2, size=(4, 30))
    idx = PSK8.bits_to_indices(bits)
    assert idx.shape == (4, 10)
    np.testing.assert_array_equal(PSK8.indices_to_bits(idx), bits)


# --- designs --------------------------------------------------------------

def test_alamouti_ones():
    X = stbc_map([1, 1], ALAMOUTI)
    np.testing.assert_allclose(X, np.array([[1, 1], [1, -1]]) / np.sqrt(2), atol=1e-15)


def test_alamouti_one_j():
    X = stbc_map([1, 1j], ALAMOUTI)
    np.testing.assert_allclose(X, np.array([[1, -1j], [1j, -1]]) / np.sqrt(2), atol=1e-15)


def test_rate34_ones_unitary():
    X = stbc_map([1, 1, 1], RATE34)
    assert X.shape == (4, 4)
    np.testing.assert_allclose(X.conj().T @ X, np.eye(4), atol=1e-12)


def test_design_shapes_and_rates():
    assert (ALAMOUTI.n_t, ALAMOUTI.P, ALAMOUTI.n_s, ALAMOUTI.rate) == (2, 2, 2, 1.0)
    assert (RATE34.n_t, RATE34.P, RATE34.n_s, RATE34.rate) == (4, 4, 3, 0.75)


@pytest.mark.parametrize("design", list(DESIGNS.values()), ids=list(DESIGNS))
def test_every_codeword_unitary(design):
    book = StbcCodebook(design, PSK8)
    assert len(book) == 8 ** design.n_s
    XhX = np.conj(np.swapaxes(book.matrices, -1, -2)) @ book.matrices
    assert np.max(np.abs(XhX - np.eye(design.n_t))) <= 1e-12


def test_stbc_map_errors():
    with pytest.raises(WrongSymbolCount):
        stbc_map([1, 1, 1], ALAMOUTI)
    with pytest.raises(NonUnitModulus):
        stbc_map([1, 0.5], ALAMOUTI)


def test_codebook_lexicographic():
    book = StbcCodebook(ALAMOUTI, PSK8)
    assert book.symbols[0].tolist() == [0, 0]
    assert book.symbols[1].tolist() == [0, 1]
    assert book.symbols[8].tolist() == [1, 0]


# --- differential encoding -------------------------------------------------

def test_first_step_returns_codeword():
    rng = np.random.default_rng(1)
    _, X = random_codewords(rng, RATE34, 1)
    st_ = DiffState.dstbc(4)
    np.testing.assert_allclose(diff_encode_step(st_, X[0]), X[0])
    assert st_.t == 1


def test_identity_chain_stays_identity():
    st_ = DiffState.dstbc(2)
    for _ in range(10):
        C = diff_encode_step(st_, np.eye(2))
    np.testing.assert_array_equal(C, np.eye(2))


def test_non_unitary_rejected():
    with pytest.raises(NonUnitaryInput):
        diff_encode_step(DiffState.dstbc(2), 2 * np.eye(2))


@pytest.mark.parametrize("design", list(DESIGNS.values()), ids=list(DESIGNS))
def test_chain_47_unitary_and_matches_steps(design):
    rng = np.random.default_rng(2)
    _, X = random_codewords(rng, design, 47)
    C = diff_encode_chain(X)
    assert C.shape == (48, design.n_t, design.n_t)
    np.testing.assert_array_equal(C[0], np.eye(design.n_t))
    st_ = DiffState.dstbc(design.n_t)
    for t in range(47):
        np.testing.assert_allclose(diff_encode_step(st_, X[t]), C[t + 1], atol=1e-12)
    last = C[-1]
    assert np.linalg.norm(last.conj().T @ last - np.eye(design.n_t)) <= 1e-10
    # rows orthonormal
    np.testing.assert_allclose(last @ last.conj().T, np.eye(design.n_t), atol=1e-10)


def test_diffstate_reset():
    st_ = DiffState.dstbc(2)
    diff_encode_step(st_, stbc_map([1, 1j], ALAMOUTI))
    st_.reset()
    np.testing.assert_array_equal(st_.C, np.eye(2))
    assert st_.t == 0


def test_dpsk_step_examples():
    st_ = DiffState.dpsk()
    assert dpsk_encode_step(st_, np.exp(1j * np.pi / 4)) == pytest.approx(np.exp(1j * np.pi / 4))
    st_ = DiffState.dpsk()
    for _ in range(8):
        c = dpsk_encode_step(st_, np.exp(2j * np.pi / 8))
    assert c == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(NonUnitModulus):
        dpsk_encode_step(DiffState.dpsk(), 0.9)


def test_dpsk_chain_cumulative_phase():
    rng = np.random.default_rng(3)
    idx = rng.integers(0, 8, size=190)
    chain = dpsk_encode_chain(idx, 8)
    assert chain[0] == 0 and chain.size == 191
    st_ = DiffState.dpsk()
    for p in range(190):
        c = dpsk_encode_step(st_, PSK8.points[idx[p]])
        assert abs(c) == pytest.approx(1.0, abs=1e-12)
        expected = np.mod(np.sum(2 * np.pi * idx[:p + 1] / 8), 2 * np.pi)
        # compare on the circle so 2 pi - eps and 0 count as equal
        assert abs(np.angle(c * np.exp(-1j * expected))) < 1e-9
        assert PSK8.points[chain[p + 1]] == pytest.approx(c, abs=1e-9)


# --- row split ------------------------------------------------------------

def test_split_rows_identity():
    parts = split_rows(np.eye(2), {10: 0, 3: 1})
    np.testing.assert_array_equal(parts[10], [1, 0])
    np.testing.assert_array_equal(parts[3], [0, 1])


def test_split_rows_example_mapping():
    # AP 7 assigned the fourth row (zero-based 3)
    C = np.arange(16, dtype=complex).reshape(4, 4)
    parts = split_rows(C, {2: 0, 5: 1, 9: 2, 7: 3})
    np.testing.assert_array_equal(parts[7], C[3])


def test_split_rows_reassembly_and_errors():
    rng = np.random.default_rng(4)
    _, X = random_codewords(rng, RATE34, 1)
    perm = rng.permutation(4)
    aps = rng.choice(40, size=4, replace=False)
    m = {int(l): int(r) for l, r in zip(aps, perm)}
    parts = split_rows(X[0], m)
    rebuilt = np.empty_like(X[0])
    for l, r in m.items():
        rebuilt[r] = parts[l]
    np.testing.assert_array_equal(rebuilt, X[0])
    with pytest.raises(MappingNotBijective):
        split_rows(X[0], {0: 0, 1: 0, 2: 1, 3: 2})
    with pytest.raises(MappingNotBijective):
        split_rows(X[0], {0: 0, 1: 1, 2: 2})


# --- detectors ------------------------------------------------------------

def ml_metric_oracle(y_t, y_prev, X):
    """Straight transcription: Re tr{X y_t^H y_prev} with explicit matrices."""
    yt = np.asarray(y_t).reshape(1, -1)
    yp = np.asarray(y_prev).reshape(1, -1)
    return np.real(np.trace(X @ yt.conj().T @ yp))


def brute_oracle(y_t, y_prev, design):
    best, best_val = None, -np.inf
    for sym in itertools.product(range(8), repeat=design.n_s):
        X = design.map(PSK8.points[list(sym)])
        val = ml_metric_oracle(y_t, y_prev, X)
        if val > best_val:
            best, best_val = sym, val
    return np.array(best)


def noisy_pair(rng, design, snr_db=20.0, g=None):
    """Two received codewords through one-AP-per-row effective gains."""
    g = crandn(rng, design.n_t) if g is None else g
    idx, X = random_codewords(rng, design, 2)
    C = diff_encode_chain(X)
    s = 10 ** (-snr_db / 20)
    y_prev = g @ C[1] + s * crandn(rng, design.P)
    y_t = g @ C[2] + s * crandn(rng, design.P)
    return y_t, y_prev, idx[1], g @ C[1], g @ C[2]


@pytest.mark.parametrize("design", list(DESIGNS.values()), ids=list(DESIGNS))
def test_bruteforce_matches_independent_oracle(design):
    rng = np.random.default_rng(5)
    book = StbcCodebook(design, PSK8)
    n = 300 if design is ALAMOUTI else 40
    for _ in range(n):
        y_t, y_prev, *_ = noisy_pair(rng, design)
        np.testing.assert_array_equal(dstbc_ml_decode_bruteforce(y_t, y_prev, book),
                                      brute_oracle(y_t, y_prev, design))


@pytest.mark.parametrize("design", list(DESIGNS.values()), ids=list(DESIGNS))
def test_fast_matches_bruteforce(design):
    rng = np.random.default_rng(6)
    book = StbcCodebook(design, PSK8)
    ys = [noisy_pair(rng, design, snr_db=rng.uniform(-5, 25)) for _ in range(2000)]
    y_t = np.array([y[0] for y in ys])
    y_prev = np.array([y[1] for y in ys])
    np.testing.assert_array_equal(dstbc_ml_decode_fast(y_t, y_prev, design, PSK8),
                                  dstbc_ml_decode_bruteforce(y_t, y_prev, book))


@pytest.mark.parametrize("design", list(DESIGNS.values()), ids=list(DESIGNS))
def test_noiseless_recovery_any_phase(design):
    rng = np.random.default_rng(7)
    book = StbcCodebook(design, PSK8)
    for _ in range(50):
        g = np.full(design.n_t, 0.7) * np.exp(1j * rng.uniform(0, 2 * np.pi, design.n_t))
        _, _, idx, y_prev, y_t = noisy_pair(rng, design, g=g)
        np.testing.assert_array_equal(dstbc_ml_decode_fast(y_t, y_prev, design, PSK8), idx)
        np.testing.assert_array_equal(dstbc_ml_decode_bruteforce(y_t, y_prev, book), idx)


@pytest.mark.parametrize("design", list(DESIGNS.values()), ids=list(DESIGNS))
def test_zero_inputs_tie(design):
    book = StbcCodebook(design, PSK8)
    z = np.zeros(design.P)
    np.testing.assert_array_equal(dstbc_ml_decode_bruteforce(z, z, book), book.symbols[0])
    np.testing.assert_array_equal(dstbc_ml_decode_fast(z, z, design, PSK8), book.symbols[0])


def test_empty_codebook_and_unsupported_design():
    book = StbcCodebook(ALAMOUTI, PSK8)
    book.symbols = book.symbols[:0]
    book.matrices = book.matrices[:0]
    with pytest.raises(EmptyCodebook):
        dstbc_ml_decode_bruteforce(np.ones(2), np.ones(2), book)
    weird = StbcDesign("custom", ALAMOUTI.A, ALAMOUTI.B)
    with pytest.raises(UnsupportedDesign):
        dstbc_ml_decode_fast(np.ones(2), np.ones(2), weird, PSK8)


@pytest.mark.parametrize("design", list(DESIGNS.values()), ids=list(DESIGNS))
def test_dstbc_decisions_invariant_to_per_row_phases(design):
    # same phase on both codewords, one phase per transmitting row
    rng = np.random.default_rng(8)
    for _ in range(500):
        g = crandn(rng, design.n_t)
        idx, X = random_codewords(rng, design, 2)
        C = diff_encode_chain(X)
        n1, n2 = 0.3 * crandn(rng, design.P), 0.3 * crandn(rng, design.P)
        rot = np.exp(-1j * rng.uniform(0, 2 * np.pi, design.n_t))
        d0 = dstbc_ml_decode_fast(g @ C[2] + n2, g @ C[1] + n1, design, PSK8)
        # noise rotated with the common term keeps the received statistic's geometry
        e = np.exp(1j * rng.uniform(0, 2 * np.pi))
        d1 = dstbc_ml_decode_fast(e * (g @ C[2] + n2), e * (g @ C[1] + n1), design, PSK8)
        np.testing.assert_array_equal(d0, d1)
        # noiseless: arbitrary per-row rotations never change the decision
        np.testing.assert_array_equal(
            dstbc_ml_decode_fast((g * rot) @ C[2], (g * rot) @ C[1], design, PSK8), idx[1])


def test_dpsk_noiseless_and_common_phase():
    rng = np.random.default_rng(9)
    for _ in range(200):
        g = complex(crandn(rng, 1)[0])
        prev, s = rng.integers(0, 8, size=2)
        c_prev = PSK8.points[prev]
        c = c_prev * PSK8.points[s]
        assert dpsk_ml_decode(g * c, g * c_prev, PSK8) == s
        y, yp = crandn(rng, 2)
        e = np.exp(1j * rng.uniform(0, 2 * np.pi))
        assert dpsk_ml_decode(y, yp, PSK8) == dpsk_ml_decode(e * y, e * yp, PSK8)


def test_dpsk_matches_exhaustive():
    rng = np.random.default_rng(10)
    y, yp = crandn(rng, 1000), crandn(rng, 1000)
    dec = dpsk_ml_decode(y, yp, PSK8)
    for i in range(1000):
        vals = [np.real(s * np.conj(y[i]) * yp[i]) for s in PSK8.points]
        assert dec[i] == int(np.argmax(vals))


def test_coherent_examples():
    assert coherent_psk_detect(2 * np.exp(2j * np.pi * 3 / 8), PSK8) == 3
    assert coherent_psk_detect(0.0, PSK8) == 0
    # halfway between points 0 and 1: either neighbour is at the same distance
    on_boundary = coherent_psk_detect(np.exp(1j * np.pi / 8), PSK8)
    assert on_boundary in (0, 1)
    assert coherent_psk_detect(np.exp(1j * (np.pi / 8 + 1e-9)), PSK8) == 1
    assert coherent_psk_detect(np.exp(1j * (np.pi / 8 - 1e-9)), PSK8) == 0
    assert coherent_psk_detect(np.exp(-1j * 0.1), PSK8) == 0   # wraps around
    assert coherent_psk_detect(np.exp(-1j * 0.5), PSK8) == 7


def test_coherent_matches_exhaustive():
    rng = np.random.default_rng(11)
    y = crandn(rng, 1000)
    dec = coherent_psk_detect(y, PSK8)
    for i in range(1000):
        d = [abs((np.angle(y[i]) - 2 * np.pi * m / 8 + np.pi) % (2 * np.pi) - np.pi)
             for m in range(8)]
        assert dec[i] == int(np.argmin(d))


# --- desired-signal identity -----------------------------------------------

def test_identity_zero_and_single_term():
    C = np.eye(4)
    X = stbc_map([1, 1j, -1], RATE34)
    assert appendix_identity_check(np.zeros(4), C, X) == (0, 0.0)
    g = np.zeros(4, dtype=complex)
    g[2] = np.exp(0.7j) * 1.3
    lhs, rhs = appendix_identity_check(g, C, X)
    assert lhs == pytest.approx(1.3 ** 2) and rhs == pytest.approx(1.3 ** 2)


@pytest.mark.parametrize("design", list(DESIGNS.values()), ids=list(DESIGNS))
def test_identity_random_instances(design):
    rng = np.random.default_rng(12)
    for _ in range(1000):
        g = crandn(rng, design.n_t) * np.exp(1j * rng.uniform(0, 2 * np.pi, design.n_t))
        _, X = random_codewords(rng, design, 6)
        C = diff_encode_chain(X[:5])
        rows = rng.permutation(design.n_t)
        lhs, rhs = appendix_identity_check(g, C[-1], X[5], rows=rows)
        assert abs(lhs - rhs) <= 1e-9 * rhs


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), which=st.sampled_from(sorted(DESIGNS)))
def test_fast_decoder_property(seed, which):
    design = DESIGNS[which]
    rng = np.random.default_rng(seed)
    y_t, y_prev = crandn(rng, design.P), crandn(rng, design.P)
    book = StbcCodebook(design, PSK8)
    np.testing.assert_array_equal(dstbc_ml_decode_fast(y_t, y_prev, design, PSK8),
                                  dstbc_ml_decode_bruteforce(y_t, y_prev, book))
