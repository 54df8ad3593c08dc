import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decolab.linalg import (
    eigh,
    format_matrix,
    hadamard_all,
    kron,
    max_entangled,
    parse_matrix,
    partial_trace,
    permute_systems,
    pinv_quarter_root,
    singular_values,
    swap_operator,
    trace_norm,
)

RNG = np.random.default_rng(2024)


def crandom(shape):
    return RNG.standard_normal(shape) + 1j * RNG.standard_normal(shape)


SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


class TestKron:
    def test_identity(self):
        assert np.allclose(kron(np.eye(2), np.eye(2)), np.eye(4))

    def test_diagonal(self):
        got = kron(np.diag([1.0, 2.0]), np.diag([3.0, 4.0]))
        assert np.allclose(np.diag(got), [3, 4, 6, 8])

    def test_sigma_x_pair_on_00(self):
        v00 = np.zeros(4, dtype=complex)
        v00[0] = 1.0
        explicit = np.zeros((4, 4), dtype=complex)
        explicit[0, 3] = explicit[1, 2] = explicit[2, 1] = explicit[3, 0] = 1.0
        assert np.allclose(kron(SX, SX), explicit)
        out = kron(SX, SX) @ v00
        want = np.zeros(4, dtype=complex)
        want[3] = 1.0
        assert np.allclose(out, want)


class TestPartialTrace:
    def test_product_state(self):
        rho = crandom((3, 3))
        rho = rho @ rho.conj().T
        sig = crandom((4, 4))
        assert np.allclose(
            partial_trace(kron(rho, sig), (3, 4), [1]), rho * np.trace(sig)
        )

    def test_max_entangled_marginal(self):
        phi = max_entangled(2)
        assert np.allclose(partial_trace(phi, (2, 2), [1]), np.eye(2) / 2)

    def test_middle_factor_against_index_sum(self):
        dims = (2, 3, 2)
        m = crandom((12, 12))
        got = partial_trace(m, dims, [1])
        t = m.reshape(2, 3, 2, 2, 3, 2)
        want = np.zeros((4, 4), dtype=complex)
        for a in range(2):
            for c in range(2):
                for ap in range(2):
                    for cp in range(2):
                        for b in range(3):
                            want[a * 2 + c, ap * 2 + cp] += t[a, b, c, ap, b, cp]
        assert np.allclose(got, want)

    def test_trace_preserved(self):
        m = crandom((8, 8))
        assert np.isclose(np.trace(partial_trace(m, (2, 4), [0])), np.trace(m))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            partial_trace(np.eye(6), (2, 2), [0])


class TestPermuteSystems:
    def test_swap_two_factors(self):
        a, b = crandom((2, 2)), crandom((3, 3))
        assert np.allclose(permute_systems(kron(a, b), (2, 3), [1, 0]), kron(b, a))

    def test_three_factor_cycle(self):
        ops = [crandom((2, 2)), crandom((3, 3)), crandom((2, 2))]
        full = kron(kron(ops[0], ops[1]), ops[2])
        got = permute_systems(full, (2, 3, 2), [2, 0, 1])
        want = kron(kron(ops[2], ops[0]), ops[1])
        assert np.allclose(got, want)


class TestEigh:
    def test_identity(self):
        w, _ = eigh(np.eye(4, dtype=complex))
        assert np.allclose(w, 1.0)

    def test_pauli_z(self):
        w, _ = eigh(SZ)
        assert np.allclose(w, [-1.0, 1.0])

    def test_reconstruction(self):
        h = crandom((8, 8))
        h = (h + h.conj().T) / 2
        w, v = eigh(h)
        assert np.max(np.abs((v * w) @ v.conj().T - h)) <= 1e-9 * 8

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            eigh(crandom((3, 3)))


class TestTraceNorm:
    def test_hermitian_spectrum(self):
        assert np.isclose(trace_norm(SZ), 2.0)

    def test_unitary(self):
        g = crandom((5, 5))
        q, _ = np.linalg.qr(g)
        assert np.isclose(trace_norm(q), 5.0)

    def test_projector_difference(self):
        zero = np.zeros((2, 2), dtype=complex)
        zero[0, 0] = 1.0
        plus = np.full((2, 2), 0.5, dtype=complex)
        assert np.isclose(trace_norm(zero - plus), np.sqrt(2))

    def test_unitary_invariance(self):
        x = crandom((4, 4))
        u, _ = np.linalg.qr(crandom((4, 4)))
        v, _ = np.linalg.qr(crandom((4, 4)))
        assert abs(trace_norm(u @ x @ v) - trace_norm(x)) <= 1e-9

    def test_matches_svd(self):
        x = crandom((6, 6))
        assert np.isclose(trace_norm(x), np.sum(np.linalg.svd(x)[1]))


class TestPinvQuarterRoot:
    def test_identity(self):
        assert np.allclose(pinv_quarter_root(np.eye(3, dtype=complex)), np.eye(3))

    def test_moore_penrose_on_singular(self):
        got = pinv_quarter_root(np.diag([4.0, 0.0]).astype(complex))
        assert np.allclose(got, np.diag([4 ** -0.25, 0.0]))

    def test_scalar_arithmetic(self):
        got = pinv_quarter_root(np.diag([16.0, 1.0]).astype(complex))
        assert np.allclose(got, np.diag([0.5, 1.0]))

    def test_support_projector(self):
        g = crandom((5, 2))
        p = g @ g.conj().T  # rank 2 PSD
        q = pinv_quarter_root(p)
        proj = np.linalg.matrix_power(q, 4) @ p
        assert np.allclose(proj @ proj, proj, atol=1e-8)
        assert np.allclose(proj @ p, p, atol=1e-8)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            pinv_quarter_root(np.diag([1.0, -0.5]).astype(complex))


class TestMaxEntangled:
    def test_degenerate(self):
        assert np.allclose(max_entangled(1), [[1.0]])

    def test_bell_marginals(self):
        phi = max_entangled(2)
        for side in (0, 1):
            assert np.allclose(partial_trace(phi, (2, 2), [side]), np.eye(2) / 2)

    def test_purity_and_marginal_purity(self):
        phi = max_entangled(4)
        assert np.isclose(np.trace(phi @ phi).real, 1.0)
        marg = partial_trace(phi, (4, 4), [0])
        assert np.isclose(np.trace(marg @ marg).real, 0.25)


class TestSwap:
    def test_definition(self):
        f = swap_operator(2)
        v01 = np.zeros(4)
        v01[1] = 1.0
        v10 = np.zeros(4)
        v10[2] = 1.0
        assert np.allclose(f @ v01, v10)

    def test_trace(self):
        for d in (2, 3, 4):
            assert np.isclose(np.trace(swap_operator(d)).real, d)

    def test_involution(self):
        f = swap_operator(3)
        assert np.allclose(f @ f, np.eye(9))

    def test_swap_trick(self):
        for d in (2, 3, 4):
            f = swap_operator(d)
            for _ in range(34):
                x, y = crandom((d, d)), crandom((d, d))
                lhs = np.trace(kron(x, y) @ f)
                rhs = np.trace(x @ y)
                assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))


class TestHadamard:
    def test_single_qubit(self):
        h = hadamard_all(1)
        v0 = np.array([1.0, 0.0])
        assert np.allclose(h @ v0, np.array([1.0, 1.0]) / np.sqrt(2))

    def test_two_qubits_entries(self):
        h = hadamard_all(2)
        assert np.allclose(np.abs(h), 0.5)

    def test_involution(self):
        h = hadamard_all(3)
        assert np.max(np.abs(h @ h - np.eye(8))) <= 1e-12


class TestMatrixText:
    def test_header_and_roundtrip(self):
        m = crandom((3, 2))
        text = format_matrix(m)
        assert text.splitlines()[0] == "3 2"
        assert np.array_equal(parse_matrix(text), m)

    @settings(max_examples=40, deadline=None)
    @given(
        rows=st.integers(1, 5),
        cols=st.integers(1, 5),
        seed=st.integers(0, 2**31 - 1),
    )
    def test_roundtrip_random(self, rows, cols, seed):
        gen = np.random.default_rng(seed)
        m = gen.standard_normal((rows, cols)) * 10.0 ** gen.integers(-12, 12)
        m = m + 1j * gen.standard_normal((rows, cols))
        assert np.array_equal(parse_matrix(format_matrix(m)), m)

    def test_bad_entries_rejected(self):
        with pytest.raises(ValueError):
            parse_matrix("1 2\n1.0,0.0")
        with pytest.raises(ValueError):
            parse_matrix("1 1\nnot-a-pair")


def test_singular_values_match_lapack():
    m = crandom((5, 5))
    assert np.allclose(singular_values(m), np.linalg.svd(m)[1], atol=1e-10)
