import numpy as np
import pytest

from decolab.channels import (
    Channel,
    QuantumState,
    adjoint_apply,
    choi_to_kraus,
    choi_to_superop,
    depolarizing_channel,
    full_trace_channel,
    identity_channel,
    j_inv_apply,
    j_map,
    kraus_to_choi,
    kraus_to_superop,
    partial_trace_channel,
    superop_apply,
    superop_to_choi,
    unitary_channel,
)
from decolab.linalg import kron, max_entangled, partial_trace, random_density

RNG = np.random.default_rng(77)


def crandom(shape, rng=RNG):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_kraus(d_in, d_out, k, rng=RNG):
    """Random CPTP channel as normalized Kraus operators (k d_out >= d_in
    so the trace-preservation normalization is well posed)."""
    k = max(k, -(-d_in // d_out))
    ops = [crandom((d_out, d_in), rng) for _ in range(k)]
    s = sum(op.conj().T @ op for op in ops)
    w, v = np.linalg.eigh(s)
    corr = (v * (1.0 / np.sqrt(w))) @ v.conj().T
    return [op @ corr for op in ops]


class TestQuantumState:
    def test_accepts_valid(self):
        st = QuantumState(max_entangled(2), (2, 2))
        assert st.dim == 4

    def test_rejects_wrong_trace(self):
        with pytest.raises(ValueError):
            QuantumState(np.eye(2, dtype=complex), (2,))

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            QuantumState(np.diag([1.5, -0.5]).astype(complex), (2,))

    def test_clamps_small_violations(self):
        m = np.diag([0.5, 0.5]).astype(complex)
        m[0, 1] = 1e-9  # non-Hermitian at the clamp scale
        st = QuantumState(m, (2,))
        assert np.allclose(st.matrix, st.matrix.conj().T)

    def test_subnormalized(self):
        st = QuantumState(np.diag([0.25, 0.25]).astype(complex), (2,), "subnormalized")
        assert np.isclose(np.trace(st.matrix).real, 0.5)

    def test_marginal(self):
        st = QuantumState(max_entangled(2), (2, 2))
        assert np.allclose(st.marginal([0]).matrix, np.eye(2) / 2)


class TestJMap:
    def test_identity_channel_is_max_entangled(self):
        ch = j_map([np.eye(2, dtype=complex)])
        assert np.allclose(ch.choi, max_entangled(2))

    def test_depolarizing_choi(self):
        assert np.allclose(depolarizing_channel(2).choi, np.eye(4) / 4)

    def test_partial_trace_choi(self):
        # (id (x) tr_2)(Phi_4) for d_A1 = d_A2 = 2, computed explicitly
        ch = partial_trace_channel(2, 2)
        phi4 = max_entangled(4)
        want = partial_trace(phi4, (2, 2, 2, 2), [3])  # trace the dropped copy
        # reorder: Choi lives on (A1 A2, B=A1'); explicit computation keeps
        # (A1, A2, A1') which is already the right order
        assert np.allclose(ch.choi, want)
        assert np.allclose(ch.tau_out, np.eye(2) / 2)

    def test_trace_one_for_cptp(self):
        ks = random_kraus(3, 2, 2)
        ch = j_map(ks)
        assert np.isclose(np.trace(ch.choi).real, 1.0)
        assert ch.tp_flag

    def test_non_cp_detected(self):
        bad = np.diag([0.5, 0.5, 0.5, -0.5]).astype(complex)
        with pytest.raises(ValueError):
            Channel(choi=bad, d_in=2, d_out=2, tp_flag=False)

    def test_superop_input(self):
        ks = random_kraus(2, 2, 2)
        sup = kraus_to_superop(ks)
        ch = j_map(sup, d_in=2, d_out=2)
        assert np.allclose(ch.choi, kraus_to_choi(ks))


class TestJInvApply:
    def test_identity_roundtrip(self):
        rho = random_density(2, RNG)
        ch = identity_channel(2)
        assert np.allclose(j_inv_apply(ch, rho), rho, atol=1e-12)

    def test_depolarizing_value(self):
        ch = Channel(choi=np.eye(4, dtype=complex) / 4, d_in=2, d_out=2)
        rho = random_density(2, RNG)
        assert np.allclose(j_inv_apply(ch, rho), np.trace(rho) * np.eye(2) / 2)

    def test_kraus_roundtrip(self):
        ks = random_kraus(3, 4, 3)
        ch = j_map(ks)
        rho = random_density(3, RNG)
        want = sum(k @ rho @ k.conj().T for k in ks)
        assert np.max(np.abs(ch(rho) - want)) <= 1e-10

    def test_cj_roundtrip_many(self):
        # 50 random CPTP channels over the (d_in, d_out) grid
        rng = np.random.default_rng(5)
        count = 0
        for d_in in (2, 4):
            for d_out in (2, 4):
                for _ in range(13):
                    if count >= 50:
                        break
                    ks = random_kraus(d_in, d_out, rng.integers(1, 4), rng)
                    ch = j_map(ks)
                    rho = random_density(d_in, rng)
                    want = sum(k @ rho @ k.conj().T for k in ks)
                    assert np.max(np.abs(ch(rho) - want)) <= 1e-9
                    count += 1
        assert count >= 50

    def test_trace_preservation(self):
        ks = random_kraus(4, 2, 3)
        ch = j_map(ks)
        rho = crandom((4, 4))
        assert abs(np.trace(ch(rho)) - np.trace(rho)) <= 1e-10 * max(1, abs(np.trace(rho)))


class TestAdjoint:
    def test_bilinear_pairing(self):
        ks = random_kraus(3, 2, 2)
        ch = j_map(ks)
        for _ in range(10):
            x = crandom((3, 3))
            y = crandom((2, 2))
            lhs = np.trace(ch(x) @ y)
            rhs = np.trace(x @ adjoint_apply(ch, y))
            assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))

    def test_adjoint_matches_kraus(self):
        ks = random_kraus(2, 4, 2)
        ch = j_map(ks)
        y = crandom((4, 4))
        want = sum(k.conj().T @ y @ k for k in ks)
        assert np.max(np.abs(adjoint_apply(ch, y) - want)) <= 1e-10


def _swap_kernel(ch, d_in, d_out):
    """sum_{bb'} C*(E_bb') (x) C*(E_b'b) = (C* (x) C*)(F_BB')."""
    kernel = np.zeros((d_in * d_in,) * 2, dtype=np.complex128)
    for b in range(d_out):
        for bp in range(d_out):
            e1 = np.zeros((d_out, d_out), dtype=complex)
            e1[b, bp] = 1.0
            e2 = np.zeros((d_out, d_out), dtype=complex)
            e2[bp, b] = 1.0
            kernel += kron(adjoint_apply(ch, e1), adjoint_apply(ch, e2))
    return (kernel + kernel.conj().T) / 2


class TestSwapKernel:
    # The raw operator-norm inequality ||C*^(x2)(F)||_inf <= d_A tr[J(C)^2]
    # fails on generic CP (and even CPTP) maps -- see the decisions ledger and
    # the corresponding acceptance check.  What does hold, and what the
    # surrounding estimates actually rely on, are the exact swap pairing and
    # the bound on the Haar-projected kernel; both are pinned here.

    def test_swap_pairing_identity(self):
        # <(C* (x) C*)(F_BB'), F_AA'> = d_A^2 tr[J(C)^2]
        rng = np.random.default_rng(11)
        from decolab.linalg import swap_operator

        for _ in range(25):
            d_in, d_out = int(rng.choice([2, 3, 4])), int(rng.choice([2, 3]))
            ops = [crandom((d_out, d_in), rng) * rng.uniform(0.2, 1.5)
                   for _ in range(int(rng.integers(1, 3)))]
            ch = j_map(ops, tp=False)
            kernel = _swap_kernel(ch, d_in, d_out)
            lhs = np.trace(kernel @ swap_operator(d_in)).real
            rhs = d_in ** 2 * np.trace(ch.choi @ ch.choi).real
            assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(rhs))

    def test_haar_projected_kernel_bounded(self):
        # ||G_Haar(C*^(x2)(F))||_inf <= d_A tr[J(C)^2] on power-of-two inputs
        from decolab.random_unitaries import twirl2_haar

        rng = np.random.default_rng(12)
        for _ in range(50):
            d_in, d_out = int(rng.choice([2, 4])), int(rng.choice([2, 3]))
            ops = [crandom((d_out, d_in), rng) * rng.uniform(0.2, 1.5)
                   for _ in range(int(rng.integers(1, 3)))]
            ch = j_map(ops, tp=False)
            kernel = _swap_kernel(ch, d_in, d_out)
            projected = twirl2_haar(kernel)
            opnorm = np.max(np.abs(np.linalg.eigvalsh(projected)))
            bound = d_in * np.trace(ch.choi @ ch.choi).real
            assert opnorm <= bound + 1e-8

    def test_cptp_kernel_norm_at_most_one(self):
        # for trace-preserving C the Stinespring form gives ||kernel|| <= 1
        rng = np.random.default_rng(13)
        for _ in range(25):
            d_in, d_out = int(rng.choice([2, 3])), int(rng.choice([2, 3]))
            ops = random_kraus(d_in, d_out, int(rng.integers(1, 4)), rng)
            ch = j_map(ops)
            kernel = _swap_kernel(ch, d_in, d_out)
            assert np.max(np.abs(np.linalg.eigvalsh(kernel))) <= 1.0 + 1e-10

    def test_kernel_equals_swap_contraction(self):
        # sanity: sum_{bb'} C*(E_bb') (x) C*(E_b'b) == (C* (x) C*)(F)
        ks = random_kraus(2, 3, 2)
        ch = j_map(ks)
        from decolab.linalg import swap_operator

        f = swap_operator(3)
        want = np.zeros((4, 4), dtype=complex)
        for k1 in ks:
            for k2 in ks:
                want += kron(k1.conj().T, k2.conj().T) @ f @ kron(k1, k2)
        kernel = np.zeros((4, 4), dtype=complex)
        for b in range(3):
            for bp in range(3):
                e1 = np.zeros((3, 3), dtype=complex)
                e1[b, bp] = 1.0
                e2 = np.zeros((3, 3), dtype=complex)
                e2[bp, b] = 1.0
                kernel += kron(adjoint_apply(ch, e1), adjoint_apply(ch, e2))
        assert np.max(np.abs(kernel - want)) <= 1e-10


class TestConversions:
    def test_superop_choi_roundtrip(self):
        ks = random_kraus(3, 2, 2)
        sup = kraus_to_superop(ks)
        choi = superop_to_choi(sup, 3, 2)
        assert np.allclose(choi, kraus_to_choi(ks))
        assert np.allclose(choi_to_superop(choi, 3, 2), sup)

    def test_superop_apply(self):
        ks = random_kraus(2, 2, 3)
        sup = kraus_to_superop(ks)
        rho = random_density(2, RNG)
        want = sum(k @ rho @ k.conj().T for k in ks)
        assert np.allclose(superop_apply(sup, rho), want)

    def test_choi_to_kraus_rebuilds_channel(self):
        ks = random_kraus(4, 3, 2)
        choi = kraus_to_choi(ks)
        ks2 = choi_to_kraus(choi, 4, 3)
        rho = random_density(4, RNG)
        out1 = sum(k @ rho @ k.conj().T for k in ks)
        out2 = sum(k @ rho @ k.conj().T for k in ks2)
        assert np.max(np.abs(out1 - out2)) <= 1e-10


class TestStandardChannels:
    def test_full_trace(self):
        ch = full_trace_channel(3)
        rho = random_density(3, RNG)
        assert np.allclose(ch(rho), [[1.0]])

    def test_unitary_channel(self):
        u, _ = np.linalg.qr(crandom((3, 3)))
        ch = unitary_channel(u)
        rho = random_density(3, RNG)
        assert np.allclose(ch(rho), u @ rho @ u.conj().T)

    def test_depolarizing_partial(self):
        ch = depolarizing_channel(2, p=0.5)
        rho = random_density(2, RNG)
        want = 0.5 * rho + 0.5 * np.eye(2) / 2
        assert np.allclose(ch(rho), want)
