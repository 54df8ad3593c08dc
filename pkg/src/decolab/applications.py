"""Application-layer formulas: coherent-state-merging rates, the partial-trace
keep-size threshold, and the relative-thermalisation condition.

Every smoothed entropy in these statements is replaced by its unsmoothed
(epsilon = 0) surrogate, computed by :mod:`decolab.entropies`; outputs carry
a ``surrogate`` marker so downstream consumers cannot mistake them for
smoothed values.  Logs are base 2 and rates are counted in qubits/ebits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channels import QuantumState
from .decoupling import bound_evaluate, concentration_chi
from .entropies import h_0, h_max, h_min_cond
from .linalg import as_complex, kron, partial_trace


def merging_delta_prime(delta: float) -> float:
    """delta' = delta + sqrt(4 sqrt(delta) - 4 delta), defined for delta in (0, 1)."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    return delta + math.sqrt(4.0 * math.sqrt(delta) - 4.0 * delta)


@dataclass(frozen=True)
class MergingRates:
    """Achievable one-shot rates for coherent state merging with the
    repeated-diagonal encoding; entropies are unsmoothed surrogates."""

    e_gain: float
    q_cost: float
    epsilon: float
    delta: float
    delta_prime: float
    ell: int
    h_min_ar: float
    h_0_a: float
    surrogate: bool = True


def merging_rates(psi_abr: QuantumState, ell: int, delta: float) -> MergingRates:
    """Entanglement gain and quantum-communication cost for merging the A
    part of a pure tripartite state, encoded with the 2*ell+1 layer circuit.

    e >= (H_min(A|R) + H_0(A))/2 + log2(delta') + log2(1 + 8 d_A^(2-ell))
    q <= (-H_min(A|R) + H_0(A))/2 - log2(delta') - log2(1 + 8 d_A^(2-ell))

    with epsilon = 2 sqrt(9 delta') + 2 sqrt(delta).  The two rates sum to
    H_0(A) exactly.
    """
    if ell < 1:
        raise ValueError("ell must be >= 1")
    if len(psi_abr.dims) != 3:
        raise ValueError("state must carry dims (d_A, d_B, d_R)")
    purity = float(np.trace(psi_abr.matrix @ psi_abr.matrix).real)
    if purity < 1.0 - 1e-8:
        raise ValueError(f"merging input must be pure (purity {purity:.6f})")
    d_a, d_b, d_r = psi_abr.dims
    dp = merging_delta_prime(delta)
    eps = 2.0 * math.sqrt(9.0 * dp) + 2.0 * math.sqrt(delta)

    rho_ar = psi_abr.marginal([0, 2])
    h_min = h_min_cond(rho_ar).value
    rho_a = psi_abr.marginal([0])
    h0 = h_0(rho_a)

    corr = math.log2(1.0 + 8.0 * d_a ** (2.0 - ell))
    e_gain = 0.5 * (h_min + h0) + math.log2(dp) + corr
    q_cost = 0.5 * (-h_min + h0) - math.log2(dp) - corr
    return MergingRates(
        e_gain=e_gain,
        q_cost=q_cost,
        epsilon=eps,
        delta=delta,
        delta_prime=dp,
        ell=ell,
        h_min_ar=h_min,
        h_0_a=h0,
    )


def partial_trace_threshold(h_min_ar: float, d_a: int, ell: int, epsilon: float) -> float:
    """Right-hand side of the keep-size condition for decoupling by partial
    trace: the mean error stays below 9 epsilon while

        log2 d_A1 <= (h_min_ar + log2 d_A)/2 + log2 eps + log2(1 + 8 d_A^(2-ell)).
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if ell < 1:
        raise ValueError("ell must be >= 1")
    return (
        0.5 * (h_min_ar + math.log2(d_a))
        + math.log2(epsilon)
        + math.log2(1.0 + 8.0 * d_a ** (2.0 - ell))
    )


@dataclass(frozen=True)
class ThermalisationVerdict:
    """Entropic condition and tail bound for a subsystem being thermalised
    relative to a reference after a random diagonal-circuit evolution."""

    lhs: float
    rhs: float
    satisfied: bool
    fraction_bound: float
    h_min_ser: float
    h_min_e: float
    h_max_s: float
    k_const: float
    surrogate: bool = True


def thermalisation_check(
    rho_xir: QuantumState,
    dims: tuple[int, int, int],
    ell: int,
    eps1: float,
    eps2: float,
    eps3: float,
    delta_target: float,
    isometry: np.ndarray | None = None,
) -> ThermalisationVerdict:
    """Check the relative-thermalisation condition

        H_min(SE|R)_rho + H_min(E)_pi - H_max(S)_pi
            >= 2 log2[ 2 sqrt(1 + 8 d_S^(2-ell))
                       / ((1 - sqrt(1 - (eps1-eps2-eps3)^2)) (Delta - 24 eps1)) ]

    with unsmoothed surrogate entropies, and the unitary fraction bound
    2 exp(-chi_ell d_S Delta^4), K = d_S ||rho_S||_inf.

    ``rho_xir`` lives on Xi (x) R; when Xi is a strict subspace of S (x) E,
    pass the embedding isometry (d_S*d_E x dim Xi), which also defines the
    microcanonical state pi = V V^dag / dim(Xi).
    """
    d_s, d_e, d_r = (int(v) for v in dims)
    if ell < 1:
        raise ValueError("ell must be >= 1")
    if not (eps1 > eps2 + eps3 >= 0.0):
        raise ValueError("need eps1 > eps2 + eps3 >= 0")
    if delta_target - 24.0 * eps1 <= 0.0:
        raise ValueError("Delta - 24 eps1 must be positive; condition unsatisfiable")

    d_xi = rho_xir.dims[0] if len(rho_xir.dims) == 2 else int(np.prod(rho_xir.dims[:-1]))
    mat = rho_xir.matrix
    if isometry is not None:
        v = as_complex(isometry)
        if v.shape != (d_s * d_e, d_xi):
            raise ValueError(f"isometry shape {v.shape}, expected {(d_s * d_e, d_xi)}")
        if np.max(np.abs(v.conj().T @ v - np.eye(d_xi))) > 1e-8:
            raise ValueError("embedding is not an isometry")
        big = kron(v, np.eye(d_r)) @ mat @ kron(v, np.eye(d_r)).conj().T
        rho_ser = QuantumState(big, (d_s * d_e, d_r))
        pi_se = v @ v.conj().T / d_xi
    else:
        if d_xi != d_s * d_e:
            raise ValueError("dims do not match the state; pass an isometry for a strict subspace")
        rho_ser = QuantumState(mat, (d_s * d_e, d_r))
        pi_se = np.eye(d_s * d_e, dtype=np.complex128) / (d_s * d_e)

    pi_e = partial_trace(pi_se, (d_s, d_e), [0])
    pi_s = partial_trace(pi_se, (d_s, d_e), [1])
    h_min_ser = h_min_cond(rho_ser).value
    h_min_e = -math.log2(float(np.max(np.abs(np.linalg.eigvalsh(pi_e)))))
    h_max_s = h_max(pi_s)
    lhs = h_min_ser + h_min_e - h_max_s

    smooth_frac = 1.0 - math.sqrt(max(1.0 - (eps1 - eps2 - eps3) ** 2, 0.0))
    if smooth_frac <= 0.0:
        raise ValueError("smoothing margin vanished; eps1 - eps2 - eps3 too small")
    rhs = 2.0 * math.log2(
        2.0 * math.sqrt(1.0 + 8.0 * d_s ** (2.0 - ell))
        / (smooth_frac * (delta_target - 24.0 * eps1))
    )

    rho_s = partial_trace(rho_ser.matrix, (d_s, d_e, d_r), [1, 2])
    k_const = d_s * float(np.max(np.abs(np.linalg.eigvalsh(rho_s))))
    fraction = bound_evaluate("tail", dict(d_a=d_s, ell=ell, eta=delta_target, k=k_const))
    return ThermalisationVerdict(
        lhs=lhs,
        rhs=rhs,
        satisfied=bool(lhs >= rhs),
        fraction_bound=fraction,
        h_min_ser=h_min_ser,
        h_min_e=h_min_e,
        h_max_s=h_max_s,
        k_const=k_const,
    )
