"""Entropic quantities for decoupling bounds, in bits.

Conditional min-entropy is computed through the guessing-probability form of
its SDP (maximize ``<rho, W>`` over ``W >= 0`` with ``tr_A W = I_B``), whose
dual multipliers recover the optimal ``sigma_B`` of the defining program
``min tr sigma_B  s.t.  I_A (x) sigma_B >= rho_AB``.  The conditional
collision entropy ``sup_sigma -log2 tr[((I (x) sigma^(-1/4)) rho
(I (x) sigma^(-1/4)))^2]`` is evaluated either at the plug-in point
``sigma = rho_B`` or by projected gradient ascent over density matrices;
either way the reported value is an attained (hence valid) lower bound on
the supremum.

No smoothing is performed anywhere: every epsilon-smoothed quantity used by
callers is replaced by its epsilon = 0 surrogate and labeled as such.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import QuantumState
from .linalg import (
    HERM_ATOL,
    as_complex,
    eigh,
    kron,
    matrix_function,
    partial_trace,
    pinv_quarter_root,
    singular_values,
)
from .sdp import SdpProblem, hermitian_basis, solve_sdp


@dataclass(frozen=True)
class EntropyResult:
    """Value in bits, the achieving/optimizing state when one exists, and an
    optional certificate (SDP duality gap or ascent improvement)."""

    value: float
    optimizer: np.ndarray | None = None
    certificate: float | None = None


def _split_cut(state: QuantumState, cut: int) -> tuple[np.ndarray, int, int]:
    dims = state.dims
    if not 1 <= cut < len(dims):
        raise ValueError(f"cut {cut} invalid for dims {dims}")
    d_a = int(np.prod(dims[:cut]))
    d_b = int(np.prod(dims[cut:]))
    return state.matrix, d_a, d_b


def h_min_cond(state: QuantumState, cut: int = 1, gap_tol: float = 1e-9) -> EntropyResult:
    """Conditional min-entropy H_min(A|B) of the bipartition after ``cut``
    leading factors, SDP-certified; the optimizer is the normalized sigma_B."""
    rho, d_a, d_b = _split_cut(state, cut)
    basis_b = hermitian_basis(d_b)
    eye_a = np.eye(d_a, dtype=np.complex128)
    constraints = [([kron(eye_a, g)], float(np.trace(g).real)) for g in basis_b]
    prob = SdpProblem(
        block_sizes=(d_a * d_b,),
        objective=[rho],
        constraints=constraints,
        sense="max",
    )
    sol = solve_sdp(prob, gap_tol=gap_tol)
    if sol.status != "optimal":
        raise RuntimeError(f"H_min SDP failed: {sol.status}")
    # Dual feasibility reads sum_k y_k (I (x) G_k) + Z = -(-rho), i.e. the
    # dual variable sigma = -sum y_k G_k obeys I (x) sigma >= rho.
    sigma = -sum(y * g for y, g in zip(sol.dual_y, basis_b))
    sigma = (sigma + sigma.conj().T) / 2
    tr_sigma = np.trace(sigma).real
    guess = 0.5 * (sol.primal_value + sol.dual_value)
    value = -np.log2(max(guess, 1e-300))
    return EntropyResult(value=value, optimizer=sigma / tr_sigma, certificate=sol.gap)


def _collision_term(rho: np.ndarray, d_a: int, d_b: int, sigma: np.ndarray) -> float:
    """tr[((I (x) sigma^(-1/4)) rho (I (x) sigma^(-1/4)))^2], Moore-Penrose
    on the kernel of sigma."""
    q = pinv_quarter_root(sigma)
    half = kron(np.eye(d_a), q @ q)  # sigma^(-1/2) on B
    return float(np.trace(rho @ half @ rho @ half).real)


def _full_rank_density(sigma: np.ndarray) -> np.ndarray:
    """Clip eigenvalues up to a tiny floor and renormalize.

    Used inside the ascent so that candidate sigmas never acquire a kernel:
    a kernel overlapping supp(rho_B) would make the Moore-Penrose sandwich
    drop state weight and fake an inflated entropy.  The floored matrix is a
    genuine density, so values evaluated at it are attained lower bounds.
    """
    w, v = eigh(sigma)
    floor = max(float(w[-1]), 1e-30) * 1e-14
    w = np.clip(w, floor, None)
    w /= np.sum(w)
    return (v * w) @ v.conj().T


def _collision_full_rank(rho: np.ndarray, d_a: int, d_b: int, sigma: np.ndarray) -> float:
    w, v = eigh(sigma)
    floor = max(float(w[-1]), 1e-30) * 1e-14
    w = np.clip(w, floor, None)
    inv_half = (v * (w ** -0.5)) @ v.conj().T
    big = kron(np.eye(d_a), inv_half)
    return float(np.trace(rho @ big @ rho @ big).real)


def _simplex_project(w: np.ndarray) -> np.ndarray:
    """Euclidean projection of a real vector onto the probability simplex."""
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, w.size + 1)
    cond = u - css / ks > 0
    if not np.any(cond):  # float cancellation at extreme scales
        return np.full_like(w, 1.0 / w.size)
    k = ks[cond][-1]
    tau = css[k - 1] / k
    return np.clip(w - tau, 0.0, None)


def _density_project(h: np.ndarray) -> np.ndarray:
    w, v = eigh(h)
    w = _simplex_project(w)
    return (v * w) @ v.conj().T


def h_2_cond(
    state: QuantumState,
    cut: int = 1,
    mode: str = "plugin",
    max_iter: int = 200,
) -> EntropyResult:
    """Conditional collision entropy H_2(A|B).

    ``plugin`` evaluates at sigma_B = rho_B; ``optimized`` runs projected
    gradient ascent (Armijo backtracking, ``max_iter`` cap, restart from the
    maximally mixed point if the plug-in start stalls) and returns the best
    sigma found.  Both are lower bounds on the supremum; optimized >= plugin
    up to 1e-9 by construction.
    """
    if mode not in ("plugin", "optimized"):
        raise ValueError(f"mode must be 'plugin' or 'optimized', got {mode!r}")
    rho, d_a, d_b = _split_cut(state, cut)
    rho_b = partial_trace(rho, (d_a, d_b), [0])
    f_plugin = _collision_term(rho, d_a, d_b, rho_b)
    if mode == "plugin":
        return EntropyResult(value=-np.log2(max(f_plugin, 1e-300)), optimizer=rho_b)

    def gradient(sigma: np.ndarray) -> np.ndarray:
        # dF = 2 tr[P d(sigma^(-1/2))], P = tr_A[rho (I (x) sigma^(-1/2)) rho],
        # pulled back through the spectral divided differences of x -> x^(-1/2).
        w, v = eigh(sigma)
        floor = max(w[-1], 1.0) * 1e-14
        w = np.clip(w, floor, None)
        inv_sqrt = (v * (w ** -0.5)) @ v.conj().T
        p_mat = partial_trace(rho @ kron(np.eye(d_a), inv_sqrt) @ rho, (d_a, d_b), [0])
        fw = w ** -0.5
        denom = w[:, None] - w[None, :]
        close = np.abs(denom) < 1e-12 * max(w[-1], 1.0)
        div = np.where(close, -0.5 * (w[:, None] ** -1.5), (fw[:, None] - fw[None, :]) / np.where(close, 1.0, denom))
        p_tilde = v.conj().T @ p_mat @ v
        g = v @ (p_tilde * div) @ v.conj().T
        return (g + g.conj().T)  # 2x from the two sandwich factors

    def ascend(sigma0: np.ndarray) -> tuple[float, np.ndarray]:
        sigma = _full_rank_density(_density_project(sigma0))
        f_cur = _collision_full_rank(rho, d_a, d_b, sigma)
        step = 1.0
        for _ in range(max_iter):
            g = gradient(sigma)
            gn = float(np.linalg.norm(g))
            if gn < 1e-14:
                break
            accepted = False
            t = step / max(gn, 1.0)
            for _ in range(40):
                cand = _full_rank_density(_density_project(sigma - t * g))
                f_new = _collision_full_rank(rho, d_a, d_b, cand)
                decrease = float(np.vdot(g, sigma - cand).real)
                if f_new <= f_cur - 1e-4 * decrease and f_new < f_cur:
                    sigma, f_cur = cand, f_new
                    step = min(step * 2.0, 1e9)
                    accepted = True
                    break
                t /= 4.0
            if not accepted:
                break
        return f_cur, sigma

    f_best, sigma_best = ascend(rho_b)
    if f_best > f_plugin:
        f_best, sigma_best = f_plugin, rho_b
    f_mixed, sigma_mixed = ascend(np.eye(d_b, dtype=np.complex128) / d_b)
    if f_mixed < f_best:
        f_best, sigma_best = f_mixed, sigma_mixed
    value = -np.log2(max(f_best, 1e-300))
    return EntropyResult(value=value, optimizer=sigma_best, certificate=value + np.log2(max(f_plugin, 1e-300)))


def h_0(state: QuantumState | np.ndarray) -> float:
    """log2 of the rank, eigenvalues counted above the 1e-10 * d threshold."""
    m = state.matrix if isinstance(state, QuantumState) else as_complex(state)
    w, _ = eigh(m)
    rank = int(np.sum(w > HERM_ATOL * m.shape[0]))
    return float(np.log2(max(rank, 1)))


def h_max(state: QuantumState | np.ndarray) -> float:
    """Unconditional Renyi-1/2 entropy 2 log2 tr sqrt(rho)."""
    m = state.matrix if isinstance(state, QuantumState) else as_complex(state)
    w, _ = eigh(m)
    return float(2.0 * np.log2(np.sum(np.sqrt(np.clip(w, 0.0, None)))))


def purified_distance(rho: QuantumState, sigma: QuantumState) -> float:
    """sqrt(1 - Fbar^2) with the generalized fidelity
    Fbar = ||sqrt(rho) sqrt(sigma)||_1 + sqrt((1 - tr rho)(1 - tr sigma))."""
    a, b = rho.matrix, sigma.matrix
    if a.shape != b.shape:
        raise ValueError("states must share a dimension")
    sqrt_a = matrix_function(a, lambda w: np.sqrt(np.clip(w, 0.0, None)))
    sqrt_b = matrix_function(b, lambda w: np.sqrt(np.clip(w, 0.0, None)))
    root_fid = float(np.sum(singular_values(sqrt_a @ sqrt_b)))
    ta = min(np.trace(a).real, 1.0)
    tb = min(np.trace(b).real, 1.0)
    fbar = root_fid + np.sqrt(max(1.0 - ta, 0.0) * max(1.0 - tb, 0.0))
    fbar = min(max(fbar, 0.0), 1.0)
    return float(np.sqrt(max(1.0 - fbar * fbar, 0.0)))
