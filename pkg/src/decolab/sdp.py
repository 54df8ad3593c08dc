"""Dense primal-dual interior-point solver for small Hermitian SDPs.

Standard form over block-diagonal complex Hermitian matrices:

    minimize    sum_b <C_b, X_b>
    subject to  sum_b <A_ib, X_b> = b_i   (i = 1..p)
                X_b >= 0,

with the real inner product ``<A, B> = Re tr(A^dag B)``.  Complex Hermitian
blocks are handled natively (no real embedding).  The algorithm is a
Mehrotra predictor-corrector with Nesterov-Todd scaling from an infeasible
identity start, targeting problems with block sizes and constraint counts up
to a few hundred; robustness is preferred over asymptotic speed.

The per-block NT scaling point is computed from factorizations
``X = Gx Gx^dag``, ``Z = Gz Gz^dag`` via the SVD ``Gz^dag Gx = U S V^dag``:
``R = Gx V S^(-1/2)`` maps both variables to the same diagonal
``R^(-1) X R^(-dag) = R^dag Z R = S``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from scipy.linalg import cho_factor, cho_solve

from .linalg import as_complex


@lru_cache(maxsize=32)
def hermitian_basis(d: int) -> tuple[np.ndarray, ...]:
    """Orthonormal basis of d x d Hermitian matrices (d^2 elements):
    diagonal units, symmetric and antisymmetric off-diagonal pairs."""
    out = []
    for k in range(d):
        e = np.zeros((d, d), dtype=np.complex128)
        e[k, k] = 1.0
        out.append(e)
    s = 1.0 / np.sqrt(2.0)
    for k in range(d):
        for l in range(k + 1, d):
            e = np.zeros((d, d), dtype=np.complex128)
            e[k, l] = s
            e[l, k] = s
            out.append(e)
            e = np.zeros((d, d), dtype=np.complex128)
            e[k, l] = 1j * s
            e[l, k] = -1j * s
            out.append(e)
    return tuple(out)


def _check_hermitian(m: np.ndarray, what: str) -> np.ndarray:
    m = as_complex(m)
    dev = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if dev > 1e-10 * max(1.0, np.max(np.abs(m))):
        raise ValueError(f"{what} is not Hermitian (deviation {dev:.3e})")
    return (m + m.conj().T) / 2


@dataclass
class SdpProblem:
    """Block-structured SDP data.

    ``objective[b]`` and each ``constraints[i][0][b]`` are Hermitian matrices
    of size ``block_sizes[b]`` (``None`` means a zero block).  ``sense`` is
    ``"min"`` or ``"max"``.
    """

    block_sizes: tuple[int, ...]
    objective: list
    constraints: list
    sense: str = "min"

    def __post_init__(self):
        self.block_sizes = tuple(int(s) for s in self.block_sizes)
        if any(s < 1 for s in self.block_sizes):
            raise ValueError("block sizes must be positive")
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")
        nb = len(self.block_sizes)
        if len(self.objective) != nb:
            raise ValueError("objective must list one matrix (or None) per block")
        self.objective = [
            None if c is None else _check_hermitian(c, f"objective block {b}")
            for b, c in enumerate(self.objective)
        ]
        checked = []
        for i, (mats, rhs) in enumerate(self.constraints):
            if len(mats) != nb:
                raise ValueError(f"constraint {i} must list one matrix (or None) per block")
            mats = [
                None if a is None else _check_hermitian(a, f"constraint {i}, block {b}")
                for b, a in enumerate(mats)
            ]
            for b, a in enumerate(mats):
                if a is not None and a.shape != (self.block_sizes[b],) * 2:
                    raise ValueError(f"constraint {i} block {b} has shape {a.shape}")
            checked.append((mats, float(rhs)))
        self.constraints = checked
        for b, c in enumerate(self.objective):
            if c is not None and c.shape != (self.block_sizes[b],) * 2:
                raise ValueError(f"objective block {b} has shape {c.shape}")


@dataclass
class SdpSolution:
    primal_value: float
    dual_value: float
    primal_blocks: list
    dual_y: np.ndarray
    dual_blocks: list
    status: str  # optimal | max-iterations | infeasible
    gap: float
    iterations: int
    mu: float
    primal_residual: float
    dual_residual: float


def _ip(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.vdot(a, b).real)


def solve_sdp(
    problem: SdpProblem,
    gap_tol: float = 1e-7,
    max_iter: int = 500,
    callback=None,
) -> SdpSolution:
    """Solve a block SDP to relative duality gap ``gap_tol``.

    Returns status ``"optimal"`` when both feasibility residuals are below
    ``10 * gap_tol`` (relative) and ``|primal - dual| <= gap_tol * (1 + |primal|)``;
    ``"infeasible"`` on a diverging dual; ``"max-iterations"`` otherwise.
    ``callback(it, X, Z, primal, dual)`` is invoked once per iterate.
    """
    sizes = problem.block_sizes
    nb = len(sizes)
    sign = 1.0 if problem.sense == "min" else -1.0
    C = [
        sign * problem.objective[b] if problem.objective[b] is not None
        else np.zeros((sizes[b], sizes[b]), dtype=np.complex128)
        for b in range(nb)
    ]
    cons = problem.constraints
    p = len(cons)
    bvec = np.array([rhs for _, rhs in cons], dtype=np.float64)
    A = [[m for m in mats] for mats, _ in cons]

    n_tot = sum(sizes)
    norms = [float(np.max(np.abs(c))) for c in C if c.size] + ([float(np.max(np.abs(bvec)))] if p else [])
    scale = 1.0 + max(norms, default=0.0)

    X = [np.eye(s, dtype=np.complex128) * scale for s in sizes]
    Zs = [np.eye(s, dtype=np.complex128) * scale for s in sizes]
    y = np.zeros(p)

    def apply_A(Xb):
        out = np.empty(p)
        for i in range(p):
            acc = 0.0
            for b in range(nb):
                a = A[i][b]
                if a is not None:
                    acc += _ip(a, Xb[b])
            out[i] = acc
        return out

    def apply_At(yv):
        out = [np.zeros((s, s), dtype=np.complex128) for s in sizes]
        for i in range(p):
            yi = yv[i]
            if yi == 0.0:
                continue
            for b in range(nb):
                a = A[i][b]
                if a is not None:
                    out[b] += yi * a
        return out

    def factor_psd(M):
        # Hermitian factor G with M = G G^dag; eigh-based for robustness.
        w, v = np.linalg.eigh((M + M.conj().T) / 2)
        w = np.clip(w, 1e-300, None)
        return v * np.sqrt(w)

    def max_step(lam_half_inv, d_hat):
        # largest alpha with I + alpha * Lam^(-1/2) d_hat Lam^(-1/2) >= 0
        mviol = 0.0
        g = lam_half_inv[:, None] * d_hat * lam_half_inv[None, :]
        w = np.linalg.eigvalsh((g + g.conj().T) / 2)
        if w[0] < 0:
            mviol = -w[0]
        return 1.0 if mviol <= 1e-16 else min(1.0, 1.0 / mviol)

    status = "max-iterations"
    it = 0
    prev_pres = np.inf
    stall = 0
    for it in range(1, max_iter + 1):
        pobj = sum(_ip(C[b], X[b]) for b in range(nb))
        dobj = float(bvec @ y)
        rp = bvec - apply_A(X)
        Aty = apply_At(y)
        Rd = [C[b] - Aty[b] - Zs[b] for b in range(nb)]
        mu = sum(_ip(X[b], Zs[b]) for b in range(nb)) / n_tot
        pres = np.linalg.norm(rp) / (1.0 + np.linalg.norm(bvec))
        dres = max(np.max(np.abs(Rd[b])) for b in range(nb)) / scale
        gap = abs(pobj - dobj)
        if callback is not None:
            callback(it, X, Zs, sign * pobj, sign * dobj)
        if (
            gap <= gap_tol * (1.0 + abs(pobj))
            and pres <= 10 * gap_tol
            and dres <= 10 * gap_tol
        ):
            status = "optimal"
            break
        if np.linalg.norm(y) > 1e12 * scale and pres > 1e-8:
            status = "infeasible"
            break
        if pres > 0.99 * prev_pres:
            stall += 1
        else:
            stall = 0
        prev_pres = pres

        # NT scaling per block
        R, Rinv, lam = [], [], []
        for b in range(nb):
            gx = factor_psd(X[b])
            gz = factor_psd(Zs[b])
            u, s, vh = np.linalg.svd(gz.conj().T @ gx)
            s = np.clip(s, 1e-300, None)
            rb = gx @ vh.conj().T * (s ** -0.5)
            rbi = (s ** -0.5)[:, None] * (u.conj().T @ gz.conj().T)
            R.append(rb)
            Rinv.append(rbi)
            lam.append(s)
        W = [R[b] @ R[b].conj().T for b in range(nb)]

        # Schur complement S_ij = sum_b <A_i, W A_j W>
        WAW = []
        for i in range(p):
            row = []
            for b in range(nb):
                a = A[i][b]
                row.append(None if a is None else W[b] @ a @ W[b])
            WAW.append(row)
        S = np.zeros((p, p))
        for i in range(p):
            for j in range(i, p):
                acc = 0.0
                for b in range(nb):
                    if A[i][b] is not None and WAW[j][b] is not None:
                        acc += _ip(A[i][b], WAW[j][b])
                S[i, j] = S[j, i] = acc
        # regularize mildly; problems here are small and well scaled
        S[np.diag_indices_from(S)] += 1e-13 * (1.0 + np.trace(S) / max(p, 1))
        try:
            S_fact = cho_factor(S, lower=True)

            def solve_S(rhs):
                return cho_solve(S_fact, rhs)
        except np.linalg.LinAlgError:
            S_pinv = np.linalg.pinv(S)

            def solve_S(rhs):
                return S_pinv @ rhs

        AWRdW = np.empty(p)
        WRdW = [W[b] @ Rd[b] @ W[b] for b in range(nb)]
        for i in range(p):
            acc = 0.0
            for b in range(nb):
                if A[i][b] is not None:
                    acc += _ip(A[i][b], WRdW[b])
            AWRdW[i] = acc

        # predictor (affine)
        rhs_aff = bvec + AWRdW  # = rp + A(X) + A(W Rd W)
        dy = solve_S(rhs_aff)
        dZ = [Rd[b] - sum_aty(A, dy, b, sizes) for b in range(nb)]
        dX = [-X[b] - W[b] @ dZ[b] @ W[b] for b in range(nb)]

        lam_hinv = [lam[b] ** -0.5 for b in range(nb)]
        dX_hat = [Rinv[b] @ dX[b] @ Rinv[b].conj().T for b in range(nb)]
        dZ_hat = [R[b].conj().T @ dZ[b] @ R[b] for b in range(nb)]
        ap = min(max_step(lam_hinv[b], dX_hat[b]) for b in range(nb))
        ad = min(max_step(lam_hinv[b], dZ_hat[b]) for b in range(nb))
        mu_aff = sum(
            _ip(X[b] + ap * dX[b], Zs[b] + ad * dZ[b]) for b in range(nb)
        ) / n_tot
        sigma = min(1.0, max(0.0, mu_aff / mu) ** 3)

        # corrector
        K = []
        for b in range(nb):
            lb = lam[b]
            cross = dX_hat[b] @ dZ_hat[b]
            cross = cross + cross.conj().T
            num = -cross
            num[np.diag_indices_from(num)] += 2.0 * (sigma * mu - lb * lb)
            K.append(num / (lb[:, None] + lb[None, :]))
        RKR = [R[b] @ K[b] @ R[b].conj().T for b in range(nb)]
        ARKR = np.empty(p)
        for i in range(p):
            acc = 0.0
            for b in range(nb):
                if A[i][b] is not None:
                    acc += _ip(A[i][b], RKR[b])
            ARKR[i] = acc
        rhs_cor = rp - ARKR + AWRdW
        dy = solve_S(rhs_cor)
        dZ = [Rd[b] - sum_aty(A, dy, b, sizes) for b in range(nb)]
        dX = [RKR[b] - W[b] @ dZ[b] @ W[b] for b in range(nb)]

        dX_hat = [Rinv[b] @ dX[b] @ Rinv[b].conj().T for b in range(nb)]
        dZ_hat = [R[b].conj().T @ dZ[b] @ R[b] for b in range(nb)]
        ap = 0.98 * min(max_step(lam_hinv[b], dX_hat[b]) for b in range(nb))
        ad = 0.98 * min(max_step(lam_hinv[b], dZ_hat[b]) for b in range(nb))
        for b in range(nb):
            X[b] = (X[b] + ap * dX[b])
            X[b] = (X[b] + X[b].conj().T) / 2
            Zs[b] = (Zs[b] + ad * dZ[b])
            Zs[b] = (Zs[b] + Zs[b].conj().T) / 2
        y = y + ad * dy
        if stall > 60:
            break

    pobj = sum(_ip(C[b], X[b]) for b in range(nb))
    dobj = float(bvec @ y)
    rp = bvec - apply_A(X)
    Aty = apply_At(y)
    Rd = [C[b] - Aty[b] - Zs[b] for b in range(nb)]
    mu = sum(_ip(X[b], Zs[b]) for b in range(nb)) / n_tot
    return SdpSolution(
        primal_value=sign * pobj,
        dual_value=sign * dobj,
        primal_blocks=X,
        dual_y=y,
        dual_blocks=Zs,
        status=status,
        gap=abs(pobj - dobj),
        iterations=it,
        mu=mu,
        primal_residual=float(np.linalg.norm(rp)),
        dual_residual=float(max(np.max(np.abs(Rd[b])) for b in range(nb))),
    )


def sum_aty(A, yv, b, sizes):
    out = np.zeros((sizes[b], sizes[b]), dtype=np.complex128)
    for i, yi in enumerate(yv):
        a = A[i][b]
        if a is not None and yi != 0.0:
            out += yi * a
    return out
