"""Quantum states and channels with the Choi representation as the canonical form.

A channel ``T: B(H_in) -> B(H_out)`` is stored through its *normalized* Choi
matrix ``J(T) = (id (x) T)(Phi)`` with ``Phi`` the maximally entangled *state*
on two copies of the input, so ``tr J = 1`` whenever ``T`` is trace
preserving.  The inverse direction carries the matching dimension factor:
``T(Y) = d_in * tr_in[(Y^T (x) I) J]``.

Ordering convention: the Choi matrix acts on ``H_in (x) H_out`` (input copy
first).  Superoperator matrices use column-stacking vectorization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import (
    CLAMP_ATOL,
    HERM_ATOL,
    as_complex,
    eigh,
    kron,
    max_entangled,
    partial_trace,
)


def _clamped_hermitian(m: np.ndarray, what: str) -> np.ndarray:
    dev = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if dev > CLAMP_ATOL:
        raise ValueError(f"{what} not Hermitian: deviation {dev:.3e}")
    return (m + m.conj().T) / 2


@dataclass(frozen=True)
class QuantumState:
    """Density operator with a subsystem signature.

    ``dims`` lists the tensor factors (product equals the matrix size) and
    ``norm_class`` is ``"normalized"`` (trace 1) or ``"subnormalized"``
    (trace <= 1).  Construction validates Hermiticity, positivity and the
    trace within 1e-10, repairing violations up to 1e-8.
    """

    matrix: np.ndarray
    dims: tuple[int, ...]
    norm_class: str = "normalized"

    def __post_init__(self):
        m = as_complex(self.matrix)
        dims = tuple(int(d) for d in self.dims)
        d = int(np.prod(dims))
        if m.shape != (d, d):
            raise ValueError(f"state shape {m.shape} does not match dims {dims}")
        if self.norm_class not in ("normalized", "subnormalized"):
            raise ValueError(f"unknown norm_class {self.norm_class!r}")
        m = _clamped_hermitian(m, "state")
        w, v = eigh(m)
        if w.size and w[0] < -CLAMP_ATOL:
            raise ValueError(f"state not PSD: min eigenvalue {w[0]:.3e}")
        if w.size and w[0] < 0:
            m = (v * np.clip(w, 0.0, None)) @ v.conj().T
        tr = np.trace(m).real
        if self.norm_class == "normalized":
            if abs(tr - 1.0) > CLAMP_ATOL:
                raise ValueError(f"normalized state has trace {tr!r}")
            if abs(tr - 1.0) > HERM_ATOL:
                m = m / tr
        else:
            if tr > 1.0 + CLAMP_ATOL:
                raise ValueError(f"subnormalized state has trace {tr!r} > 1")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def marginal(self, keep: Sequence[int]) -> "QuantumState":
        traced = [i for i in range(len(self.dims)) if i not in set(keep)]
        sub = partial_trace(self.matrix, self.dims, traced)
        return QuantumState(sub, tuple(self.dims[i] for i in keep), self.norm_class)


@dataclass(frozen=True)
class Channel:
    """CP map stored as a normalized Choi matrix on ``H_in (x) H_out``.

    ``tp_flag`` asserts trace preservation, checked as
    ``tr_out J = I/d_in`` within 1e-10.
    """

    choi: np.ndarray
    d_in: int
    d_out: int
    tp_flag: bool = True

    def __post_init__(self):
        j = as_complex(self.choi)
        n = self.d_in * self.d_out
        if j.shape != (n, n):
            raise ValueError(f"choi shape {j.shape}, expected {(n, n)}")
        j = _clamped_hermitian(j, "Choi matrix")
        w, v = eigh(j)
        if w.size and w[0] < -CLAMP_ATOL:
            raise ValueError(f"map is not CP: min Choi eigenvalue {w[0]:.3e}")
        if w.size and w[0] < 0:
            j = (v * np.clip(w, 0.0, None)) @ v.conj().T
        if self.tp_flag:
            marg = partial_trace(j, (self.d_in, self.d_out), [1])
            dev = np.max(np.abs(marg - np.eye(self.d_in) / self.d_in))
            if dev > CLAMP_ATOL:
                raise ValueError(f"tp_flag set but tr_out J deviates from I/d_in by {dev:.3e}")
        object.__setattr__(self, "choi", j)

    @property
    def tau_out(self) -> np.ndarray:
        """Output state of the maximally mixed input, tr_in J = T(I/d_in)."""
        return partial_trace(self.choi, (self.d_in, self.d_out), [0])

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return j_inv_apply(self, y)

    def kraus(self, atol: float = 1e-10) -> list[np.ndarray]:
        return choi_to_kraus(self.choi, self.d_in, self.d_out, atol=atol)


# ---------------------------------------------------------------------------
# Representation conversions.
# ---------------------------------------------------------------------------

def kraus_to_choi(kraus: Sequence[np.ndarray]) -> np.ndarray:
    """Normalized Choi matrix of ``X -> sum_k K X K^dag``."""
    ks = [as_complex(k) for k in kraus]
    d_out, d_in = ks[0].shape
    if any(k.shape != (d_out, d_in) for k in ks):
        raise ValueError("Kraus operators must share one shape")
    # (id (x) T)(Phi) = (1/d_in) sum_k vec'(K)vec'(K)^dag with
    # vec'(K)[(i,a)] = K[a,i] laid out on H_in (x) H_out.
    j = np.zeros((d_in * d_out, d_in * d_out), dtype=np.complex128)
    for k in ks:
        v = k.T.reshape(-1)
        j += np.outer(v, v.conj())
    return j / d_in


def choi_to_kraus(choi: np.ndarray, d_in: int, d_out: int, atol: float = 1e-10) -> list[np.ndarray]:
    """Eigendecompose a (normalized) Choi matrix into Kraus operators."""
    j = _clamped_hermitian(as_complex(choi), "Choi matrix")
    w, v = eigh(j)
    if w.size and w[0] < -max(atol, CLAMP_ATOL):
        raise ValueError(f"not CP: min Choi eigenvalue {w[0]:.3e}")
    out = []
    cut = max(atol, 0.0)
    for lam, vec in zip(w, v.T):
        if lam > cut:
            out.append(np.sqrt(lam * d_in) * vec.reshape(d_in, d_out).T)
    return out


def superop_to_choi(superop: np.ndarray, d_in: int, d_out: int) -> np.ndarray:
    """Reshuffle a column-stacking superoperator into a normalized Choi matrix."""
    m = as_complex(superop)
    if m.shape != (d_out * d_out, d_in * d_in):
        raise ValueError(f"superop shape {m.shape}, expected {(d_out**2, d_in**2)}")
    m4 = m.reshape(d_out, d_out, d_in, d_in)  # [row_out, col_out->? ] see below
    # m[b*d_out + a, j*d_in + i] = T(E_ij)[a, b] with column-stacked indices,
    # so axes are [b, a, j, i]; the unnormalized Choi is J[(i,a),(j,b)].
    j = m4.transpose(3, 1, 2, 0).reshape(d_in * d_out, d_in * d_out)
    return np.ascontiguousarray(j) / d_in


def choi_to_superop(choi: np.ndarray, d_in: int, d_out: int) -> np.ndarray:
    """Inverse reshuffle: normalized Choi -> column-stacking superoperator."""
    j = as_complex(choi) * d_in
    j4 = j.reshape(d_in, d_out, d_in, d_out)  # [i, a, j, b]
    m = j4.transpose(3, 1, 2, 0).reshape(d_out * d_out, d_in * d_in)
    return np.ascontiguousarray(m)


def kraus_to_superop(kraus: Sequence[np.ndarray]) -> np.ndarray:
    ks = [as_complex(k) for k in kraus]
    return sum(np.kron(k.conj(), k) for k in ks)


def superop_apply(superop: np.ndarray, x: np.ndarray) -> np.ndarray:
    d_out2, d_in2 = superop.shape
    d_out = int(np.sqrt(d_out2))
    vec = as_complex(x).flatten(order="F")
    return (superop @ vec).reshape(d_out, d_out, order="F")


# ---------------------------------------------------------------------------
# The isomorphism between maps and bipartite operators.
# ---------------------------------------------------------------------------

def j_map(op, d_in: int | None = None, d_out: int | None = None, tp: bool | None = None) -> Channel:
    """Build a :class:`Channel` from a CP-map description.

    ``op`` may be a list/tuple of Kraus operators or a superoperator matrix
    of shape ``(d_out^2, d_in^2)`` in column-stacking convention (pass
    ``d_in``/``d_out`` to disambiguate non-square superoperators).  Non-CP
    input is detected through a negative Choi eigenvalue.
    """
    if isinstance(op, (list, tuple)):
        ks = [as_complex(k) for k in op]
        d_out_, d_in_ = ks[0].shape
        choi = kraus_to_choi(ks)
        d_in, d_out = d_in_, d_out_
    else:
        m = as_complex(op)
        if d_in is None or d_out is None:
            d_out = int(round(np.sqrt(m.shape[0])))
            d_in = int(round(np.sqrt(m.shape[1])))
        choi = superop_to_choi(m, d_in, d_out)
    if tp is None:
        marg = partial_trace(choi, (d_in, d_out), [1])
        tp = bool(np.max(np.abs(marg - np.eye(d_in) / d_in)) <= CLAMP_ATOL)
    return Channel(choi=choi, d_in=d_in, d_out=d_out, tp_flag=tp)


def j_inv_apply(channel: Channel, y: np.ndarray) -> np.ndarray:
    """Apply the channel to ``y`` through its Choi matrix:
    ``T(Y) = d_in tr_in[(Y^T (x) I_out) J]``."""
    y = as_complex(y)
    d_in, d_out = channel.d_in, channel.d_out
    if y.shape != (d_in, d_in):
        raise ValueError(f"input shape {y.shape}, expected {(d_in, d_in)}")
    big = kron(y.T, np.eye(d_out)) @ channel.choi
    return d_in * partial_trace(big, (d_in, d_out), [0])


def adjoint_apply(channel: Channel, y: np.ndarray) -> np.ndarray:
    """Adjoint map for the bilinear pairing tr[T(X) Y] = tr[X T*(Y)]:
    ``T*(Y) = d_in (tr_out[J (I (x) Y)])^T``."""
    y = as_complex(y)
    d_in, d_out = channel.d_in, channel.d_out
    if y.shape != (d_out, d_out):
        raise ValueError(f"adjoint input shape {y.shape}, expected {(d_out, d_out)}")
    big = channel.choi @ kron(np.eye(d_in), y)
    return d_in * partial_trace(big, (d_in, d_out), [1]).T


def identity_channel(d: int) -> Channel:
    return Channel(choi=max_entangled(d), d_in=d, d_out=d, tp_flag=True)


def depolarizing_channel(d: int, p: float = 1.0) -> Channel:
    """Mix the identity with the completely depolarizing map:
    ``X -> (1-p) X + p tr[X] I/d``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("mixing probability must lie in [0, 1]")
    j = (1 - p) * max_entangled(d) + p * np.eye(d * d, dtype=np.complex128) / (d * d)
    return Channel(choi=j, d_in=d, d_out=d, tp_flag=True)


def partial_trace_channel(d_keep: int, d_drop: int) -> Channel:
    """The channel tr_2 on H_keep (x) H_drop."""
    ks = []
    for a in range(d_drop):
        k = np.zeros((d_keep, d_keep * d_drop), dtype=np.complex128)
        for i in range(d_keep):
            k[i, i * d_drop + a] = 1.0
        ks.append(k)
    return j_map(ks)


def full_trace_channel(d: int) -> Channel:
    """The trace functional as a channel into a one-dimensional output."""
    ks = [np.zeros((1, d), dtype=np.complex128) for _ in range(d)]
    for a in range(d):
        ks[a][0, a] = 1.0
    return j_map(ks)


def unitary_channel(u: np.ndarray) -> Channel:
    return j_map([as_complex(u)])


def apply_to_first_factor(channel: Channel, x: np.ndarray, d_rest: int) -> np.ndarray:
    """Apply ``T (x) id`` to an operator on ``H_in (x) H_rest``.

    Works through the Kraus form; the Kraus list is cached on the channel
    object by the caller if reuse matters.
    """
    return apply_kraus_to_first_factor(channel.kraus(), x, d_rest)


def apply_kraus_to_first_factor(kraus: Sequence[np.ndarray], x: np.ndarray, d_rest: int) -> np.ndarray:
    x = as_complex(x)
    d_out, d_in = kraus[0].shape
    if x.shape != (d_in * d_rest, d_in * d_rest):
        raise ValueError(f"operand shape {x.shape}, expected {(d_in * d_rest,) * 2}")
    out = np.zeros((d_out * d_rest, d_out * d_rest), dtype=np.complex128)
    for k in kraus:
        ke = kron(k, np.eye(d_rest))
        out += ke @ x @ ke.conj().T
    return out
