"""Dense complex linear algebra for operators on tensor-product Hilbert spaces.

Everything is a plain ``numpy.ndarray`` with dtype complex128, stored row-major.
Quantum objects (states, channels) live in :mod:`decolab.channels`; this module
holds the operator-level primitives: tensor products, partial traces, the
checked Hermitian eigendecomposition that backs every spectral computation,
standard operators (swap, Hadamard layers, maximally entangled state) and a
17-significant-digit text format for matrix import/export.

Conventions used throughout the package:

* vectorization is column-stacking, ``vec(X) = X.flatten(order="F")``, so that
  ``vec(A X B) = (B^T kron A) vec(X)``;
* subsystem dimensions are powers of two and the Pauli-X basis is the Hadamard
  transform of the computational (Pauli-Z) basis.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

# Absolute tolerance for Hermiticity / positivity checks on constructed
# objects.  Inputs violating by at most CLAMP_ATOL are repaired (symmetrized,
# eigenvalues clipped); anything worse is rejected.  Double-precision
# eigensolvers drift at ~1e-13*d, so 1e-10 leaves margin for composed
# pipelines while still catching real bugs.
HERM_ATOL = 1e-10
CLAMP_ATOL = 1e-8


def as_complex(m) -> np.ndarray:
    """Return ``m`` as a C-contiguous complex128 array."""
    a = np.ascontiguousarray(m, dtype=np.complex128)
    if not np.all(np.isfinite(a.view(np.float64))):
        raise ValueError("matrix has non-finite entries")
    return a


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Tensor product of two operators."""
    return np.kron(a, b)


def kron_all(ops: Iterable[np.ndarray]) -> np.ndarray:
    out = np.array([[1.0]], dtype=np.complex128)
    for op in ops:
        out = np.kron(out, op)
    return out


def _check_dims(m: np.ndarray, dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise ValueError(f"invalid subsystem dimensions {dims}")
    total = int(np.prod(dims))
    if m.shape != (total, total):
        raise ValueError(f"matrix shape {m.shape} does not match dims {dims}")
    return dims


def partial_trace(m: np.ndarray, dims: Sequence[int], traced: Sequence[int]) -> np.ndarray:
    """Trace out the subsystems listed in ``traced`` (0-based positions).

    ``dims`` are the tensor factors of the square matrix ``m``; the result
    acts on the remaining factors in their original order.
    """
    m = as_complex(m)
    dims = _check_dims(m, dims)
    k = len(dims)
    traced = sorted(set(int(t) for t in traced))
    if traced and (traced[0] < 0 or traced[-1] >= k):
        raise ValueError(f"traced positions {traced} out of range for {k} factors")
    keep = [i for i in range(k) if i not in traced]
    t = m.reshape(dims + dims)
    for pos in reversed(traced):
        t = np.trace(t, axis1=pos, axis2=pos + (t.ndim // 2))
    d_keep = int(np.prod([dims[i] for i in keep])) if keep else 1
    return t.reshape(d_keep, d_keep)


def permute_systems(m: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder the tensor factors of an operator.

    ``perm[i]`` is the old position of the factor that ends up at position
    ``i``; the result acts on ``H_{dims[perm[0]]} x H_{dims[perm[1]]} x ...``.
    """
    m = as_complex(m)
    dims = _check_dims(m, dims)
    k = len(dims)
    perm = list(int(p) for p in perm)
    if sorted(perm) != list(range(k)):
        raise ValueError(f"{perm} is not a permutation of range({k})")
    t = m.reshape(dims + dims)
    t = t.transpose(perm + [k + p for p in perm])
    d = int(np.prod(dims))
    return np.ascontiguousarray(t.reshape(d, d))


def eigh(h: np.ndarray, atol: float = CLAMP_ATOL) -> tuple[np.ndarray, np.ndarray]:
    """Checked Hermitian eigendecomposition, ascending eigenvalues.

    The input must be Hermitian within ``atol`` (max-entry deviation); it is
    symmetrized before the LAPACK call.  This is the single spectral
    primitive of the package: singular values of a general matrix go through
    :func:`singular_values` which embeds into a doubled Hermitian problem.
    """
    h = as_complex(h)
    if h.shape[0] != h.shape[1]:
        raise ValueError("eigh requires a square matrix")
    dev = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
    if dev > atol:
        raise ValueError(f"matrix is not Hermitian: max |H - H^dag| = {dev:.3e} > {atol:.1e}")
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    return w, v


def singular_values(m: np.ndarray) -> np.ndarray:
    """Singular values via the doubled Hermitian embedding [[0, M], [M^dag, 0]].

    The embedding's spectrum is {+s_i} u {-s_i}; we return the nonnegative
    half in descending order.
    """
    m = as_complex(m)
    r, c = m.shape
    emb = np.zeros((r + c, r + c), dtype=np.complex128)
    emb[:r, r:] = m
    emb[r:, :r] = m.conj().T
    w = np.linalg.eigvalsh(emb)
    return np.sort(w[w >= 0])[::-1][: min(r, c)]


def trace_norm(m: np.ndarray) -> float:
    """Schatten 1-norm.  Hermitian input: sum |eigenvalue|; general input:
    sum of singular values from the doubled embedding."""
    m = as_complex(m)
    if m.shape[0] != m.shape[1]:
        raise ValueError("trace_norm requires a square matrix")
    if np.max(np.abs(m - m.conj().T)) <= CLAMP_ATOL:
        w, _ = eigh(m)
        return float(np.sum(np.abs(w)))
    emb_sv = singular_values(m)
    return float(np.sum(emb_sv))


def frobenius_norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m))


def operator_norm(m: np.ndarray) -> float:
    m = as_complex(m)
    if m.shape[0] == m.shape[1] and np.max(np.abs(m - m.conj().T)) <= CLAMP_ATOL:
        w, _ = eigh(m)
        return float(np.max(np.abs(w))) if w.size else 0.0
    sv = singular_values(m)
    return float(sv[0]) if sv.size else 0.0


def psd_project(h: np.ndarray, atol: float = CLAMP_ATOL) -> np.ndarray:
    """Clip eigenvalues of a nearly-PSD Hermitian matrix to [0, inf).

    Eigenvalues below ``-atol`` are an error; in (-atol, 0) they are clamped.
    """
    w, v = eigh(h, atol=atol)
    if w.size and w[0] < -atol:
        raise ValueError(f"matrix is not PSD: min eigenvalue {w[0]:.3e} < -{atol:.1e}")
    w = np.clip(w, 0.0, None)
    return (v * w) @ v.conj().T


def matrix_function(h: np.ndarray, f) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix through its spectrum."""
    w, v = eigh(h)
    return (v * f(w)) @ v.conj().T


def pinv_quarter_root(p: np.ndarray, atol: float = CLAMP_ATOL) -> np.ndarray:
    """Moore-Penrose inverse fourth root of a PSD matrix.

    On the support, eigenvalues map lambda -> lambda^(-1/4); the kernel
    (eigenvalues below a d-scaled threshold) maps to 0.  Eigenvalues below
    ``-atol`` raise.
    """
    w, v = eigh(p, atol=atol)
    if w.size and w[0] < -atol:
        raise ValueError(f"matrix is not PSD: min eigenvalue {w[0]:.3e}")
    d = p.shape[0]
    cutoff = max(HERM_ATOL * d, HERM_ATOL * (w[-1] if w.size else 0.0))
    out = np.zeros_like(w)
    on_support = w > cutoff
    out[on_support] = w[on_support] ** (-0.25)
    return (v * out) @ v.conj().T


def max_entangled(d: int) -> np.ndarray:
    """Density matrix of (1/sqrt(d)) sum_i |ii>, acting on H_d x H_d."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    vec = np.zeros(d * d, dtype=np.complex128)
    vec[:: d + 1] = 1.0 / np.sqrt(d)
    return np.outer(vec, vec.conj())


def max_entangled_vec(d: int) -> np.ndarray:
    vec = np.zeros(d * d, dtype=np.complex128)
    vec[:: d + 1] = 1.0 / np.sqrt(d)
    return vec


def swap_operator(d: int) -> np.ndarray:
    """F = sum_{ij} |ij><ji| on H_d x H_d; satisfies F^2 = I and
    tr[(X kron Y) F] = tr[X Y]."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    F = np.zeros((d * d, d * d), dtype=np.complex128)
    idx = np.arange(d)
    F[(idx[:, None] * d + idx[None, :]).ravel(), (idx[None, :] * d + idx[:, None]).ravel()] = 1.0
    return F


@lru_cache(maxsize=16)
def _hadamard_cached(n_qubits: int) -> np.ndarray:
    h1 = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=np.complex128) / np.sqrt(2)
    h = kron_all([h1] * n_qubits)
    h.setflags(write=False)
    return h


def hadamard_all(n_qubits: int) -> np.ndarray:
    """H^(x n): real symmetric, involutory, maps the Z basis to the X basis."""
    if n_qubits < 1:
        raise ValueError("need at least one qubit")
    return _hadamard_cached(n_qubits)


def n_qubits_of(d: int) -> int:
    """Number of qubits for a power-of-two dimension; raises otherwise."""
    n = int(d).bit_length() - 1
    if d < 2 or (1 << n) != d:
        raise ValueError(f"dimension {d} is not a power of two >= 2")
    return n


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (g + g.conj().T) / 2


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    r = rank or d
    g = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_pure(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


# ---------------------------------------------------------------------------
# Text format: first line "rows cols", then row-major "re,im" pairs separated
# by whitespace, 17 significant digits.  Used by the CLI for state/channel
# files.
# ---------------------------------------------------------------------------

def format_matrix(m: np.ndarray) -> str:
    m = as_complex(np.atleast_2d(m))
    rows, cols = m.shape
    lines = [f"{rows} {cols}"]
    for r in range(rows):
        lines.append(" ".join(f"{z.real:.17g},{z.imag:.17g}" for z in m[r]))
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> np.ndarray:
    tokens = text.split()
    if len(tokens) < 2:
        raise ValueError("matrix text must start with 'rows cols'")
    try:
        rows, cols = int(tokens[0]), int(tokens[1])
    except ValueError as exc:
        raise ValueError(f"bad matrix header {tokens[:2]!r}") from exc
    body = tokens[2:]
    if len(body) != rows * cols:
        raise ValueError(f"expected {rows * cols} entries, found {len(body)}")
    out = np.empty(rows * cols, dtype=np.complex128)
    for k, tok in enumerate(body):
        try:
            re_s, im_s = tok.split(",")
            out[k] = complex(float(re_s), float(im_s))
        except ValueError as exc:
            raise ValueError(f"bad entry {tok!r} at position {k}") from exc
    return out.reshape(rows, cols)


def save_matrix(path, m: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_matrix(m))


def load_matrix(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_matrix(fh.read())
