"""Random-unitary ensembles and their exact two-fold moment operators.

Ensembles: phase-uniform unitaries diagonal in the Z or X basis, the
alternating circuit ``D[ell]`` built from 2*ell+1 independent diagonal layers
(pattern Z, X, ..., Z), Haar unitaries via phase-corrected QR of a Ginibre
matrix, and random circuits of Haar two-qubit gates on random qubit pairs.

The two-fold twirl of a phase-uniform Z-diagonal unitary has the exact closed
form ``E[(D (x) D) O (D (x) D)^dag] = mask . O`` where the 0/1 mask keeps an
entry ``O[(i,j),(k,l)]`` iff the index multisets {i,j} and {k,l} coincide.
The X version is the same twirl conjugated by Hadamard layers, and the Haar
twirl is the orthogonal projection onto span{I, F}.  The repeated map
``R = G_Z o G_X o G_Z`` obeys ``R^ell = (1-p_ell) G_Haar + p_ell C`` with
``p_ell = (d^(ell+1) + d^ell - 2) / (d^(2 ell) (d - 1))`` and ``C`` a unital
CPTP residual; :func:`split_r_power` extracts ``C`` numerically and reports
its validity certificates.

Reproducibility: every sampler draws from a counter-based Philox generator
keyed by ``(master_seed, stream_index)``, so sample ``i`` of a Monte-Carlo
run can use stream ``i`` and results never depend on thread placement.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .channels import superop_to_choi
from .linalg import as_complex, hadamard_all, n_qubits_of, swap_operator

Z = "Z"
X = "X"


@dataclass(frozen=True)
class RngSpec:
    """Deterministic stream address: identical (master_seed, stream_index)
    gives bit-identical draws regardless of thread placement."""

    master_seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        key = [self.master_seed & 0xFFFFFFFFFFFFFFFF, self.stream_index & 0xFFFFFFFFFFFFFFFF]
        return np.random.Generator(np.random.Philox(key=key))

    def stream(self, index: int) -> "RngSpec":
        return RngSpec(self.master_seed, index)


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngSpec):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngSpec or numpy Generator, got {type(rng)!r}")


@dataclass(frozen=True)
class DiagUnitary:
    """One diagonal layer: ``basis`` in {Z, X} and d phases in [0, 2pi)."""

    basis: str
    phases: np.ndarray

    def __post_init__(self):
        if self.basis not in (Z, X):
            raise ValueError(f"basis must be 'Z' or 'X', got {self.basis!r}")
        ph = np.asarray(self.phases, dtype=np.float64)
        object.__setattr__(self, "phases", ph)

    @property
    def dim(self) -> int:
        return self.phases.size

    def matrix(self) -> np.ndarray:
        diag = np.exp(1j * self.phases)
        if self.basis == Z:
            return np.diag(diag)
        w = hadamard_all(n_qubits_of(self.dim))
        return w @ np.diag(diag) @ w

    def apply_left(self, u: np.ndarray) -> np.ndarray:
        """Return matrix() @ u without materializing the dense layer."""
        diag = np.exp(1j * self.phases)
        if self.basis == Z:
            return diag[:, None] * u
        w = hadamard_all(n_qubits_of(self.dim))
        return w @ (diag[:, None] * (w @ u))


@dataclass(frozen=True)
class DiagCircuit:
    """Alternating diagonal circuit with 2*ell+1 layers, pattern Z, X, ..., Z.

    ``layers[0]`` acts first; the realization is the right-to-left product
    ``layers[-1] @ ... @ layers[0]``.
    """

    ell: int
    layers: tuple[DiagUnitary, ...]

    def __post_init__(self):
        if self.ell < 1:
            raise ValueError("ell must be >= 1")
        layers = tuple(self.layers)
        if len(layers) != 2 * self.ell + 1:
            raise ValueError(f"expected {2 * self.ell + 1} layers, got {len(layers)}")
        for k, layer in enumerate(layers):
            want = Z if k % 2 == 0 else X
            if layer.basis != want:
                raise ValueError(f"layer {k} has basis {layer.basis}, expected {want}")
        object.__setattr__(self, "layers", layers)

    @property
    def dim(self) -> int:
        return self.layers[0].dim

    def matrix(self) -> np.ndarray:
        u = np.eye(self.dim, dtype=np.complex128)
        for layer in self.layers:
            u = layer.apply_left(u)
        return u


def sample_diag(basis: str, d: int, rng) -> DiagUnitary:
    """Phase-uniform diagonal unitary in the given Pauli basis."""
    n_qubits_of(d)
    g = _as_generator(rng)
    return DiagUnitary(basis=basis, phases=g.uniform(0.0, 2.0 * np.pi, size=d))


def sample_haar(d: int, rng) -> np.ndarray:
    """Haar unitary: QR of a complex Ginibre matrix with the R-diagonal
    phases pushed into Q."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    g = _as_generator(rng)
    gin = g.standard_normal((d, d)) + 1j * g.standard_normal((d, d))
    q, r = np.linalg.qr(gin)
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))


def sample_d_ell(n_qubits: int, ell: int, rng) -> DiagCircuit:
    """Draw the 2*ell+1 independent layers of one D[ell] realization."""
    d = 2 ** n_qubits
    g = _as_generator(rng)
    layers = [sample_diag(Z if k % 2 == 0 else X, d, g) for k in range(2 * ell + 1)]
    return DiagCircuit(ell=ell, layers=tuple(layers))


def embed_two_qubit(gate: np.ndarray, n_qubits: int, q0: int, q1: int) -> np.ndarray:
    """Embed a two-qubit gate acting on qubit positions (q0, q1) of an
    n-qubit register (qubit 0 is the leftmost tensor factor)."""
    gate = as_complex(gate)
    if gate.shape != (4, 4):
        raise ValueError("expected a 4x4 two-qubit gate")
    if q0 == q1 or not (0 <= q0 < n_qubits and 0 <= q1 < n_qubits):
        raise ValueError(f"bad qubit pair ({q0}, {q1}) for n={n_qubits}")
    full = np.kron(gate, np.eye(2 ** (n_qubits - 2), dtype=np.complex128))
    order = [q0, q1] + [q for q in range(n_qubits) if q not in (q0, q1)]
    inv = np.argsort(order)
    t = full.reshape([2] * (2 * n_qubits))
    t = t.transpose(list(inv) + [n_qubits + p for p in inv])
    return np.ascontiguousarray(t.reshape(2 ** n_qubits, 2 ** n_qubits))


def sample_rqc(n_qubits: int, length: int, rng) -> np.ndarray:
    """Product of ``length`` Haar two-qubit gates, each on a uniformly random
    unordered qubit pair.  length = 0 gives the identity."""
    d = 2 ** n_qubits
    if length == 0:
        return np.eye(d, dtype=np.complex128)
    if n_qubits < 2:
        raise ValueError("random circuits need at least two qubits")
    g = _as_generator(rng)
    u = np.eye(d, dtype=np.complex128)
    for _ in range(length):
        q0, q1 = g.choice(n_qubits, size=2, replace=False)
        gate = sample_haar(4, g)
        u = embed_two_qubit(gate, n_qubits, int(q0), int(q1)) @ u
    return u


# ---------------------------------------------------------------------------
# Exact two-fold twirls.
# ---------------------------------------------------------------------------

@lru_cache(maxsize=16)
def _twirl_mask(d: int) -> np.ndarray:
    idx = np.arange(d * d)
    i, j = idx // d, idx % d
    same = (i[:, None] == i[None, :]) & (j[:, None] == j[None, :])
    swapped = (i[:, None] == j[None, :]) & (j[:, None] == i[None, :])
    return (same | swapped).astype(np.float64)


def _pair_dim(x: np.ndarray) -> int:
    n = x.shape[0]
    d = int(round(np.sqrt(n)))
    if x.shape != (n, n) or d * d != n:
        raise ValueError(f"operand of shape {x.shape} is not square on H_d (x) H_d")
    n_qubits_of(d)
    return d


def twirl2_diag(x: np.ndarray, basis: str = Z) -> np.ndarray:
    """Exact ensemble average E[(D (x) D) X (D (x) D)^dag] for a
    phase-uniform diagonal unitary in the given basis, X on H_d (x) H_d."""
    x = as_complex(x)
    d = _pair_dim(x)
    if basis == Z:
        return _twirl_mask(d) * x
    if basis == X:
        w2 = np.kron(hadamard_all(n_qubits_of(d)), hadamard_all(n_qubits_of(d)))
        return w2 @ (_twirl_mask(d) * (w2 @ x @ w2)) @ w2
    raise ValueError(f"basis must be 'Z' or 'X', got {basis!r}")


def twirl2_haar(x: np.ndarray) -> np.ndarray:
    """Orthogonal projection of X onto span{I, F}: the exact Haar average
    E[U^(x2) X U^dag(x2)], determined by tr X and tr(X F)."""
    x = as_complex(x)
    d = _pair_dim(x)
    f = swap_operator(d)
    tx = np.trace(x)
    tfx = np.trace(f @ x)
    det = d * d * (d * d - 1)
    a = (d * d * tx - d * tfx) / det
    b = (d * d * tfx - d * tx) / det
    return a * np.eye(d * d, dtype=np.complex128) + b * f


def r_apply(x: np.ndarray, ell: int) -> np.ndarray:
    """Apply R^ell = (G_Z o G_X o G_Z)^ell to an operator on H_d (x) H_d.

    Adjacent Z twirls merge (G_Z is idempotent), so this runs
    G_Z (G_X G_Z)^ell.
    """
    if ell < 0:
        raise ValueError("ell must be >= 0")
    out = twirl2_diag(x, Z)
    for _ in range(ell):
        out = twirl2_diag(twirl2_diag(out, X), Z)
    return out


# -- twirls acting on two designated tensor factors, bystanders untouched ----

def _to_pair_major(x: np.ndarray, dims: Sequence[int], sites: tuple[int, int]):
    from .linalg import permute_systems

    dims = tuple(int(v) for v in dims)
    p, q = sites
    if dims[p] != dims[q]:
        raise ValueError("twirled factors must have equal dimension")
    rest = [k for k in range(len(dims)) if k not in (p, q)]
    perm = [p, q] + rest
    d = dims[p]
    d_rest = int(np.prod([dims[k] for k in rest])) if rest else 1
    return permute_systems(x, dims, perm), d, d_rest, perm, dims


def _from_pair_major(y: np.ndarray, d: int, d_rest: int, perm, dims):
    from .linalg import permute_systems

    new_dims = [dims[k] for k in perm]
    inv = list(np.argsort(perm))
    return permute_systems(y, new_dims, inv)


def twirl2_diag_sites(x: np.ndarray, dims: Sequence[int], sites: tuple[int, int], basis: str = Z) -> np.ndarray:
    """Two-fold diagonal twirl on the factors at ``sites``; the remaining
    factors ride along."""
    y, d, d_rest, perm, dims0 = _to_pair_major(as_complex(x), dims, sites)
    t = y.reshape(d, d, d_rest, d, d, d_rest)
    if basis == X:
        w = hadamard_all(n_qubits_of(d))
        for ax in range(2):
            t = np.moveaxis(np.tensordot(w, t, axes=(1, ax)), 0, ax)
        for ax in (3, 4):
            t = np.moveaxis(np.tensordot(t, w, axes=(ax, 0)), -1, ax)
    elif basis != Z:
        raise ValueError(f"basis must be 'Z' or 'X', got {basis!r}")
    mask = _twirl_mask(d).reshape(d, d, 1, d, d, 1)
    t = t * mask
    if basis == X:
        w = hadamard_all(n_qubits_of(d))
        for ax in range(2):
            t = np.moveaxis(np.tensordot(w, t, axes=(1, ax)), 0, ax)
        for ax in (3, 4):
            t = np.moveaxis(np.tensordot(t, w, axes=(ax, 0)), -1, ax)
    y = t.reshape(d * d * d_rest, d * d * d_rest)
    return _from_pair_major(y, d, d_rest, perm, dims0)


def twirl2_haar_sites(x: np.ndarray, dims: Sequence[int], sites: tuple[int, int]) -> np.ndarray:
    """Haar two-fold twirl on the factors at ``sites``: the result is
    I (x) A + F (x) B with bystander operators A, B fixed by the partial
    traces of X and (F (x) I) X over the pair."""
    from .linalg import partial_trace

    y, d, d_rest, perm, dims0 = _to_pair_major(as_complex(x), dims, sites)
    f = swap_operator(d)
    pair_dims = (d * d, d_rest)
    p_i = partial_trace(y, pair_dims, [0])
    p_f = partial_trace(np.kron(f, np.eye(d_rest)) @ y, pair_dims, [0])
    det = d * d * (d * d - 1)
    a = (d * d * p_i - d * p_f) / det
    b = (d * d * p_f - d * p_i) / det
    out = np.kron(np.eye(d * d, dtype=np.complex128), a) + np.kron(f, b)
    return _from_pair_major(out, d, d_rest, perm, dims0)


def r_apply_sites(x: np.ndarray, dims: Sequence[int], sites: tuple[int, int], ell: int) -> np.ndarray:
    """R^ell on the designated pair of factors, bystanders untouched."""
    out = twirl2_diag_sites(x, dims, sites, Z)
    for _ in range(ell):
        out = twirl2_diag_sites(twirl2_diag_sites(out, dims, sites, X), dims, sites, Z)
    return out


# ---------------------------------------------------------------------------
# Moment superoperators (column-stacking matrices on B(H_d (x) H_d)).
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentSuperOp:
    """Matrix of a two-fold moment map on B(H_d (x) H_d), column-stacking."""

    matrix: np.ndarray
    d: int
    fold: int = 2


def _superop_guard(d: int) -> None:
    # Dense superoperator matrices have (d^4)^2 entries; keep them within
    # 2^24 entries (256 MiB complex), i.e. d <= 8.
    if (d ** 4) ** 2 > 2 ** 24:
        raise ValueError(f"dense moment superoperator for d={d} exceeds the memory guard")


def twirl_superop(d: int, basis: str) -> np.ndarray:
    _superop_guard(d)
    mask_vec = _twirl_mask(d).flatten(order="F")
    if basis == Z:
        return np.diag(mask_vec).astype(np.complex128)
    if basis == X:
        w2 = np.kron(hadamard_all(n_qubits_of(d)), hadamard_all(n_qubits_of(d)))
        conj = np.kron(w2, w2)  # real symmetric, so transpose-free
        return conj @ np.diag(mask_vec) @ conj
    raise ValueError(f"basis must be 'Z' or 'X', got {basis!r}")


def haar_twirl_superop(d: int) -> np.ndarray:
    _superop_guard(d)
    f = swap_operator(d)
    eye = np.eye(d * d, dtype=np.complex128)
    vi = eye.flatten(order="F")
    vf = f.flatten(order="F")
    basis = np.stack([vi, vf], axis=1)
    gram = np.array([[d * d, d], [d, d * d]], dtype=np.float64)
    return basis @ np.linalg.solve(gram, basis.conj().T)


def r_superop(d: int) -> np.ndarray:
    gz = twirl_superop(d, Z)
    gx = twirl_superop(d, X)
    return gz @ gx @ gz


def map_r_pow(n_qubits: int, ell: int) -> MomentSuperOp:
    """Matrix of R^ell on B(H_d (x) H_d); also the exact two-fold moment
    operator of D[ell] (the extra leading Z layer is absorbed by
    idempotence)."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    d = 2 ** n_qubits
    r = r_superop(d)
    return MomentSuperOp(matrix=np.linalg.matrix_power(r, ell), d=d, fold=2)


def p_ell_exact(d: int, ell: int) -> Fraction:
    """Mixing weight of the residual map in R^ell = (1-p) G_Haar + p C."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    return Fraction(d ** (ell + 1) + d ** ell - 2, d ** (2 * ell) * (d - 1))


@dataclass(frozen=True)
class RPowerMixture:
    """Numerical split R^ell = (1-p) G_Haar + p C with validity certificates
    for C: minimal Choi eigenvalue (CP), trace-preservation and unitality
    residuals.  The decomposition residual is zero by construction."""

    n_qubits: int
    ell: int
    p_exact: Fraction
    p: float
    c_superop: np.ndarray
    c_choi: np.ndarray
    min_choi_eig: float
    tp_residual: float
    unital_residual: float

    @property
    def is_valid(self) -> bool:
        return (
            self.min_choi_eig >= -1e-9
            and self.tp_residual <= 1e-9
            and self.unital_residual <= 1e-9
        )


def split_r_power(n_qubits: int, ell: int) -> RPowerMixture:
    """Extract the residual CPTP map C from R^ell and certify it."""
    d = 2 ** n_qubits
    p_frac = p_ell_exact(d, ell)
    p = float(p_frac)
    r_pow = map_r_pow(n_qubits, ell).matrix
    g_h = haar_twirl_superop(d)
    c = (r_pow - (1.0 - p) * g_h) / p
    d2 = d * d
    choi = superop_to_choi(c, d2, d2)
    eigs = np.linalg.eigvalsh((choi + choi.conj().T) / 2)
    eye_vec = np.eye(d2, dtype=np.complex128).flatten(order="F")
    unital = float(np.max(np.abs(c @ eye_vec - eye_vec)))
    tp = float(np.max(np.abs(c.conj().T @ eye_vec - eye_vec)))
    return RPowerMixture(
        n_qubits=n_qubits,
        ell=ell,
        p_exact=p_frac,
        p=p,
        c_superop=c,
        c_choi=choi,
        min_choi_eig=float(eigs[0]),
        tp_residual=tp,
        unital_residual=unital,
    )


# ---------------------------------------------------------------------------
# Circuit serialization: one line per layer, "Z:" or "X:" then d phases.
# ---------------------------------------------------------------------------

def format_circuit(circuit: DiagCircuit) -> str:
    lines = []
    for layer in circuit.layers:
        lines.append(layer.basis + ":" + " ".join(f"{p:.17g}" for p in layer.phases))
    return "\n".join(lines) + "\n"


def parse_circuit(text: str) -> DiagCircuit:
    layers = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if ":" not in line:
            raise ValueError(f"line {lineno}: expected 'Z:...' or 'X:...'")
        basis, _, rest = line.partition(":")
        if basis not in (Z, X):
            raise ValueError(f"line {lineno}: unknown basis {basis!r}")
        phases = np.array([float(tok) for tok in rest.split()], dtype=np.float64)
        layers.append(DiagUnitary(basis=basis, phases=phases))
    if len(layers) % 2 == 0 or len(layers) < 3:
        raise ValueError(f"{len(layers)} layers do not form a Z,X,...,Z circuit")
    return DiagCircuit(ell=(len(layers) - 1) // 2, layers=tuple(layers))
