"""Decoupling error functional, Monte-Carlo estimation, exact second-moment
kernels, and the closed-form bound evaluators.

The protocol: a system A holding half of ``rho_AR`` is scrambled by a random
unitary and pushed through a channel ``T: A -> B``; the decoupling error of a
single unitary is

    err(U) = || T((U (x) I) rho_AR (U (x) I)^dag) - tau_B (x) rho_R ||_1,

with ``tau_B = tr_A J(T)`` the channel's output on the maximally mixed input.
Monte-Carlo averages draw unitaries from one of four ensembles (haar, the
alternating diagonal circuit ``d_ell``, random two-qubit circuits ``rqc``, or
a single X-after-Z diagonal round ``diag_zx_once``).

The exact route rewrites the averaged squared error through the doubled
space: with a CP map E fixed by ``J(E) = rho_AR`` and centered input
``xi = Phi - I/d_A^2``,

    (E err)^2 <= tr[ R^ell(xi (x) xi) . Ttil*^(x2)(F_BB') (x) Etil*^(x2)(F_RR') ],

where the tilde maps are sandwiched by ``sigma^(-1/4)`` weights and R^ell
acts on the two A copies.  At the collision-entropy optimizers the right
side is further bounded by ``(1 + (2 d_A^2 - 1) p_ell) 2^(-H2(A|R)-H2(A|B))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .channels import Channel, QuantumState, partial_trace_channel
from .entropies import h_2_cond, h_min_cond
from .linalg import (
    as_complex,
    kron,
    max_entangled,
    partial_trace,
    permute_systems,
    pinv_quarter_root,
)
from .random_unitaries import (
    RngSpec,
    r_apply_sites,
    sample_d_ell,
    sample_diag,
    sample_haar,
    sample_rqc,
    twirl2_diag_sites,
    twirl2_haar_sites,
)

ENSEMBLES = ("haar", "d_ell", "rqc", "diag_zx_once")


@dataclass(frozen=True)
class EnsembleSpec:
    kind: str
    ell: int | None = None
    length: int | None = None

    def __post_init__(self):
        if self.kind not in ENSEMBLES:
            raise ValueError(f"unknown ensemble {self.kind!r}")
        if self.kind == "d_ell" and (self.ell is None or self.ell < 1):
            raise ValueError("d_ell ensemble needs ell >= 1")
        if self.kind == "rqc" and (self.length is None or self.length < 0):
            raise ValueError("rqc ensemble needs a nonnegative length")


@dataclass(frozen=True)
class DecouplingInstance:
    rho_ar: QuantumState
    channel: Channel
    ensemble: EnsembleSpec
    samples: int
    rng: RngSpec
    label: str = "instance"

    def __post_init__(self):
        if len(self.rho_ar.dims) != 2:
            raise ValueError("rho_AR must carry dims (d_A, d_R)")
        if self.channel.d_in != self.rho_ar.dims[0]:
            raise ValueError(
                f"channel input {self.channel.d_in} != d_A {self.rho_ar.dims[0]}"
            )

    @property
    def d_a(self) -> int:
        return self.rho_ar.dims[0]

    @property
    def d_r(self) -> int:
        return self.rho_ar.dims[1]


@dataclass
class DecouplingReport:
    mean_error: float
    std_error: float
    mean_sq_error: float
    std_sq_error: float
    bound_values: dict
    lambda_rate: float
    exact_square_bound: float | None = None
    samples: int = 0


class _InstanceCtx:
    """Per-instance precomputation shared across Monte-Carlo samples."""

    def __init__(self, inst: DecouplingInstance):
        self.inst = inst
        self.kraus = inst.channel.kraus()
        self.d_a, self.d_r = inst.d_a, inst.d_r
        self.d_b = inst.channel.d_out
        self.rho = inst.rho_ar.matrix
        tau_b = inst.channel.tau_out
        rho_r = partial_trace(self.rho, (self.d_a, self.d_r), [0])
        self.target = kron(tau_b, rho_r)
        self._kraus_emb = [kron(k, np.eye(self.d_r)) for k in self.kraus]
        self._eye_r = np.eye(self.d_r, dtype=np.complex128)

    def error_of(self, u: np.ndarray) -> float:
        ue = kron(u, self._eye_r)
        moved = ue @ self.rho @ ue.conj().T
        out = np.zeros((self.d_b * self.d_r,) * 2, dtype=np.complex128)
        for ke in self._kraus_emb:
            out += ke @ moved @ ke.conj().T
        diff = out - self.target
        w = np.linalg.eigvalsh((diff + diff.conj().T) / 2)
        return float(np.sum(np.abs(w)))

    def draw(self, stream: RngSpec) -> np.ndarray:
        kind = self.inst.ensemble.kind
        if kind == "haar":
            return sample_haar(self.d_a, stream)
        if kind == "d_ell":
            return sample_d_ell(_n_qubits(self.d_a), self.inst.ensemble.ell, stream).matrix()
        if kind == "rqc":
            return sample_rqc(_n_qubits(self.d_a), self.inst.ensemble.length, stream)
        if kind == "diag_zx_once":
            gen = stream.generator()
            dz = sample_diag("Z", self.d_a, gen)
            dx = sample_diag("X", self.d_a, gen)
            return dx.apply_left(dz.matrix())
        raise AssertionError(kind)


def _n_qubits(d: int) -> int:
    from .linalg import n_qubits_of

    return n_qubits_of(d)


def error_of_unitary(inst: DecouplingInstance, u: np.ndarray) -> float:
    """Decoupling error of one unitary on A; always in [0, 2]."""
    u = as_complex(u)
    if u.shape != (inst.d_a, inst.d_a):
        raise ValueError(f"unitary shape {u.shape}, expected {(inst.d_a,) * 2}")
    return _InstanceCtx(inst).error_of(u)


def instance_entropies(inst: DecouplingInstance) -> dict:
    """H_min and optimized H_2 of the input state (A|R) and of the channel's
    Choi state (A|B); epsilon = 0 surrogates throughout."""
    tau_state = QuantumState(inst.channel.choi, (inst.d_a, inst.channel.d_out))
    out = {
        "h_min_ar": h_min_cond(inst.rho_ar).value,
        "h_min_ab": h_min_cond(tau_state).value,
    }
    r2 = h_2_cond(inst.rho_ar, mode="optimized")
    t2 = h_2_cond(tau_state, mode="optimized")
    out["h2_ar"] = r2.value
    out["h2_ab"] = t2.value
    out["sigma_r"] = r2.optimizer
    out["sigma_b"] = t2.optimizer
    return out


def mc_decoupling(
    inst: DecouplingInstance,
    entropies: dict | None = None,
    compute_bounds: bool = True,
) -> DecouplingReport:
    """Monte-Carlo mean and standard error of the decoupling error.

    Sample ``i`` draws from stream ``inst.rng.stream(i)``, so the result is
    independent of evaluation order or thread placement; summation uses
    numpy's pairwise reduction for a deterministic result.
    """
    if inst.samples < 2:
        raise ValueError("need at least two samples")
    ctx = _InstanceCtx(inst)
    errs = np.empty(inst.samples)
    for i in range(inst.samples):
        errs[i] = ctx.error_of(ctx.draw(inst.rng.stream(i)))
    mean = float(np.mean(errs))
    std_err = float(np.std(errs, ddof=1) / math.sqrt(inst.samples))
    sq = errs * errs
    mean_sq = float(np.mean(sq))
    std_sq = float(np.std(sq, ddof=1) / math.sqrt(inst.samples))

    bounds: dict = {}
    lam = math.inf
    if compute_bounds:
        ent = entropies if entropies is not None else instance_entropies(inst)
        bounds["haar"] = bound_evaluate(
            "haar", dict(h_min_ar=ent["h_min_ar"], h_min_ab=ent["h_min_ab"], epsilon=0.0)
        )
        ell = inst.ensemble.ell
        if ell is not None:
            bounds["diag_h2"] = bound_evaluate(
                "diag_h2", dict(d_a=inst.d_a, ell=ell, h2_ar=ent["h2_ar"], h2_ab=ent["h2_ab"])
            )
        key = "diag_h2" if inst.ensemble.kind == "d_ell" else "haar"
        lam = -math.log2(bounds[key]) if bounds[key] > 0 else math.inf
    return DecouplingReport(
        mean_error=mean,
        std_error=std_err,
        mean_sq_error=mean_sq,
        std_sq_error=std_sq,
        bound_values=bounds,
        lambda_rate=lam,
        samples=inst.samples,
    )


# ---------------------------------------------------------------------------
# Exact second-moment kernel.
# ---------------------------------------------------------------------------

def _sandwich_kraus(kraus, weight_quarter_inv: np.ndarray):
    return [weight_quarter_inv @ k for k in kraus]


def _pair_kernel(kraus, d_in: int, d_out: int) -> np.ndarray:
    """K = sum_{b,b'} C*(E_bb') (x) C*(E_b'b) on two copies of the input,
    for the map C with the given Kraus operators (C*: out -> in)."""
    # m[b, b', a, c] = C*(E_bb')[a, c] = sum_k conj(K_k[b, a]) K_k[b', c]
    ks = np.stack(kraus)  # (n_k, d_out, d_in)
    m = np.einsum("kba,kqc->bqac", ks.conj(), ks)
    kernel = np.einsum("xyac,yxbd->abcd", m, m)
    return kernel.reshape(d_in * d_in, d_in * d_in)


def exact_square_bound(
    inst: DecouplingInstance,
    ell: int,
    sigma_b: np.ndarray | None = None,
    sigma_r: np.ndarray | None = None,
    twirl: str = "repeated",
    entropies: dict | None = None,
) -> float:
    """Exact doubled-space kernel value bounding the squared mean error.

    With the sigma weights omitted, the collision-entropy optimizers are
    used, which is the choice that collapses the subsequent closed-form
    estimate to ``(1 + (2 d_A^2 - 1) p_ell) 2^(-H2(A|R) - H2(A|B))``.
    ``twirl="haar"`` replaces R^ell by the Haar twirl (the ell -> infinity
    kernel).
    """
    d_a = inst.d_a
    if d_a ** 8 > 2 ** 24:
        raise ValueError(f"doubled-pair operator for d_A={d_a} exceeds the memory guard")
    if twirl not in ("repeated", "haar"):
        raise ValueError(f"twirl must be 'repeated' or 'haar', got {twirl!r}")
    if sigma_b is None or sigma_r is None:
        ent = entropies if entropies is not None else instance_entropies(inst)
        sigma_b = ent["sigma_b"] if sigma_b is None else sigma_b
        sigma_r = ent["sigma_r"] if sigma_r is None else sigma_r

    d_b, d_r = inst.channel.d_out, inst.d_r
    t_kraus = _sandwich_kraus(inst.channel.kraus(), pinv_quarter_root(sigma_b))
    e_channel = Channel(choi=inst.rho_ar.matrix, d_in=d_a, d_out=d_r, tp_flag=False)
    e_kraus = _sandwich_kraus(e_channel.kraus(), pinv_quarter_root(sigma_r))

    k_t = _pair_kernel(t_kraus, d_a, d_b)  # on (A, A')
    k_e = _pair_kernel(e_kraus, d_a, d_r)  # on (Abar, Abar')

    xi = max_entangled(d_a) - np.eye(d_a * d_a, dtype=np.complex128) / (d_a * d_a)
    pair = kron(xi, xi)  # on (A, Abar, A', Abar')
    dims = (d_a, d_a, d_a, d_a)
    if twirl == "repeated":
        moved = r_apply_sites(pair, dims, (0, 2), ell)
    else:
        moved = twirl2_haar_sites(pair, dims, (0, 2))

    kernel = kron(k_t, k_e)  # on (A, A', Abar, Abar')
    kernel = permute_systems(kernel, dims, [0, 2, 1, 3])  # -> (A, Abar, A', Abar')
    return float(np.sum(moved * kernel.T).real)


def collision_terms(
    inst: DecouplingInstance, sigma_b: np.ndarray, sigma_r: np.ndarray
) -> tuple[float, float]:
    """(tr tau_tilde^2, tr rho_tilde^2) for the sandwiched Choi states."""
    d_a, d_b, d_r = inst.d_a, inst.channel.d_out, inst.d_r
    qb = pinv_quarter_root(sigma_b)
    qr = pinv_quarter_root(sigma_r)
    tau_t = kron(np.eye(d_a), qb) @ inst.channel.choi @ kron(np.eye(d_a), qb)
    rho_t = kron(np.eye(d_a), qr) @ inst.rho_ar.matrix @ kron(np.eye(d_a), qr)
    return (
        float(np.trace(tau_t @ tau_t).real),
        float(np.trace(rho_t @ rho_t).real),
    )


# ---------------------------------------------------------------------------
# Closed-form bound evaluators.
# ---------------------------------------------------------------------------

def concentration_chi(ell: int, k: float) -> float:
    """Rate constant of the phase-torus concentration tail:
    chi^(-1) = 2^11 (2 ell + 1)^3 K^4 pi^2."""
    return 1.0 / (2.0 ** 11 * (2 * ell + 1) ** 3 * k ** 4 * math.pi ** 2)


def bound_evaluate(which: str, params: Mapping[str, float]) -> float:
    """Evaluate one of the closed-form decoupling bounds.

    Names and required parameters:

    * ``haar``:        2^(-(h_min_ar + h_min_ab)/2) + 12 eps
                       [h_min_ar, h_min_ab, epsilon]
    * ``two_design``:  sqrt(1 + 4 delta d_A^4) 2^(-(h_min_ar+h_min_ab)/2)
                       + 8 d_A delta eps + 12 eps
                       [h_min_ar, h_min_ab, epsilon, delta, d_a]
    * ``rqc``:         sqrt(1/poly + 2^(2 eta n_a - h2_ar - h2_ab))
                       [poly, eta, n_a, h2_ar, h2_ab]  (poly is the caller's
                       uncertified polynomial value; the bound is reported
                       as-is, never certified)
    * ``diag_h2``:     sqrt(1 + 8 d_A^(2-ell)) 2^(-(h2_ar + h2_ab)/2)
                       [d_a, ell, h2_ar, h2_ab]
    * ``diag_smooth``: sqrt(1 + 8 d_A^(2-ell)) 2^(-(h_min_ar+h_min_ab)/2)
                       + 12 eps   (unsmoothed surrogate entropies)
                       [d_a, ell, h_min_ar, h_min_ab, epsilon]
    * ``tail``:        2 exp(-chi_ell d_A eta^4), chi from K = d_A ||rho_A||_inf
                       [d_a, ell, eta, k]
    """
    try:
        if which == "haar":
            return 2.0 ** (-0.5 * (params["h_min_ar"] + params["h_min_ab"])) + 12.0 * params["epsilon"]
        if which == "two_design":
            base = 2.0 ** (-0.5 * (params["h_min_ar"] + params["h_min_ab"]))
            d_a, delta, eps = params["d_a"], params["delta"], params["epsilon"]
            return math.sqrt(1.0 + 4.0 * delta * d_a ** 4) * base + 8.0 * d_a * delta * eps + 12.0 * eps
        if which == "rqc":
            expo = 2.0 * params["eta"] * params["n_a"] - params["h2_ar"] - params["h2_ab"]
            return math.sqrt(1.0 / params["poly"] + 2.0 ** expo)
        if which == "diag_h2":
            coeff = math.sqrt(1.0 + 8.0 * params["d_a"] ** (2.0 - params["ell"]))
            return coeff * 2.0 ** (-0.5 * (params["h2_ar"] + params["h2_ab"]))
        if which == "diag_smooth":
            coeff = math.sqrt(1.0 + 8.0 * params["d_a"] ** (2.0 - params["ell"]))
            base = 2.0 ** (-0.5 * (params["h_min_ar"] + params["h_min_ab"]))
            return coeff * base + 12.0 * params["epsilon"]
        if which == "tail":
            chi = concentration_chi(int(params["ell"]), params["k"])
            return 2.0 * math.exp(-chi * params["d_a"] * params["eta"] ** 4)
    except KeyError as exc:
        raise ValueError(f"bound {which!r} is missing parameter {exc.args[0]!r}") from exc
    raise ValueError(f"unknown bound {which!r}")


# ---------------------------------------------------------------------------
# Split-register single-round statistics (exact twirl pipeline vs sampling).
# ---------------------------------------------------------------------------

def split_register_state(d1: int, d2: int) -> QuantumState:
    """Maximally entangled (A1:R) pair with A2 initialized to |0>, ordered
    (A = A1 (x) A2, R)."""
    phi = max_entangled(d1)
    zero = np.zeros((d2, d2), dtype=np.complex128)
    zero[0, 0] = 1.0
    full = kron(phi, zero)  # (A1, R, A2)
    full = permute_systems(full, (d1, d1, d2), [0, 2, 1])  # (A1, A2, R)
    return QuantumState(full, (d1 * d2, d1))


@dataclass
class SplitRoundStats:
    d1: int
    d2: int
    closed_form: float
    exact_twirl: float
    mc_mean: float
    mc_std: float
    haar_mean: float
    haar_std: float
    lower_bound: float
    haar_bound: float
    samples: int


def split_round_stats(d1: int, d2: int, samples: int, rng: RngSpec) -> SplitRoundStats:
    """Second-moment and trace-norm statistics for one X-after-Z diagonal
    round on a split register, traced down to the first factor.

    The exact average purity E tr[(tr_2 (U rho U^dag))^2] under the single
    round is ``1/d1 + 1/d2 - 1/(d1 d2)``, far above the Haar benchmark when
    d1 is small: the single round does not decouple this instance.
    """
    d_a = d1 * d2
    state = split_register_state(d1, d2)
    rho = state.matrix

    # exact purity through the doubled-space twirl pipeline
    pair = kron(rho, rho)  # (A1 A2 R | A1' A2' R')
    pair_t = twirl2_diag_sites(
        twirl2_diag_sites(pair, (d_a, d1, d_a, d1), (0, 2), "Z"),
        (d_a, d1, d_a, d1),
        (0, 2),
        "X",
    )
    f1 = _swap_pair_operator(d1)
    fr = _swap_pair_operator(d1)
    kernel = kron(kron(f1, np.eye(d2 * d2, dtype=np.complex128)), fr)  # (A1,A1',A2,A2',R,R')
    kernel = permute_systems(kernel, (d1, d1, d2, d2, d1, d1), [0, 2, 4, 1, 3, 5])
    exact = float(np.sum(pair_t * kernel.T).real)

    closed = 1.0 / d1 + 1.0 / d2 - 1.0 / d_a
    lower = (closed - 1.0 / d1 ** 2) / math.sqrt(2.0)
    haar_bound = d1 / math.sqrt(d2)

    channel = partial_trace_channel(d1, d2)
    base = dict(rho_ar=state, channel=channel, samples=samples)
    mc = mc_decoupling(
        DecouplingInstance(
            **base, ensemble=EnsembleSpec("diag_zx_once"), rng=rng, label="split-zx"
        ),
        compute_bounds=False,
    )
    haar = mc_decoupling(
        DecouplingInstance(
            **base, ensemble=EnsembleSpec("haar"), rng=rng.stream(10 ** 6), label="split-haar"
        ),
        compute_bounds=False,
    )
    return SplitRoundStats(
        d1=d1,
        d2=d2,
        closed_form=closed,
        exact_twirl=exact,
        mc_mean=mc.mean_error,
        mc_std=mc.std_error,
        haar_mean=haar.mean_error,
        haar_std=haar.std_error,
        lower_bound=lower,
        haar_bound=haar_bound,
        samples=samples,
    )


def _swap_pair_operator(d: int) -> np.ndarray:
    from .linalg import swap_operator

    return swap_operator(d)


# ---------------------------------------------------------------------------
# Concentration experiment.
# ---------------------------------------------------------------------------

@dataclass
class ConcentrationReport:
    threshold: float
    delta_bound: float
    empirical_fraction: float
    tail_bound: float
    binom_std: float
    passed: bool
    samples: int


def concentration_experiment(
    inst: DecouplingInstance, ell: int, eta: float, samples: int | None = None
) -> ConcentrationReport:
    """Empirical check of the phase-torus concentration tail.

    Counts draws whose error exceeds ``2 Delta + eta`` where Delta is the
    eps = 0 surrogate of the smooth bound; the theoretical fraction bound is
    ``2 exp(-chi_ell d_A eta^4)`` with ``K = d_A ||rho_A||_inf``.
    """
    n = samples if samples is not None else inst.samples
    if n < 100:
        raise ValueError("concentration experiment needs >= 100 samples")
    ent = instance_entropies(inst)
    delta = bound_evaluate(
        "diag_smooth",
        dict(d_a=inst.d_a, ell=ell, h_min_ar=ent["h_min_ar"], h_min_ab=ent["h_min_ab"], epsilon=0.0),
    )
    threshold = 2.0 * delta + eta
    rho_a = partial_trace(inst.rho_ar.matrix, (inst.d_a, inst.d_r), [1])
    k_const = inst.d_a * float(np.max(np.abs(np.linalg.eigvalsh(rho_a))))
    tail = bound_evaluate("tail", dict(d_a=inst.d_a, ell=ell, eta=eta, k=k_const))

    ctx = _InstanceCtx(
        DecouplingInstance(
            rho_ar=inst.rho_ar,
            channel=inst.channel,
            ensemble=EnsembleSpec("d_ell", ell=ell),
            samples=n,
            rng=inst.rng,
            label=inst.label,
        )
    )
    exceed = 0
    for i in range(n):
        if ctx.error_of(ctx.draw(inst.rng.stream(i))) > threshold:
            exceed += 1
    frac = exceed / n
    p_ref = min(tail, 1.0)
    binom_std = math.sqrt(max(p_ref * (1.0 - p_ref), 0.0) / n)
    passed = frac <= tail + 3.0 * binom_std
    return ConcentrationReport(
        threshold=threshold,
        delta_bound=delta,
        empirical_fraction=frac,
        tail_bound=tail,
        binom_std=binom_std,
        passed=passed,
        samples=n,
    )


# ---------------------------------------------------------------------------
# Instance library.
# ---------------------------------------------------------------------------

def haar_pure_instance(
    d_a: int, d_r: int, channel: Channel, ensemble: EnsembleSpec, samples: int, rng: RngSpec,
    state_seed: int = 7,
) -> DecouplingInstance:
    """Haar-random pure rho_AR (Ginibre vector), fixed by ``state_seed``."""
    gen = RngSpec(state_seed, 0).generator()
    v = gen.standard_normal(d_a * d_r) + 1j * gen.standard_normal(d_a * d_r)
    v /= np.linalg.norm(v)
    state = QuantumState(np.outer(v, v.conj()), (d_a, d_r))
    return DecouplingInstance(
        rho_ar=state, channel=channel, ensemble=ensemble, samples=samples, rng=rng,
        label=f"haar-pure-{d_a}x{d_r}-s{state_seed}",
    )
