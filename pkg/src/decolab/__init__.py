"""decolab: a numerical laboratory for decoupling with repeated random
diagonal unitaries.

Samplers and exact two-fold twirls for diagonal/Haar/random-circuit
ensembles, conditional min- and collision-entropy computation (SDP and
projected ascent), a certified diamond-norm engine, decoupling-error
Monte Carlo with exact second-moment kernels, and the application formulas
(state merging, relative thermalisation) built on top.
"""

from .applications import (
    MergingRates,
    ThermalisationVerdict,
    merging_rates,
    partial_trace_threshold,
    thermalisation_check,
)
from .channels import (
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
    superop_to_choi,
    unitary_channel,
)
from .decoupling import (
    ConcentrationReport,
    DecouplingInstance,
    DecouplingReport,
    EnsembleSpec,
    SplitRoundStats,
    bound_evaluate,
    collision_terms,
    concentration_experiment,
    error_of_unitary,
    exact_square_bound,
    haar_pure_instance,
    instance_entropies,
    mc_decoupling,
    split_register_state,
    split_round_stats,
)
from .diamond import (
    DiamondResult,
    design_delta_interval,
    diamond_norm,
    diamond_norm_certified,
    two_design_delta,
)
from .entropies import EntropyResult, h_0, h_2_cond, h_max, h_min_cond, purified_distance
from .linalg import (
    eigh,
    hadamard_all,
    kron,
    load_matrix,
    max_entangled,
    partial_trace,
    permute_systems,
    pinv_quarter_root,
    save_matrix,
    swap_operator,
    trace_norm,
)
from .random_unitaries import (
    DiagCircuit,
    DiagUnitary,
    MomentSuperOp,
    RngSpec,
    RPowerMixture,
    map_r_pow,
    p_ell_exact,
    r_apply,
    sample_d_ell,
    sample_diag,
    sample_haar,
    sample_rqc,
    split_r_power,
    twirl2_diag,
    twirl2_haar,
)
from .sdp import SdpProblem, SdpSolution, solve_sdp

__version__ = "0.1.0"
