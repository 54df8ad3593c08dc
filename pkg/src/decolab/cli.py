"""Batch experiment runner.

One invocation handles one flat config (file and/or ``--set key=value``
overrides), dispatches to the library, writes a single-header CSV (17
significant digits, LF line endings, no quoting) and prints a one-line
summary.  Exit status: 0 on success, 1 when a tested inequality failed,
2 on usage/config errors.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from .applications import merging_rates, partial_trace_threshold, thermalisation_check
from .channels import (
    Channel,
    QuantumState,
    depolarizing_channel,
    identity_channel,
    partial_trace_channel,
)
from .config import ConfigError, ExperimentConfig, parse_config
from .decoupling import (
    DecouplingInstance,
    EnsembleSpec,
    bound_evaluate,
    collision_terms,
    exact_square_bound,
    haar_pure_instance,
    instance_entropies,
    mc_decoupling,
    split_register_state,
    split_round_stats,
)
from .diamond import design_delta_interval, two_design_delta
from .entropies import h_0, h_2_cond, h_max, h_min_cond
from .linalg import load_matrix, save_matrix
from .random_unitaries import RngSpec, format_circuit, sample_d_ell, split_r_power


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return f"{x:.17g}"
    if isinstance(x, bool):
        return "true" if x else "false"
    return str(x)


def _write_csv(out, columns, rows) -> None:
    out.write(",".join(columns) + "\n")
    for row in rows:
        out.write(",".join(_fmt(v) for v in row) + "\n")


def _parse_dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(t) for t in text.replace("x", ",").split(",") if t.strip())
    except ValueError as exc:
        raise ConfigError([f"bad dims {text!r}"]) from exc
    if not dims or any(d < 1 for d in dims):
        raise ConfigError([f"bad dims {text!r}"])
    return dims


def _build_instance(params, ensemble: EnsembleSpec, samples: int, seed: int):
    kind = params.get("instance", "split")
    channel_name = params.get("channel", "partial_trace")
    if kind == "split":
        for need in ("d1", "d2"):
            if need not in params:
                raise ConfigError([f"instance=split requires key '{need}'"])
        d1, d2 = params["d1"], params["d2"]
        state = split_register_state(d1, d2)
        d_a = d1 * d2
        keep = params.get("keep", d1)
        label = f"split-{d1}x{d2}"
    else:
        for need in ("d_a", "d_r"):
            if need not in params:
                raise ConfigError([f"instance=haar_pure requires key '{need}'"])
        d_a, d_r = params["d_a"], params["d_r"]
        keep = params.get("keep", max(d_a // 2, 1))
        label = f"haar-pure-{d_a}x{d_r}-s{params.get('state_seed', 7)}"
        state = None
    if channel_name == "partial_trace":
        if d_a % keep != 0:
            raise ConfigError([f"keep={keep} must divide d_a={d_a}"])
        channel = partial_trace_channel(keep, d_a // keep)
    elif channel_name == "identity":
        channel = identity_channel(d_a)
    else:
        channel = depolarizing_channel(d_a, params.get("depol_p", 1.0))
    if kind == "split":
        return DecouplingInstance(
            rho_ar=state, channel=channel, ensemble=ensemble,
            samples=samples, rng=RngSpec(seed), label=label,
        )
    return haar_pure_instance(
        params["d_a"], params["d_r"], channel, ensemble, samples,
        RngSpec(seed), state_seed=params.get("state_seed", 7),
    )


def _ensemble_from(params) -> EnsembleSpec:
    kind = params.get("ensemble", "d_ell")
    if kind == "d_ell":
        if "ell" not in params:
            raise ConfigError(["ensemble=d_ell requires key 'ell'"])
        return EnsembleSpec(kind, ell=params["ell"])
    if kind == "rqc":
        if "length" not in params:
            raise ConfigError(["ensemble=rqc requires key 'length'"])
        return EnsembleSpec(kind, length=params["length"])
    return EnsembleSpec(kind)


# ---------------------------------------------------------------------------
# subcommand runners: each returns (columns, rows, all_passed, summary)
# ---------------------------------------------------------------------------

def _run_decouple_mc(cfg: ExperimentConfig, dump_path: str | None):
    p = cfg.params
    ens = _ensemble_from(p)
    inst = _build_instance(p, ens, p["samples"], p["seed"])
    ent = instance_entropies(inst)
    rep = mc_decoupling(inst, entropies=ent)
    b4 = rep.bound_values.get("diag_h2", math.nan)
    bh = rep.bound_values["haar"]
    esb = math.nan
    if ens.kind == "d_ell" and inst.d_a ** 8 <= 2 ** 24:
        esb = exact_square_bound(inst, ell=ens.ell, entropies=ent)
    passed = True
    if not math.isnan(b4):
        passed &= rep.mean_error <= b4 + 3 * rep.std_error
    if ens.kind == "haar":
        passed &= rep.mean_error <= bh + 3 * rep.std_error
    if not math.isnan(esb):
        passed &= rep.mean_error ** 2 <= esb + 6 * rep.mean_error * rep.std_error
    if dump_path is not None:
        if ens.kind != "d_ell":
            raise ConfigError(["--dump-circuits needs ensemble=d_ell"])
        n_qubits = int(math.log2(inst.d_a))
        with open(dump_path, "w", encoding="utf-8", newline="\n") as fh:
            for i in range(inst.samples):
                fh.write(format_circuit(sample_d_ell(n_qubits, ens.ell, inst.rng.stream(i))))
                fh.write("\n")
    columns = [
        "instance_id", "ensemble", "ell", "samples", "seed", "mean_error",
        "std_error", "bound_theorem4", "bound_haar", "exact_square_bound",
        "lambda_rate",
    ]
    rows = [[
        inst.label, ens.kind, ens.ell if ens.ell is not None else 0, inst.samples,
        p["seed"], rep.mean_error, rep.std_error, b4, bh, esb, rep.lambda_rate,
    ]]
    summary = (
        f"decouple-mc {inst.label} {ens.kind}: mean={rep.mean_error:.6f}"
        f" std={rep.std_error:.2e} bound4={b4:.6f} {'PASS' if passed else 'FAIL'}"
    )
    return columns, rows, passed, summary


def _run_decouple_exact(cfg: ExperimentConfig, dump_path):
    p = cfg.params
    ell = p["ell"]
    inst = _build_instance(p, EnsembleSpec("d_ell", ell=ell), 2, p["seed"])
    ent = instance_entropies(inst)
    esb = exact_square_bound(inst, ell=ell, entropies=ent)
    tt, tr_ = collision_terms(inst, ent["sigma_b"], ent["sigma_r"])
    from .random_unitaries import p_ell_exact

    p_ell = float(p_ell_exact(inst.d_a, ell))
    closed = (1 + (2 * inst.d_a ** 2 - 1) * p_ell) * tt * tr_
    b4 = bound_evaluate("diag_h2", dict(d_a=inst.d_a, ell=ell, h2_ar=ent["h2_ar"], h2_ab=ent["h2_ab"]))
    passed = esb <= closed + 1e-9 and math.sqrt(max(esb, 0.0)) <= b4 + 1e-9
    columns = ["instance_id", "ell", "seed", "h2_ar", "h2_ab",
               "exact_square_bound", "closed_form_bound", "bound_theorem4"]
    rows = [[inst.label, ell, p["seed"], ent["h2_ar"], ent["h2_ab"], esb, closed, b4]]
    summary = f"decouple-exact {inst.label} ell={ell}: kernel={esb:.8f} closed={closed:.8f} {'PASS' if passed else 'FAIL'}"
    return columns, rows, passed, summary


def _run_design_delta(cfg: ExperimentConfig, dump_path):
    p = cfg.params
    res = two_design_delta(p["n_qubits"], p["ell"], gap_tol=p["gap_tol"])
    lo, hi = design_delta_interval(p["n_qubits"], p["ell"])
    passed = (lo - 1e-6) <= res.value <= (hi + 1e-6)
    columns = ["n_qubits", "ell", "delta_value", "delta_lower", "delta_upper",
               "interval_lo", "interval_hi", "method", "pass"]
    rows = [[p["n_qubits"], p["ell"], res.value, res.lower, res.upper, lo, hi,
             res.method, passed]]
    summary = (
        f"design-delta N={p['n_qubits']} ell={p['ell']}: delta={res.value:.9f} "
        f"in [{lo:.6f},{hi:.6f}] {'PASS' if passed else 'FAIL'}"
    )
    return columns, rows, passed, summary


def _run_moments(cfg: ExperimentConfig, dump_path):
    p = cfg.params
    mix = split_r_power(p["n_qubits"], p["ell"])
    passed = mix.is_valid
    columns = ["n_qubits", "ell", "p_ell", "p_ell_exact", "min_choi_eig",
               "tp_residual", "unital_residual", "pass"]
    rows = [[p["n_qubits"], p["ell"], mix.p, str(mix.p_exact).replace(",", "/"),
             mix.min_choi_eig, mix.tp_residual, mix.unital_residual, passed]]
    summary = (
        f"moments-lemma5 N={p['n_qubits']} ell={p['ell']}: p={mix.p_exact} "
        f"min_eig={mix.min_choi_eig:.2e} {'PASS' if passed else 'FAIL'}"
    )
    return columns, rows, passed, summary


def _run_entropy(cfg: ExperimentConfig, dump_path):
    p = cfg.params
    mat = load_matrix(p["state"])
    dims = _parse_dims(p["dims"])
    tr = float(np.trace(mat).real)
    norm_class = "normalized" if abs(tr - 1.0) <= 1e-8 else "subnormalized"
    state = QuantumState(mat, dims, norm_class)
    which = p["which"]
    optimizer = None
    if which == "hmin":
        res = h_min_cond(state, cut=p["cut"])
        value, optimizer = res.value, res.optimizer
    elif which == "h2":
        res = h_2_cond(state, cut=p["cut"], mode=p["mode"])
        value, optimizer = res.value, res.optimizer
    elif which == "h0":
        value = h_0(state)
    else:
        value = h_max(state)
    if p.get("optimizer_out") and optimizer is not None:
        save_matrix(p["optimizer_out"], optimizer)
    columns = ["which", "dims", "cut", "mode", "value"]
    rows = [[which, "x".join(str(d) for d in dims), p["cut"], p.get("mode", ""), value]]
    summary = f"entropy {which}: {value:.9f}"
    return columns, rows, True, summary


def _run_prop1(cfg: ExperimentConfig, dump_path):
    p = cfg.params
    s = split_round_stats(p["d1"], p["d2"], p["samples"], RngSpec(p["seed"]))
    passed = (
        abs(s.closed_form - s.exact_twirl) <= 1e-9
        and s.mc_mean >= s.lower_bound - 3 * s.mc_std
    )
    columns = ["d1", "d2", "closed_form", "exact_twirl", "mc_mean", "mc_std",
               "lower_bound", "haar_bound"]
    rows = [[s.d1, s.d2, s.closed_form, s.exact_twirl, s.mc_mean, s.mc_std,
             s.lower_bound, s.haar_bound]]
    summary = (
        f"prop1 ({s.d1},{s.d2}): closed={s.closed_form:.6f} exact={s.exact_twirl:.6f} "
        f"mc={s.mc_mean:.4f} haar_mc={s.haar_mean:.4f} {'PASS' if passed else 'FAIL'}"
    )
    return columns, rows, passed, summary


def _merging_state(p) -> QuantumState:
    preset = p.get("preset", "")
    if p.get("state"):
        mat = load_matrix(p["state"])
        dims = _parse_dims(p["dims"])
        if len(dims) != 3:
            raise ConfigError(["apps-merging needs dims = d_a,d_b,d_r"])
        return QuantumState(mat, dims)
    d_a = p.get("d_a", 2)
    if preset in ("", "phi_ar"):
        from .linalg import kron, max_entangled, permute_systems

        phi = max_entangled(d_a)
        zero = np.zeros((p.get("d_b", 1),) * 2, dtype=np.complex128)
        zero[0, 0] = 1.0
        mat = kron(phi, zero)  # (A, R, B)
        mat = permute_systems(mat, (d_a, d_a, p.get("d_b", 1)), [0, 2, 1])
        return QuantumState(mat, (d_a, p.get("d_b", 1), d_a))
    from .linalg import kron, max_entangled

    zero = np.zeros((d_a, d_a), dtype=np.complex128)
    zero[0, 0] = 1.0
    d_b = p.get("d_b", 2)
    mat = kron(zero, max_entangled(d_b))
    return QuantumState(mat, (d_a, d_b, d_b))


def _run_merging(cfg: ExperimentConfig, dump_path):
    p = cfg.params
    psi = _merging_state(p)
    rates = merging_rates(psi, p["ell"], p["delta"])
    check = abs((rates.e_gain + rates.q_cost) - rates.h_0_a) <= 1e-9
    columns = ["d_a", "d_b", "d_r", "ell", "delta", "delta_prime", "epsilon",
               "h_min_ar", "h0_a", "e_gain", "q_cost"]
    rows = [[psi.dims[0], psi.dims[1], psi.dims[2], rates.ell, rates.delta,
             rates.delta_prime, rates.epsilon, rates.h_min_ar, rates.h_0_a,
             rates.e_gain, rates.q_cost]]
    summary = (
        f"apps-merging ell={rates.ell}: e_gain>={rates.e_gain:.4f} "
        f"q_cost<={rates.q_cost:.4f} (surrogate entropies) {'PASS' if check else 'FAIL'}"
    )
    return columns, rows, check, summary


def _run_therm(cfg: ExperimentConfig, dump_path):
    p = cfg.params
    d_s, d_e, d_r = p["d_s"], p["d_e"], p["d_r"]
    if p.get("state"):
        mat = load_matrix(p["state"])
        state = QuantumState(mat, (d_s * d_e, d_r))
    else:
        from .linalg import kron

        state = QuantumState(
            kron(np.eye(d_s * d_e, dtype=np.complex128) / (d_s * d_e),
                 np.eye(d_r, dtype=np.complex128) / d_r),
            (d_s * d_e, d_r),
        )
    verdict = thermalisation_check(
        state, (d_s, d_e, d_r), p["ell"], p["eps1"], p["eps2"], p["eps3"], p["delta"]
    )
    columns = ["d_s", "d_e", "d_r", "ell", "eps1", "eps2", "eps3", "delta",
               "lhs", "rhs", "satisfied", "fraction_bound"]
    rows = [[d_s, d_e, d_r, p["ell"], p["eps1"], p["eps2"], p["eps3"], p["delta"],
             verdict.lhs, verdict.rhs, verdict.satisfied, verdict.fraction_bound]]
    summary = (
        f"apps-therm: lhs={verdict.lhs:.4f} rhs={verdict.rhs:.4f} "
        f"satisfied={verdict.satisfied} fraction<={verdict.fraction_bound:.3e}"
    )
    return columns, rows, True, summary


_RUNNERS = {
    "decouple-mc": _run_decouple_mc,
    "decouple-exact": _run_decouple_exact,
    "design-delta": _run_design_delta,
    "moments-lemma5": _run_moments,
    "entropy": _run_entropy,
    "prop1": _run_prop1,
    "apps-merging": _run_merging,
    "apps-therm": _run_therm,
}


def run(cfg: ExperimentConfig, out_path: str | None = None, dump_circuits: str | None = None) -> int:
    """Execute one experiment config; returns the process exit status."""
    try:
        columns, rows, passed, summary = _RUNNERS[cfg.subcommand](cfg, dump_circuits)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            _write_csv(fh, columns, rows)
        print(summary)
    else:
        _write_csv(sys.stdout, columns, rows)
        print(summary, file=sys.stderr)
    return 0 if passed else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="decolab",
        description="Decoupling laboratory: run one experiment per invocation.",
    )
    parser.add_argument("subcommand", nargs="?", help="experiment name (or set it in the config)")
    parser.add_argument("--config", help="path to a 'key = value' config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
    parser.add_argument("--out", help="CSV output path (default: standard output)")
    parser.add_argument("--dump-circuits", help="write sampled diagonal circuits here")
    parser.add_argument("--state", help="entropy: state file (text matrix format)")
    parser.add_argument("--dims", help="entropy: comma-separated subsystem dims")
    parser.add_argument("--cut", type=int, help="entropy: factors on the A side")
    args = parser.parse_args(argv)

    source = ""
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                source = fh.read()
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return 2
    overrides: list[tuple[str, str]] = []
    for item in args.set:
        if "=" not in item:
            print(f"error: --set expects KEY=VALUE, got {item!r}", file=sys.stderr)
            return 2
        k, _, v = item.partition("=")
        overrides.append((k.strip(), v.strip()))
    if args.subcommand:
        overrides.append(("subcommand", args.subcommand))
    if args.state:
        overrides.append(("state", args.state))
    if args.dims:
        overrides.append(("dims", args.dims))
    if args.cut is not None:
        overrides.append(("cut", str(args.cut)))

    try:
        cfg = parse_config(source, overrides)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return 2
    return run(cfg, out_path=args.out, dump_circuits=args.dump_circuits)


if __name__ == "__main__":
    sys.exit(main())
