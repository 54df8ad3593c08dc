"""Flat ``key = value`` experiment configuration.

The format is deliberately minimal: UTF-8 text, one ``key = value`` pair per
line, ``#`` starts a comment, blank lines ignored.  Parsing validates the
whole file and reports *all* problems at once (unknown keys, type errors,
out-of-range values, duplicates with both line numbers, missing required
keys) instead of stopping at the first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

SUBCOMMANDS = (
    "decouple-mc",
    "decouple-exact",
    "design-delta",
    "moments-lemma5",
    "entropy",
    "prop1",
    "apps-merging",
    "apps-therm",
)


class ConfigError(ValueError):
    """Carries the full list of validation problems."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class KeySpec:
    typ: type
    required: bool = False
    default: Any = None
    lo: float | None = None
    hi: float | None = None
    choices: tuple | None = None


def _pow2(v) -> bool:
    return v >= 1 and (v & (v - 1)) == 0


_INSTANCE_KEYS = {
    "instance": KeySpec(str, default="split", choices=("split", "haar_pure")),
    "d1": KeySpec(int, lo=2),
    "d2": KeySpec(int, lo=2),
    "d_a": KeySpec(int, lo=2),
    "d_r": KeySpec(int, lo=1),
    "keep": KeySpec(int, lo=1),
    "state_seed": KeySpec(int, default=7),
    "channel": KeySpec(str, default="partial_trace",
                       choices=("partial_trace", "identity", "depolarizing")),
    "depol_p": KeySpec(float, default=1.0, lo=0.0, hi=1.0),
}

_SCHEMAS: dict[str, dict[str, KeySpec]] = {
    "decouple-mc": {
        **_INSTANCE_KEYS,
        "ensemble": KeySpec(str, default="d_ell",
                            choices=("haar", "d_ell", "rqc", "diag_zx_once")),
        "ell": KeySpec(int, lo=1),
        "length": KeySpec(int, lo=0),
        "samples": KeySpec(int, required=True, lo=2),
        "seed": KeySpec(int, default=0),
    },
    "decouple-exact": {
        **_INSTANCE_KEYS,
        "ell": KeySpec(int, required=True, lo=1),
        "seed": KeySpec(int, default=0),
    },
    "design-delta": {
        "n_qubits": KeySpec(int, required=True, lo=1, hi=2),
        "ell": KeySpec(int, required=True, lo=1),
        "gap_tol": KeySpec(float, default=1e-6, lo=1e-12, hi=1e-2),
        "seed": KeySpec(int, default=0),
    },
    "moments-lemma5": {
        "n_qubits": KeySpec(int, required=True, lo=1, hi=3),
        "ell": KeySpec(int, required=True, lo=1),
        "seed": KeySpec(int, default=0),
    },
    "entropy": {
        "state": KeySpec(str, required=True),
        "dims": KeySpec(str, required=True),
        "cut": KeySpec(int, default=1, lo=1),
        "which": KeySpec(str, default="hmin", choices=("hmin", "h2", "h0", "hmax")),
        "mode": KeySpec(str, default="optimized", choices=("plugin", "optimized")),
        "optimizer_out": KeySpec(str, default=""),
        "seed": KeySpec(int, default=0),
    },
    "prop1": {
        "d1": KeySpec(int, required=True, lo=2),
        "d2": KeySpec(int, required=True, lo=2),
        "samples": KeySpec(int, required=True, lo=2),
        "seed": KeySpec(int, default=0),
    },
    "apps-merging": {
        "state": KeySpec(str, default=""),
        "dims": KeySpec(str, default=""),
        "preset": KeySpec(str, default="", choices=("", "phi_ar", "phi_br")),
        "d_a": KeySpec(int, lo=2),
        "d_b": KeySpec(int, lo=1),
        "d_r": KeySpec(int, lo=1),
        "ell": KeySpec(int, required=True, lo=1),
        "delta": KeySpec(float, required=True, lo=0.0, hi=1.0),
        "seed": KeySpec(int, default=0),
    },
    "apps-therm": {
        "state": KeySpec(str, default=""),
        "d_s": KeySpec(int, required=True, lo=2),
        "d_e": KeySpec(int, required=True, lo=1),
        "d_r": KeySpec(int, required=True, lo=1),
        "ell": KeySpec(int, required=True, lo=1),
        "eps1": KeySpec(float, required=True, lo=0.0, hi=1.0),
        "eps2": KeySpec(float, required=True, lo=0.0, hi=1.0),
        "eps3": KeySpec(float, required=True, lo=0.0, hi=1.0),
        "delta": KeySpec(float, required=True, lo=0.0, hi=2.0),
        "seed": KeySpec(int, default=0),
    },
}


@dataclass
class ExperimentConfig:
    subcommand: str
    params: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.params[key]

    def get(self, key, default=None):
        return self.params.get(key, default)


def _parse_value(raw: str, spec: KeySpec, key: str, lineno, errors: list[str]):
    where = f"line {lineno}: " if lineno is not None else ""
    if spec.typ is int:
        try:
            v = int(raw, 0)
        except ValueError:
            errors.append(f"{where}key '{key}' expects an integer, got {raw!r}")
            return None
    elif spec.typ is float:
        try:
            v = float(raw)
        except ValueError:
            errors.append(f"{where}key '{key}' expects a number, got {raw!r}")
            return None
    else:
        v = raw
    if spec.choices is not None and v not in spec.choices:
        errors.append(f"{where}key '{key}' must be one of {spec.choices}, got {v!r}")
        return None
    if spec.lo is not None and isinstance(v, (int, float)) and v < spec.lo:
        errors.append(f"{where}key '{key}' = {v} below minimum {spec.lo}")
        return None
    if spec.hi is not None and isinstance(v, (int, float)) and v > spec.hi:
        errors.append(f"{where}key '{key}' = {v} above maximum {spec.hi}")
        return None
    return v


def parse_config(source: str, overrides: list[tuple[str, str]] | None = None) -> ExperimentConfig:
    """Parse config text plus ``--set``-style overrides into a validated
    :class:`ExperimentConfig`; raises :class:`ConfigError` with every
    problem found."""
    errors: list[str] = []
    seen: dict[str, int] = {}
    raw_pairs: dict[str, tuple[str, int | None]] = {}

    for lineno, line in enumerate(source.splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            errors.append(f"line {lineno}: expected 'key = value', got {text!r}")
            continue
        key, _, val = text.partition("=")
        key, val = key.strip(), val.strip()
        if not key or not val:
            errors.append(f"line {lineno}: empty key or value")
            continue
        if key in seen:
            errors.append(f"duplicate key '{key}' on lines {seen[key]} and {lineno}")
            continue
        seen[key] = lineno
        raw_pairs[key] = (val, lineno)

    for key, val in overrides or []:
        raw_pairs[key] = (val, None)  # overrides replace file values silently

    sub_raw = raw_pairs.pop("subcommand", (None, None))[0]
    if sub_raw is None:
        errors.append("missing required key 'subcommand'")
        raise ConfigError(errors)
    if sub_raw not in SUBCOMMANDS:
        errors.append(f"unknown subcommand {sub_raw!r}; valid: {', '.join(SUBCOMMANDS)}")
        raise ConfigError(errors)

    schema = _SCHEMAS[sub_raw]
    params: dict = {}
    for key, (val, lineno) in raw_pairs.items():
        if key not in schema:
            errors.append(f"unknown key '{key}' for subcommand {sub_raw}")
            continue
        v = _parse_value(val, schema[key], key, lineno, errors)
        if v is not None:
            params[key] = v
    for key, spec in schema.items():
        if key not in params:
            if spec.required:
                errors.append(f"missing required key '{key}' for subcommand {sub_raw}")
            elif spec.default is not None:
                params[key] = spec.default
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(subcommand=sub_raw, params=params)
