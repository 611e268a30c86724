"""Scenario files: a versioned TOML document describing one analysis run.

Grammar (``version = 1``)::

    version = 1
    twice_s = 2                 # 2s, integer >= 1
    tau = 6.0                   # interval length
    analysis = "eigen_family"   # propagate | eigen_family | rational | all_cyclic | verify_suite
    steps = 4096                # optional, RK4 steps (>= 8)
    oracle_steps = 100000       # optional, midpoint steps of the oracle (>= 64)
    seed = 0                    # optional, randomized checks of verify_suite only
    e0 = [0.0, 0.0, 1.0]        # optional, initial vector for propagate / dump-trajectory
    checkpoints = 16            # optional, interior checkpoints for propagate / verify_suite

    [field]                     # one of the program kinds of spinprop.field
    kind = "rotating"
    ...

    [rational]                  # analysis = "rational"
    m = -1.0
    n = 1
    p = 1
    j_start = 0                 # j of the first coefficient (may be negative)
    coeffs = [[0.6, 0.0], [0.8, 0.0]]   # complex numbers as [re, im] or plain reals

    [all_cyclic]                # analysis = "all_cyclic"
    states = [[[1.0, 0.0], [0.0, 0.0]], ...]   # amplitudes in the descending-m s_z basis

    [tolerances]                # optional overrides, see DEFAULT_TOLERANCES
    sigma_tol = 1e-6

    [output]                    # optional
    report = "report.json"
    trajectory_csv = "trajectory.csv"

Amplitude lists are renormalized with a warning when their norm is off by
less than 1e-4 and rejected beyond that.
"""

from __future__ import annotations

import logging
import math
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import FieldConfigError, SpinpropError
from .field import program_from_dict

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

__all__ = ["Scenario", "ScenarioError", "parse_scenario", "load_scenario", "ANALYSES", "DEFAULT_TOLERANCES"]

log = logging.getLogger(__name__)

SCENARIO_VERSION = 1
ANALYSES = ("propagate", "eigen_family", "rational", "all_cyclic", "verify_suite")
DEFAULT_TOLERANCES = {
    "sigma_tol": 1e-6,
    "k_tol": 1e-4,
    "rational_tol": 1e-6,
    "closure_tol": 1e-6,
    "scalar_tol": 1e-6,
    "pole_eps": 1e-7,
    "oracle_tol": 1e-6,
    "transport_tol": 1e-7,
}
TOP_KEYS = {
    "version", "twice_s", "tau", "analysis", "steps", "oracle_steps", "seed", "e0", "checkpoints",
    "field", "rational", "all_cyclic", "tolerances", "output",
}
AMP_TOL = 1e-8
AMP_RENORM_TOL = 1e-4


class ScenarioError(SpinpropError, ValueError):
    """Invalid scenario document. ``code`` is stable and machine-readable."""

    def __init__(self, code, message, location=None):
        self.code = code
        self.location = location
        where = f" at {location}" if location else ""
        super().__init__(f"[{code}]{where}: {message}")

    def to_json(self):
        return {"code": self.code, "location": self.location, "message": str(self)}


@dataclass(frozen=True)
class Scenario:
    """Fully validated scenario with all defaults resolved."""

    twice_s: int
    tau: float
    analysis: str
    field: dict
    steps: int = 4096
    oracle_steps: int = 100_000
    seed: int = 0
    e0: tuple = (0.0, 0.0, 1.0)
    checkpoints: int = 16
    rational: dict | None = None
    states: tuple | None = None
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    output: dict = field(default_factory=lambda: {"report": None, "trajectory_csv": None})
    version: int = SCENARIO_VERSION

    @property
    def program(self):
        return program_from_dict(self.field)

    def with_overrides(self, **changes):
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def to_dict(self):
        """Plain-data form used in reports and for serialization."""
        d = {
            "version": self.version,
            "twice_s": self.twice_s,
            "tau": self.tau,
            "analysis": self.analysis,
            "steps": self.steps,
            "oracle_steps": self.oracle_steps,
            "seed": self.seed,
            "e0": list(self.e0),
            "checkpoints": self.checkpoints,
            "field": self.field,
            "tolerances": dict(self.tolerances),
        }
        if self.rational is not None:
            r = dict(self.rational)
            r["coeffs"] = [[c.real, c.imag] for c in r["coeffs"]]
            d["rational"] = r
        if self.states is not None:
            d["all_cyclic"] = {"states": [[[a.real, a.imag] for a in st] for st in self.states]}
        out = {k: v for k, v in self.output.items() if v is not None}
        if out:
            d["output"] = out
        return d

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())


def _number(value, loc, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError("malformed_number", f"expected a number, got {value!r}", loc)
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise ScenarioError("malformed_number", f"expected an integer, got {value!r}", loc)
        return int(value)
    if not math.isfinite(value):
        raise ScenarioError("malformed_number", f"non-finite value {value!r}", loc)
    return float(value)


def _complex(value, loc):
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ScenarioError("malformed_number", "complex numbers are [re, im] pairs", loc)
        return complex(_number(value[0], loc), _number(value[1], loc))
    return complex(_number(value, loc))


def _amplitudes(values, loc):
    if not isinstance(values, list) or not values:
        raise ScenarioError("invalid_value", "expected a non-empty list of amplitudes", loc)
    amps = np.array([_complex(v, f"{loc}[{i}]") for i, v in enumerate(values)])
    norm = float(np.linalg.norm(amps))
    if abs(norm - 1.0) > AMP_RENORM_TOL or norm == 0:
        raise ScenarioError("unnormalized_amplitudes", f"amplitude norm {norm!r} is not 1", loc)
    if abs(norm - 1.0) > AMP_TOL:
        log.warning("renormalizing amplitudes at %s (norm %.10f)", loc, norm)
        amps = amps / norm
    return tuple(complex(a) for a in amps)


def _check_keys(table, allowed, loc):
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        where = f"{loc}.{unknown[0]}" if loc else unknown[0]
        raise ScenarioError("unknown_key", f"unknown key {unknown[0]!r}", where)


def _require(table, key, loc):
    if key not in table:
        raise ScenarioError("missing_key", f"required key {key!r} is missing", f"{loc}.{key}" if loc else key)
    return table[key]


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document.

    Raises
    ------
    ScenarioError
        With ``code`` one of ``syntax``, ``unsupported_version``,
        ``missing_key``, ``unknown_key``, ``malformed_number``,
        ``non_unit_axis``, ``unknown_field_kind``, ``invalid_value`` or
        ``unnormalized_amplitudes``.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError("syntax", str(exc)) from None
    _check_keys(doc, TOP_KEYS, "")

    version = _number(_require(doc, "version", ""), "version", int)
    if version != SCENARIO_VERSION:
        raise ScenarioError("unsupported_version", f"version {version} is not supported", "version")
    twice_s = _number(_require(doc, "twice_s", ""), "twice_s", int)
    if not 1 <= twice_s <= 40:
        raise ScenarioError("invalid_value", "twice_s must be in [1, 40]", "twice_s")
    tau = _number(_require(doc, "tau", ""), "tau")
    if tau <= 0:
        raise ScenarioError("invalid_value", "tau must be positive", "tau")
    analysis = _require(doc, "analysis", "")
    if analysis not in ANALYSES:
        raise ScenarioError("invalid_value", f"analysis must be one of {ANALYSES}", "analysis")
    steps = _number(doc.get("steps", 4096), "steps", int)
    if steps < 8:
        raise ScenarioError("invalid_value", "steps must be >= 8", "steps")
    oracle_steps = _number(doc.get("oracle_steps", 100_000), "oracle_steps", int)
    if oracle_steps < 64:
        raise ScenarioError("invalid_value", "oracle_steps must be >= 64", "oracle_steps")
    seed = _number(doc.get("seed", 0), "seed", int)
    checkpoints = _number(doc.get("checkpoints", 16), "checkpoints", int)
    if checkpoints < 1:
        raise ScenarioError("invalid_value", "checkpoints must be >= 1", "checkpoints")
    e0 = doc.get("e0", [0.0, 0.0, 1.0])
    if not isinstance(e0, list) or len(e0) != 3:
        raise ScenarioError("invalid_value", "e0 must be a 3-vector", "e0")
    e0 = tuple(_number(v, f"e0[{i}]") for i, v in enumerate(e0))
    if abs(math.hypot(*e0) - 1.0) > 1e-9:
        raise ScenarioError("non_unit_axis", "e0 must be a unit vector", "e0")

    field_doc = _require(doc, "field", "")
    if not isinstance(field_doc, dict):
        raise ScenarioError("invalid_value", "field must be a table", "field")
    try:
        program = program_from_dict(field_doc)
        if tau > program.t_max * (1 + 1e-12):
            raise ScenarioError("invalid_value", f"tau exceeds the field domain t_max={program.t_max}", "tau")
        canonical_field = program.to_dict()
    except FieldConfigError as exc:
        raise ScenarioError(exc.code, str(exc), "field") from None

    tolerances = dict(DEFAULT_TOLERANCES)
    tol_doc = doc.get("tolerances", {})
    _check_keys(tol_doc, DEFAULT_TOLERANCES, "tolerances")
    for key, value in tol_doc.items():
        tolerances[key] = _number(value, f"tolerances.{key}")
        if tolerances[key] <= 0:
            raise ScenarioError("invalid_value", "tolerances must be positive", f"tolerances.{key}")

    output = {"report": None, "trajectory_csv": None}
    out_doc = doc.get("output", {})
    _check_keys(out_doc, output, "output")
    for key, value in out_doc.items():
        if not isinstance(value, str):
            raise ScenarioError("invalid_value", "output paths must be strings", f"output.{key}")
        output[key] = value

    rational = None
    if "rational" in doc or analysis == "rational":
        r_doc = _require(doc, "rational", "") if analysis == "rational" else doc["rational"]
        _check_keys(r_doc, {"m", "n", "p", "j_start", "coeffs"}, "rational")
        coeffs = _amplitudes(_require(r_doc, "coeffs", "rational"), "rational.coeffs")
        rational = {
            "m": _number(_require(r_doc, "m", "rational"), "rational.m"),
            "n": _number(_require(r_doc, "n", "rational"), "rational.n", int),
            "p": _number(_require(r_doc, "p", "rational"), "rational.p", int),
            "j_start": _number(r_doc.get("j_start", 0), "rational.j_start", int),
            "coeffs": coeffs,
        }

    states = None
    if "all_cyclic" in doc or analysis == "all_cyclic":
        a_doc = _require(doc, "all_cyclic", "") if analysis == "all_cyclic" else doc["all_cyclic"]
        _check_keys(a_doc, {"states"}, "all_cyclic")
        raw = _require(a_doc, "states", "all_cyclic")
        if not isinstance(raw, list) or not raw:
            raise ScenarioError("invalid_value", "states must be a non-empty list", "all_cyclic.states")
        states = tuple(_amplitudes(st, f"all_cyclic.states[{i}]") for i, st in enumerate(raw))
        for i, st in enumerate(states):
            if len(st) != twice_s + 1:
                raise ScenarioError(
                    "invalid_value", f"state needs {twice_s + 1} amplitudes", f"all_cyclic.states[{i}]"
                )

    return Scenario(
        twice_s=twice_s,
        tau=tau,
        analysis=analysis,
        field=canonical_field,
        steps=steps,
        oracle_steps=oracle_steps,
        seed=seed,
        e0=e0,
        checkpoints=checkpoints,
        rational=rational,
        states=states,
        tolerances=tolerances,
        output=output,
        version=version,
    )


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())
