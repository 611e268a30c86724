"""Command-line front end: run a scenario file and write a JSON report.

Usage::

    spinprop run scenario.toml [--output report.json]
    spinprop verify scenario.toml
    spinprop dump-trajectory scenario.toml trajectory.csv

Exit codes: 0 success, 2 analysis not applicable, 1 error (the report then
carries an ``error`` object with a stable ``code``).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__, spinalg
from .cyclic import all_cyclic_analysis, guaranteed_cyclic_family, rational_superposition_family
from .errors import (
    ClosureError,
    FieldConfigError,
    FieldDomainError,
    IntegrationAccuracyError,
    NotApplicableError,
    PreconditionError,
    SpinpropError,
)
from .precess import integrate_e, monodromy, trajectory_csv_text
from .propagate import (
    max_norm,
    oracle_propagator,
    propagator_closed_form,
    schrodinger_residual,
    transported_eigenstate_residual,
)
from .scenario import ScenarioError, load_scenario
from .verify import checkpoint_nodes, run_battery

__all__ = ["main", "run_scenario", "build_report", "dumps_report", "write_atomic"]

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_APPLICABLE = 2

_ERROR_CODES = (
    (ClosureError, "closure"),
    (IntegrationAccuracyError, "integration_accuracy"),
    (FieldDomainError, "field_domain"),
    (PreconditionError, "precondition"),
)


# -- serialization ---------------------------------------------------------


def _float(x):
    x = float(x)
    if not math.isfinite(x):
        return "null"
    text = format(x, ".17g")
    if not any(c in text for c in ".en"):
        text += ".0"
    return text


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return "null" if obj is None else ("true" if obj else "false")
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return _encode([obj.real, obj.imag], indent, level)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.number, bool)) or v is None for v in obj):
            return "[" + ", ".join(_encode(v, indent, level) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_report(report, indent=2) -> str:
    """Deterministic JSON: insertion-ordered keys, floats as ``.17g``, non-finite as ``null``."""
    return _encode(report, indent, 0) + "\n"


def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _matrix(U):
    return [[[z.real, z.imag] for z in row] for row in np.asarray(U)]


# -- analyses --------------------------------------------------------------


def _propagate(sc, rep, program):
    traj = integrate_e(program, sc.e0, sc.tau, sc.steps, pole_eps=sc.tolerances["pole_eps"])
    Ua = propagator_closed_form(rep, traj, -1, "sz")
    Ub = propagator_closed_form(rep, traj, -1, "e0")
    Uo = oracle_propagator(rep, program, sc.tau, sc.oracle_steps)
    checkpoints = []
    for i in checkpoint_nodes(sc.steps, sc.checkpoints):
        samples = [propagator_closed_form(rep, traj, j) for j in (i - 1, i, i + 1)]
        checkpoints.append(
            {
                "t": float(traj.times[i]),
                "alpha": samples[1].alpha,
                "unitarity": max_norm(samples[1].U @ samples[1].U.conj().T - np.eye(rep.dim)),
                "schrodinger_residual": schrodinger_residual(rep, program, samples),
                "transport_residual": max(
                    transported_eigenstate_residual(rep, traj, i, m) for m in rep.ms
                ),
            }
        )
    result = {
        "kind": "propagator",
        "t": Ua.t,
        "alpha": Ua.alpha,
        "U": _matrix(Ua.U),
        "U_oracle": _matrix(Uo.U),
        "form_agreement": max_norm(Ua.U - Ub.U),
        "oracle_agreement": max_norm(Ua.U - Uo.U),
        "unitarity": max_norm(Ua.U @ Ua.U.conj().T - np.eye(rep.dim)),
        "e_final": traj.e[-1],
        "checkpoints": checkpoints,
    }
    diagnostics = {
        "norm_drift": traj.drift,
        "pole_events": [
            {"time": ev.time, "step": ev.step, "sign": ev.sign, "alpha_jump": ev.alpha_jump}
            for ev in traj.pole_events
        ],
    }
    passed = (
        result["oracle_agreement"] <= sc.tolerances["oracle_tol"]
        and all(c["transport_residual"] <= sc.tolerances["transport_tol"] for c in checkpoints)
    )
    diagnostics["passed"] = bool(passed)
    return [result], diagnostics, EXIT_OK if passed else EXIT_ERROR


def _family_output(reports, extra=None):
    """Schema records plus per-report cross-checks for the diagnostics block."""
    diagnostics = {
        "alpha": [r.extras["alpha"] for r in reports],
        "gamma_direct": [r.gamma_direct for r in reports],
        "beta_quadrature": [r.extras.get("beta_quadrature", r.beta) for r in reports],
    }
    diagnostics.update(extra or {})
    return [r.to_json() for r in reports], diagnostics, EXIT_OK


def _eigen_family(sc, rep, program):
    tol = sc.tolerances
    reports = guaranteed_cyclic_family(
        rep, program, sc.tau, sc.steps, oracle_steps=sc.oracle_steps,
        sigma_tol=tol["sigma_tol"], closure_tol=tol["closure_tol"],
    )
    return _family_output(reports)


def _rational(sc, rep, program):
    tol = sc.tolerances
    r = sc.rational
    coeffs = {r["j_start"] + i: c for i, c in enumerate(r["coeffs"])}
    report = rational_superposition_family(
        rep, program, sc.tau, r["m"], coeffs, r["n"], r["p"], sc.steps,
        oracle_steps=sc.oracle_steps, rational_tol=tol["rational_tol"],
        sigma_tol=tol["sigma_tol"], closure_tol=tol["closure_tol"],
    )
    return _family_output([report], {"spin_vector_residual": report.extras["spin_vector_residual"]})


def _all_cyclic(sc, rep, program):
    tol = sc.tolerances
    reports = all_cyclic_analysis(
        rep, program, sc.tau, [np.array(st) for st in sc.states], sc.steps,
        oracle_steps=sc.oracle_steps, sigma_tol=tol["sigma_tol"], k_tol=tol["k_tol"],
        scalar_tol=tol["scalar_tol"], closure_tol=tol["closure_tol"],
    )
    extra = {
        "k_raw": [r.extras["k_raw"] for r in reports],
        "scalar_offdiag": reports[0].extras["scalar_offdiag"],
        "scalar_phase_spread": reports[0].extras["scalar_phase_spread"],
    }
    return _family_output(reports, extra)


def _verify_suite(sc, rep, program):
    checks = run_battery(
        rep, program, sc.tau, sc.steps, sc.oracle_steps, seed=sc.seed,
        checkpoints=sc.checkpoints, tolerances=sc.tolerances,
    )
    failed = [c["name"] for c in checks if not c["passed"]]
    diagnostics = {"checks": len(checks), "failed": failed}
    return checks, diagnostics, EXIT_ERROR if failed else EXIT_OK


ANALYSIS_RUNNERS = {
    "propagate": _propagate,
    "eigen_family": _eigen_family,
    "rational": _rational,
    "all_cyclic": _all_cyclic,
    "verify_suite": _verify_suite,
}


def _error_object(exc):
    if isinstance(exc, (ScenarioError,)):
        return exc.to_json()
    if isinstance(exc, FieldConfigError):
        return {"code": exc.code, "location": "field", "message": str(exc)}
    if isinstance(exc, NotApplicableError):
        return {"code": "not_applicable", "location": None, "message": str(exc)}
    for cls, code in _ERROR_CODES:
        if isinstance(exc, cls):
            return {"code": code, "location": None, "message": str(exc)}
    if isinstance(exc, OSError):
        return {"code": "io", "location": getattr(exc, "filename", None), "message": str(exc)}
    return {"code": "internal", "location": None, "message": f"{type(exc).__name__}: {exc}"}


def build_report(sc, analysis=None):
    """Run ``sc`` and return ``(exit_code, report)``; failures become ``error`` objects."""
    analysis = analysis or sc.analysis
    report = {
        "scenario": sc.to_dict(),
        "results": [],
        "diagnostics": {
            "analysis": analysis,
            "version": __version__,
            "steps": sc.steps,
            "oracle_steps": sc.oracle_steps,
            "seed": sc.seed,
            "tolerances": dict(sc.tolerances),
        },
    }
    try:
        rep = spinalg.build_spin_rep(sc.twice_s)
        program = sc.program
        mono = monodromy(program, sc.tau, sc.steps, sigma_tol=sc.tolerances["sigma_tol"])
        report["diagnostics"]["monodromy"] = {
            "sigma": mono.sigma,
            "axis_eta": mono.axis_eta,
            "rotation_angle": mono.rotation_angle,
            "identity": mono.identity_flag,
            "projection_delta": mono.projection_delta,
        }
        results, extra, code = ANALYSIS_RUNNERS[analysis](sc, rep, program)
    except NotApplicableError as exc:
        report["error"] = _error_object(exc)
        return EXIT_NOT_APPLICABLE, report
    except (SpinpropError, ValueError, ArithmeticError) as exc:
        report["error"] = _error_object(exc)
        return EXIT_ERROR, report
    report["results"] = results
    report["diagnostics"].update(extra)
    return code, report


def run_scenario(sc, output=None, analysis=None, stream=None):
    """Run a scenario and write its report to ``output`` (or the scenario's path, or ``stream``)."""
    code, report = build_report(sc, analysis)
    text = dumps_report(report)
    path = output or sc.output.get("report")
    if path:
        write_atomic(path, text)
    else:
        (stream or sys.stdout).write(text)
    return code


def dump_trajectory(sc, path):
    traj = integrate_e(sc.program, sc.e0, sc.tau, sc.steps, pole_eps=sc.tolerances["pole_eps"])
    write_atomic(path, trajectory_csv_text(traj))
    return traj


def _parser():
    ap = argparse.ArgumentParser(prog="spinprop", description="Spin propagators from one precession trajectory.")
    ap.add_argument("--log-level", default="WARNING", help="Logging level (default WARNING).")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("scenario", help="Scenario TOML file.")
        p.add_argument("--steps", type=int, default=None, help="Override RK4 steps.")
        p.add_argument("--oracle-steps", type=int, default=None, help="Override oracle steps.")
        p.add_argument("--seed", type=int, default=None, help="Override the random seed.")

    p_run = sub.add_parser("run", help="Run the scenario's analysis.")
    common(p_run)
    p_run.add_argument("--output", default=None, help="Report path (default: scenario output.report or stdout).")
    p_ver = sub.add_parser("verify", help="Run the invariant battery on the scenario's field.")
    common(p_ver)
    p_ver.add_argument("--output", default=None, help="Report path.")
    p_dump = sub.add_parser("dump-trajectory", help="Write the precession trajectory as CSV.")
    common(p_dump)
    p_dump.add_argument("csv", help="Output CSV path.")
    return ap


def _fail(err, stream):
    stream.write(dumps_report({"error": err}))
    return EXIT_ERROR


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING))
    try:
        sc = load_scenario(args.scenario)
        for name, low in (("steps", 8), ("oracle_steps", 64)):
            value = getattr(args, name)
            if value is not None and value < low:
                raise ScenarioError("invalid_value", f"{name} must be >= {low}", f"--{name.replace('_', '-')}")
        sc = sc.with_overrides(steps=args.steps, oracle_steps=args.oracle_steps, seed=args.seed)
    except (ScenarioError, OSError) as exc:
        return _fail(_error_object(exc), sys.stderr)

    if args.command == "dump-trajectory":
        try:
            dump_trajectory(sc, args.csv)
        except (SpinpropError, ValueError, OSError) as exc:
            return _fail(_error_object(exc), sys.stderr)
        return EXIT_OK
    analysis = "verify_suite" if args.command == "verify" else None
    try:
        return run_scenario(sc, output=args.output, analysis=analysis)
    except OSError as exc:
        return _fail(_error_object(exc), sys.stderr)


if __name__ == "__main__":
    raise SystemExit(main())
