"""Invariant battery for one spin and field program (``verify_suite`` analysis)."""

from __future__ import annotations

import numpy as np

from . import spinalg
from .cyclic import guaranteed_cyclic_family
from .precess import integrate_e, monodromy, wrap_angle
from .propagate import (
    max_norm,
    oracle_propagator,
    propagator_closed_form,
    schrodinger_residual,
    transported_eigenstate_residual,
)

__all__ = ["run_battery", "random_unit_vectors", "checkpoint_nodes"]


def random_unit_vectors(rng, count):
    v = rng.normal(size=(count, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def checkpoint_nodes(steps, count):
    """``count`` interior node indices spread evenly over ``1 .. steps-1``."""
    return np.unique(np.linspace(1, steps - 1, count).round().astype(int))


def conjugation_residual(rep, xi, b, U=None):
    """Max-norm defect of ``U s U^dagger = R(b, xi) s`` for ``U = exp(i xi s.b)``.

    Rotating the operator vector by ``U`` turns it about ``b`` through ``xi``:
    ``s cos xi + (s.b) b (1 - cos xi) + (b x s) sin xi``.
    """
    b = np.asarray(b, dtype=float)
    if U is None:
        U = spinalg.exp_i_spin(rep, xi, b)
    gens = rep.generators
    sb = np.tensordot(b, gens, axes=1)
    worst = 0.0
    for k in range(3):
        lhs = U @ gens[k] @ U.conj().T
        b_cross_s = sum(np.cross(b, np.eye(3)[l])[k] * gens[l] for l in range(3))
        rhs = gens[k] * np.cos(xi) + sb * b[k] * (1 - np.cos(xi)) + b_cross_s * np.sin(xi)
        worst = max(worst, max_norm(lhs - rhs))
    return worst


def _check(name, value, tol):
    value = float(value)
    return {"name": name, "value": value, "tol": float(tol), "passed": bool(value <= tol)}


def run_battery(rep, program, tau, steps, oracle_steps, seed=0, checkpoints=16, tolerances=None):
    """Run every module invariant and return a list of check records.

    Each record is ``{"name", "value", "tol", "passed"}``; a check passes
    when ``value <= tol``.
    """
    tol = {"oracle_tol": 1e-6, "transport_tol": 1e-7, "closure_tol": 1e-6, "sigma_tol": 1e-6}
    tol.update(tolerances or {})
    rng = np.random.default_rng(seed)
    checks = []
    gens = rep.generators
    eye = np.eye(rep.dim)

    herm = max(max_norm(g - g.conj().T) for g in gens)
    checks.append(_check("spin_hermiticity", herm, 1e-14))
    comm = 0.0
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        comm = max(comm, max_norm(gens[i] @ gens[j] - gens[j] @ gens[i] - 1j * gens[k]))
    checks.append(_check("spin_commutators", comm, 1e-12))
    s = float(rep.s)
    casimir = sum(g @ g for g in gens) - s * (s + 1) * eye
    checks.append(_check("spin_casimir", max_norm(casimir), 1e-12))

    worst = 0.0
    for b, xi in zip(random_unit_vectors(rng, 20), rng.uniform(0, 2 * np.pi, 20)):
        U = spinalg.exp_i_spin(rep, xi, b)
        worst = max(worst, conjugation_residual(rep, xi, b, U))
    checks.append(_check("rotation_conjugation", worst, 1e-10))

    mono = monodromy(program, tau, steps, sigma_tol=tol["sigma_tol"])
    E = mono.E
    checks.append(_check("monodromy_orthogonality", max_norm(E.T @ E - np.eye(3)), 1e-9))
    checks.append(_check("monodromy_determinant", abs(np.linalg.det(E) - 1.0), 1e-9))
    checks.append(_check("monodromy_axis", max_norm(E @ mono.axis_eta - mono.axis_eta), 1e-8))

    e0_rand = random_unit_vectors(rng, 1)[0]
    traj = integrate_e(program, e0_rand, tau, steps)
    traj_z = integrate_e(program, np.array([0.0, 0.0, 1.0]), tau, steps)
    traj_neg = integrate_e(program, -e0_rand, tau, steps)
    checks.append(_check("norm_drift_per_step", traj.drift, 1e-8))
    checks.append(_check("monodromy_linearity", max_norm(E @ e0_rand - traj.e[-1]), 1e-7))
    checks.append(_check("antipodal_symmetry", max_norm(traj_neg.e + traj.e), 0.0))
    dots = np.einsum("ij,ij->i", traj.e, traj_z.e)
    checks.append(_check("dot_product_conservation", np.max(np.abs(dots - dots[0])), 5e-9))

    Ua = propagator_closed_form(rep, traj, -1, "sz").U
    Ub = propagator_closed_form(rep, traj, -1, "e0").U
    Uz = propagator_closed_form(rep, traj_z, -1, "sz").U
    Uo = oracle_propagator(rep, program, tau, oracle_steps).U
    checks.append(_check("unitarity", max_norm(Ua @ Ua.conj().T - eye), 1e-10))
    checks.append(_check("form_equivalence", max_norm(Ua - Ub), 1e-10))
    checks.append(_check("oracle_agreement", max_norm(Ua - Uo), tol["oracle_tol"]))
    checks.append(_check("e0_independence", max_norm(Ua - Uz), tol["oracle_tol"]))

    nodes = checkpoint_nodes(steps, checkpoints)
    transport = max(
        transported_eigenstate_residual(rep, traj, i, m) for i in nodes for m in rep.ms
    )
    checks.append(_check("eigenstate_transport", transport, tol["transport_tol"]))
    spin_vec = 0.0
    for m in rep.ms:
        chi = spinalg.eigenstate_of_spin_dot(rep, traj.e[0], m)
        for i in nodes:
            psi = propagator_closed_form(rep, traj, i).U @ chi
            spin_vec = max(spin_vec, max_norm(spinalg.spin_expectation(rep, psi) - m * traj.e[i]))
    checks.append(_check("spin_vector_transport", spin_vec, tol["transport_tol"]))

    h = tau / steps
    w_max = float(np.max(np.abs(program.evaluate_many(traj.times)[0])))
    fd_tol = h**2 * (w_max * (s + 1)) ** 3 + 1e-10
    sch = 0.0
    for i in nodes:
        samples = [propagator_closed_form(rep, traj, j) for j in (i - 1, i, i + 1)]
        sch = max(sch, schrodinger_residual(rep, program, samples))
    checks.append(_check("schrodinger_residual", sch, fd_tol))

    reports = guaranteed_cyclic_family(rep, program, tau, steps, oracle_steps=oracle_steps,
                                       sigma_tol=tol["sigma_tol"], closure_tol=tol["closure_tol"])
    checks.append(_check("eigen_family_count", abs(len(reports) - rep.dim), 0.0))
    checks.append(_check("eigen_family_cyclicity", max(r.cyclicity_residual for r in reports), 1e-6))
    checks.append(
        _check(
            "eigen_family_phase",
            max(abs(wrap_angle(r.delta_spectroscopic - r.delta)) for r in reports),
            tol["oracle_tol"],
        )
    )
    checks.append(
        _check(
            "eigen_family_gamma",
            max(abs(wrap_angle(r.gamma_direct - r.gamma)) for r in reports),
            tol["oracle_tol"],
        )
    )
    return checks
