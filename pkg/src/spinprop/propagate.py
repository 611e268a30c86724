"""Spin propagators: closed form from one precession trajectory, and a
time-ordered product oracle.

With ``theta(t), phi(t)`` the spherical angles of ``e(t)``,
``d(t) = (-sin phi, cos phi, 0)`` and ``alpha(t)`` the accumulated phase
angle of the trajectory, the propagator of ``dpsi/dt = i omega_B s.n psi`` is

    U(t) = exp(-i theta(t) s.d(t)) exp(i alpha(t) s_z) exp(i theta(0) s.d(0))     (form "sz")
         = exp(-i theta(t) s.d(t)) exp(i theta(0) s.d(0)) exp(i alpha(t) s.e0)   (form "e0")
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spinalg
from .errors import PreconditionError
from .precess import PrecessionTrajectory
from .spinalg import SpinRep, azimuth_axis, exp_i_spin, exp_i_spin_batch

__all__ = [
    "Propagator",
    "alpha_of",
    "propagator_closed_form",
    "oracle_propagator",
    "schrodinger_residual",
    "transported_eigenstate_residual",
    "max_norm",
    "FORMS",
]

FORMS = ("sz", "e0")
MIN_ORACLE_STEPS = 64


@dataclass(frozen=True)
class Propagator:
    """Unitary ``U`` at time ``t``; ``source`` is ``closed_form_sz``, ``closed_form_e0`` or ``oracle``."""

    U: np.ndarray
    t: float
    alpha: float | None
    source: str


def max_norm(a) -> float:
    return float(np.max(np.abs(a)))


def alpha_of(traj: PrecessionTrajectory, node: int) -> float:
    """Phase angle ``alpha`` at a trajectory node (geometric plus dynamic part)."""
    return float(traj.alpha_geo[node] + traj.alpha_dyn[node])


def _node(traj, node):
    node = int(node)
    if not -len(traj) <= node < len(traj):
        raise PreconditionError(f"node {node} outside trajectory of {len(traj)} nodes")
    return node % len(traj)


def propagator_closed_form(rep: SpinRep, traj: PrecessionTrajectory, node: int, form: str = "sz") -> Propagator:
    """Assemble ``U(t_node)`` from the trajectory without any time ordering."""
    if form not in FORMS:
        raise PreconditionError(f"form must be one of {FORMS}, got {form!r}")
    node = _node(traj, node)
    if node == 0:
        return Propagator(np.eye(rep.dim, dtype=complex), float(traj.times[0]), 0.0, f"closed_form_{form}")
    alpha = alpha_of(traj, node)
    d_t = azimuth_axis(traj.phi_unwrapped[node])
    d_0 = azimuth_axis(traj.phi_unwrapped[0])
    back = exp_i_spin(rep, -traj.theta[node], d_t)
    start = exp_i_spin(rep, traj.theta[0], d_0)
    if form == "sz":
        U = back @ np.diag(np.exp(1j * alpha * rep.ms)) @ start
    else:
        U = back @ start @ exp_i_spin(rep, alpha, traj.e[0])
    return Propagator(U, float(traj.times[node]), alpha, f"closed_form_{form}")


def _ordered_product(factors):
    """``F[N-1] @ ... @ F[1] @ F[0]`` by pairwise reduction."""
    F = factors
    while F.shape[0] > 1:
        if F.shape[0] % 2:
            tail = F[-1:]
            F = F[:-1]
        else:
            tail = None
        F = F[1::2] @ F[0::2]
        if tail is not None:
            F = np.concatenate([F, tail])
    return F[0]


def oracle_propagator(rep: SpinRep, program, t_end: float, steps: int = 100_000) -> Propagator:
    """Time-ordered product of exact midpoint exponentials.

    Each factor is ``exp(i dt omega_B(t_mid) s.n(t_mid))``, evaluated
    spectrally, so the only error is the second-order time-ordering error.
    """
    if int(steps) != steps or steps < MIN_ORACLE_STEPS:
        raise PreconditionError(f"oracle steps must be an integer >= {MIN_ORACLE_STEPS}")
    if t_end < 0 or t_end > program.t_max * (1 + 1e-12):
        raise PreconditionError(f"t_end={t_end!r} outside the program domain")
    steps = int(steps)
    dt = float(t_end) / steps
    mids = (np.arange(steps) + 0.5) * dt
    w, n = program.evaluate_many(mids)
    factors = exp_i_spin_batch(rep, dt * w, n)
    return Propagator(_ordered_product(factors), float(t_end), None, "oracle")


def schrodinger_residual(rep: SpinRep, program, U_samples) -> float:
    """Largest central-difference residual of ``dU/dt = i omega_B s.n U``.

    ``U_samples`` are propagators at equally spaced consecutive times; the
    residual is a max-entry norm over interior samples.
    """
    if len(U_samples) < 3:
        raise PreconditionError("at least 3 propagator samples are required")
    ts = np.array([p.t for p in U_samples])
    h = np.diff(ts)
    if np.any(h <= 0) or np.max(np.abs(h - h[0])) > 1e-9 * max(1.0, abs(h[0])):
        raise PreconditionError("propagator samples must be equally spaced in increasing time")
    worst = 0.0
    for i in range(1, len(U_samples) - 1):
        deriv = (U_samples[i + 1].U - U_samples[i - 1].U) / (ts[i + 1] - ts[i - 1])
        w, n = program.evaluate(ts[i])
        rhs = 1j * w * spinalg.spin_dot(rep, n) @ U_samples[i].U
        worst = max(worst, max_norm(deriv - rhs))
    return worst


def transported_eigenstate_residual(rep: SpinRep, traj: PrecessionTrajectory, node: int, m, form="sz") -> float:
    """``|(s.e(t)) psi(t) - m psi(t)|`` for ``psi(0)`` the ``m`` eigenstate of ``s.e0``."""
    node = _node(traj, node)
    chi = spinalg.eigenstate_of_spin_dot(rep, traj.e[0], m)
    psi = propagator_closed_form(rep, traj, node, form).U @ chi
    return float(np.linalg.norm(spinalg.spin_dot(rep, traj.e[node]) @ psi - float(m) * psi))
