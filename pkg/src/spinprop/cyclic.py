"""Cyclic solutions over ``[0, tau]`` and the decomposition of their phases.

Three families are covered:

* eigenstates of ``s.eta`` where ``eta`` is the axis of the monodromy
  rotation (always ``2s+1`` of them);
* superpositions of levels ``m, m + 2n, ...`` along ``eta`` when
  ``alpha(tau) = p pi / n``;
* arbitrary states when the monodromy is the identity, so that ``U(tau)`` is a
  scalar ``exp(2 pi i k s)``.

Every report carries the total phase both as predicted from ``alpha(tau)``
(``delta``) and as measured from the overlap ``<psi(0)|U(tau)|psi(0)>``
(``delta_spectroscopic``).
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from . import spinalg
from .errors import IntegrationAccuracyError, NotApplicableError, PreconditionError
from .precess import CLOSURE_TOL, SIGMA_TOL, integrate_e, monodromy, solid_angle, wrap_angle
from .propagate import alpha_of, max_norm, oracle_propagator, propagator_closed_form

__all__ = [
    "CyclicReport",
    "REPORT_FIELDS",
    "guaranteed_cyclic_family",
    "rational_superposition_family",
    "all_cyclic_analysis",
    "alpha_sensitivity",
    "winding_relation_check",
    "scalar_residual",
]

REPORT_FIELDS = (
    "kind",
    "m_or_v0",
    "delta",
    "beta",
    "gamma",
    "omega_e",
    "omega_v",
    "K",
    "k",
    "cyclicity_residual",
    "delta_spectroscopic",
)
RATIONAL_TOL = 1e-6
K_TOL = 1e-4
SCALAR_TOL = 1e-6
NORM_TOL = 1e-10
ZERO_SPIN_TOL = 1e-12
FOUR_PI = 4 * np.pi


@dataclass
class CyclicReport:
    """Phase decomposition of one cyclic solution.

    Phases ``delta``, ``gamma`` and ``delta_spectroscopic`` are reduced to
    ``(-pi, pi]``; ``beta`` is the unreduced dynamic phase. Quantities that
    are undefined for a report are ``None``. ``extras`` holds cross-checks
    that are not part of the serialized schema.
    """

    kind: str
    m_or_v0: float
    delta: float
    beta: float
    gamma: float
    omega_e: float | None
    omega_v: float | None
    K: int | None
    k: int | None
    cyclicity_residual: float
    delta_spectroscopic: float
    extras: dict = field(default_factory=dict, repr=False)

    @property
    def gamma_direct(self) -> float:
        """Geometric phase measured as ``delta_spectroscopic - beta``."""
        return float(wrap_angle(self.delta_spectroscopic - self.beta))

    def to_json(self) -> dict:
        return {name: getattr(self, name) for name in REPORT_FIELDS}


def _phase_of_overlap(psi0, U):
    return float(np.angle(np.vdot(psi0, U @ psi0)))


class _Interval:
    """Shared trajectory/propagator bookkeeping for one ``e0`` on ``[0, tau]``."""

    def __init__(self, rep, program, tau, e0, steps, closure_tol):
        self.traj = integrate_e(program, e0, tau, steps)
        self.omega_e, self.K = solid_angle(self.traj, closure_tol)
        self.alpha = alpha_of(self.traj, -1)
        self.dyn = float(self.traj.alpha_dyn[-1])
        self.U = propagator_closed_form(rep, self.traj, -1).U

    def omega_v(self, sign):
        """Solid angle of the trace of ``sign * e``; ``None`` when the spin vector vanishes."""
        if sign > 0:
            return self.omega_e
        if sign < 0:
            return FOUR_PI * self.K - self.omega_e
        return None


def _spectroscopic_U(rep, program, tau, closed_U, oracle_steps):
    if oracle_steps:
        return oracle_propagator(rep, program, tau, oracle_steps).U
    return closed_U


def guaranteed_cyclic_family(
    rep,
    program,
    tau,
    steps=4096,
    oracle_steps=None,
    sigma_tol=SIGMA_TOL,
    closure_tol=CLOSURE_TOL,
):
    """The ``2s+1`` eigenstates of ``s.eta(tau)``, each cyclic on ``[0, tau]``.

    Parameters
    ----------
    rep : SpinRep
    program
        Field program.
    tau : float
        Interval length.
    steps : int
        RK4 steps for the trajectories.
    oracle_steps : int, optional
        If given, ``delta_spectroscopic`` is measured with the time-ordered
        oracle instead of the closed-form propagator.

    Returns
    -------
    list of CyclicReport
        One report per ``m = s, s-1, ..., -s``.
    """
    mono = monodromy(program, tau, steps, sigma_tol=sigma_tol)
    e0 = mono.axis_eta
    iv = _Interval(rep, program, tau, e0, steps, closure_tol)
    U_spec = _spectroscopic_U(rep, program, tau, iv.U, oracle_steps)

    reports = []
    for m in rep.ms:
        chi = spinalg.eigenstate_of_spin_dot(rep, e0, m)
        delta = float(wrap_angle(m * iv.alpha))
        omega_v = iv.omega_v(np.sign(m))
        gamma = float(wrap_angle(-m * iv.omega_e))
        gamma_v = 0.0 if omega_v is None else float(wrap_angle(-abs(m) * omega_v))
        reports.append(
            CyclicReport(
                kind="eigen_family",
                m_or_v0=float(m),
                delta=delta,
                beta=float(m * iv.dyn),
                gamma=gamma,
                omega_e=iv.omega_e,
                omega_v=omega_v,
                K=iv.K,
                k=None,
                cyclicity_residual=float(np.linalg.norm(iv.U @ chi - np.exp(1j * delta) * chi)),
                delta_spectroscopic=_phase_of_overlap(chi, U_spec),
                extras={
                    "alpha": iv.alpha,
                    "e0": e0.tolist(),
                    "sigma": [mono.sigma.real, mono.sigma.imag],
                    "identity_flag": mono.identity_flag,
                    "gamma_from_omega_v": gamma_v,
                    "closure_residual": float(np.linalg.norm(iv.traj.e[-1] - e0)),
                },
            )
        )
    return reports


def _coefficient_map(coeffs):
    if isinstance(coeffs, Mapping):
        items = {int(j): complex(c) for j, c in coeffs.items()}
    else:
        items = {j: complex(c) for j, c in enumerate(coeffs)}
    if not items:
        raise PreconditionError("at least one coefficient is required")
    return dict(sorted(items.items()))


def rational_superposition_family(
    rep,
    program,
    tau,
    m,
    coeffs,
    n,
    p,
    steps=4096,
    oracle_steps=None,
    rational_tol=RATIONAL_TOL,
    sigma_tol=SIGMA_TOL,
    closure_tol=CLOSURE_TOL,
):
    """Cyclic superposition ``sum_j c_j chi_{m + 2 n j}`` along ``eta(tau)``.

    Requires ``alpha(tau) = p pi / n`` within ``rational_tol``. ``coeffs`` is
    either a sequence (``j = 0, 1, ...``) or a mapping ``j -> c_j`` that may
    include negative ``j``.

    Raises
    ------
    PreconditionError
        For invalid ``(n, p)``, ``s < n``, levels off the ladder, or
        coefficients that are not normalized.
    NotApplicableError
        If ``alpha(tau)`` does not match ``p pi / n``.
    """
    if int(n) != n or n < 1 or int(p) != p:
        raise PreconditionError("n must be a natural number and p an integer")
    n, p = int(n), int(p)
    if n == 1 and p % 2 == 0:
        raise PreconditionError("for n = 1, p must be odd")
    if n > 1 and math.gcd(p, n) != 1:
        raise PreconditionError(f"p={p} and n={n} must be coprime")
    if rep.twice_s < 2 * n:
        raise PreconditionError(f"spin {rep.s} admits no superposition with level spacing 2n = {2 * n}")
    cmap = _coefficient_map(coeffs)
    norm = sum(abs(c) ** 2 for c in cmap.values())
    if abs(norm - 1.0) > NORM_TOL:
        raise PreconditionError(f"coefficients must be normalized (sum |c|^2 = {norm!r})")
    levels = {j: float(m) + 2 * n * j for j in cmap}
    for lvl in levels.values():
        rep.index_of(lvl)

    mono = monodromy(program, tau, steps, sigma_tol=sigma_tol)
    e0 = mono.axis_eta
    iv = _Interval(rep, program, tau, e0, steps, closure_tol)
    target = p * np.pi / n
    if abs(iv.alpha - target) > rational_tol:
        raise NotApplicableError(f"alpha(tau) = {iv.alpha!r} does not match p*pi/n = {target!r}")

    psi0 = sum(c * spinalg.eigenstate_of_spin_dot(rep, e0, levels[j]) for j, c in cmap.items())
    v0 = float(sum(levels[j] * abs(c) ** 2 for j, c in cmap.items()))
    sgn = 0 if abs(v0) < ZERO_SPIN_TOL else int(np.sign(v0))
    omega_v = iv.omega_v(sgn)
    delta = float(wrap_angle(float(m) * iv.alpha))
    beta = v0 * (iv.alpha + iv.omega_e)
    omega_term = 0.0 if omega_v is None else -abs(v0) * omega_v
    gamma = float(
        wrap_angle(omega_term + 2 * np.pi * iv.K * (abs(v0) - v0) + (float(m) - v0) * p * np.pi / n)
    )
    U_spec = _spectroscopic_U(rep, program, tau, iv.U, oracle_steps)
    return CyclicReport(
        kind="rational_superposition",
        m_or_v0=v0,
        delta=delta,
        beta=float(beta),
        gamma=gamma,
        omega_e=iv.omega_e,
        omega_v=omega_v,
        K=iv.K,
        k=None,
        cyclicity_residual=float(np.linalg.norm(iv.U @ psi0 - np.exp(1j * delta) * psi0)),
        delta_spectroscopic=_phase_of_overlap(psi0, U_spec),
        extras={
            "alpha": iv.alpha,
            "e0": e0.tolist(),
            "m": float(m),
            "n": n,
            "p": p,
            "beta_quadrature": v0 * iv.dyn,
            "spin_vector_residual": float(np.linalg.norm(spinalg.spin_expectation(rep, psi0) - v0 * e0)),
        },
    )


def scalar_residual(U):
    """How far ``U`` is from a scalar phase: ``(max |off-diagonal|, spread of diagonal phases)``."""
    off = U - np.diag(np.diag(U))
    diag = np.diag(U)
    spread = np.max(np.abs(wrap_angle(np.angle(diag) - np.angle(diag[0]))))
    return max_norm(off), float(spread)


def all_cyclic_analysis(
    rep,
    program,
    tau,
    initial_states,
    steps=4096,
    oracle_steps=None,
    sigma_tol=SIGMA_TOL,
    k_tol=K_TOL,
    scalar_tol=SCALAR_TOL,
    closure_tol=CLOSURE_TOL,
    fallback_e0=(0.0, 0.0, 1.0),
):
    """Phase decomposition of arbitrary states on an interval where every solution is cyclic.

    For each state, ``e0 = v(0)/|v(0)|`` (``fallback_e0`` if ``v(0) = 0``)
    and ``k = alpha(tau) / 2 pi`` must be an integer within ``k_tol``.

    Raises
    ------
    NotApplicableError
        If the monodromy is not the identity within ``sigma_tol``.
    IntegrationAccuracyError
        If ``U(tau)`` is not scalar within ``scalar_tol`` or ``k`` is not an
        integer within ``k_tol``.
    """
    mono = monodromy(program, tau, steps, sigma_tol=sigma_tol)
    if not mono.identity_flag:
        raise NotApplicableError(f"sigma(tau) = {mono.sigma!r} is not 1; not every solution is cyclic")
    ref = _Interval(rep, program, tau, np.asarray(fallback_e0, float), steps, closure_tol)
    off, spread = scalar_residual(ref.U)
    if off > scalar_tol or spread > scalar_tol:
        raise IntegrationAccuracyError(
            f"U(tau) is not scalar (off-diagonal {off:.2e}, phase spread {spread:.2e}); increase steps"
        )
    U_oracle = oracle_propagator(rep, program, tau, oracle_steps).U if oracle_steps else None
    s = float(rep.s)

    reports = []
    for psi in initial_states:
        psi0 = np.asarray(psi, dtype=complex)
        if psi0.shape != (rep.dim,):
            raise PreconditionError(f"initial state must have {rep.dim} amplitudes")
        if abs(np.linalg.norm(psi0) - 1.0) > 1e-8:
            raise PreconditionError("initial state must be normalized")
        v = spinalg.spin_expectation(rep, psi0)
        v0 = float(np.linalg.norm(v))
        if v0 < ZERO_SPIN_TOL:
            v0, iv = 0.0, ref
        else:
            iv = _Interval(rep, program, tau, v / v0, steps, closure_tol)
        k_raw = iv.alpha / (2 * np.pi)
        k = int(np.round(k_raw))
        if abs(k_raw - k) > k_tol:
            raise IntegrationAccuracyError(f"alpha(tau)/2pi = {k_raw!r} is not an integer within {k_tol}")
        omega_v = iv.omega_e if v0 > 0 else None
        delta = float(wrap_angle(2 * np.pi * k * s))
        beta = v0 * (iv.alpha + iv.omega_e) if v0 > 0 else 0.0
        omega_term = 0.0 if omega_v is None else -v0 * omega_v
        gamma = float(wrap_angle(omega_term + (s - v0) * 2 * np.pi * k))
        U_spec = iv.U if U_oracle is None else U_oracle
        reports.append(
            CyclicReport(
                kind="all_cyclic",
                m_or_v0=v0,
                delta=delta,
                beta=float(beta),
                gamma=gamma,
                omega_e=iv.omega_e,
                omega_v=omega_v,
                K=iv.K,
                k=k,
                cyclicity_residual=float(np.linalg.norm(iv.U @ psi0 - np.exp(1j * delta) * psi0)),
                delta_spectroscopic=_phase_of_overlap(psi0, U_spec),
                extras={
                    "alpha": iv.alpha,
                    "k_raw": float(k_raw),
                    "e0": iv.traj.e[0].tolist(),
                    "beta_quadrature": v0 * iv.dyn,
                    "scalar_offdiag": off,
                    "scalar_phase_spread": spread,
                },
            )
        )
    return reports


def _orthogonal_direction(e0):
    helper = np.array([0.0, 0.0, 1.0]) if abs(e0[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    d = np.cross(e0, helper)
    return d / np.linalg.norm(d)


def alpha_sensitivity(
    program,
    tau,
    e0,
    perturbation,
    steps=4096,
    rep=None,
    sigma_tol=SIGMA_TOL,
    alpha_tol=1e-6,
    u_tol=1e-6,
):
    """Change of ``alpha(tau)`` when ``e0`` is tilted, on an all-cyclic interval.

    ``perturbation`` is either a 3-vector orthogonal to ``e0`` or a scalar
    tilt size (direction chosen deterministically). The change splits into a
    multiple of ``4 pi`` (the trace crossing the south pole) and a continuous
    remainder, which should vanish. ``U(tau)`` from both trajectories is
    compared for ``rep`` (spin 3/2 by default).

    Returns
    -------
    dict
    """
    mono = monodromy(program, tau, steps, sigma_tol=sigma_tol)
    if not mono.identity_flag:
        raise NotApplicableError("alpha sensitivity is defined on all-cyclic intervals only")
    e0 = np.asarray(e0, dtype=float)
    e0 = e0 / np.linalg.norm(e0)
    if np.ndim(perturbation) == 0:
        delta_e = float(perturbation) * _orthogonal_direction(e0)
    else:
        delta_e = np.asarray(perturbation, dtype=float)
        if abs(delta_e @ e0) > 1e-9 * max(1.0, np.linalg.norm(delta_e)):
            raise PreconditionError("perturbation must be orthogonal to e0")
    e1 = e0 + delta_e
    e1 = e1 / np.linalg.norm(e1)
    rep = spinalg.build_spin_rep(3) if rep is None else rep

    t0 = integrate_e(program, e0, tau, steps)
    t1 = integrate_e(program, e1, tau, steps)
    a0, a1 = alpha_of(t0, -1), alpha_of(t1, -1)
    d_alpha = a1 - a0
    jump = int(np.round(d_alpha / FOUR_PI))
    continuous = d_alpha - FOUR_PI * jump
    u_diff = max_norm(propagator_closed_form(rep, t0, -1).U - propagator_closed_form(rep, t1, -1).U)
    return {
        "alpha": a0,
        "alpha_perturbed": a1,
        "delta_alpha": d_alpha,
        "jump_4pi": jump,
        "continuous_delta": continuous,
        "pole_crossing": jump != 0,
        "k": int(np.round(a0 / (2 * np.pi))),
        "k_perturbed": int(np.round(a1 / (2 * np.pi))),
        "perturbation_norm": float(np.linalg.norm(delta_e)),
        "u_invariance": u_diff,
        "consistent": bool(abs(continuous) <= alpha_tol and u_diff <= u_tol),
    }


def winding_relation_check(program, tau, e0, steps=4096, probe_scale=1e-3, sigma_tol=SIGMA_TOL, closure_tol=CLOSURE_TOL):
    """Check ``k = -K`` for the trace of ``e0`` where ``k`` is locally uniform.

    Uniformity is probed with :func:`alpha_sensitivity` at ``e0`` and ``-e0``
    in two orthogonal tilt directions each. The relation rests on ``k`` being
    equal for ``e0`` and ``-e0``.

    Raises
    ------
    NotApplicableError
        If the interval is not all-cyclic or ``k`` differs across the probes.
    """
    e0 = np.asarray(e0, dtype=float)
    e0 = e0 / np.linalg.norm(e0)
    probe_ks = []
    for base in (e0, -e0):
        d1 = _orthogonal_direction(base)
        d2 = np.cross(base, d1)
        for d in (d1, d2):
            rep = alpha_sensitivity(program, tau, base, probe_scale * d, steps, sigma_tol=sigma_tol)
            probe_ks.extend([rep["k"], rep["k_perturbed"]])
    if len(set(probe_ks)) != 1:
        raise NotApplicableError(f"k is not uniform over the probe set: {sorted(set(probe_ks))}")
    traj = integrate_e(program, e0, tau, steps)
    _, K = solid_angle(traj, closure_tol)
    k = probe_ks[0]
    return {"k": k, "K": K, "holds": k == -K, "probe_ks": probe_ks, "alpha": alpha_of(traj, -1)}
