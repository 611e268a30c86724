"""Classical precession of a unit vector, ``de/dt = -omega_B n x e``.

Integration is fixed-step classical RK4 with renormalization onto the sphere
after every step. The two phase accumulators

    alpha_geo(t) = -int (1 - cos theta) dphi
    alpha_dyn(t) =  int omega_B e.n dt

are accumulated on the same grid. By default they reuse the RK4 stages of
``e``, which makes them fourth order in the step; ``quadrature="trapezoid"``
applies the trapezoid rule to the nodes instead (second order). The geometric integrand is evaluated in one of two gauges
per step. In the northern hemisphere it is ``(x y' - y x') / (1 + z)``. In
the southern hemisphere it is ``-(x y' - y x') / (1 - z)`` plus ``2 dphi``,
where ``dphi`` is the wrapped azimuth change over the step. Both forms agree
modulo ``4 pi``, a shift that leaves every spin propagator unchanged.
Passing the south pole therefore shows up as a ``+-pi`` jump of the
azimuth and a ``-+2 pi`` jump of ``alpha_geo``. Such steps are recorded as
pole events.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import ClosureError, FieldDomainError, IntegrationAccuracyError, PreconditionError

__all__ = [
    "PoleEvent",
    "PrecessionTrajectory",
    "MonodromyResult",
    "integrate_e",
    "monodromy",
    "solid_angle",
    "rotation_axis",
    "write_trajectory_csv",
    "wrap_angle",
    "CSV_COLUMNS",
]

UNIT_TOL = 1e-9
POLE_EPS = 1e-7
CLOSURE_TOL = 1e-6
SIGMA_TOL = 1e-6
PROJECTION_TOL = 1e-6
MIN_STEPS = 8
QUADRATURES = ("trapezoid", "rk4")
CSV_COLUMNS = ("t", "ex", "ey", "ez", "theta", "phi_unwrapped", "alpha_geo", "alpha_dyn")


def wrap_angle(x):
    """Reduce angles to the canonical interval ``(-pi, pi]``."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), 2 * np.pi)


@dataclass(frozen=True)
class PoleEvent:
    """A step over which the trace passed (close to) the south pole.

    ``sign`` is the sign of the azimuth jump (``+1`` for ``+pi``);
    ``alpha_jump`` is the increment of ``alpha_geo`` over that step.
    """

    time: float
    step: int
    sign: int
    phi_jump: float
    alpha_jump: float


@dataclass(frozen=True)
class PrecessionTrajectory:
    """Sampled solution of the precession equation on a uniform grid."""

    times: np.ndarray
    e: np.ndarray
    theta: np.ndarray
    phi_unwrapped: np.ndarray
    alpha_geo: np.ndarray
    alpha_dyn: np.ndarray
    pole_events: tuple = ()
    drift: float = 0.0
    quadrature: str = "rk4"
    pole_eps: float = field(default=POLE_EPS, repr=False)

    @property
    def e0(self):
        return self.e[0]

    @property
    def alpha(self):
        """Total phase angle ``alpha_geo + alpha_dyn`` at every node."""
        return self.alpha_geo + self.alpha_dyn

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class MonodromyResult:
    """Rotation ``E(t_end)`` mapping ``e(0)`` to ``e(t_end)`` and its spectral data."""

    E: np.ndarray
    sigma: complex
    axis_eta: np.ndarray
    rotation_angle: float
    identity_flag: bool
    projection_delta: float


def _cross_matrix(n):
    """Stack of matrices ``[n]x`` with ``[n]x v = n x v``."""
    z = np.zeros(n.shape[:-1])
    nx, ny, nz = n[..., 0], n[..., 1], n[..., 2]
    return np.stack(
        [np.stack([z, -nz, ny], -1), np.stack([nz, z, -nx], -1), np.stack([-ny, nx, z], -1)], -2
    )


def _check_inputs(program, t_end, steps):
    if int(steps) != steps or steps < MIN_STEPS:
        raise PreconditionError(f"steps must be an integer >= {MIN_STEPS}, got {steps!r}")
    if not t_end > 0:
        raise PreconditionError(f"t_end must be positive, got {t_end!r}")
    if t_end > program.t_max * (1 + 1e-12):
        raise FieldDomainError(f"t_end={t_end!r} beyond the program domain [0, {program.t_max!r}]")


def _stage_maps(program, t_end, steps):
    """Per-step RK4 stage matrices for the linear system ``de/dt = A(t) e``.

    Returns the time grid, the stage state maps ``S`` (steps, 4, 3, 3), stage
    derivative maps ``K`` (steps, 4, 3, 3), stage field strengths and axes
    (steps, 4) and (steps, 4, 3), and the one-step propagators ``M``.
    """
    times = np.linspace(0.0, float(t_end), int(steps) + 1)
    h = np.diff(times)
    t0, t1 = times[:-1], times[1:]
    tm = t0 + 0.5 * h
    w0, n0 = program.evaluate_many(t0)
    wm, nm = program.evaluate_many(tm)
    w1, n1 = program.evaluate_many(t1)
    A0 = -w0[:, None, None] * _cross_matrix(n0)
    Am = -wm[:, None, None] * _cross_matrix(nm)
    A1 = -w1[:, None, None] * _cross_matrix(n1)
    eye = np.broadcast_to(np.eye(3), A0.shape)
    hh = h[:, None, None]
    S1 = eye
    K1 = A0
    S2 = eye + 0.5 * hh * K1
    K2 = Am @ S2
    S3 = eye + 0.5 * hh * K2
    K3 = Am @ S3
    S4 = eye + hh * K3
    K4 = A1 @ S4
    M = eye + hh / 6.0 * (K1 + 2 * K2 + 2 * K3 + K4)
    S = np.stack([S1, S2, S3, S4], axis=1)
    K = np.stack([K1, K2, K3, K4], axis=1)
    w = np.stack([w0, wm, wm, w1], axis=1)
    n = np.stack([n0, nm, nm, n1], axis=1)
    return times, S, K, w, n, M


def _propagate_columns(M, v0):
    """Apply one-step maps in sequence with renormalization after each step.

    ``v0`` is ``(3,)`` or ``(3, k)`` (columns renormalized independently).
    Returns the node values and the largest pre-renormalization norm drift.
    """
    out = np.empty((M.shape[0] + 1,) + v0.shape)
    out[0] = v0
    drift = 0.0
    v = v0
    for i in range(M.shape[0]):
        v = M[i] @ v
        norm = np.linalg.norm(v, axis=0)
        drift = max(drift, float(np.max(np.abs(norm - 1.0))))
        v = v / norm
        out[i + 1] = v
    return out, drift


def _unit_e0(e0):
    e0 = np.asarray(e0, dtype=float)
    if e0.shape != (3,):
        raise PreconditionError("e0 must be a 3-vector")
    nrm = np.linalg.norm(e0)
    if abs(nrm - 1.0) > UNIT_TOL:
        raise PreconditionError(f"e0 must be a unit vector (|e0| = {nrm!r})")
    return e0 / nrm


def _phase_integrands(Y, V, w, n):
    """Integrands of alpha_geo (north and south gauge) and alpha_dyn.

    ``Y`` are points near the sphere and ``V`` their velocities. The forms are
    homogeneous of degree zero in ``Y`` so off-sphere stage values are
    harmless. The south-gauge integrand excludes the ``2 dphi`` term.
    """
    r = np.linalg.norm(Y, axis=-1)
    circ = Y[..., 0] * V[..., 1] - Y[..., 1] * V[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        g_north = -circ / (r * (r + Y[..., 2]))
        g_south = circ / (r * (r - Y[..., 2]))
    g_dyn = w * np.einsum("...i,...i->...", n, Y) / r
    return g_north, g_south, g_dyn


def integrate_e(program, e0, t_end, steps=4096, pole_eps=POLE_EPS, quadrature="rk4") -> PrecessionTrajectory:
    """Integrate the precession equation from ``e0`` over ``[0, t_end]``.

    Parameters
    ----------
    program
        Field program (see :mod:`spinprop.field`).
    e0 : array_like
        Unit initial vector.
    t_end : float
        Final time, within the program domain.
    steps : int
        Number of uniform RK4 steps (at least 8).
    pole_eps : float
        Where ``sin(theta) < pole_eps`` the azimuth is frozen at its previous
        value.
    quadrature : {"trapezoid", "rk4"}
        Rule for the phase accumulators: the trapezoid rule on the nodes
        (second order) or the RK4 stages of the trajectory (fourth order).

    Returns
    -------
    PrecessionTrajectory
    """
    _check_inputs(program, t_end, steps)
    if quadrature not in QUADRATURES:
        raise PreconditionError(f"quadrature must be one of {QUADRATURES}")
    e0 = _unit_e0(e0)
    times, S, K, w, n, M = _stage_maps(program, t_end, steps)
    e, drift = _propagate_columns(M, e0)

    x, y, z = e[:, 0], e[:, 1], e[:, 2]
    rho = np.hypot(x, y)
    theta = np.arctan2(rho, z)
    raw_phi = np.arctan2(y, x)
    at_pole = np.sin(theta) < pole_eps

    phi = np.empty_like(raw_phi)
    phi[0] = 0.0 if at_pole[0] else raw_phi[0]
    dphi = np.zeros(len(times) - 1)
    for i in range(len(dphi)):
        if at_pole[i + 1]:
            phi[i + 1] = phi[i]
        else:
            dphi[i] = float(wrap_angle(raw_phi[i + 1] - phi[i]))
            phi[i + 1] = phi[i] + dphi[i]

    north = z[:-1] >= 0.0
    h = np.diff(times)
    if quadrature == "trapezoid":
        w_nodes = np.concatenate([w[:, 0], w[-1:, 3]])
        n_nodes = np.concatenate([n[:, 0], n[-1:, 3]])
        v_nodes = -w_nodes[:, None] * np.cross(n_nodes, e)
        g_n, g_s, g_dyn = _phase_integrands(e, v_nodes, w_nodes, n_nodes)
        g_geo = np.where(north, g_n[:-1] + g_n[1:], g_s[:-1] + g_s[1:])
        d_geo = 0.5 * h * g_geo
        d_dyn = 0.5 * h * (g_dyn[:-1] + g_dyn[1:])
    else:
        # stage values of e and de/dt from the per-step maps
        Y = np.einsum("skij,sj->ski", S, e[:-1])
        V = np.einsum("skij,sj->ski", K, e[:-1])
        g_n, g_s, g_dyn = _phase_integrands(Y, V, w, n)
        weights = np.array([1.0, 2.0, 2.0, 1.0]) / 6.0
        d_geo = h * (np.where(north[:, None], g_n, g_s) @ weights)
        d_dyn = h * (g_dyn @ weights)
    d_geo = d_geo - np.where(north, 0.0, 2.0 * dphi)
    if not np.all(np.isfinite(d_geo)):
        raise IntegrationAccuracyError("geometric phase integrand diverged; increase steps")
    alpha_geo = np.concatenate([[0.0], np.cumsum(d_geo)])
    alpha_dyn = np.concatenate([[0.0], np.cumsum(d_dyn)])

    events = []
    for i in np.flatnonzero(~north & (np.abs(dphi) > np.pi / 2)):
        p, q = e[i, :2], e[i + 1, :2]
        chord = q - p
        denom = float(chord @ chord)
        frac = 0.0 if denom == 0 else float(np.clip(-(p @ chord) / denom, 0.0, 1.0))
        events.append(
            PoleEvent(
                time=float(times[i] + frac * h[i]),
                step=int(i),
                sign=1 if dphi[i] > 0 else -1,
                phi_jump=float(dphi[i]),
                alpha_jump=float(d_geo[i]),
            )
        )

    return PrecessionTrajectory(
        times=times,
        e=e,
        theta=theta,
        phi_unwrapped=phi,
        alpha_geo=alpha_geo,
        alpha_dyn=alpha_dyn,
        pole_events=tuple(events),
        drift=drift,
        quadrature=quadrature,
        pole_eps=pole_eps,
    )


def rotation_axis(E, tie_tol=1e-12):
    """Unit axis and angle in ``[0, pi]`` of a proper rotation matrix.

    The axis sign makes its largest-magnitude component positive; ties go to
    the earlier of x, y, z.
    """
    E = np.asarray(E, dtype=float)
    axial = np.array([E[2, 1] - E[1, 2], E[0, 2] - E[2, 0], E[1, 0] - E[0, 1]])
    cos_a = 0.5 * (np.trace(E) - 1.0)
    sin_a = 0.5 * np.linalg.norm(axial)
    angle = float(np.arctan2(sin_a, cos_a))
    if angle < np.pi / 2 and sin_a > 0:
        axis = axial / np.linalg.norm(axial)
    else:
        vals, vecs = np.linalg.eig(E)
        axis = np.real(vecs[:, np.argmin(np.abs(vals - 1.0))])
        nrm = np.linalg.norm(axis)
        axis = axis / nrm if nrm > 0 else np.array([0.0, 0.0, 1.0])
    mags = np.abs(axis)
    lead = int(np.flatnonzero(mags >= mags.max() - tie_tol)[0])
    if axis[lead] < 0:
        axis = -axis
    return axis, angle


def monodromy(
    program, t_end, steps=4096, sigma_tol=SIGMA_TOL, projection_tol=PROJECTION_TOL
) -> MonodromyResult:
    """Monodromy rotation ``E(t_end)`` from the trajectories of ``x, y, z``.

    The three trajectories are advanced together; the final matrix is
    projected onto the rotation group by polar decomposition.

    Raises
    ------
    IntegrationAccuracyError
        If the projection moves ``E`` by more than ``projection_tol``.
    """
    _check_inputs(program, t_end, steps)
    _, _, _, _, _, M = _stage_maps(program, t_end, steps)
    cols, _ = _propagate_columns(M, np.eye(3))
    E_raw = cols[-1]
    u, _, vt = np.linalg.svd(E_raw)
    E = u @ vt
    if np.linalg.det(E) < 0:
        raise IntegrationAccuracyError("monodromy matrix is not a proper rotation; increase steps")
    delta = float(np.max(np.abs(E - E_raw)))
    if delta > projection_tol:
        raise IntegrationAccuracyError(
            f"monodromy projection delta {delta:.2e} exceeds {projection_tol:.1e}; increase steps"
        )
    axis, angle = rotation_axis(E)
    sigma = complex(np.cos(angle), np.sin(angle))
    identity = abs(sigma - 1.0) < sigma_tol
    if identity:
        axis = np.array([0.0, 0.0, 1.0])
    return MonodromyResult(E, sigma, axis, angle, bool(identity), delta)


def solid_angle(traj: PrecessionTrajectory, closure_tol=CLOSURE_TOL):
    """Signed solid angle and winding number of a closed trace.

    Returns ``(omega_e, K)`` with ``omega_e = int (1 - cos theta) dphi`` and
    ``K`` the number of anticlockwise turns (seen from ``+z``) about the
    polar axis.

    Raises
    ------
    ClosureError
        If ``|e(t_end) - e(0)|`` exceeds ``closure_tol``.
    """
    residual = float(np.linalg.norm(traj.e[-1] - traj.e[0]))
    if residual > closure_tol:
        raise ClosureError(residual, closure_tol)
    omega_e = -float(traj.alpha_geo[-1])
    turns = (traj.phi_unwrapped[-1] - traj.phi_unwrapped[0]) / (2 * np.pi)
    return omega_e, int(np.round(turns))


def trajectory_csv_text(traj: PrecessionTrajectory) -> str:
    """CSV text with the columns of :data:`CSV_COLUMNS`, floats as ``.17g``."""
    rows = np.column_stack(
        [traj.times, traj.e, traj.theta, traj.phi_unwrapped, traj.alpha_geo, traj.alpha_dyn]
    )
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([format(v, ".17g") for v in row])
    return buf.getvalue()


def write_trajectory_csv(traj: PrecessionTrajectory, path):
    """Write :func:`trajectory_csv_text` to ``path``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(trajectory_csv_text(traj))
