"""Shared programs and independent reference solutions for the test suite."""

import numpy as np
import pytest

from spinprop import precess
from spinprop.field import FixedAxis, OmegaProfile, Rotating, Sampled, Wobbling
from spinprop.propagate import alpha_of

TAU = 6.0
OMEGA0 = 2.0


def rodrigues(axis, angle):
    """Rotation matrix turning vectors by ``angle`` about unit ``axis`` (right-handed)."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    K = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K


def rotating_exact(program, e0, t):
    """Closed-form precession in a :class:`Rotating` field.

    In the frame co-rotating with the field about ``z`` the field is static,
    ``de'/dt = -(w_B n(0) + w z) x e'``; back in the lab frame the solution is
    a rotation about ``z`` composed with one about the effective axis.
    """
    w_b, n0 = program.evaluate(0.0)
    eff = w_b * n0 + program.omega_rot * np.array([0.0, 0.0, 1.0])
    mag = np.linalg.norm(eff)
    inner = rodrigues(eff, -mag * t) @ np.asarray(e0, dtype=float)
    return rodrigues([0, 0, 1], program.omega_rot * t) @ inner


def wobbling_program(t_max=TAU):
    return Wobbling(
        omega=OmegaProfile("fourier", c0=OMEGA0, cos_coeffs=(0.3,), sin_coeffs=(0.4,), freq=1.1),
        t_max=t_max,
        theta0=0.8,
        theta_amp=0.5,
        theta_freq=1.3,
        phi_rate=0.7,
        phi_amp=0.6,
        phi_freq=0.9,
    )


def four_programs(tau=TAU):
    """The four reference programs: ``|w_B| tau`` stays well below 50 for all."""
    return {
        "fixed_constant": FixedAxis((0.36, 0.48, 0.8), OMEGA0, tau),
        "fixed_varying": FixedAxis(
            (0.0, 0.6, 0.8), OmegaProfile("fourier", c0=OMEGA0, sin_coeffs=(0.5 * OMEGA0,)), tau
        ),
        "rotating": Rotating(np.pi / 3, 1.0, OMEGA0, tau),
        "wobbling_sampled": Sampled.from_program(wobbling_program(tau), 801),
    }


@pytest.fixture(scope="session")
def programs():
    return four_programs()


def engineered_alpha_pi(tau=4.0):
    """Rotating field whose strength is tuned so that ``alpha(tau) = pi`` along ``eta``."""
    from scipy.optimize import brentq

    def mismatch(w):
        p = Rotating(np.pi / 3, 1.0, w, tau)
        eta = precess.monodromy(p, tau).axis_eta
        return alpha_of(precess.integrate_e(p, eta, tau), -1) - np.pi

    w = brentq(mismatch, 1.0, 1.2, xtol=1e-15)
    return Rotating(np.pi / 3, 1.0, w, tau)


@pytest.fixture(scope="session")
def alpha_pi_program():
    return engineered_alpha_pi()


def random_state(rng, dim):
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return psi / np.linalg.norm(psi)
