"""Finite-dimensional spin algebra.

Matrices act on the ``2s+1`` dimensional space spanned by the eigenstates of
``s_z``, ordered by descending magnetic quantum number (``m = s`` first).
Exponentials ``exp(i xi s.b)`` are built from the spectral decomposition of
``s.b``, whose eigenvalues are known exactly to be ``-s, ..., s``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import PreconditionError

__all__ = [
    "SpinRep",
    "build_spin_rep",
    "spin_dot",
    "exp_i_spin",
    "exp_i_spin_batch",
    "eigenstate_of_spin_dot",
    "spherical_angles",
    "azimuth_axis",
    "spin_expectation",
]

MAX_TWICE_S = 40
UNIT_TOL = 1e-9
EIG_TOL = 1e-9


@dataclass(frozen=True)
class SpinRep:
    """Spin-``s`` generators in the descending-``m`` basis.

    Parameters
    ----------
    twice_s : int
        ``2s``. Stored as an integer so half-integer spins stay exact.
    sx, sy, sz : ndarray
        Hermitian ``(dim, dim)`` complex generator matrices (units of hbar).
    """

    twice_s: int
    sx: np.ndarray = field(repr=False)
    sy: np.ndarray = field(repr=False)
    sz: np.ndarray = field(repr=False)

    @property
    def s(self) -> Fraction:
        return Fraction(self.twice_s, 2)

    @property
    def dim(self) -> int:
        return self.twice_s + 1

    @property
    def ms(self) -> np.ndarray:
        """Magnetic quantum numbers in basis order, ``s, s-1, ..., -s``."""
        return 0.5 * np.arange(self.twice_s, -self.twice_s - 1, -2, dtype=float)

    @property
    def generators(self) -> np.ndarray:
        """Stacked ``(3, dim, dim)`` array ``(sx, sy, sz)``."""
        return np.stack([self.sx, self.sy, self.sz])

    def index_of(self, m) -> int:
        """Basis index of magnetic quantum number ``m``.

        Raises
        ------
        PreconditionError
            If ``m`` is not on the ladder ``s, s-1, ..., -s``.
        """
        twice_m = round(2 * float(m))
        if abs(2 * float(m) - twice_m) > 1e-9:
            raise PreconditionError(f"m={m} is not a half-integer")
        if abs(twice_m) > self.twice_s or (self.twice_s - twice_m) % 2:
            raise PreconditionError(f"m={m} is not on the ladder of spin {self.s}")
        return (self.twice_s - twice_m) // 2


def build_spin_rep(twice_s: int) -> SpinRep:
    """Construct the spin-``twice_s/2`` representation from ladder operators."""
    if isinstance(twice_s, bool) or int(twice_s) != twice_s:
        raise PreconditionError(f"twice_s must be an integer, got {twice_s!r}")
    twice_s = int(twice_s)
    if twice_s < 1:
        raise PreconditionError("twice_s must be >= 1 (spin 0 has no dynamics)")
    if twice_s > MAX_TWICE_S:
        raise PreconditionError(f"twice_s={twice_s} exceeds the supported maximum {MAX_TWICE_S}")

    s = twice_s / 2
    ms = 0.5 * np.arange(twice_s, -twice_s - 1, -2, dtype=float)
    # <m+1| s+ |m> sits one row above the diagonal in descending order
    raise_elems = np.sqrt(s * (s + 1) - ms[1:] * (ms[1:] + 1))
    splus = np.diag(raise_elems, k=1).astype(complex)
    sminus = splus.conj().T
    sx = 0.5 * (splus + sminus)
    sy = -0.5j * (splus - sminus)
    sz = np.diag(ms).astype(complex)
    for mat in (sx, sy, sz):
        mat.setflags(write=False)
    return SpinRep(twice_s, sx, sy, sz)


def spin_dot(rep: SpinRep, b) -> np.ndarray:
    """Return ``b_x sx + b_y sy + b_z sz``; ``b`` need not be unit."""
    b = np.asarray(b, dtype=float)
    if b.shape != (3,):
        raise PreconditionError(f"b must be a 3-vector, got shape {b.shape}")
    return b[0] * rep.sx + b[1] * rep.sy + b[2] * rep.sz


def _check_unit(b, name="b"):
    b = np.asarray(b, dtype=float)
    if b.shape[-1] != 3:
        raise PreconditionError(f"{name} must be a 3-vector")
    norms = np.linalg.norm(b, axis=-1)
    if np.any(np.abs(norms - 1.0) > UNIT_TOL):
        raise PreconditionError(f"{name} must be a unit vector (|{name}| = {np.max(norms)!r})")
    return b


def _spectral(rep: SpinRep, bs: np.ndarray):
    """Eigenvectors of ``s.b`` for a stack of unit vectors, columns ordered by ascending m."""
    mats = np.einsum("...k,kij->...ij", bs, rep.generators)
    vals, vecs = np.linalg.eigh(mats)
    ladder = rep.ms[::-1]
    err = np.max(np.abs(vals - ladder))
    if err > EIG_TOL:
        raise PreconditionError(f"spectrum of s.b deviates from the m ladder by {err:.2e}")
    return ladder, vecs


def exp_i_spin(rep: SpinRep, xi: float, b) -> np.ndarray:
    """Unitary ``exp(i xi s.b)`` for a unit vector ``b``.

    The eigenvalues of ``s.b`` are snapped to the exact ladder ``m`` before
    exponentiation, so the result is unitary to rounding.
    """
    b = _check_unit(b)
    if b.shape != (3,):
        raise PreconditionError("b must be a single 3-vector")
    ladder, vecs = _spectral(rep, b)
    phases = np.exp(1j * float(xi) * ladder)
    return (vecs * phases) @ vecs.conj().T


def exp_i_spin_batch(rep: SpinRep, xis, bs) -> np.ndarray:
    """Vectorized :func:`exp_i_spin` over ``xis`` of shape ``(N,)`` and ``bs`` of shape ``(N, 3)``."""
    bs = _check_unit(bs, "bs")
    xis = np.asarray(xis, dtype=float)
    ladder, vecs = _spectral(rep, bs)
    phases = np.exp(1j * xis[..., None] * ladder)
    return np.einsum("...ik,...k,...jk->...ij", vecs, phases, vecs.conj())


def spherical_angles(b, pole_eps: float = 1e-7) -> tuple[float, float]:
    """Polar and azimuthal angle of a unit vector.

    At either pole (``sin(theta) < pole_eps``) the azimuth is reported as 0.
    """
    x, y, z = (float(c) for c in b)
    rho = np.hypot(x, y)
    theta = float(np.arctan2(rho, z))
    phi = 0.0 if np.sin(theta) < pole_eps else float(np.arctan2(y, x))
    return theta, phi


def azimuth_axis(phi):
    """The in-plane unit vector ``(-sin phi, cos phi, 0)``; vectorized over ``phi``."""
    phi = np.asarray(phi, dtype=float)
    return np.stack([-np.sin(phi), np.cos(phi), np.zeros_like(phi)], axis=-1)


def eigenstate_of_spin_dot(rep: SpinRep, b, m) -> np.ndarray:
    """Eigenstate of ``s.b`` with eigenvalue ``m`` under a fixed phase convention.

    The state is ``exp(-i theta s.d) chi0_m`` where ``theta, phi`` are the
    spherical angles of ``b``, ``d = (-sin phi, cos phi, 0)`` and ``chi0_m``
    is the ``s_z`` basis vector. Deterministic phases matter for the phase
    bookkeeping downstream; an eigensolver's arbitrary phase would not do.
    """
    b = _check_unit(b)
    idx = rep.index_of(m)
    theta, phi = spherical_angles(b)
    chi0 = np.zeros(rep.dim, dtype=complex)
    chi0[idx] = 1.0
    return exp_i_spin(rep, -theta, azimuth_axis(phi)) @ chi0


def spin_expectation(rep: SpinRep, psi) -> np.ndarray:
    """Spin vector ``<psi| s |psi>`` (real 3-vector)."""
    psi = np.asarray(psi, dtype=complex)
    return np.real(np.einsum("i,kij,j->k", psi.conj(), rep.generators, psi))
