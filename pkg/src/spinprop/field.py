"""Magnetic-field programs in precession-frequency form.

A program returns ``(omega_B(t), n(t))`` on ``[0, t_max]``, with ``omega_B``
in rad/s and ``n`` a unit vector. The Hamiltonian of the moment is
``-hbar omega_B(t) s.n(t)``; physical constants are folded into ``omega_B``.

Every program is an immutable dataclass with ``evaluate(t)``, a vectorized
``evaluate_many(ts)`` and ``to_dict()``; :func:`program_from_dict` inverts
the latter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import FieldConfigError, FieldDomainError

__all__ = [
    "OmegaProfile",
    "FixedAxis",
    "Rotating",
    "Wobbling",
    "Sampled",
    "Piecewise",
    "evaluate",
    "program_from_dict",
    "FIELD_KINDS",
]

UNIT_TOL = 1e-9
CONTINUITY_TOL = 1e-6
_DOMAIN_SLACK = 1e-12


def _check_domain(ts, t_max):
    ts = np.asarray(ts, dtype=float)
    slack = _DOMAIN_SLACK * max(1.0, t_max)
    if np.any(ts < -slack) or np.any(ts > t_max + slack) or np.any(~np.isfinite(ts)):
        bad = ts[(ts < -slack) | (ts > t_max + slack) | ~np.isfinite(ts)].ravel()[0]
        raise FieldDomainError(f"t={bad!r} outside the program domain [0, {t_max!r}]")
    return ts


def _unit(v, what="axis"):
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise FieldConfigError(f"{what} must be a 3-vector")
    if abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
        raise FieldConfigError(f"non-unit {what}: |{what}| = {np.linalg.norm(v)!r}", "non_unit_axis")
    return v


@dataclass(frozen=True)
class OmegaProfile:
    """Scalar precession frequency ``omega_B(t)`` from a fixed library of forms.

    ``form="constant"``: ``c0``.
    ``form="fourier"``: ``c0 + sum_k [a_k cos(k f t) + b_k sin(k f t)]`` with
    ``a = cos_coeffs``, ``b = sin_coeffs``, ``f = freq`` and ``k = 1, 2, ...``.
    ``form="polynomial"``: ``c0 + sum_k poly_coeffs[k-1] t**k``.
    """

    form: str = "constant"
    c0: float = 0.0
    cos_coeffs: tuple = ()
    sin_coeffs: tuple = ()
    freq: float = 1.0
    poly_coeffs: tuple = ()

    FORMS = ("constant", "fourier", "polynomial")

    def __post_init__(self):
        if self.form not in self.FORMS:
            raise FieldConfigError(f"unknown omega form {self.form!r}", "unknown_field_kind")
        object.__setattr__(self, "cos_coeffs", tuple(float(c) for c in self.cos_coeffs))
        object.__setattr__(self, "sin_coeffs", tuple(float(c) for c in self.sin_coeffs))
        object.__setattr__(self, "poly_coeffs", tuple(float(c) for c in self.poly_coeffs))

    @classmethod
    def constant(cls, omega0):
        return cls("constant", c0=float(omega0))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, self.c0)
        if self.form == "fourier":
            for k, a in enumerate(self.cos_coeffs, start=1):
                out = out + a * np.cos(k * self.freq * t)
            for k, b in enumerate(self.sin_coeffs, start=1):
                out = out + b * np.sin(k * self.freq * t)
        elif self.form == "polynomial":
            for k, c in enumerate(self.poly_coeffs, start=1):
                out = out + c * t**k
        return out

    def to_dict(self):
        d = {"form": self.form, "c0": self.c0}
        if self.form == "fourier":
            d.update(cos=list(self.cos_coeffs), sin=list(self.sin_coeffs), freq=self.freq)
        elif self.form == "polynomial":
            d.update(coeffs=list(self.poly_coeffs))
        return d

    @classmethod
    def from_dict(cls, d):
        """Inverse of :meth:`to_dict`; a bare number is read as a constant strength."""
        if isinstance(d, (int, float)) and not isinstance(d, bool):
            return cls.constant(d)
        if not isinstance(d, dict):
            raise FieldConfigError(f"omega must be a number or a table, got {d!r}", "malformed_number")
        d = dict(d)
        form = d.pop("form", "constant")
        kwargs = {"c0": float(d.pop("c0", 0.0))}
        if form == "fourier":
            kwargs.update(
                cos_coeffs=d.pop("cos", ()), sin_coeffs=d.pop("sin", ()), freq=float(d.pop("freq", 1.0))
            )
        elif form == "polynomial":
            kwargs.update(poly_coeffs=d.pop("coeffs", ()))
        if d:
            raise FieldConfigError(f"unknown keys for omega form {form!r}: {sorted(d)}", "unknown_key")
        return cls(form, **kwargs)


@dataclass(frozen=True)
class FixedAxis:
    """Field along a fixed unit ``axis`` with time-dependent strength ``omega(t)``.

    ``omega`` may be an :class:`OmegaProfile` or any vectorized callable; only
    the former can be serialized.
    """

    axis: tuple
    omega: OmegaProfile | Callable
    t_max: float
    kind: str = field(default="fixed_axis", init=False)

    def __post_init__(self):
        object.__setattr__(self, "axis", tuple(_unit(self.axis).tolist()))
        if not callable(self.omega):
            object.__setattr__(self, "omega", OmegaProfile.constant(self.omega))

    def evaluate_many(self, ts):
        ts = _check_domain(ts, self.t_max)
        w = np.broadcast_to(np.asarray(self.omega(ts), dtype=float), ts.shape)
        n = np.broadcast_to(np.array(self.axis), ts.shape + (3,))
        return np.array(w), np.array(n)

    def evaluate(self, t):
        w, n = self.evaluate_many(np.asarray(float(t)))
        return float(w), n

    def to_dict(self):
        if not isinstance(self.omega, OmegaProfile):
            raise FieldConfigError("only OmegaProfile strengths can be serialized")
        return {"kind": self.kind, "t_max": self.t_max, "axis": list(self.axis), "omega": self.omega.to_dict()}


@dataclass(frozen=True)
class Rotating:
    """Constant-strength field precessing on a cone about ``z``.

    ``n(t) = (sin th cos(w t + ph), sin th sin(w t + ph), cos th)`` with
    ``th = theta_n``, ``w = omega_rot`` and ``ph = phase``; strength ``omega_b0``.
    """

    theta_n: float
    omega_rot: float
    omega_b0: float
    t_max: float
    phase: float = 0.0
    kind: str = field(default="rotating", init=False)

    def evaluate_many(self, ts):
        ts = _check_domain(ts, self.t_max)
        ang = self.omega_rot * ts + self.phase
        st = np.sin(self.theta_n)
        n = np.stack([st * np.cos(ang), st * np.sin(ang), np.full(ts.shape, np.cos(self.theta_n))], axis=-1)
        return np.full(ts.shape, float(self.omega_b0)), n

    def evaluate(self, t):
        w, n = self.evaluate_many(np.asarray(float(t)))
        return float(w), n

    def to_dict(self):
        return {
            "kind": self.kind,
            "t_max": self.t_max,
            "theta_n": self.theta_n,
            "omega_rot": self.omega_rot,
            "omega_b0": self.omega_b0,
            "phase": self.phase,
        }


@dataclass(frozen=True)
class Wobbling:
    """Smooth closed-form field with nutating polar angle and modulated azimuth.

    ``theta_n(t) = theta0 + theta_amp sin(theta_freq t + theta_phase)``,
    ``phi_n(t) = phi0 + phi_rate t + phi_amp sin(phi_freq t)``,
    strength from an :class:`OmegaProfile`.
    """

    omega: OmegaProfile
    t_max: float
    theta0: float = 0.5
    theta_amp: float = 0.0
    theta_freq: float = 1.0
    theta_phase: float = 0.0
    phi0: float = 0.0
    phi_rate: float = 0.0
    phi_amp: float = 0.0
    phi_freq: float = 1.0
    kind: str = field(default="wobbling", init=False)

    def __post_init__(self):
        if not callable(self.omega):
            object.__setattr__(self, "omega", OmegaProfile.constant(self.omega))

    def evaluate_many(self, ts):
        ts = _check_domain(ts, self.t_max)
        th = self.theta0 + self.theta_amp * np.sin(self.theta_freq * ts + self.theta_phase)
        ph = self.phi0 + self.phi_rate * ts + self.phi_amp * np.sin(self.phi_freq * ts)
        n = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)
        return np.asarray(self.omega(ts), dtype=float), n

    def evaluate(self, t):
        w, n = self.evaluate_many(np.asarray(float(t)))
        return float(w), n

    def to_dict(self):
        d = {"kind": self.kind, "t_max": self.t_max, "omega": self.omega.to_dict()}
        for name in ("theta0", "theta_amp", "theta_freq", "theta_phase", "phi0", "phi_rate", "phi_amp", "phi_freq"):
            d[name] = getattr(self, name)
        return d


@dataclass(frozen=True)
class Sampled:
    """Field given on a time grid; ``omega_B n`` is interpolated linearly.

    The interpolated vector's norm is the strength and its direction is ``n``.
    Where the vector vanishes the direction falls back to the interpolated
    sample axes (or ``z``).
    """

    times: tuple
    omega_b: tuple
    axes: tuple
    kind: str = field(default="sampled", init=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        omega_b = np.asarray(self.omega_b, dtype=float)
        axes = np.asarray(self.axes, dtype=float).reshape(-1, 3) if len(self.axes) else np.zeros((0, 3))
        if times.size == 0:
            raise FieldConfigError("sampled program has an empty time grid")
        if omega_b.shape != times.shape or axes.shape != (times.size, 3):
            raise FieldConfigError("sampled program arrays have inconsistent lengths")
        if times[0] != 0.0:
            raise FieldConfigError("sampled time grid must start at 0")
        if np.any(np.diff(times) <= 0):
            raise FieldConfigError("sampled time grid must be strictly increasing")
        norms = np.linalg.norm(axes, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_TOL):
            raise FieldConfigError("non-unit axis in sampled program", "non_unit_axis")
        object.__setattr__(self, "times", tuple(times.tolist()))
        object.__setattr__(self, "omega_b", tuple(omega_b.tolist()))
        object.__setattr__(self, "axes", tuple(map(tuple, axes.tolist())))

    @classmethod
    def from_program(cls, program, n_samples: int, t_max: float | None = None):
        """Sample another program on ``n_samples`` equally spaced points."""
        t_max = program.t_max if t_max is None else t_max
        ts = np.linspace(0.0, t_max, n_samples)
        w, n = program.evaluate_many(ts)
        return cls(tuple(ts), tuple(w), tuple(map(tuple, n)))

    @property
    def t_max(self):
        return self.times[-1]

    def evaluate_many(self, ts):
        ts = _check_domain(ts, self.t_max)
        times = np.asarray(self.times)
        vec = np.asarray(self.omega_b)[:, None] * np.asarray(self.axes)
        flat = ts.ravel()
        interp = np.stack([np.interp(flat, times, vec[:, k]) for k in range(3)], axis=-1)
        mag = np.linalg.norm(interp, axis=-1)
        fallback = np.stack([np.interp(flat, times, np.asarray(self.axes)[:, k]) for k in range(3)], axis=-1)
        fb_norm = np.linalg.norm(fallback, axis=-1)
        fallback = np.where(fb_norm[:, None] > 0, fallback / np.where(fb_norm > 0, fb_norm, 1.0)[:, None], [0, 0, 1.0])
        n = np.where(mag[:, None] > 0, interp / np.where(mag > 0, mag, 1.0)[:, None], fallback)
        return mag.reshape(ts.shape), n.reshape(ts.shape + (3,))

    def evaluate(self, t):
        w, n = self.evaluate_many(np.asarray(float(t)))
        return float(w), n

    def to_dict(self):
        return {
            "kind": self.kind,
            "times": list(self.times),
            "omega_b": list(self.omega_b),
            "axes": [list(a) for a in self.axes],
        }


@dataclass(frozen=True)
class Piecewise:
    """Concatenation of programs; each segment runs on its own local clock.

    ``segments`` is an ordered sequence of ``(duration, program)`` pairs. The
    field ``omega_B n`` must be continuous across segment boundaries within
    ``continuity_tol``. At a boundary the later segment is used.
    """

    segments: tuple
    continuity_tol: float = CONTINUITY_TOL
    kind: str = field(default="piecewise", init=False)

    def __post_init__(self):
        segs = tuple((float(d), p) for d, p in self.segments)
        if not segs:
            raise FieldConfigError("piecewise program has no segments")
        for d, p in segs:
            if d <= 0:
                raise FieldConfigError("piecewise segment durations must be positive")
            if d > p.t_max * (1 + _DOMAIN_SLACK):
                raise FieldConfigError(f"segment duration {d} exceeds its program domain {p.t_max}")
        for (d0, p0), (_, p1) in zip(segs, segs[1:]):
            w0, n0 = p0.evaluate(d0)
            w1, n1 = p1.evaluate(0.0)
            gap = np.max(np.abs(w0 * n0 - w1 * n1))
            if gap > self.continuity_tol:
                raise FieldConfigError(f"field discontinuous at a segment boundary (jump {gap:.3e})")
        object.__setattr__(self, "segments", segs)

    @property
    def starts(self):
        return np.concatenate([[0.0], np.cumsum([d for d, _ in self.segments])[:-1]])

    @property
    def t_max(self):
        return float(np.sum([d for d, _ in self.segments]))

    def evaluate_many(self, ts):
        ts = _check_domain(ts, self.t_max)
        flat = ts.ravel()
        starts = self.starts
        idx = np.clip(np.searchsorted(starts, flat, side="right") - 1, 0, len(self.segments) - 1)
        w = np.empty(flat.shape)
        n = np.empty(flat.shape + (3,))
        for i, (d, prog) in enumerate(self.segments):
            sel = idx == i
            if np.any(sel):
                local = np.clip(flat[sel] - starts[i], 0.0, d)
                w[sel], n[sel] = prog.evaluate_many(local)
        return w.reshape(ts.shape), n.reshape(ts.shape + (3,))

    def evaluate(self, t):
        w, n = self.evaluate_many(np.asarray(float(t)))
        return float(w), n

    def to_dict(self):
        return {
            "kind": self.kind,
            "continuity_tol": self.continuity_tol,
            "segments": [{"duration": d, "program": p.to_dict()} for d, p in self.segments],
        }


FIELD_KINDS = {
    "fixed_axis": FixedAxis,
    "rotating": Rotating,
    "wobbling": Wobbling,
    "sampled": Sampled,
    "piecewise": Piecewise,
}


def evaluate(program, t):
    """Instantaneous ``(omega_B, n)`` of ``program`` at time ``t``."""
    return program.evaluate(t)


def program_from_dict(d):
    """Build a program from its ``to_dict`` form.

    Raises
    ------
    FieldConfigError
        On an unknown kind or unknown keys.
    """
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in FIELD_KINDS:
        raise FieldConfigError(f"unknown field kind {kind!r}", "unknown_field_kind")
    try:
        if kind == "fixed_axis":
            program = FixedAxis(d.pop("axis"), OmegaProfile.from_dict(d.pop("omega")), float(d.pop("t_max")))
        elif kind == "sampled":
            program = Sampled(tuple(d.pop("times")), tuple(d.pop("omega_b")), tuple(map(tuple, d.pop("axes"))))
        elif kind == "wobbling":
            omega = OmegaProfile.from_dict(d.pop("omega"))
            return Wobbling(omega, **{k: float(v) for k, v in d.items()})
        elif kind == "rotating":
            return Rotating(**{k: float(v) for k, v in d.items()})
        else:
            segs = tuple((float(s["duration"]), program_from_dict(s["program"])) for s in d.pop("segments"))
            return Piecewise(segs, **{k: float(v) for k, v in d.items()})
    except KeyError as exc:
        raise FieldConfigError(f"field kind {kind!r} is missing key {exc.args[0]!r}", "missing_key") from None
    except TypeError as exc:
        raise FieldConfigError(f"bad keys for field kind {kind!r}: {exc}", "unknown_key") from None
    except ValueError as exc:
        if isinstance(exc, FieldConfigError):
            raise
        raise FieldConfigError(f"malformed number in field kind {kind!r}: {exc}", "malformed_number") from None
    if d:
        raise FieldConfigError(f"unknown keys for field kind {kind!r}: {sorted(d)}", "unknown_key")
    return program
