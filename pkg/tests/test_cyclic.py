import numpy as np
import pytest

from spinprop import precess, spinalg
from spinprop.cyclic import (
    REPORT_FIELDS,
    all_cyclic_analysis,
    alpha_sensitivity,
    guaranteed_cyclic_family,
    rational_superposition_family,
    scalar_residual,
    winding_relation_check,
)
from spinprop.errors import NotApplicableError, PreconditionError
from spinprop.field import FixedAxis, Rotating
from spinprop.precess import wrap_angle

from conftest import four_programs, random_state

TWO_PI = 2 * np.pi
# |w_B n(0) + z| tau = 4 pi and w tau = 2 pi: the monodromy is the identity
TUNED_ROTATING = Rotating(np.pi / 3, 1.0, (np.sqrt(13) - 1) / 2, TWO_PI)


def same_phase(a, b, tol=1e-6):
    return abs(wrap_angle(a - b)) <= tol


def test_spin_half_fixed_axis_full_turn():
    rep = spinalg.build_spin_rep(1)
    reports = guaranteed_cyclic_family(rep, FixedAxis((0, 0, 1), 1.0, TWO_PI), TWO_PI)
    assert len(reports) == 2
    for r in reports:
        np.testing.assert_allclose(r.extras["e0"], [0, 0, 1])
        assert same_phase(r.delta, np.pi, 1e-12)
        assert r.beta == pytest.approx(np.pi * np.sign(r.m_or_v0) * 2 * abs(r.m_or_v0))
        assert same_phase(r.gamma, 0.0, 1e-12)
        assert r.omega_e == pytest.approx(0.0, abs=1e-12)
        assert r.cyclicity_residual < 1e-12


@pytest.mark.parametrize("twice_s", [1, 2, 3])
@pytest.mark.parametrize("name", ["fixed_constant", "fixed_varying", "rotating", "wobbling_sampled"])
def test_guaranteed_family_against_oracle(name, twice_s):
    rep = spinalg.build_spin_rep(twice_s)
    prog = four_programs()[name]
    reports = guaranteed_cyclic_family(rep, prog, 6.0, oracle_steps=100_000)
    assert len(reports) == twice_s + 1
    assert sorted(r.m_or_v0 for r in reports) == sorted(rep.ms)
    for r in reports:
        m = r.m_or_v0
        assert r.cyclicity_residual <= 1e-6
        assert same_phase(r.delta_spectroscopic, m * r.extras["alpha"])
        assert same_phase(r.gamma, -m * r.omega_e)
        if m != 0:
            assert same_phase(r.gamma, -abs(m) * r.omega_v)
        assert same_phase(r.gamma_direct, r.gamma)
        assert r.beta == pytest.approx(m * (r.extras["alpha"] + r.omega_e), abs=1e-9)
        assert set(r.to_json()) == set(REPORT_FIELDS)


def test_zero_m_report_has_no_omega_v():
    rep = spinalg.build_spin_rep(2)
    reports = guaranteed_cyclic_family(rep, four_programs()["rotating"], 6.0)
    zero = [r for r in reports if r.m_or_v0 == 0]
    assert len(zero) == 1 and zero[0].omega_v is None and zero[0].to_json()["omega_v"] is None


def test_spin_half_rotating_field_law():
    rep = spinalg.build_spin_rep(1)
    for w_b in (0.7, 2.0, 3.5):
        prog = Rotating(np.pi / 3, 1.0, w_b, 6.0)
        for r in guaranteed_cyclic_family(rep, prog, 6.0, oracle_steps=100_000):
            assert same_phase(r.gamma, -r.omega_v / 2)
            assert same_phase(r.gamma_direct, -r.omega_v / 2)


def test_omega_v_is_antipodal_trace_for_negative_m():
    rep = spinalg.build_spin_rep(1)
    prog = four_programs()["rotating"]
    neg = [r for r in guaranteed_cyclic_family(rep, prog, 6.0) if r.m_or_v0 < 0][0]
    eta = np.asarray(neg.extras["e0"])
    omega_anti, _ = precess.solid_angle(precess.integrate_e(prog, -eta, 6.0))
    assert np.exp(0.5j * neg.omega_v) == pytest.approx(np.exp(0.5j * omega_anti), abs=1e-9)


# -- rational superpositions -------------------------------------------------


def test_rational_single_term_reduces_to_eigen_family(alpha_pi_program):
    rep = spinalg.build_spin_rep(2)
    tau = alpha_pi_program.t_max
    fam = {r.m_or_v0: r for r in guaranteed_cyclic_family(rep, alpha_pi_program, tau)}
    for m in (-1.0, 0.0, 1.0):
        r = rational_superposition_family(rep, alpha_pi_program, tau, m, [1.0], 1, 1)
        ref = fam[m]
        assert r.m_or_v0 == pytest.approx(m)
        assert same_phase(r.gamma, ref.gamma, 1e-9)
        assert same_phase(r.delta, ref.delta, 1e-9)
        assert r.beta == pytest.approx(ref.beta, abs=1e-9)


@pytest.mark.parametrize(
    "coeffs",
    [
        [0.6, 0.8j],
        [np.sqrt(0.5), -np.sqrt(0.5)],  # v0 = 0
        [np.sqrt(0.5), 1j * np.sqrt(0.5)],  # v0 = 0
        [0.28, 0.96],
    ],
)
def test_rational_phase_law_spin_one(alpha_pi_program, coeffs):
    rep = spinalg.build_spin_rep(2)
    tau = alpha_pi_program.t_max
    r = rational_superposition_family(rep, alpha_pi_program, tau, -1, coeffs, 1, 1, oracle_steps=100_000)
    assert r.cyclicity_residual <= 1e-6
    assert abs(r.extras["alpha"] - np.pi) <= 1e-6
    assert same_phase(r.delta_spectroscopic, r.delta)
    assert same_phase(r.gamma, r.gamma_direct)
    assert r.extras["spin_vector_residual"] < 1e-12
    if abs(r.m_or_v0) < 1e-12:
        assert r.beta == 0.0 and r.omega_v is None
        assert same_phase(r.gamma, -np.pi) and same_phase(r.delta, -np.pi)


def test_rational_spin_three_halves(alpha_pi_program):
    rep = spinalg.build_spin_rep(3)
    tau = alpha_pi_program.t_max
    r = rational_superposition_family(
        rep, alpha_pi_program, tau, -1.5, {0: 0.6, 1: 0.8}, 1, 1, oracle_steps=100_000
    )
    assert r.cyclicity_residual <= 1e-6
    assert same_phase(r.gamma, r.gamma_direct)


def test_rational_not_applicable_when_alpha_mismatch():
    rep = spinalg.build_spin_rep(2)
    with pytest.raises(NotApplicableError):
        rational_superposition_family(rep, four_programs()["rotating"], 6.0, -1, [0.6, 0.8], 1, 1)


@pytest.mark.parametrize(
    "twice_s, m, coeffs, n, p",
    [
        (2, -1, [0.6, 0.8], 1, 2),  # n = 1 needs odd p
        (4, -2, [0.6, 0.8], 2, 2),  # gcd(p, n) != 1
        (2, -1, [0.6, 0.8], 2, 1),  # s < n
        (2, -1, [0.6, 0.7], 1, 1),  # not normalized
        (2, 0, [0.6, 0.8], 1, 1),  # level 2 off the ladder
    ],
)
def test_rational_preconditions(alpha_pi_program, twice_s, m, coeffs, n, p):
    rep = spinalg.build_spin_rep(twice_s)
    with pytest.raises(PreconditionError):
        rational_superposition_family(rep, alpha_pi_program, alpha_pi_program.t_max, m, coeffs, n, p)


# -- all-cyclic intervals ----------------------------------------------------


def test_all_cyclic_spin_one_reference():
    rep = spinalg.build_spin_rep(2)
    prog = FixedAxis((0, 0, 1), 1.0, TWO_PI)
    # levels +1 and -1 along x have no cross terms in s, so v(0) = 0.28 x
    along_x = 0.8 * spinalg.eigenstate_of_spin_dot(rep, (1, 0, 0), 1) + 0.6 * spinalg.eigenstate_of_spin_dot(
        rep, (1, 0, 0), -1
    )
    zero_spin = np.array([1, 0, 1]) / np.sqrt(2)
    reports = all_cyclic_analysis(rep, prog, TWO_PI, [along_x, zero_spin], oracle_steps=100_000)
    r, z = reports
    assert r.k == 1 and z.k == 1
    np.testing.assert_allclose(r.extras["e0"], [1, 0, 0], atol=1e-12)
    assert r.m_or_v0 == pytest.approx(0.28)
    assert same_phase(r.gamma, -r.m_or_v0 * r.omega_v + (1 - r.m_or_v0) * TWO_PI)
    assert same_phase(r.gamma, r.gamma_direct)
    assert z.m_or_v0 == 0.0 and z.beta == 0.0 and z.omega_v is None
    assert same_phase(z.gamma, z.gamma_direct)


@pytest.mark.parametrize("twice_s", [1, 2, 3])
def test_all_cyclic_random_states(twice_s):
    rep = spinalg.build_spin_rep(twice_s)
    prog = FixedAxis((0, 0, 1), 1.0, TWO_PI)
    rng = np.random.default_rng(twice_s)
    states = [random_state(rng, rep.dim) for _ in range(20)]
    for r in all_cyclic_analysis(rep, prog, TWO_PI, states, oracle_steps=100_000):
        assert abs(r.extras["k_raw"] - 1) <= 1e-4
        assert r.cyclicity_residual <= 1e-6
        assert same_phase(r.gamma, r.gamma_direct)
        assert r.extras["scalar_offdiag"] < 1e-8


def test_all_cyclic_tuned_rotating_field():
    rep = spinalg.build_spin_rep(2)
    rng = np.random.default_rng(11)
    states = [random_state(rng, 3) for _ in range(5)]
    for r in all_cyclic_analysis(rep, TUNED_ROTATING, TWO_PI, states, oracle_steps=100_000):
        assert same_phase(r.gamma, r.gamma_direct)


def test_all_cyclic_requires_identity_monodromy():
    rep = spinalg.build_spin_rep(1)
    with pytest.raises(NotApplicableError):
        all_cyclic_analysis(rep, four_programs()["rotating"], 6.0, [np.array([1, 0])])


def test_scalar_residual():
    assert scalar_residual(np.exp(0.3j) * np.eye(3)) == (0.0, pytest.approx(0.0))
    off, spread = scalar_residual(np.diag([1, 1j]))
    assert off == 0 and spread == pytest.approx(np.pi / 2)


# -- alpha sensitivity and winding --------------------------------------------


def test_alpha_sensitivity_zero_perturbation():
    prog = FixedAxis((0, 0, 1), 1.0, TWO_PI)
    res = alpha_sensitivity(prog, TWO_PI, (0.6, 0, 0.8), 0.0)
    assert res["delta_alpha"] == 0.0 and res["consistent"]


def test_alpha_sensitivity_fixed_axis_small_tilt():
    prog = FixedAxis((0.36, 0.48, 0.8), 2.0, np.pi)
    res = alpha_sensitivity(prog, np.pi, (0.0, 0.6, 0.8), 1e-3)
    assert abs(res["delta_alpha"]) <= 1e-6
    assert res["consistent"] and not res["pole_crossing"]


def test_alpha_sensitivity_across_south_pole():
    # field along x: traces are circles in planes x = const; tilting e0 across
    # x = 0 moves the trace across the south pole
    prog = FixedAxis((1, 0, 0), 1.0, TWO_PI)
    e0 = np.array([1e-3, 0.6, 0.8])
    e0 /= np.linalg.norm(e0)
    tilt = np.array([-2e-3, 0.0, 0.0])
    tilt -= (tilt @ e0) * e0
    res = alpha_sensitivity(prog, TWO_PI, e0, tilt)
    assert res["pole_crossing"]
    assert abs(res["delta_alpha"] / (4 * np.pi) - res["jump_4pi"]) <= 1e-4
    assert res["u_invariance"] <= 1e-6


def test_alpha_sensitivity_requires_all_cyclic():
    with pytest.raises(NotApplicableError):
        alpha_sensitivity(four_programs()["rotating"], 6.0, (0, 0, 1), 1e-3)


@pytest.mark.parametrize("turns", [1, 2])
def test_winding_relation_fixed_axis(turns):
    tau = TWO_PI * turns
    res = winding_relation_check(FixedAxis((0, 0, 1), 1.0, tau), tau, (1, 0, 0))
    assert res["K"] == -turns and res["k"] == turns and res["holds"]


def test_winding_relation_tuned_rotating_field():
    checked = 0
    for e0 in [(1, 0, 0), (0, 1, 0), (0.6, 0, 0.8), (0, 0.6, -0.8)]:
        try:
            res = winding_relation_check(TUNED_ROTATING, TWO_PI, e0)
        except NotApplicableError:
            continue
        checked += 1
        assert res["holds"]
    assert checked >= 1
