import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinprop import spinalg
from spinprop.errors import PreconditionError
from spinprop.verify import conjugation_residual

TWICE_S = [1, 2, 3, 4, 8]


def unit_vectors():
    return (
        st.tuples(*[st.floats(-1, 1, allow_nan=False) for _ in range(3)])
        .filter(lambda v: np.linalg.norm(v) > 1e-3)
        .map(lambda v: np.asarray(v) / np.linalg.norm(v))
    )


@pytest.mark.parametrize("twice_s", TWICE_S)
def test_spin_rep_invariants(twice_s):
    rep = spinalg.build_spin_rep(twice_s)
    s = float(rep.s)
    sx, sy, sz = rep.generators
    for g in rep.generators:
        assert np.max(np.abs(g - g.conj().T)) < 1e-14
    assert np.max(np.abs(sx @ sy - sy @ sx - 1j * sz)) < 1e-12
    assert np.max(np.abs(sy @ sz - sz @ sy - 1j * sx)) < 1e-12
    assert np.max(np.abs(sz @ sx - sx @ sz - 1j * sy)) < 1e-12
    casimir = sx @ sx + sy @ sy + sz @ sz
    assert np.max(np.abs(casimir - s * (s + 1) * np.eye(rep.dim))) < 1e-12
    np.testing.assert_allclose(np.diag(sz).real, rep.ms)
    assert rep.dim == twice_s + 1


def test_sz_spin_one_is_descending_diagonal():
    rep = spinalg.build_spin_rep(2)
    np.testing.assert_array_equal(rep.sz, np.diag([1.0, 0.0, -1.0]))


@pytest.mark.parametrize("bad", [0, -1, 41, 1.5, True])
def test_build_rejects_invalid_twice_s(bad):
    with pytest.raises(PreconditionError):
        spinalg.build_spin_rep(bad)


def test_spin_dot_reference_values():
    rep = spinalg.build_spin_rep(1)
    np.testing.assert_allclose(spinalg.spin_dot(rep, (0, 0, 1)), rep.sz)
    np.testing.assert_allclose(spinalg.spin_dot(rep, (0, 0, 0)), np.zeros((2, 2)))
    np.testing.assert_allclose(spinalg.spin_dot(rep, (1, 0, 0)), 0.5 * np.array([[0, 1], [1, 0]]))


def test_exp_i_spin_reference_values():
    rep = spinalg.build_spin_rep(1)
    np.testing.assert_allclose(spinalg.exp_i_spin(rep, 0.0, (0.6, 0, 0.8)), np.eye(2), atol=1e-15)
    np.testing.assert_allclose(spinalg.exp_i_spin(rep, np.pi, (0, 0, 1)), np.diag([1j, -1j]), atol=1e-15)


def test_exp_i_spin_matches_dense_eigensolver():
    rep = spinalg.build_spin_rep(2)
    M = spinalg.exp_i_spin(rep, np.pi / 2, (1, 0, 0))
    assert np.max(np.abs(M @ M.conj().T - np.eye(3))) < 1e-12
    w, V = np.linalg.eig(spinalg.spin_dot(rep, (1, 0, 0)))
    ref = V @ np.diag(np.exp(1j * np.pi / 2 * w)) @ np.linalg.inv(V)
    assert np.max(np.abs(M - ref)) < 1e-12


def test_exp_i_spin_rejects_non_unit_axis():
    rep = spinalg.build_spin_rep(1)
    with pytest.raises(PreconditionError):
        spinalg.exp_i_spin(rep, 1.0, (0, 0, 2))


@pytest.mark.parametrize("twice_s", TWICE_S)
def test_conjugation_identity_random_draws(twice_s):
    rep = spinalg.build_spin_rep(twice_s)
    rng = np.random.default_rng(100 + twice_s)
    for _ in range(100):
        b = rng.normal(size=3)
        b /= np.linalg.norm(b)
        assert conjugation_residual(rep, rng.uniform(-4 * np.pi, 4 * np.pi), b) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(TWICE_S), st.floats(-20, 20, allow_nan=False), unit_vectors())
def test_conjugation_identity_property(twice_s, xi, b):
    rep = spinalg.build_spin_rep(twice_s)
    assert conjugation_residual(rep, xi, b) <= 1e-10 * max(1.0, twice_s)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([1, 2, 3]), st.floats(-10, 10, allow_nan=False), st.floats(-10, 10, allow_nan=False), unit_vectors())
def test_exp_group_law_and_unitarity(twice_s, x1, x2, b):
    rep = spinalg.build_spin_rep(twice_s)
    A = spinalg.exp_i_spin(rep, x1, b)
    B = spinalg.exp_i_spin(rep, x2, b)
    np.testing.assert_allclose(A @ B, spinalg.exp_i_spin(rep, x1 + x2, b), atol=1e-11)
    np.testing.assert_allclose(A @ A.conj().T, np.eye(rep.dim), atol=1e-12)


def test_batch_matches_single():
    rep = spinalg.build_spin_rep(3)
    rng = np.random.default_rng(3)
    bs = rng.normal(size=(7, 3))
    bs /= np.linalg.norm(bs, axis=1, keepdims=True)
    xis = rng.uniform(-5, 5, 7)
    batch = spinalg.exp_i_spin_batch(rep, xis, bs)
    for x, b, U in zip(xis, bs, batch):
        np.testing.assert_allclose(U, spinalg.exp_i_spin(rep, x, b), atol=1e-13)


def test_eigenstate_reference_values():
    rep = spinalg.build_spin_rep(1)
    np.testing.assert_allclose(spinalg.eigenstate_of_spin_dot(rep, (0, 0, 1), 0.5), [1, 0], atol=1e-15)
    np.testing.assert_allclose(
        spinalg.eigenstate_of_spin_dot(rep, (1, 0, 0), 0.5), np.array([1, 1]) / np.sqrt(2), atol=1e-15
    )


def test_eigenstate_against_dense_eigensolver():
    rep = spinalg.build_spin_rep(4)
    b = np.array([0.6, 0.0, 0.8])
    chi = spinalg.eigenstate_of_spin_dot(rep, b, 1)
    H = spinalg.spin_dot(rep, b)
    assert np.linalg.norm(H @ chi - chi) < 1e-12
    w, V = np.linalg.eigh(H)
    ref = V[:, np.argmin(np.abs(w - 1))]
    assert abs(abs(np.vdot(ref, chi)) - 1) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([1, 2, 3, 4]), unit_vectors(), st.data())
def test_eigenstate_property(twice_s, b, data):
    rep = spinalg.build_spin_rep(twice_s)
    m = data.draw(st.sampled_from(list(rep.ms)))
    chi = spinalg.eigenstate_of_spin_dot(rep, b, m)
    assert abs(np.linalg.norm(chi) - 1) < 1e-12
    assert np.linalg.norm(spinalg.spin_dot(rep, b) @ chi - m * chi) < 1e-10
    np.testing.assert_allclose(spinalg.spin_expectation(rep, chi), m * b, atol=1e-10)


def test_eigenstate_rejects_off_ladder_m():
    rep = spinalg.build_spin_rep(2)
    with pytest.raises(PreconditionError):
        spinalg.eigenstate_of_spin_dot(rep, (0, 0, 1), 0.5)


def test_spherical_angles_poles_report_zero_azimuth():
    assert spinalg.spherical_angles((0, 0, 1)) == (0.0, 0.0)
    theta, phi = spinalg.spherical_angles((0, 0, -1))
    assert theta == pytest.approx(np.pi) and phi == 0.0
    theta, phi = spinalg.spherical_angles((0, 1, 0))
    assert theta == pytest.approx(np.pi / 2) and phi == pytest.approx(np.pi / 2)
