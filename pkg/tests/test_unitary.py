import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given, settings, strategies as st

from relaxctl.errors import DimensionMismatch, SpectrumMismatch
from relaxctl.operators import pure_state, random_density_matrix, random_pure_state, random_unitary
from relaxctl.unitary import (
    RestrictedAngles,
    fidelity,
    geodesic_unitary,
    optimize_restricted,
    preparation_unitary,
    restricted_unitary,
    spectral_unitary,
    wrap_angle,
)
from relaxctl.dynamics import trace_distance


def conj(u, rho):
    return u @ rho @ u.conj().T


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(2, 16))
def test_geodesic_maps_source_to_target(seed, d):
    r = np.random.default_rng(seed)
    p1, p2 = random_pure_state(d, r), random_pure_state(d, r)
    u = geodesic_unitary(p1, p2)
    assert np.allclose(u.conj().T @ u, np.eye(d), atol=1e-10)
    assert trace_distance(conj(u, pure_state(p1)), pure_state(p2)) < 1e-8


def test_geodesic_closed_form_matches_expm(rng):
    p1, p2 = random_pure_state(4, rng), random_pure_state(4, rng)
    ov = np.vdot(p2, p1)
    p2 = p2 * ov / abs(ov)
    q = p2 - abs(ov) * p1
    q /= np.linalg.norm(q)
    h = np.outer(q, p1.conj()) - np.outer(p1, q.conj())
    assert np.allclose(geodesic_unitary(p1, p2), la.expm(np.arccos(abs(ov)) * h), atol=1e-12)


def test_geodesic_edge_cases():
    e0, e1 = np.eye(2)[0], np.eye(2)[1]
    assert np.array_equal(geodesic_unitary(e0, 1j * e0), np.eye(2))
    u = geodesic_unitary(e0, e1)
    assert np.allclose(u @ e0, e1)
    with pytest.raises(ValueError):
        geodesic_unitary(2 * e0, e1)
    with pytest.raises(DimensionMismatch):
        geodesic_unitary(e0, np.eye(3)[0])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(2, 16))
def test_spectral_unitary_on_isospectral_pairs(seed, d):
    r = np.random.default_rng(seed)
    rho1 = random_density_matrix(d, r)
    rho2 = conj(random_unitary(d, r), rho1)
    u = spectral_unitary(rho1, rho2)
    assert np.allclose(u.conj().T @ u, np.eye(d), atol=1e-10)
    assert trace_distance(conj(u, rho1), rho2) < 1e-8


def test_spectral_unitary_rejects_different_spectra(rng):
    with pytest.raises(SpectrumMismatch):
        spectral_unitary(random_density_matrix(3, rng), random_density_matrix(3, rng))


def test_preparation_unitary_dispatch(rng):
    p = pure_state(random_pure_state(4, rng))
    q = pure_state(random_pure_state(4, rng))
    assert trace_distance(conj(preparation_unitary(p, q), p), q) < 1e-10
    m = random_density_matrix(4, rng)
    m2 = conj(random_unitary(4, rng), m)
    assert trace_distance(conj(preparation_unitary(m, m2), m), m2) < 1e-10


def test_fidelity(rng):
    a, b = random_density_matrix(3, rng), random_density_matrix(3, rng)
    assert fidelity(a, a) == pytest.approx(1.0)
    assert fidelity(a, b) == pytest.approx(fidelity(b, a), abs=1e-10)
    psi = random_pure_state(3, rng)
    assert fidelity(pure_state(psi), b) == pytest.approx(np.real(np.vdot(psi, b @ psi)))
    assert 0 <= fidelity(a, b) <= 1


def test_wrap_angle():
    assert wrap_angle(np.pi) == pytest.approx(-np.pi)
    assert wrap_angle(3 * np.pi / 2) == pytest.approx(-np.pi / 2)
    assert RestrictedAngles(2 * np.pi + 0.1, 0.0).canonical().theta == pytest.approx(0.1)


def test_restricted_identity_at_zero():
    assert np.allclose(restricted_unitary((0.0, 0.0), 3), np.eye(8))


@pytest.mark.parametrize("theta,phi", [(0.7, 1.1), (-2.0, 0.4)])
def test_restricted_recovers_planted_angles(theta, phi):
    n = 3
    rho0 = np.zeros((8, 8), dtype=complex)
    rho0[-1, -1] = 1
    target = conj(restricted_unitary((theta, phi), n), rho0)
    fit = optimize_restricted(rho0, target, n, grid=32)
    assert fit.infidelity < 1e-8
    assert fit.refined_best <= fit.grid_best
    fit_td = optimize_restricted(rho0, target, n, grid=32, objective="trace_distance")
    assert fit_td.infidelity < 1e-6
    with pytest.raises(ValueError):
        optimize_restricted(rho0, target, n, objective="bogus")
