import numpy as np
import pytest

from relaxctl.errors import DefectiveLiouvillian, DegenerateSteadyState, DimensionMismatch
from relaxctl.model import ModelParams, build_liouvillian, vectorize_liouvillian
from relaxctl.operators import PAULI, random_density_matrix, unvec, vec
from relaxctl.spectral import (
    diagonalize,
    eigenvalue_ratios,
    overlaps,
    read_spectrum_csv,
    steady_state,
    write_spectrum_csv,
)


def amplitude_damping(gamma=1.0):
    return vectorize_liouvillian(np.zeros((2, 2)), [np.sqrt(gamma) * PAULI["minus"]])


def test_amplitude_damping_oracle():
    s = diagonalize(amplitude_damping())
    assert np.allclose(s.eigenvalues, [0, -0.5, -0.5, -1], atol=1e-10)
    assert s.d_s == 1
    assert np.allclose(steady_state(s), np.diag([0, 1]), atol=1e-10)


def test_biorthonormal_and_complete(chain3):
    _, s, *_ = chain3
    assert np.allclose(s.left.conj().T @ s.right, np.eye(len(s)), atol=1e-9)
    m = build_liouvillian(ModelParams(N=3))
    assert np.allclose(m @ s.right, s.right * s.eigenvalues, atol=1e-9)
    assert np.allclose(s.left.conj().T @ m, s.eigenvalues[:, None] * s.left.conj().T, atol=1e-9)


def test_sorted_by_real_part(chain3):
    _, s, *_ = chain3
    assert np.all(np.diff(s.eigenvalues.real) <= 1e-9)
    assert s.eigenvalues[0] == 0


def test_conjugate_partners(chain3):
    _, s, *_ = chain3
    for k in range(len(s)):
        j = s.partner[k]
        assert s.eigenvalues[j] == np.conj(s.eigenvalues[k])
        rk = s.right_mode(k)
        assert np.allclose(s.right_mode(j), rk.conj().T, atol=1e-12)
        if j == k:
            assert s.eigenvalues[k].imag == 0
            assert np.allclose(rk, rk.conj().T, atol=1e-12)


def test_decaying_modes_are_traceless(chain3):
    _, s, *_ = chain3
    assert np.allclose(s.mode_traces[1:], 0, atol=1e-12)
    assert s.mode_traces[0] == pytest.approx(1.0)


def test_overlap_reconstruction(chain3, rng):
    _, s, *_ = chain3
    rho = random_density_matrix(8, rng)
    c = overlaps(s, rho)
    assert c[0] == pytest.approx(1.0)
    assert np.allclose(s.reconstruct(c), rho, atol=1e-10)
    with pytest.raises(DimensionMismatch):
        overlaps(s, np.eye(4))


def test_jordan_block_is_defective():
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = m[1, 1] = -1.0
    m[0, 1] = 1.0
    m[3, 3] = -2.0
    with pytest.raises(DefectiveLiouvillian):
        diagonalize(m)


def test_degenerate_non_normal_cluster(rng):
    p = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    m = p @ np.diag([0.0, -1.0, -1.0, -2.0]) @ np.linalg.inv(p)
    s = diagonalize(m)
    assert np.allclose(s.eigenvalues, [0, -1, -1, -2], atol=1e-9)
    assert np.allclose(s.left.conj().T @ s.right, np.eye(4), atol=1e-9)
    assert np.allclose(s.right @ np.diag(s.eigenvalues) @ s.left.conj().T, m, atol=1e-8)


def test_degenerate_steady_state():
    s = diagonalize(vectorize_liouvillian(PAULI["z"], []))
    assert s.d_s == 4
    with pytest.raises(DegenerateSteadyState):
        steady_state(s)


def test_rejects_non_square_dimension():
    with pytest.raises(DimensionMismatch):
        diagonalize(np.zeros((3, 3)))


def test_spectrum_csv_round_trip(tmp_path, chain3):
    _, s, *_ = chain3
    path = tmp_path / "modes.csv"
    write_spectrum_csv(path, s)
    assert np.array_equal(read_spectrum_csv(path), s.eigenvalues)
    assert path.read_text().splitlines()[0] == "k,re,im"


def test_eigenvalue_ratios(chain3):
    _, s, *_ = chain3
    r = eigenvalue_ratios(s)
    assert r[0] == 1.0 and np.all(r >= 1 - 1e-12)


def test_steady_state_is_fixed_point(chain3):
    p, s, _, rho_inf, *_ = chain3
    m = build_liouvillian(p)
    assert np.allclose(unvec(m @ vec(rho_inf)), 0, atol=1e-10)
