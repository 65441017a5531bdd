"""Dense operator layer: Pauli strings, hermitian checks, traces, bases.

Operators are plain ``numpy`` complex arrays of shape ``(d, d)``.  Qubit
sites are numbered ``1..N`` from the left of the tensor product, and the
single-qubit basis is ``|up> = (1, 0)``, ``|down> = (0, 1)`` so that
``|down...down>`` is the last computational basis vector.
"""
from functools import lru_cache

import numpy as np
import scipy.linalg as la

from .errors import DimensionMismatch, InvalidDensityMatrix, NotHermitian

#: Vectorization convention used everywhere: column stacking,
#: ``vec(A)[i + d*j] = A[i, j]``, so ``vec(A X B) = (B^T kron A) vec(X)``.
VEC_ORDER = "F"

HERMITIAN_TOL = 1e-10
POSITIVITY_TOL = 1e-9

PAULI = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    # |up> -> |down>
    "minus": np.array([[0, 0], [1, 0]], dtype=complex),
    "plus": np.array([[0, 1], [0, 0]], dtype=complex),
    # (sigma^x - sigma^y) / 2 taken literally; not a ladder operator
    "minus_literal": np.array([[0, 0.5 + 0.5j], [0.5 - 0.5j, 0]], dtype=complex),
}


def vec(a):
    """Column-stack a ``(d, d)`` operator into a length ``d**2`` vector."""
    return np.asarray(a).reshape(-1, order=VEC_ORDER)


def unvec(v, d=None):
    v = np.asarray(v)
    if d is None:
        d = int(round(np.sqrt(v.shape[0])))
    if d * d != v.shape[0]:
        raise DimensionMismatch(f"vector of length {v.shape[0]} is not a vectorized square matrix")
    return v.reshape((d, d), order=VEC_ORDER)


def dagger(a):
    return np.conj(np.swapaxes(a, -1, -2))


def kron_all(ops):
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def pauli_on_site(axis, site, n_qubits):
    """Embed a single-qubit operator at ``site`` (1-based) of an N-qubit chain.

    Parameters
    ----------
    axis : str
        One of ``'x', 'y', 'z', 'minus', 'plus', 'i'`` (or ``'minus_literal'``).
    site : int
        Site index, ``1 <= site <= n_qubits``.
    n_qubits : int
        Chain length N; the result has dimension ``2**N``.
    """
    if axis not in PAULI:
        raise ValueError(f"unknown axis {axis!r}")
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    if not 1 <= site <= n_qubits:
        raise IndexError(f"site {site} outside 1..{n_qubits}")
    eye = PAULI["i"]
    return kron_all([PAULI[axis] if k == site else eye for k in range(1, n_qubits + 1)])


def hermiticity_error(a):
    a = np.asarray(a)
    return float(np.max(np.abs(a - dagger(a)))) if a.size else 0.0


def is_hermitian(a, tol=HERMITIAN_TOL):
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and hermiticity_error(a) <= tol


def hermitize(a):
    return 0.5 * (a + dagger(a))


def hermitian_eig(a, tol=HERMITIAN_TOL):
    """Eigendecomposition of a hermitian operator.

    Returns ascending real eigenvalues and a unitary whose columns are the
    eigenvectors.  Raises :class:`NotHermitian` if ``max|A - A^dag| > tol``.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    err = hermiticity_error(a)
    if err > tol:
        raise NotHermitian(f"hermiticity error {err:.3e} exceeds {tol:.1e}")
    w, v = la.eigh(hermitize(a))
    return w, v


def trace_inner(a, b):
    """Hilbert-Schmidt inner product ``Tr(A^dag B)``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    return complex(np.vdot(a, b))


def purity(rho):
    """``Tr(rho^2)`` for a hermitian operator."""
    return float(np.real(np.vdot(rho, rho)))


def validate_density_matrix(rho, trace_tol=1e-10, herm_tol=HERMITIAN_TOL, pos_tol=POSITIVITY_TOL):
    """Check the density-matrix invariants and return the hermitized array.

    Raises :class:`InvalidDensityMatrix` naming the first violated invariant.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidDensityMatrix(f"expected a square matrix, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise InvalidDensityMatrix("non-finite entries")
    err = hermiticity_error(rho)
    if err > herm_tol:
        raise InvalidDensityMatrix(f"not hermitian (error {err:.3e})")
    tr = np.trace(rho)
    if abs(tr - 1) > trace_tol:
        raise InvalidDensityMatrix(f"trace {tr.real:.12g} differs from 1")
    rho = hermitize(rho)
    lo = la.eigvalsh(rho)[0]
    if lo < -pos_tol:
        raise InvalidDensityMatrix(f"negative eigenvalue {lo:.3e}")
    return rho


def pure_state(psi):
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def down_state(n_qubits):
    """Projector onto the fully down-polarized state ``|down...down>``."""
    d = 2**n_qubits
    psi = np.zeros(d, dtype=complex)
    psi[-1] = 1.0
    return pure_state(psi)


@lru_cache(maxsize=16)
def _gell_mann(d):
    mats = []
    for j in range(d):
        for k in range(j + 1, d):
            s = np.zeros((d, d), dtype=complex)
            s[j, k] = s[k, j] = 1 / np.sqrt(2)
            mats.append(s)
            a = np.zeros((d, d), dtype=complex)
            a[j, k] = -1j / np.sqrt(2)
            a[k, j] = 1j / np.sqrt(2)
            mats.append(a)
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -l
        mats.append(np.diag(diag / np.sqrt(l * (l + 1))).astype(complex))
    out = np.array(mats).reshape(len(mats), d, d) if mats else np.zeros((0, d, d), dtype=complex)
    out.setflags(write=False)
    return out


def traceless_hermitian_basis(d):
    """Generalized Gell-Mann matrices normalized to ``Tr(S_i S_j) = delta_ij``.

    Returns an array of shape ``(d**2 - 1, d, d)``.
    """
    return _gell_mann(d)


@lru_cache(maxsize=16)
def _basis_matrix(d):
    mats = np.concatenate([np.eye(d, dtype=complex)[None] / np.sqrt(d), _gell_mann(d)])
    t = np.stack([vec(m) for m in mats], axis=1)
    t.setflags(write=False)
    return t


def hermitian_basis_matrix(d):
    """Unitary ``d**2 x d**2`` matrix whose columns are vec'd orthonormal hermitian matrices.

    The first column is ``vec(I)/sqrt(d)``.  In this basis a
    hermiticity-preserving superoperator is a real matrix and hermitian
    operators have real coordinates.
    """
    return _basis_matrix(d)


def hermitian_coordinates(a):
    """Real coordinates of a hermitian operator in :func:`hermitian_basis_matrix`."""
    a = np.asarray(a)
    return np.real(hermitian_basis_matrix(a.shape[0]).conj().T @ vec(a))


def random_density_matrix(d, rng, rank=None):
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_hermitian(d, rng, scale=1.0):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * hermitize(g)


def random_unitary(d, rng):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_pure_state(d, rng):
    psi = rng.normal(size=d) + 1j * rng.normal(size=d)
    return psi / np.linalg.norm(psi)
