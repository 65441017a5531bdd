"""Unitaries that prepare a target state from an initial one.

``geodesic_unitary`` rotates within the plane of two pure states,
``spectral_unitary`` maps eigenbasis to eigenbasis for isospectral mixed
states, and ``restricted_unitary`` is the two-angle product ansatz
``U = (x)_i exp(i theta Z_i / 2) exp(i phi Y_i / 2)`` with its optimizer.
"""
import json
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as la
from scipy.optimize import minimize

from .errors import DimensionMismatch, SpectrumMismatch
from .operators import hermitize, kron_all

PURE_TOL = 1e-10


def wrap_angle(x):
    """Map an angle into ``[-pi, pi)``."""
    return float((x + np.pi) % (2 * np.pi) - np.pi)


class RestrictedAngles(NamedTuple):
    theta: float
    phi: float

    def canonical(self):
        return RestrictedAngles(wrap_angle(self.theta), wrap_angle(self.phi))


def _unit(psi, name):
    psi = np.asarray(psi, dtype=complex).ravel()
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1) > 1e-8:
        raise ValueError(f"{name} must be normalized (norm {nrm:.6g})")
    return psi / nrm


def geodesic_unitary(psi1, psi2):
    """Minimal rotation taking ``|psi1><psi1|`` to ``|psi2><psi2|``.

    The generator ``h = (|q><p| - |p><q|)`` lives in the span of
    ``p = psi1`` and ``q``, the component of ``psi2`` orthogonal to ``psi1``
    (after removing the relative phase), so ``exp(theta h)`` has the closed
    form ``I + sin(theta) h + (cos(theta) - 1)(|p><p| + |q><q|)``.
    Identical states (up to phase) give the identity.
    """
    p = _unit(psi1, "psi1")
    psi2 = _unit(psi2, "psi2")
    if p.shape != psi2.shape:
        raise DimensionMismatch("state vectors have different lengths")
    d = p.shape[0]
    ov = np.vdot(psi2, p)
    a = abs(ov)
    if a >= 1 - 1e-12:
        return np.eye(d, dtype=complex)
    if a > 0:
        psi2 = psi2 * (ov / a)
    theta = np.arccos(min(a, 1.0))
    q = psi2 - a * p
    q /= np.linalg.norm(q)
    h = np.outer(q, p.conj()) - np.outer(p, q.conj())
    proj = np.outer(p, p.conj()) + np.outer(q, q.conj())
    return np.eye(d, dtype=complex) + np.sin(theta) * h + (np.cos(theta) - 1) * proj


def spectral_unitary(rho1, rho2, tol=1e-8):
    """``U = sum_i |phi2_i><phi1_i|`` with eigenvalues paired in ascending order."""
    w1, v1 = la.eigh(hermitize(np.asarray(rho1, dtype=complex)))
    w2, v2 = la.eigh(hermitize(np.asarray(rho2, dtype=complex)))
    if w1.shape != w2.shape:
        raise DimensionMismatch("states have different dimensions")
    gap = float(np.max(np.abs(w1 - w2)))
    if gap > tol:
        raise SpectrumMismatch(f"sorted spectra differ by {gap:.3e}")
    return v2 @ v1.conj().T


def is_pure(rho, tol=PURE_TOL):
    return la.eigvalsh(hermitize(np.asarray(rho)))[-1] >= 1 - tol


def top_eigenvector(rho):
    _, v = la.eigh(hermitize(np.asarray(rho)))
    return v[:, -1]


def preparation_unitary(rho0, rho_target):
    """Geodesic unitary for pure ``rho0``, spectral unitary otherwise."""
    if is_pure(rho0):
        return geodesic_unitary(top_eigenvector(rho0), top_eigenvector(rho_target))
    return spectral_unitary(rho0, rho_target)


def single_qubit_rotation(theta, phi):
    c, s = np.cos(phi / 2), np.sin(phi / 2)
    rz = np.diag([np.exp(0.5j * theta), np.exp(-0.5j * theta)])
    ry = np.array([[c, s], [-s, c]], dtype=complex)
    return rz @ ry


def restricted_unitary(angles, n_qubits):
    theta, phi = angles
    return kron_all([single_qubit_rotation(theta, phi)] * n_qubits)


def fidelity(rho, sigma):
    """Squared-overlap (Uhlmann) fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``."""
    rho = hermitize(np.asarray(rho))
    sigma = hermitize(np.asarray(sigma))
    w, v = la.eigh(rho)
    if w[-1] >= 1 - PURE_TOL:
        psi = v[:, -1]
        return float(np.real(np.vdot(psi, sigma @ psi)))
    sq = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    ev = la.eigvalsh(hermitize(sq @ sigma @ sq))
    return float(np.sum(np.sqrt(np.clip(ev, 0, None))) ** 2)


def _trace_distance(a, b):
    return 0.5 * float(np.sum(np.abs(la.eigvalsh(hermitize(a - b)))))


@dataclass(frozen=True)
class RestrictedFit:
    theta: float
    phi: float
    infidelity: float
    grid_best: float
    refined_best: float
    objective: str = "infidelity"

    @property
    def angles(self):
        return RestrictedAngles(self.theta, self.phi)

    def to_dict(self):
        return asdict(self)

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def optimize_restricted(rho0, target, n_qubits, grid=64, objective="infidelity", tol=1e-10):
    """Fit the two-angle ansatz so that ``U rho0 U^dag`` approximates ``target``.

    A ``grid x grid`` scan over ``[-pi, pi)^2`` picks the starting point
    (lowest objective, ties to the lexicographically smallest angles), then
    Nelder-Mead refines it.  ``objective`` is ``"infidelity"`` (``1 - F``) or
    ``"trace_distance"``; the returned ``infidelity`` is always ``1 - F``.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    target = np.asarray(target, dtype=complex)
    if objective == "infidelity":
        metric = lambda r: 1.0 - fidelity(target, r)
    elif objective == "trace_distance":
        metric = lambda r: _trace_distance(target, r)
    else:
        raise ValueError(f"unknown objective {objective!r}")

    def evolve(theta, phi):
        u = restricted_unitary((theta, phi), n_qubits)
        return u @ rho0 @ u.conj().T

    def f(x):
        return metric(evolve(x[0], x[1]))

    axis = np.linspace(-np.pi, np.pi, grid, endpoint=False)
    values = np.array([[f((t, p)) for p in axis] for t in axis])
    i, j = np.unravel_index(np.argmin(values), values.shape)
    x0 = np.array([axis[i], axis[j]])
    grid_best = float(values[i, j])

    res = minimize(
        f, x0, method="Nelder-Mead",
        options={"xatol": tol, "fatol": tol, "maxiter": 4000, "initial_simplex": x0 + np.array([[0, 0], [0.05, 0], [0, 0.05]])},
    )
    if res.fun < grid_best:
        x, best = res.x, float(res.fun)
    else:
        x, best = x0, grid_best
    theta, phi = wrap_angle(x[0]), wrap_angle(x[1])
    infid = 1.0 - fidelity(target, evolve(theta, phi))
    return RestrictedFit(theta, phi, float(infid), grid_best, best, objective)
