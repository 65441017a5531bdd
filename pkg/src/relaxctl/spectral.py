"""Biorthonormal eigendecomposition of Liouvillian superoperators.

Modes are stored as column-stacked vectors: ``right[:, k] = vec(r_k)`` and
``left[:, k] = vec(l_k)`` with ``Tr(l_k^dag r_m) = delta_km``.  Mode indices
are 0-based here; index 0 is the steady state when ``d_s == 1``.

When the generator preserves hermiticity, diagonalization runs on the real
matrix obtained in an orthonormal hermitian operator basis.  Real
eigenvalues then come out exactly real with hermitian modes, and complex
eigenvalues come in exact conjugate pairs with ``r_partner = r^dag``.
"""
import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as la

from .errors import DefectiveLiouvillian, DegenerateSteadyState, DimensionMismatch
from .operators import hermitian_basis_matrix, hermitize, unvec, validate_density_matrix, vec

CLUSTER_TOL = 1e-9
DEFECT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class LiouvilleSpectrum:
    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    d_s: int
    tol_zero: float
    partner: np.ndarray
    gram_condition: float = 1.0
    hermiticity_preserving: bool = True
    clusters: tuple = field(default=(), repr=False)

    @property
    def dim(self):
        return int(round(np.sqrt(self.eigenvalues.shape[0])))

    def __len__(self):
        return self.eigenvalues.shape[0]

    @cached_property
    def left_adjoint(self):
        """Rows are ``vec(l_k)^dag``; ``left_adjoint @ vec(rho)`` gives the overlaps."""
        return np.ascontiguousarray(self.left.conj().T)

    @cached_property
    def mode_traces(self):
        d = self.dim
        return self.right[:: d + 1, :].sum(axis=0)

    def right_mode(self, k):
        return unvec(self.right[:, k], self.dim)

    def left_mode(self, k):
        return unvec(self.left[:, k], self.dim)

    def overlaps(self, rho):
        return overlaps(self, rho)

    def reconstruct(self, coefficients):
        return unvec(self.right @ np.asarray(coefficients), self.dim)

    def is_decaying(self, k):
        return abs(self.eigenvalues[k].real) > self.tol_zero

    def is_real(self, k):
        return self.partner[k] == k


def _sort_order(w, tol):
    """Re descending; eigenvalues whose real parts agree within ``tol`` are ordered by Im descending."""
    idx = np.argsort(-w.real, kind="stable")
    out = []
    i = 0
    while i < len(idx):
        j = i + 1
        while j < len(idx) and w[idx[i]].real - w[idx[j]].real <= tol:
            j += 1
        out.extend(sorted(idx[i:j], key=lambda k: (-w[k].imag, k)))
        i = j
    return np.array(out, dtype=int)


def _clusters(w, tol):
    groups = []
    start = 0
    for k in range(1, len(w) + 1):
        if k == len(w) or abs(w[k] - w[k - 1]) > tol:
            groups.append(tuple(range(start, k)))
            start = k
    return groups


def biorthonormalize(right, left, eigenvalues, cluster_tol=CLUSTER_TOL):
    """Rescale/recombine left vectors so that ``left^dag right = I``.

    Eigenvalues must already be sorted so that degenerate ones are adjacent.
    Within a degenerate cluster the left vectors are replaced by
    ``left_c G^{-dag}`` with ``G = left_c^dag right_c`` (LU solve); isolated
    modes only need a scalar normalization.

    Returns
    -------
    left : ndarray
        Biorthonormalized left vectors; ``right`` is left untouched.
    condition : float
        Largest Gram-matrix condition number over all clusters.
    """
    right = np.asarray(right)
    left = np.array(left, dtype=complex, copy=True)
    cond = 1.0
    for cl in _clusters(np.asarray(eigenvalues), cluster_tol):
        sl = slice(cl[0], cl[-1] + 1)
        rn = right[:, sl] / np.linalg.norm(right[:, sl], axis=0)
        ln = left[:, sl] / np.linalg.norm(left[:, sl], axis=0)
        gram = ln.conj().T @ rn
        if len(cl) == 1:
            g = gram[0, 0]
            if abs(g) < DEFECT_TOL:
                raise DefectiveLiouvillian(f"mode {cl[0]}: left/right overlap {abs(g):.2e} (Jordan block?)")
            left[:, sl] = left[:, sl] / np.conj(left[:, sl].conj().T @ right[:, sl])
            cond = max(cond, 1 / abs(g))
            continue
        smin = la.svdvals(gram)[-1]
        if smin < DEFECT_TOL:
            raise DefectiveLiouvillian(
                f"cluster {cl[0]}..{cl[-1]}: singular Gram matrix (sigma_min {smin:.2e}, Jordan block?)"
            )
        cond = max(cond, float(np.linalg.cond(gram)))
        g = left[:, sl].conj().T @ right[:, sl]
        left[:, sl] = la.lu_solve(la.lu_factor(g), left[:, sl].conj().T).conj().T
    return left, cond


def _fix_phase(vr, wl, k, scale):
    v = vr[:, k]
    # coordinate 0 is the trace direction in the hermitian basis
    j = 0 if abs(v[0]) > 1e-10 * scale else int(np.argmax(np.abs(v)))
    ph = v[j] / abs(v[j])
    vr[:, k] *= np.conj(ph)
    wl[:, k] *= np.conj(ph)


def default_tol_zero(eigenvalues):
    return max(1e-9 * float(np.max(np.abs(np.real(eigenvalues)))), 1e-12)


def diagonalize(m, tol_zero=None, cluster_tol=CLUSTER_TOL, validate=True):
    """Biorthonormal eigendecomposition of a vectorized Liouvillian.

    Parameters
    ----------
    m : ndarray, shape (d**2, d**2)
        Superoperator in the column-stacking convention.
    tol_zero : float, optional
        Threshold on ``|Re lambda|`` for a mode to count as non-decaying.
        Defaults to ``max(1e-9 * max|Re lambda|, 1e-12)``.
    cluster_tol : float
        Eigenvalues closer than this are treated as one degenerate cluster.
    validate : bool
        Check eigen-residuals (relative to ``||M||``) and biorthonormality
        to ``1e-8``.

    Raises
    ------
    DefectiveLiouvillian
        If left and right eigenvectors of some cluster cannot be paired.
    """
    m = np.asarray(m, dtype=complex)
    n2 = m.shape[0]
    d = int(round(np.sqrt(n2)))
    if m.shape != (n2, n2) or d * d != n2:
        raise DimensionMismatch(f"superoperator must be square with size d**2, got {m.shape}")
    t = hermitian_basis_matrix(d)
    mr = t.conj().T @ m @ t
    mnorm = max(float(np.linalg.norm(m)), 1e-300)
    herm = float(np.max(np.abs(mr.imag))) <= 1e-12 * max(1.0, mnorm)
    w, wl, vr = la.eig(mr.real if herm else mr, left=True, right=True)
    w = w.astype(complex)
    wl = wl.astype(complex)
    vr = vr.astype(complex)
    if herm:
        # dgeev returns exact zeros; keep them exact for pairing
        w.imag[np.abs(w.imag) <= cluster_tol] = 0.0

    order = _sort_order(w, cluster_tol)
    w, wl, vr = w[order], wl[:, order], vr[:, order]
    wl, cond = biorthonormalize(vr, wl, w, cluster_tol)
    clusters = _clusters(w, cluster_tol)

    partner = np.arange(n2)
    imag_tol = cluster_tol
    if herm:
        lookup = {cl: np.mean(w[list(cl)]) for cl in clusters}
        used = set()
        for cl in clusters:
            mu = lookup[cl]
            if mu.imag <= imag_tol:
                continue
            cands = [c for c in clusters if c not in used and len(c) == len(cl) and lookup[c].imag < -imag_tol]
            if not cands:
                raise DefectiveLiouvillian(f"no conjugate partner for eigenvalue {mu:.6g}")
            mate = min(cands, key=lambda c: abs(lookup[c] - np.conj(mu)))
            used.add(mate)
            for k, km in zip(cl, mate):
                _fix_phase(vr, wl, k, 1.0)
                vr[:, km] = vr[:, k].conj()
                wl[:, km] = wl[:, k].conj()
                w[km] = np.conj(w[k])
                partner[k], partner[km] = km, k
        for cl in clusters:
            if abs(lookup[cl].imag) <= imag_tol:
                for k in cl:
                    vr[:, k] = vr[:, k].real
                    wl[:, k] = wl[:, k].real
                    _fix_phase(vr, wl, k, 1.0)
    else:
        for k in range(n2):
            _fix_phase(vr, wl, k, 1.0)

    if tol_zero is None:
        tol_zero = default_tol_zero(w)
    d_s = int(np.sum(np.abs(w.real) <= tol_zero))

    if d_s == 1:
        tr = vr[0, 0] * np.sqrt(d)
        if abs(tr) > DEFECT_TOL:
            vr[:, 0] /= tr
            wl[:, 0] *= np.conj(tr)

    if validate:
        res = mr @ vr - vr * w
        rel = np.linalg.norm(res, axis=0) / np.maximum(np.linalg.norm(vr, axis=0), 1e-300)
        if np.max(rel) > 1e-8 * mnorm:
            raise DefectiveLiouvillian(f"eigen-residual {np.max(rel):.2e} exceeds tolerance")
        bio = np.max(np.abs(wl.conj().T @ vr - np.eye(n2)))
        if bio > 1e-8:
            raise DefectiveLiouvillian(f"biorthonormality error {bio:.2e}; near-degenerate spectrum?")

    right = t @ vr
    left = t @ wl
    return LiouvilleSpectrum(
        eigenvalues=w,
        right=right,
        left=left,
        d_s=d_s,
        tol_zero=float(tol_zero),
        partner=partner,
        gram_condition=float(cond),
        hermiticity_preserving=bool(herm),
        clusters=tuple(clusters),
    )


def steady_state(s):
    """Unique steady state of the generator as a density matrix."""
    if s.d_s != 1:
        raise DegenerateSteadyState(s.d_s)
    r = s.right_mode(0)
    r = hermitize(r / np.trace(r))
    return validate_density_matrix(r, trace_tol=1e-10, herm_tol=1e-8)


def overlaps(s, rho):
    """Coefficients ``c_k = Tr(l_k^dag rho)`` of ``rho`` in the right-mode basis."""
    rho = np.asarray(rho)
    if rho.shape != (s.dim, s.dim):
        raise DimensionMismatch(f"state shape {rho.shape} does not match dimension {s.dim}")
    return s.left_adjoint @ vec(rho)


def eigenvalue_ratios(s):
    """``Re(lambda_k) / Re(lambda_{d_s+1})`` for every decaying mode."""
    ref = s.eigenvalues[s.d_s].real
    return s.eigenvalues[s.d_s :].real / ref


def write_spectrum_csv(path, s):
    """Write ``k, re, im`` rows; ``k`` is the 1-based mode label."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["k", "re", "im"])
        for k, lam in enumerate(s.eigenvalues, start=1):
            wr.writerow([k, repr(float(lam.real)), repr(float(lam.imag))])


def read_spectrum_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
