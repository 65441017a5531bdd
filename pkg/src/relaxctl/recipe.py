"""Iterative suppression of chosen Liouvillian modes in an initial state.

One iteration maps the current state ``rho`` to a new state with the
spectrum of ``rho0``:

1. zero the coefficients ``c_a = Tr(l_a^dag rho)`` for ``a`` in the target set;
2. rescale the non-decaying part by ``alpha_s`` (restores the trace) and the
   decaying part by a root ``alpha`` of a quadratic (restores the purity);
3. keep the eigenvectors of the rescaled operator but impose the
   eigenvalues of ``rho0`` (ascending pairing).

The loop stops on cost ``<= epsilon``, on stagnation over a window of
iterations, or at ``max_iter``.
"""
import csv
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .errors import ConfigError, DegenerateDirection, NegativeDiscriminant, VanishingTrace
from .operators import hermitize, traceless_hermitian_basis, unvec, vec
from .unitary import preparation_unitary

ROOT_CHOICES = ("plus", "minus", "best")


@dataclass(frozen=True)
class SuppressionConfig:
    epsilon: float = 1e-6
    window: int = 100
    rel_tol: float = 1e-6
    max_iter: int = 10_000
    root_choice: str = "best"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be > 0")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        if self.root_choice not in ROOT_CHOICES:
            raise ConfigError(f"root_choice must be one of {ROOT_CHOICES}")

    @classmethod
    def from_mapping(cls, data):
        conv = {"epsilon": float, "window": int, "rel_tol": float, "max_iter": int, "root_choice": str}
        return cls(**{k: conv[k](v) for k, v in data.items() if k in conv})


@dataclass
class SuppressionResult:
    rho_perp: np.ndarray
    unitary: np.ndarray
    targets: tuple
    cost_history: np.ndarray
    alpha_s_history: np.ndarray
    alpha_history: np.ndarray
    discriminant_history: np.ndarray
    trace_error_history: np.ndarray
    purity_error_history: np.ndarray
    converged: bool
    stop_reason: str
    extra: dict = field(default_factory=dict)

    @property
    def final_cost(self):
        return float(self.cost_history[-1]) if len(self.cost_history) else float("nan")

    @property
    def n_iterations(self):
        return len(self.cost_history)

    def to_dict(self):
        return {
            "targets": [int(a) for a in self.targets],
            "final_cost": self.final_cost,
            "n_iterations": self.n_iterations,
            "converged": bool(self.converged),
            "stop_reason": self.stop_reason,
            "cost_history": [float(c) for c in self.cost_history],
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def write_cost_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["iteration", "cost"])
            for i, c in enumerate(self.cost_history, start=1):
                wr.writerow([i, repr(float(c))])


@dataclass(frozen=True)
class AlphaRoots:
    plus: float
    minus: float
    A: float
    B: float
    C: float
    discriminant: float


@dataclass(frozen=True)
class RealityReport:
    discriminant: float
    A: float
    B: float
    C: float
    cos2_theta: float
    cos2_theta_m: float

    @property
    def real_roots(self):
        return self.discriminant >= 0

    @property
    def geometric_real(self):
        """Geometric reality test; only meaningful when ``C > 0``."""
        if self.C <= 0:
            return True
        return self.cos2_theta_m < self.cos2_theta


def close_under_conjugation(targets, s):
    """Add the conjugate partner of every complex mode in ``targets``."""
    out = set(int(a) for a in targets)
    for a in list(out):
        if not 0 <= a < len(s):
            raise IndexError(f"mode index {a} outside 0..{len(s) - 1}")
        out.add(int(s.partner[a]))
    return tuple(sorted(out))


def slowest_decaying(s, n):
    """Targets for the modes labelled ``2..n`` (1-based, steady state = 1).

    With a unique steady state these are the ``n - 1`` slowest decaying
    modes, 0-based indices ``1..n-1``, closed under conjugation.
    """
    if n < 2:
        raise ConfigError("n must be >= 2: the steady state is never suppressed")
    if n > len(s):
        raise ConfigError(f"n={n} exceeds the number of modes {len(s)}")
    return close_under_conjugation(range(s.d_s, s.d_s + n - 1), s)


def all_but_slowest(s):
    """Targets for a slowdown: every decaying mode except the slowest one(s).

    If the slowest decaying eigenvalue is complex its partner is kept too.
    """
    keep = {s.d_s, int(s.partner[s.d_s])}
    return tuple(k for k in range(s.d_s, len(s)) if k not in keep)


def project_out(c, targets):
    c = np.array(c, dtype=complex, copy=True)
    c[list(targets)] = 0.0
    return c


def rescale_alpha_s(c_tilde, s):
    """``1 / Tr(rho_tilde)`` for the projected coefficients."""
    tr = complex(np.dot(s.mode_traces, c_tilde))
    if abs(tr) <= 1e-12:
        raise VanishingTrace(abs(tr))
    return 1.0 / tr.real


def split_components(c_tilde, s):
    """Return ``(sigma_s, sigma)``: non-decaying and decaying parts of ``sum c_k r_k``."""
    cs = np.zeros_like(c_tilde)
    cs[: s.d_s] = c_tilde[: s.d_s]
    cd = c_tilde - cs
    return hermitize(s.reconstruct(cs)), hermitize(s.reconstruct(cd))


def purity_quadratic(sigma_s, sigma, alpha_s, purity0):
    """Coefficients of ``A a^2 + 2 B a + C = 0`` for ``Tr((alpha_s sigma_s + a sigma)^2) = purity0``."""
    A = float(np.real(np.vdot(sigma, sigma)))
    B = float(np.real(alpha_s * np.vdot(sigma_s, sigma)))
    C = float(alpha_s**2 * np.real(np.vdot(sigma_s, sigma_s)) - purity0)
    return A, B, C


def alpha_roots(A, B, C):
    if A <= 1e-14:
        raise DegenerateDirection(A)
    disc = B * B - A * C
    if disc < 0:
        raise NegativeDiscriminant(disc)
    sq = np.sqrt(disc)
    return AlphaRoots((-B + sq) / A, (-B - sq) / A, A, B, C, disc)


def rescale_alpha(c_tilde, rho0, s, alpha_s=None):
    """Purity-restoring rescaling roots for the decaying component.

    Returns an :class:`AlphaRoots` carrying both roots and the quadratic's
    coefficients.  Raises :class:`NegativeDiscriminant` when no real root
    exists and :class:`DegenerateDirection` when the decaying part vanishes.
    """
    if alpha_s is None:
        alpha_s = rescale_alpha_s(c_tilde, s)
    sigma_s, sigma = split_components(c_tilde, s)
    purity0 = float(np.real(np.vdot(rho0, rho0)))
    return alpha_roots(*purity_quadratic(sigma_s, sigma, alpha_s, purity0))


def check_reality(sigma_s, sigma, rho0, alpha_s=None):
    """Discriminant of the purity quadratic and its geometric counterpart.

    The geometric quantities are computed from coordinates in a traceless
    hermitian basis: ``n`` for ``rho0``, ``v_s`` for ``alpha_s sigma_s`` and
    ``v`` for ``sigma``, with ``cos^2(theta) = (v_s.v)^2 / (|v_s|^2 |v|^2)``
    and ``cos^2(theta_m) = 1 - |n|^2 / |v_s|^2``.
    """
    sigma_s = np.asarray(sigma_s)
    sigma = np.asarray(sigma)
    rho0 = np.asarray(rho0)
    if alpha_s is None:
        alpha_s = 1.0 / np.trace(sigma_s + sigma).real
    purity0 = float(np.real(np.vdot(rho0, rho0)))
    A, B, C = purity_quadratic(sigma_s, sigma, alpha_s, purity0)
    disc = B * B - A * C

    basis = traceless_hermitian_basis(rho0.shape[0])
    coords = lambda x: np.real(np.einsum("kij,ji->k", basis, x))
    n = coords(rho0)
    vs = coords(alpha_s * sigma_s)
    v = coords(sigma)
    nvs = float(vs @ vs)
    nv = float(v @ v)
    cos2 = float((vs @ v) ** 2 / (nvs * nv)) if nvs > 0 and nv > 0 else 0.0
    cos2m = float(1.0 - (n @ n) / nvs) if nvs > 0 else -np.inf
    return RealityReport(disc, A, B, C, cos2, cos2m)


def spectrum_match(rho0, rho_bar):
    """Impose the spectrum of ``rho0`` on the eigenvectors of ``rho_bar``."""
    return _match(la.eigvalsh(hermitize(np.asarray(rho0))), rho_bar)


def _match(target_eigs, rho_bar):
    _, u = la.eigh(hermitize(rho_bar))
    out = (u * target_eigs) @ u.conj().T
    return hermitize(out)


def cost(rho, targets, s):
    """``sum_a |Tr(l_a^dag rho)|`` over the target modes."""
    targets = list(targets)
    if not targets:
        return 0.0
    return float(np.sum(np.abs(s.left_adjoint[targets] @ vec(rho))))


def select_root(roots, evaluate, choice="best"):
    """Pick a root; ``evaluate(alpha) -> (cost, payload)``.

    ``best`` evaluates both roots and keeps the cheaper; ties go to ``plus``.
    """
    if choice == "plus":
        return (roots.plus,) + tuple(evaluate(roots.plus))
    if choice == "minus":
        return (roots.minus,) + tuple(evaluate(roots.minus))
    cp, pp = evaluate(roots.plus)
    if roots.minus == roots.plus:
        return roots.plus, cp, pp
    cm, pm = evaluate(roots.minus)
    if cm < cp:
        return roots.minus, cm, pm
    return roots.plus, cp, pp


class _Loop:
    """Per-iteration work restricted to the target and non-decaying modes."""

    def __init__(self, rho0, s, targets):
        self.s = s
        self.d = s.dim
        self.targets = list(targets)
        self.l_a = s.left_adjoint[self.targets]
        self.r_a = s.right[:, self.targets]
        self.l_s = s.left_adjoint[: s.d_s]
        self.r_s = s.right[:, : s.d_s]
        self.eigs0 = la.eigvalsh(hermitize(rho0))
        self.purity0 = float(np.sum(self.eigs0**2))

    def cost(self, rho):
        if not self.targets:
            return 0.0
        return float(np.sum(np.abs(self.l_a @ vec(rho))))

    def project(self, rho):
        """``(sigma_s, sigma)`` of the projected operator."""
        v = vec(rho)
        v_tilde = v - self.r_a @ (self.l_a @ v) if self.targets else v
        vs = self.r_s @ (self.l_s @ v_tilde)
        sigma_s = hermitize(unvec(vs, self.d))
        sigma = hermitize(unvec(v_tilde - vs, self.d))
        return sigma_s, sigma


def suppress_modes(rho0, s, targets, config=None):
    """Run the iterative recipe and return a :class:`SuppressionResult`.

    Parameters
    ----------
    rho0 : ndarray
        Initial density matrix.
    s : LiouvilleSpectrum
    targets : iterable of int
        0-based mode indices to suppress; must be closed under conjugation.
    config : SuppressionConfig, optional

    Raises
    ------
    NegativeDiscriminant, VanishingTrace, DegenerateDirection
        With the partial result (history up to the failure) on ``.result``.
    """
    cfg = config or SuppressionConfig()
    targets = tuple(int(a) for a in targets)
    if close_under_conjugation(targets, s) != tuple(sorted(set(targets))):
        raise ValueError("target set is not closed under hermitian conjugation")
    rho0 = hermitize(np.asarray(rho0, dtype=complex))
    loop = _Loop(rho0, s, targets)

    hist = {k: [] for k in ("cost", "alpha_s", "alpha", "disc", "trace", "purity")}
    rho = rho0
    converged = False
    reason = "max_iter"

    def partial(reason):
        return _result(rho0, rho, targets, hist, False, reason)

    for it in range(1, cfg.max_iter + 1):
        sigma_s, sigma = loop.project(rho)
        tr = np.trace(sigma_s).real + np.trace(sigma).real
        if abs(tr) <= 1e-12:
            raise VanishingTrace(abs(tr), partial("vanishing_trace"))
        alpha_s = 1.0 / tr
        A, B, C = purity_quadratic(sigma_s, sigma, alpha_s, loop.purity0)
        try:
            roots = alpha_roots(A, B, C)
        except NegativeDiscriminant as exc:
            exc.result = partial("negative_discriminant")
            raise
        except DegenerateDirection as exc:
            exc.result = partial("degenerate_direction")
            raise

        base = alpha_s * sigma_s

        def evaluate(a):
            rho_bar = base + a * sigma
            new = _match(loop.eigs0, rho_bar)
            return loop.cost(new), (new, rho_bar)

        alpha, c, (new, rho_bar) = select_root(roots, evaluate, cfg.root_choice)
        hist["cost"].append(c)
        hist["alpha_s"].append(alpha_s)
        hist["alpha"].append(alpha)
        hist["disc"].append(roots.discriminant)
        hist["trace"].append(np.trace(rho_bar).real - 1.0)
        hist["purity"].append(float(np.real(np.vdot(rho_bar, rho_bar))) - loop.purity0)
        rho = new

        if c <= cfg.epsilon:
            converged, reason = True, "tolerance"
            break
        if it > cfg.window:
            ref = hist["cost"][-1 - cfg.window]
            if abs(c - ref) / max(ref, 1e-300) < cfg.rel_tol:
                reason = "stagnation"
                break
    return _result(rho0, rho, targets, hist, converged, reason)


def _result(rho0, rho, targets, hist, converged, reason):
    return SuppressionResult(
        rho_perp=rho,
        unitary=preparation_unitary(rho0, rho),
        targets=targets,
        cost_history=np.array(hist["cost"], dtype=float),
        alpha_s_history=np.array(hist["alpha_s"], dtype=float),
        alpha_history=np.array(hist["alpha"], dtype=float),
        discriminant_history=np.array(hist["disc"], dtype=float),
        trace_error_history=np.array(hist["trace"], dtype=float),
        purity_error_history=np.array(hist["purity"], dtype=float),
        converged=converged,
        stop_reason=reason,
    )
