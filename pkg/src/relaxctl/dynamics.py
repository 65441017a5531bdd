"""Time evolution, distances to the steady state, and relaxation times."""
import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.integrate import solve_ivp

from .errors import EvolutionError, NeverCrossed
from .model import vectorize_liouvillian
from .operators import hermitize, unvec, vec
from .spectral import overlaps, steady_state

DISTANCE_FLOOR = 1e-14


def trace_distance(rho1, rho2):
    """``(1/2) sum |eig(rho1 - rho2)|``."""
    return 0.5 * float(np.sum(np.abs(la.eigvalsh(hermitize(np.asarray(rho1) - np.asarray(rho2))))))


def evolve_spectral(s, rho0, t):
    """``rho(t) = sum_k c_k exp(t lambda_k) r_k``, hermitized.

    ``t`` may be a scalar (returns ``(d, d)``) or a 1-d array (returns
    ``(len(t), d, d)``).
    """
    c = overlaps(s, rho0)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < 0):
        raise ValueError("times must be >= 0")
    amps = c[None, :] * np.exp(np.outer(ts, s.eigenvalues))
    d = s.dim
    flat = amps @ s.right.T
    out = hermitize(flat.reshape(len(ts), d, d).transpose(0, 2, 1))
    return out[0] if np.ndim(t) == 0 else out


def evolve_direct(h, jumps, rho0, t, method="expm", rtol=1e-10):
    """Evolve without the eigendecomposition.

    ``method="expm"`` uses the dense exponential of the superoperator;
    ``method="ode"`` integrates ``d rho/dt = L[rho]`` with an adaptive
    8th-order Runge-Kutta scheme.  Either way the trace must be preserved
    to ``1e-9``.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    rho0 = np.asarray(rho0, dtype=complex)
    d = rho0.shape[0]
    m = vectorize_liouvillian(h, jumps)
    if t == 0:
        out = rho0.copy()
    elif method == "expm":
        out = unvec(la.expm(m * t) @ vec(rho0), d)
    elif method == "ode":
        sol = solve_ivp(lambda _, y: m @ y, (0.0, t), vec(rho0), method="DOP853", rtol=rtol, atol=rtol * 1e-2)
        if not sol.success:
            raise EvolutionError(f"integrator failed: {sol.message}")
        out = unvec(sol.y[:, -1], d)
    else:
        raise ValueError(f"unknown method {method!r}")
    drift = abs(np.trace(out) - np.trace(rho0))
    if drift > 1e-9:
        raise EvolutionError(f"trace drifted by {drift:.2e}")
    return hermitize(out)


@dataclass
class Trajectory:
    times: np.ndarray
    distances: np.ndarray
    label: str = ""
    overlaps: np.ndarray = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.distances = np.asarray(self.distances, dtype=float)
        if self.times.shape != self.distances.shape:
            raise ValueError("times and distances differ in length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "distance", "label"])
            for t, dist in zip(self.times, self.distances):
                wr.writerow([repr(float(t)), repr(float(dist)), self.label])

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        label = rows[0]["label"] if rows else ""
        return cls(
            np.array([float(r["t"]) for r in rows]),
            np.array([float(r["distance"]) for r in rows]),
            label,
        )


def default_time_grid(s, points=400, start=1e-2, stop=50.0):
    """Log-spaced grid over ``[start, stop] / |Re lambda_slowest|``."""
    rate = abs(s.eigenvalues[s.d_s].real)
    return np.geomspace(start / rate, stop / rate, points)


def trajectory(s, rho0, times, label="", rho_inf=None, with_overlaps=False):
    """Distances ``d(rho(t), rho_inf)`` along a time grid.

    Distances below ``1e-14`` are clamped to ``1e-14``.  With
    ``with_overlaps`` the per-mode magnitudes ``|c_k exp(t lambda_k)|`` are
    stored as an array of shape ``(len(times), d**2)``.
    """
    times = np.asarray(times, dtype=float)
    if rho_inf is None:
        rho_inf = steady_state(s)
    states = evolve_spectral(s, rho0, times)
    dist = np.array([trace_distance(r, rho_inf) for r in states])
    dist = np.maximum(dist, DISTANCE_FLOOR)
    ov = None
    if with_overlaps:
        c = overlaps(s, rho0)
        ov = np.abs(c[None, :] * np.exp(np.outer(times, s.eigenvalues)))
    return Trajectory(times, dist, label, ov)


def time_to_threshold(traj, d_min):
    """First time the distance drops to ``d_min``, log-linearly interpolated."""
    d = traj.distances
    t = traj.times
    below = np.nonzero(d <= d_min)[0]
    if below.size == 0:
        raise NeverCrossed(d_min, float(np.min(d)))
    k = int(below[0])
    if k == 0:
        return float(t[0])
    d0, d1 = np.log(d[k - 1]), np.log(d[k])
    frac = (d0 - np.log(d_min)) / (d0 - d1)
    return float(t[k - 1] + frac * (t[k] - t[k - 1]))


def relative_gain(t_ref, t_perp):
    """``1 - t_perp / t_ref``."""
    if t_ref <= 0:
        raise ValueError("reference time must be > 0")
    return 1.0 - t_perp / t_ref


def fit_decay_rate(traj, upper, lower, t_min=0.0):
    """Least-squares rate ``k`` of ``d(t) ~ exp(-k t)`` over ``lower <= d <= upper``.

    Only points with ``t >= t_min`` enter the fit.  Raises ``ValueError``
    when fewer than three points fall inside the window.
    """
    mask = (traj.distances <= upper) & (traj.distances >= lower) & (traj.times >= t_min)
    if np.count_nonzero(mask) < 3:
        raise ValueError("fewer than three trajectory points inside the fit window")
    slope, _ = np.polyfit(traj.times[mask], np.log(traj.distances[mask]), 1)
    return -float(slope)


def residual_envelope(s, rho, targets, times):
    """``sum_a |c_a| exp(t Re lambda_a)`` over the suppressed modes."""
    targets = list(targets)
    times = np.asarray(times, dtype=float)
    if not targets:
        return np.zeros_like(times)
    c = np.abs(overlaps(s, rho)[targets])
    return c @ np.exp(np.outer(s.eigenvalues[targets].real, times))


def leading_unsuppressed_mode(s, rho, targets, overlap_tol=1e-8):
    """Slowest decaying mode outside ``targets`` on which ``rho`` has weight.

    Modes whose overlap is below ``overlap_tol`` (e.g. forbidden by a
    symmetry of the state) cannot set the relaxation rate and are skipped.
    Returns ``None`` if no such mode exists.
    """
    c = np.abs(overlaps(s, rho))
    excluded = set(int(a) for a in targets)
    for k in range(s.d_s, len(s)):
        if k not in excluded and c[k] > overlap_tol:
            return k
    return None


def late_decay_rate(traj, envelope=None, factor=10.0, decades=1.0, floor=1e-11):
    """Decay rate fitted over the last ``decades`` before the trajectory hits its floor.

    The floor is the first time the distance drops below ``floor`` or below
    ``factor * envelope`` (the residual of imperfectly suppressed modes),
    whichever comes first.  Returns ``(rate, n_points)``.
    """
    d = traj.distances
    bad = d < floor
    if envelope is not None:
        bad |= d < factor * np.asarray(envelope)
    stop = int(np.argmax(bad)) if bad.any() else len(d)
    if stop < 3:
        raise ValueError("trajectory reaches its floor before any fit window")
    d_cut = max(d[stop - 1], floor)
    mask = np.zeros(len(d), dtype=bool)
    mask[:stop] = (d[:stop] >= d_cut) & (d[:stop] <= d_cut * 10**decades)
    if np.count_nonzero(mask) < 3:
        raise ValueError("fewer than three points in the late-time window")
    slope, _ = np.polyfit(traj.times[mask], np.log(d[mask]), 1)
    return -float(slope), int(np.count_nonzero(mask))
