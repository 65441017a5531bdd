"""Experiment drivers: speedup, parameter sweep, local-operation speedup, slowdown.

Every driver writes CSV data series and a JSON report under
``<output_dir>/<experiment>/`` together with ``manifest.json`` recording the
full configuration, including values that are assumed rather than given
(range exponent, decay rate, initial state).  CSV floats are written with
``repr`` so that repeated runs are byte-identical.
"""
import configparser
import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .dynamics import (
    default_time_grid,
    late_decay_rate,
    leading_unsuppressed_mode,
    relative_gain,
    residual_envelope,
    time_to_threshold,
    trajectory,
)
from .errors import ConfigError, NeverCrossed, RelaxCtlError
from .model import ModelParams, build_liouvillian
from .operators import down_state
from .recipe import SuppressionConfig, all_but_slowest, slowest_decaying, suppress_modes
from .spectral import diagonalize, eigenvalue_ratios, overlaps, steady_state, write_spectrum_csv
from .unitary import optimize_restricted, restricted_unitary

RESOLVABLE = 1e-11


def _floats(text):
    """``"0.5, 1, 2"`` or ``"lo:hi:num"`` (inclusive linspace)."""
    text = str(text).strip()
    if ":" in text:
        lo, hi, num = text.split(":")
        return tuple(float(x) for x in np.linspace(float(lo), float(hi), int(num)))
    return tuple(float(x) for x in text.replace(",", " ").split())


@dataclass(frozen=True)
class ExperimentConfig:
    """Configuration shared by all experiments.

    Times in ``t_start``/``t_stop`` are in units of ``1/|Re lambda_2|``.
    ``t_max`` is an annotation copied into reports; it never truncates data.
    """

    model: ModelParams = field(default_factory=ModelParams)
    suppression: SuppressionConfig = field(default_factory=SuppressionConfig)
    n_min: int = 2
    n_max: int = 12
    d_min: float = 1e-3
    t_max: float = None
    t_points: int = 400
    t_start: float = 1e-2
    t_stop: float = 50.0
    output_dir: str = "out"
    seed: int = 0
    sweep_N: int = 4
    sweep_alpha: tuple = (0.5, 1.0, 2.0)
    sweep_h_x: tuple = tuple(float(x) for x in np.linspace(0.25, 4.0, 8))
    sweep_J: tuple = tuple(float(x) for x in np.linspace(0.25, 4.0, 8))
    sweep_n_max: int = 21
    workers: int = 1
    restricted_grid: int = 64
    slowdown_root_choice: str = "plus"

    def __post_init__(self):
        if self.n_min < 2:
            raise ConfigError("n_min must be >= 2: the steady state is never suppressed")
        if self.n_max < self.n_min:
            raise ConfigError("n_max must be >= n_min")
        if self.n_max > self.model.dim**2:
            raise ConfigError(f"n_max exceeds the number of modes {self.model.dim ** 2}")
        if not 0 < self.d_min < 1:
            raise ConfigError("d_min must lie in (0, 1)")
        if self.t_points < 3 or not 0 < self.t_start < self.t_stop:
            raise ConfigError("time grid needs t_points >= 3 and 0 < t_start < t_stop")
        if self.sweep_n_max < 2:
            raise ConfigError("sweep_n_max must be >= 2")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        # validates the slowdown root choice
        replace(self.suppression, root_choice=self.slowdown_root_choice)

    @property
    def n_range(self):
        return range(self.n_min, self.n_max + 1)

    @classmethod
    def from_mapping(cls, data):
        data = {k: v for k, v in data.items() if v is not None}
        model = ModelParams.from_mapping(data)
        supp = SuppressionConfig.from_mapping(data)
        conv = {
            "n_min": int, "n_max": int, "d_min": float, "t_max": float, "t_points": int,
            "t_start": float, "t_stop": float, "output_dir": str, "seed": int, "sweep_N": int,
            "sweep_alpha": _floats, "sweep_h_x": _floats, "sweep_J": _floats, "sweep_n_max": int,
            "workers": int, "restricted_grid": int, "slowdown_root_choice": str,
        }
        known = set(conv) | set(ModelParams.__dataclass_fields__) | set(SuppressionConfig.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            kwargs = {k: conv[k](v) for k, v in data.items() if k in conv}
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return cls(model=model, suppression=supp, **kwargs)

    def to_dict(self):
        out = asdict(self)
        out["sweep_alpha"] = list(self.sweep_alpha)
        out["sweep_h_x"] = list(self.sweep_h_x)
        out["sweep_J"] = list(self.sweep_J)
        return out


def read_config_file(path):
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    with open(path) as fh:
        text = fh.read()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return dict(parser["config"])


def load_config(path=None, **overrides):
    data = read_config_file(path) if path else {}
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_mapping(data)


# ---------------------------------------------------------------- output


def _outdir(cfg, name):
    path = os.path.join(cfg.output_dir, name)
    os.makedirs(path, exist_ok=True)
    return path


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def write_trajectories(path, trajs):
    _write_rows(path, ["t", "distance", "label"],
                ((t, dd, tr.label) for tr in trajs for t, dd in zip(tr.times, tr.distances)))


def write_manifest(cfg, directory, experiment, files):
    _write_json(os.path.join(directory, "manifest.json"), {
        "experiment": experiment,
        "version": __version__,
        "config": cfg.to_dict(),
        "assumed": {
            "alpha": cfg.model.alpha,
            "gamma": cfg.model.gamma,
            "initial_state": "all spins down",
            "lowering": cfg.model.lowering,
        },
        "files": sorted(files),
    })


# ---------------------------------------------------------------- setup


@dataclass
class Setup:
    params: ModelParams
    spectrum: object
    rho0: np.ndarray
    rho_inf: np.ndarray
    times: np.ndarray


def prepare(cfg, params=None):
    params = params or cfg.model
    s = diagonalize(build_liouvillian(params))
    rho0 = down_state(params.N)
    rho_inf = steady_state(s)
    times = default_time_grid(s, cfg.t_points, cfg.t_start, cfg.t_stop)
    return Setup(params, s, rho0, rho_inf, times)


def _labels(indices):
    return [int(a) + 1 for a in indices]


def find_gap(s, max_mode=25):
    """Largest ratio ``Re lambda_{k+1} / Re lambda_k`` among the first decaying modes.

    Returns ``(k, ratio)`` with ``k`` the 1-based label of the last mode before the gap.
    """
    re = s.eigenvalues.real[s.d_s : s.d_s + max_mode]
    jumps = re[1:] / re[:-1]
    k = int(np.argmax(jumps))
    return k + s.d_s + 1, float(jumps[k])


def spectrum_report(s):
    k_gap, gap = find_gap(s)
    ratios = eigenvalue_ratios(s)
    return {
        "d_s": int(s.d_s),
        "lambda_1": [float(s.eigenvalues[0].real), float(s.eigenvalues[0].imag)],
        "lambda_2": [float(s.eigenvalues[s.d_s].real), float(s.eigenvalues[s.d_s].imag)],
        "ratio_13_2": float(ratios[11]) if len(ratios) > 11 else None,
        "gap_after_mode": k_gap,
        "gap_ratio": gap,
        "gap_after_12": k_gap == 12,
        "gram_condition": float(s.gram_condition),
    }


# ---------------------------------------------------------------- analysis


def slope_check(setup, res):
    """Late-time decay rate of ``rho_perp`` against the first unsuppressed mode it populates."""
    s = setup.spectrum
    k = leading_unsuppressed_mode(s, res.rho_perp, res.targets)
    traj = trajectory(s, res.rho_perp, setup.times, rho_inf=setup.rho_inf)
    env = residual_envelope(s, res.rho_perp, res.targets, setup.times)
    out = {"next_mode": None if k is None else k + 1, "expected_rate": None,
           "fitted_rate": None, "relative_error": None}
    if k is None:
        return out
    expected = abs(float(s.eigenvalues[k].real))
    out["expected_rate"] = expected
    try:
        rate, _ = late_decay_rate(traj, env, floor=RESOLVABLE)
    except ValueError:
        return out
    out["fitted_rate"] = rate
    out["relative_error"] = abs(rate - expected) / expected
    return out


def _safe_time(traj, d_min):
    try:
        return time_to_threshold(traj, d_min)
    except NeverCrossed:
        return None


# ---------------------------------------------------------------- experiments


def run_spectrum(cfg):
    setup = prepare(cfg)
    out = _outdir(cfg, "spectrum")
    s = setup.spectrum
    write_spectrum_csv(os.path.join(out, "spectrum.csv"), s)
    ratios = eigenvalue_ratios(s)
    _write_rows(os.path.join(out, "ratios.csv"), ["k", "ratio"],
                ((k, float(r)) for k, r in enumerate(ratios, start=s.d_s + 1)))
    report = spectrum_report(s)
    _write_json(os.path.join(out, "report.json"), report)
    write_manifest(cfg, out, "spectrum", ["spectrum.csv", "ratios.csv", "report.json"])
    return report


def run_suppress(cfg, n=None):
    """Single suppression of modes ``2..n`` (``n`` defaults to ``n_max``)."""
    n = cfg.n_max if n is None else n
    setup = prepare(cfg)
    out = _outdir(cfg, "suppress")
    targets = slowest_decaying(setup.spectrum, n)
    res = suppress_modes(setup.rho0, setup.spectrum, targets, cfg.suppression)
    res.write_cost_csv(os.path.join(out, f"cost_n{n}.csv"))
    report = {"n": n, "targets": _labels(targets), **{k: v for k, v in res.to_dict().items() if k != "targets"}}
    _write_json(os.path.join(out, "report.json"), report)
    write_manifest(cfg, out, "suppress", [f"cost_n{n}.csv", "report.json"])
    return report


def run_evolve(cfg, n=None):
    """Distance trajectories of ``rho0`` and, if ``n`` is given, of ``rho_perp^(n)``."""
    setup = prepare(cfg)
    out = _outdir(cfg, "evolve")
    trajs = [trajectory(setup.spectrum, setup.rho0, setup.times, "rho0", setup.rho_inf)]
    if n is not None:
        res = suppress_modes(setup.rho0, setup.spectrum, slowest_decaying(setup.spectrum, n), cfg.suppression)
        trajs.append(trajectory(setup.spectrum, res.rho_perp, setup.times, f"perp_n{n}", setup.rho_inf))
    write_trajectories(os.path.join(out, "trajectories.csv"), trajs)
    report = {tr.label: {"T": _safe_time(tr, cfg.d_min)} for tr in trajs}
    report["d_min"] = cfg.d_min
    _write_json(os.path.join(out, "report.json"), report)
    write_manifest(cfg, out, "evolve", ["trajectories.csv", "report.json"])
    return report


def run_speedup(cfg):
    """Suppress modes ``2..n`` for every ``n`` in the configured range."""
    setup = prepare(cfg)
    s = setup.spectrum
    out = _outdir(cfg, "speedup")
    files = ["spectrum.csv", "ratios.csv", "trajectories.csv", "runs.csv", "report.json"]
    write_spectrum_csv(os.path.join(out, "spectrum.csv"), s)
    _write_rows(os.path.join(out, "ratios.csv"), ["k", "ratio"],
                ((k, float(r)) for k, r in enumerate(eigenvalue_ratios(s), start=s.d_s + 1)))

    traj0 = trajectory(s, setup.rho0, setup.times, "rho0", setup.rho_inf)
    trajs = [traj0]
    runs = []
    n_star = None
    for n in cfg.n_range:
        targets = slowest_decaying(s, n)
        res = suppress_modes(setup.rho0, s, targets, cfg.suppression)
        res.write_cost_csv(os.path.join(out, f"cost_n{n}.csv"))
        files.append(f"cost_n{n}.csv")
        tr = trajectory(s, res.rho_perp, setup.times, f"perp_n{n}", setup.rho_inf)
        trajs.append(tr)
        if res.converged and (n_star is None or n_star == n - 1):
            n_star = n
        run = {"n": n, "targets": _labels(targets), "final_cost": res.final_cost,
               "n_iterations": res.n_iterations, "converged": bool(res.converged),
               "stop_reason": res.stop_reason, "T": _safe_time(tr, cfg.d_min)}
        run.update(slope_check(setup, res))
        runs.append(run)

    write_trajectories(os.path.join(out, "trajectories.csv"), trajs)
    cols = ["n", "final_cost", "n_iterations", "converged", "stop_reason", "T",
            "next_mode", "expected_rate", "fitted_rate", "relative_error"]
    _write_rows(os.path.join(out, "runs.csv"), cols, ([r[c] for c in cols] for r in runs))
    report = {**spectrum_report(s), "n_star": n_star, "T_rho0": _safe_time(traj0, cfg.d_min),
              "d_min": cfg.d_min, "t_max": cfg.t_max, "runs": runs}
    _write_json(os.path.join(out, "report.json"), report)
    write_manifest(cfg, out, "speedup", files)
    return report


def sweep_point(cfg, alpha, h_x, J):
    """One parameter point: ``T``, ``T_perp`` at ``n*`` and the relative gain.

    ``n`` grows from 2 until the first non-converged run (at most
    ``sweep_n_max``); ``n*`` is the last converged value.  Failures are
    returned in the ``error`` field rather than raised.
    """
    row = {"alpha": alpha, "h_x": h_x, "J": J, "T": None, "T_perp": None, "gain": None,
           "n_star": 0, "converged": False, "target_overlap": None, "max_target_overlap": None,
           "decaying_overlap": None, "error": ""}
    try:
        params = replace(cfg.model, N=cfg.sweep_N, alpha=alpha, h_x=h_x, J=J)
        setup = prepare(cfg, params)
        s = setup.spectrum
        best = None
        last_targets = None
        first = None
        for n in range(2, min(cfg.sweep_n_max, len(s)) + 1):
            targets = slowest_decaying(s, n)
            if targets == last_targets:
                # n completed a conjugate pair already suppressed at n - 1
                row["n_star"] = n
                continue
            last_targets = targets
            res = suppress_modes(setup.rho0, s, targets, cfg.suppression)
            first = first or res
            if not res.converged:
                break
            best = res
            row["n_star"] = n
        chosen = best or first
        row["converged"] = best is not None
        c0 = np.abs(overlaps(s, setup.rho0))
        row["target_overlap"] = float(np.sum(c0[list(chosen.targets)]))
        row["max_target_overlap"] = float(np.max(c0[list(chosen.targets)]))
        row["decaying_overlap"] = float(np.sum(c0[s.d_s :]))
        t0 = time_to_threshold(trajectory(s, setup.rho0, setup.times, rho_inf=setup.rho_inf), cfg.d_min)
        tp = time_to_threshold(trajectory(s, chosen.rho_perp, setup.times, rho_inf=setup.rho_inf), cfg.d_min)
        row.update(T=t0, T_perp=tp, gain=relative_gain(t0, tp))
    except RelaxCtlError as exc:
        row["error"] = type(exc).__name__
    return row


SWEEP_COLUMNS = ["alpha", "h_x", "J", "T", "T_perp", "gain", "n_star", "converged",
                 "target_overlap", "max_target_overlap", "decaying_overlap", "error"]


def run_sweep(cfg):
    """Relative time gain over the ``alpha x h_x x J`` grid."""
    out = _outdir(cfg, "sweep")
    points = [(a, h, j) for a in cfg.sweep_alpha for h in cfg.sweep_h_x for j in cfg.sweep_J]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            futures = [pool.submit(sweep_point, cfg, *p) for p in points]
            rows = [f.result() for f in futures]
    else:
        rows = [sweep_point(cfg, *p) for p in points]

    def cell(v):
        return "" if v is None else v

    _write_rows(os.path.join(out, "sweep.csv"), SWEEP_COLUMNS,
                ([cell(r[c]) for c in SWEEP_COLUMNS] for r in rows))
    gains = [r["gain"] for r in rows if r["converged"] and r["gain"] is not None]
    report = {
        "points": len(rows),
        "converged_points": len(gains),
        "failed_points": sum(1 for r in rows if r["error"]),
        "median_gain": float(np.median(gains)) if gains else None,
        "min_gain": float(np.min(gains)) if gains else None,
        "d_min": cfg.d_min,
    }
    _write_json(os.path.join(out, "report.json"), report)
    write_manifest(cfg, out, "sweep", ["sweep.csv", "report.json"])
    return report, rows


def run_local_ops(cfg):
    """Approximate each ``rho_perp^(n)`` with the two-angle product unitary."""
    setup = prepare(cfg)
    s = setup.spectrum
    out = _outdir(cfg, "local_ops")
    traj0 = trajectory(s, setup.rho0, setup.times, "rho0", setup.rho_inf)
    trajs = [traj0]
    fits = []
    geodesic = None
    for n in cfg.n_range:
        res = suppress_modes(setup.rho0, s, slowest_decaying(s, n), cfg.suppression)
        fit = optimize_restricted(setup.rho0, res.rho_perp, setup.params.N, grid=cfg.restricted_grid)
        u = restricted_unitary(fit.angles, setup.params.N)
        tr = trajectory(s, u @ setup.rho0 @ u.conj().T, setup.times, f"restricted_n{n}", setup.rho_inf)
        trajs.append(tr)
        try:
            rate = late_decay_rate(tr, floor=RESOLVABLE)[0]
        except ValueError:
            rate = None
        fits.append({"n": n, **fit.to_dict(), "target_cost": res.final_cost,
                     "T": _safe_time(tr, cfg.d_min), "late_rate": rate})
        if n == cfg.n_max:
            geodesic = res
    if geodesic is not None:
        prepared = geodesic.unitary @ setup.rho0 @ geodesic.unitary.conj().T
        trajs.append(trajectory(s, prepared, setup.times, f"geodesic_n{cfg.n_max}", setup.rho_inf))

    write_trajectories(os.path.join(out, "trajectories.csv"), trajs)
    _write_rows(os.path.join(out, "angles.csv"), ["n", "theta", "phi", "infidelity", "T", "late_rate"],
                ([f["n"], f["theta"], f["phi"], f["infidelity"], "" if f["T"] is None else f["T"],
                  "" if f["late_rate"] is None else f["late_rate"]]
                 for f in fits))
    report = {"T_rho0": _safe_time(traj0, cfg.d_min),
              "lambda_2_rate": abs(float(s.eigenvalues[s.d_s].real)),
              "fits": fits,
              "annotations": {"d_min": cfg.d_min, "t_max": cfg.t_max}}
    _write_json(os.path.join(out, "report.json"), report)
    write_manifest(cfg, out, "local_ops", ["trajectories.csv", "angles.csv", "report.json"])
    return report


def distance_ratio(traj_a, traj_b, t_min=0.0, floor=RESOLVABLE):
    """``d_a / d_b`` at matched times where both distances are resolvable."""
    mask = (traj_a.times >= t_min) & (traj_a.distances > floor) & (traj_b.distances > floor)
    return traj_a.times[mask], traj_a.distances[mask] / traj_b.distances[mask]


def run_slowdown(cfg):
    """Suppress every decaying mode except the slowest one.

    The purity root defaults to ``slowdown_root_choice`` (``"plus"``): the
    cost-minimizing root shrinks the retained slow component, which works
    against the goal of the experiment.  Both variants are reported.
    """
    setup = prepare(cfg)
    s = setup.spectrum
    out = _outdir(cfg, "slowdown")
    targets = all_but_slowest(s)
    t_min = 1.0 / cfg.model.gamma if cfg.model.gamma > 0 else 0.0
    traj0 = trajectory(s, setup.rho0, setup.times, "rho0", setup.rho_inf)
    trajs = [traj0]
    variants = {}
    files = ["trajectories.csv", "ratios.csv", "report.json"]
    ratio_rows = []
    for choice in dict.fromkeys([cfg.slowdown_root_choice, "best"]):
        res = suppress_modes(setup.rho0, s, targets, replace(cfg.suppression, root_choice=choice))
        res.write_cost_csv(os.path.join(out, f"cost_{choice}.csv"))
        files.append(f"cost_{choice}.csv")
        tr = trajectory(s, res.rho_perp, setup.times, f"parallel_{choice}", setup.rho_inf)
        t, ratio = distance_ratio(tr, traj0, t_min)
        ratio_rows.extend((choice, tt, rr) for tt, rr in zip(t, ratio))
        variants[choice] = {
            "final_cost": res.final_cost,
            "n_iterations": res.n_iterations,
            "converged": bool(res.converged),
            "stop_reason": res.stop_reason,
            "slow_overlap": float(abs(overlaps(s, res.rho_perp)[s.d_s])),
            "min_ratio": float(ratio.min()) if ratio.size else None,
            "max_ratio": float(ratio.max()) if ratio.size else None,
        }
        trajs.append(tr)
        if choice == cfg.slowdown_root_choice:
            primary = res
    fit = optimize_restricted(setup.rho0, primary.rho_perp, setup.params.N, grid=cfg.restricted_grid)
    u = restricted_unitary(fit.angles, setup.params.N)
    tr_r = trajectory(s, u @ setup.rho0 @ u.conj().T, setup.times, "restricted", setup.rho_inf)
    trajs.append(tr_r)
    t, ratio = distance_ratio(tr_r, traj0, t_min)
    ratio_rows.extend(("restricted", tt, rr) for tt, rr in zip(t, ratio))

    write_trajectories(os.path.join(out, "trajectories.csv"), trajs)
    _write_rows(os.path.join(out, "ratios.csv"), ["variant", "t", "ratio"], ratio_rows)
    report = {
        "targets": len(targets),
        "kept_modes": [k + 1 for k in range(s.d_s, len(s)) if k not in set(targets)],
        "root_choice": cfg.slowdown_root_choice,
        "t_min": t_min,
        "variants": variants,
        "restricted": {**fit.to_dict(),
                       "min_ratio": float(ratio.min()) if ratio.size else None,
                       "max_ratio": float(ratio.max()) if ratio.size else None},
        "rho0_overlap_slow": float(abs(overlaps(s, setup.rho0)[s.d_s])),
    }
    _write_json(os.path.join(out, "report.json"), report)
    write_manifest(cfg, out, "slowdown", files)
    return report
