"""Empirical checks of the certified behaviour.

Decay and invariance are checked on the averaged field ``dG/dt = H sat(K G)``;
the averaging-order, amplitude and gain-comparison experiments run the full
dithered loop.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core_model import PlantSpec, PolytopicHessian, deadzone, sample_simplex
from .dither import common_period
from .exceptions import DivergenceError, InputError
from .lmi.analysis import Certificate, check_analysis, ellipsoid_of
from .simulate import SimConfig, simulate_average, simulate_exact_average, simulate_full

DECAY_RTOL = 1e-3
INVARIANCE_TOL = 1e-9
SECTOR_TOL = 1e-12
CONVERGENCE_FACTOR = 3.0
AVERAGE_STEP = 0.005


def _hessian_of(obj) -> PolytopicHessian:
    return obj.hessian if isinstance(obj, PlantSpec) else obj


def _alphas(hess: PolytopicHessian, n_interior: int, seed: int):
    """All vertices followed by ``n_interior`` random interior weights."""
    out = [np.eye(hess.n_vertices)[i] for i in range(hess.n_vertices)]
    rng = np.random.default_rng(seed)
    for _ in range(n_interior):
        out.append(sample_simplex(hess.n_vertices, int(rng.integers(2**32))).weights)
    return out


# ----------------------------------------------------------------------------
# Lyapunov decay and invariance on the averaged system


@dataclass
class DecayReport:
    worst_rate: float
    required_rate: float
    passed: bool
    trajectories: int
    worst_bound_ratio: float  # max V(t) / (V(0) e^{-2 eta t})
    worst_kappa_ratio: float  # max |G(t)| / (kappa e^{-eta t} |G(0)|)
    excursions: int
    kappa: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def lyapunov_decay(
    plant,
    gain,
    cert: Certificate,
    n_traj: int = 64,
    t_end: float = 5.0,
    n_interior: int = 2,
    step: float = AVERAGE_STEP,
    seed: int = 0,
    check_certificate: bool = True,
) -> DecayReport:
    """Simulate the averaged field from points on the boundary of ``E``.

    Each vertex and ``n_interior`` random interior ``alpha`` gets the same
    ``n_traj`` starts.  ``V(t) <= V(0) e^{-2 eta t} (1 + 1e-3)`` and the
    ``kappa`` envelope are checked at every RK4 sample.  ``worst_rate`` is the
    smallest observed ``-ln(V(t)/V(0)) / t``.
    """
    hess = _hessian_of(plant)
    if not isinstance(plant, PlantSpec):
        raise InputError("lyapunov_decay needs a PlantSpec (saturation limits are part of the field)")
    gain = np.asarray(gain, dtype=float)
    if check_certificate and not check_analysis(hess, gain, cert).passed:
        raise InputError("certificate does not pass check_analysis")
    starts = ellipsoid_of(cert).boundary_points(n_traj, seed)
    eta = cert.eta
    worst_rate = math.inf
    worst_bound = 0.0
    worst_kappa = 0.0
    excursions = 0
    total = 0
    for alpha in _alphas(hess, n_interior, seed):
        tr = simulate_average(plant, gain, alpha, starts, t_end, step)
        t = tr.times
        g = tr.g_hat  # (samples, batch, n)
        v = cert.lyapunov(g)
        v0 = v[0]
        env = np.exp(-2.0 * eta * t)[:, None]
        worst_bound = max(worst_bound, float((v / (v0 * env)).max()))
        norms = np.linalg.norm(g, axis=-1)
        kenv = cert.kappa * np.exp(-eta * t)[:, None] * norms[0]
        worst_kappa = max(worst_kappa, float((norms / kenv).max()))
        excursions += int(np.any(v > v0 * (1.0 + INVARIANCE_TOL), axis=0).sum())
        usable = (t[1:, None] > 0) & (v[1:] > 1e-12 * v0)
        if usable.any():
            rates = -np.log(v[1:] / v0) / t[1:, None]
            worst_rate = min(worst_rate, float(rates[usable].min()))
        total += starts.shape[0]
    passed = worst_bound <= 1.0 + DECAY_RTOL and worst_kappa <= 1.0 + DECAY_RTOL and excursions == 0
    return DecayReport(worst_rate, 2.0 * eta, passed, total, worst_bound, worst_kappa, excursions, cert.kappa)


@dataclass
class InvarianceReport:
    passed: bool
    worst_excursion: float  # max over samples of V(t) - 1
    worst_sector: float  # max of psi' U (psi - L G)
    trajectories: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def sector_values(cert: Certificate, gain, limits, g) -> np.ndarray:
    """``psi' U (psi - L G)`` with ``psi = u - sat(u)``, ``u = K G``; nonpositive inside the sector region."""
    g = np.asarray(g, dtype=float)
    u = g @ np.asarray(gain, dtype=float).T
    psi = deadzone(u, limits)
    lg = g @ cert.L.T
    return np.einsum("...i,ij,...j->...", psi, cert.U, psi - lg)


def sample_sector_region(cert: Certificate, gain, limits, n_samples: int, seed: int = 0) -> np.ndarray:
    """Uniform points of ``{G : |(K - L)_l G| <= limit_l}`` (a parallelotope when ``K - L`` is invertible)."""
    rng = np.random.default_rng(seed)
    m = np.asarray(gain, dtype=float) - cert.L
    limits = np.asarray(limits, dtype=float)
    box = rng.uniform(-1.0, 1.0, (n_samples, cert.dim)) * limits
    if np.linalg.cond(m) < 1e12:
        return np.linalg.solve(m, box.T).T
    # singular K - L: the region is unbounded, sample inside E instead
    pts = ellipsoid_of(cert).boundary_points(n_samples, seed)
    return pts * rng.uniform(0.0, 1.0, (n_samples, 1))


def sector_check(cert: Certificate, gain, limits, n_samples: int = 1000, seed: int = 0) -> float:
    """Largest sector value over random points of the sector region."""
    pts = sample_sector_region(cert, gain, limits, n_samples, seed)
    return float(sector_values(cert, gain, limits, pts).max())


def ellipsoid_invariance(
    plant: PlantSpec,
    gain,
    cert: Certificate,
    n_traj: int = 64,
    t_end: float = 5.0,
    n_interior: int = 2,
    step: float = AVERAGE_STEP,
    seed: int = 0,
) -> InvarianceReport:
    """Starts inside ``E`` (boundary and random radii) must stay in ``E``, and the sector bound must hold along them."""
    gain = np.asarray(gain, dtype=float)
    rng = np.random.default_rng(seed)
    boundary = ellipsoid_of(cert).boundary_points(n_traj, seed)
    radii = np.ones(n_traj)
    radii[n_traj // 2:] = rng.uniform(0.0, 1.0, n_traj - n_traj // 2)
    starts = boundary * radii[:, None]
    worst_exc = -math.inf
    worst_sector = -math.inf
    total = 0
    for alpha in _alphas(plant.hessian, n_interior, seed):
        tr = simulate_average(plant, gain, alpha, starts, t_end, step)
        v = cert.lyapunov(tr.g_hat)
        worst_exc = max(worst_exc, float((v - 1.0).max()))
        worst_sector = max(worst_sector, float(sector_values(cert, gain, plant.sat_limits, tr.g_hat).max()))
        total += n_traj
    passed = worst_exc <= INVARIANCE_TOL and worst_sector <= SECTOR_TOL
    return InvarianceReport(passed, worst_exc, worst_sector, total)


@dataclass
class StabilityConstants:
    kappa: float
    kappa_bar: float
    kappa_y: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def stability_constants(hess: PolytopicHessian, cert: Certificate, theta_error0) -> StabilityConstants:
    """``kappa`` from ``P``; ``kappa_bar`` from ``H'PH`` (worst vertex); ``kappa_y = |H| kappa_bar^2 |theta(0) - theta*|^2``."""
    kbar = 0.0
    for h in hess.vertices:
        ev = np.linalg.eigvalsh(h.T @ cert.P @ h)
        kbar = max(kbar, math.sqrt(ev[-1] / ev[0]))
    e0 = float(np.linalg.norm(theta_error0))
    return StabilityConstants(cert.kappa, kbar, float(hess.norm() * kbar**2 * e0**2))


# ----------------------------------------------------------------------------
# Experiments on the full loop


def _last_period_mask(times, period: float) -> np.ndarray:
    return times >= times[-1] - period * (1.0 + 1e-12)


@dataclass
class SweepReport:
    omegas: np.ndarray
    residuals: np.ndarray
    fitted_order: float
    ratios: np.ndarray
    reference: str
    diverged: list = field(default_factory=list)
    inversions: int = 0

    def to_dict(self) -> dict:
        return {
            "omegas": self.omegas.tolist(),
            "residuals": self.residuals.tolist(),
            "fitted_order": self.fitted_order,
            "ratios": self.ratios.tolist(),
            "reference": self.reference,
            "diverged": list(self.diverged),
            "inversions": self.inversions,
        }

    def rows(self) -> list:
        return [{"omega": float(w), "residual": float(r)} for w, r in zip(self.omegas, self.residuals)]


def _sweep_member(args):
    cfg, reference, avg_step = args
    period = common_period(cfg.dither).period
    try:
        trace = simulate_full(cfg)
    except DivergenceError:
        return None
    err = trace.theta_hat - cfg.plant.optimizer
    if reference == "exact":
        t_ref, ref = simulate_exact_average(cfg, step=avg_step)
    else:
        h = cfg.hessian
        avg = simulate_average(cfg.plant, cfg.gain, cfg.alpha, h @ err[0], cfg.t_end, avg_step)
        t_ref, ref = avg.times, np.linalg.solve(h, avg.g_hat.T).T
    full = np.column_stack([np.interp(t_ref, trace.times, err[:, i]) for i in range(err.shape[1])])
    keep = t_ref >= period
    return float(np.linalg.norm(full[keep] - ref[keep], axis=1).max())


def averaging_sweep(
    base_cfg: SimConfig,
    omega_multipliers,
    reference: str = "averaged",
    avg_step: float = 0.0025,
    workers: int = 1,
) -> SweepReport:
    """Deviation of the full loop from an averaged model as the base frequency grows.

    Each member scales the base frequency (keeping the rational multipliers)
    and the step, so every run has the same samples per period.  The
    averaged reference starts from ``G_av(0) = H theta_tilde(0)``; with
    ``reference="exact"`` it is the exact period-average of the saturated
    field instead.  One period is skipped before taking the sup-norm.
    """
    if reference not in ("averaged", "exact"):
        raise InputError("reference must be 'averaged' or 'exact'")
    mults = np.asarray(omega_multipliers, dtype=float)
    if mults.size < 3 or np.any(np.diff(mults) <= 0) or np.any(mults <= 0):
        raise InputError("need at least 3 strictly increasing positive multipliers")
    jobs = [
        (base_cfg.replace(dither=base_cfg.dither.scaled(m), step=base_cfg.step / m), reference, avg_step)
        for m in mults
    ]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_sweep_member, jobs))
    else:
        results = [_sweep_member(j) for j in jobs]
    omegas = mults * base_cfg.dither.base_frequency
    diverged = [float(w) for w, r in zip(omegas, results) if r is None]
    ok = [r is not None for r in results]
    omegas = omegas[ok]
    residuals = np.array([r for r in results if r is not None])
    if residuals.size >= 2:
        slope = float(np.polyfit(np.log(omegas), np.log(residuals), 1)[0])
        ratios = residuals[1:] / residuals[:-1]
    else:
        slope, ratios = math.nan, np.array([])
    return SweepReport(omegas, residuals, slope, ratios, reference, diverged, int((ratios > 1.0).sum()))


@dataclass
class AmplitudeReport:
    amplitudes: np.ndarray
    theta_ball: np.ndarray  # sup |theta - theta*| over the last period
    y_residual: np.ndarray  # sup |y - Q*| over the last period
    theta_ratios: np.ndarray
    y_ratios: np.ndarray

    def to_dict(self) -> dict:
        return {k: np.asarray(v).tolist() for k, v in self.__dict__.items()}


def amplitude_sweep(base_cfg: SimConfig, scales) -> AmplitudeReport:
    """Steady-state size of ``theta - theta*`` and ``y - Q*`` as the dither amplitudes are scaled."""
    scales = np.asarray(scales, dtype=float)
    period = common_period(base_cfg.dither).period
    balls, ys, amps = [], [], []
    for s in scales:
        dither = base_cfg.dither.with_amplitudes(base_cfg.dither.amplitudes * s)
        trace = simulate_full(base_cfg.replace(dither=dither))
        last = _last_period_mask(trace.times, period)
        balls.append(float(np.linalg.norm(trace.theta[last] - base_cfg.plant.optimizer, axis=1).max()))
        ys.append(float(np.abs(trace.y[last] - base_cfg.plant.optimum_value).max()))
        amps.append(float(np.linalg.norm(dither.amplitudes)))
    balls, ys = np.array(balls), np.array(ys)
    return AmplitudeReport(np.array(amps), balls, ys, balls[1:] / balls[:-1], ys[1:] / ys[:-1])


@dataclass
class RunVerdict:
    name: str
    final_error: float  # |mean over last period of theta - theta*|
    final_y_error: float  # |mean over last period of y - Q*|
    max_abs_usat: float
    converged: bool
    diverged: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def run_verdict(name: str, cfg: SimConfig, trace=None) -> RunVerdict:
    """Dither-averaged final errors; converged when the error is below 3 times the largest amplitude."""
    try:
        trace = simulate_full(cfg) if trace is None else trace
    except DivergenceError as exc:
        usat = np.abs(exc.trace.u_sat).max() if exc.trace.times.size else 0.0
        return RunVerdict(name, math.inf, math.inf, float(usat), False, True)
    period = common_period(cfg.dither).period
    last = _last_period_mask(trace.times, period)
    err = float(np.linalg.norm(trace.theta[last].mean(axis=0) - cfg.plant.optimizer))
    yerr = float(abs(trace.y[last].mean() - cfg.plant.optimum_value))
    threshold = CONVERGENCE_FACTOR * float(cfg.dither.amplitudes.max())
    return RunVerdict(name, err, yerr, float(np.abs(trace.u_sat).max()), err < threshold, False)


def _same_plant(a: PlantSpec, b: PlantSpec) -> bool:
    return (
        a.optimum_value == b.optimum_value
        and np.array_equal(a.optimizer, b.optimizer)
        and np.array_equal(a.sat_limits, b.sat_limits)
        and np.array_equal(a.hessian.vertices, b.hessian.vertices)
    )


def _same_dither(a, b) -> bool:
    return (
        np.array_equal(a.amplitudes, b.amplitudes)
        and a.multipliers == b.multipliers
        and a.base_frequency == b.base_frequency
    )


def compare_gains(cfg_lmi: SimConfig, cfg_diag: SimConfig, names=("lmi", "diagonal")) -> list:
    """Run two gains on the same plant and dither; returns one verdict per run."""
    if not (_same_plant(cfg_lmi.plant, cfg_diag.plant) and _same_dither(cfg_lmi.dither, cfg_diag.dither)):
        raise InputError("compared configurations must share plant and dither")
    return [run_verdict(names[0], cfg_lmi), run_verdict(names[1], cfg_diag)]

