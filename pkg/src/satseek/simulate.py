"""Fixed-step RK4 simulation of the saturated extremum-seeking loop.

Three models are integrated here:

* the full loop ``d theta_hat/dt = sat(K M(t) y(t))`` with
  ``y = Q(theta_hat + S(t))``;
* the averaged gradient dynamics ``dG/dt = H sat(K G)`` in original time;
* the exact period-average of the saturated full field at frozen
  ``theta_hat`` (diagnostic reference for averaging-order checks).
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .core_model import PlantSpec, as_simplex, hessian_at, map_eval
from .dither import (
    DitherSpec,
    PeriodInfo,
    common_period,
    demod_signal,
    omega_matrix,
    probe_signal,
)
from .exceptions import DivergenceError, InputError

DIVERGENCE_THRESHOLD = 1e9
SAMPLES_PER_FASTEST_TONE = 40
MIN_SAMPLES_PER_FASTEST_TONE = 20


def default_step(dither: DitherSpec) -> float:
    return (2.0 * math.pi / dither.frequencies.max()) / SAMPLES_PER_FASTEST_TONE


@dataclass(frozen=True)
class SimConfig:
    """One closed-loop run.

    ``washout`` is an optional high-pass cutoff (rad/s) applied to ``y``
    before demodulation; ``None`` runs the unfiltered loop.
    """

    plant: PlantSpec
    dither: DitherSpec
    gain: np.ndarray
    alpha: object
    theta_hat0: np.ndarray
    t_end: float
    step: float | None = None
    washout: float | None = None

    def __post_init__(self):
        n = self.plant.dim
        if self.dither.dim != n:
            raise InputError(f"dither has {self.dither.dim} channels, plant has {n}")
        gain = np.array(self.gain, dtype=float)
        if gain.shape != (n, n):
            raise InputError(f"gain has shape {gain.shape}, expected {(n, n)}")
        theta0 = np.array(self.theta_hat0, dtype=float)
        if theta0.shape != (n,):
            raise InputError(f"theta_hat0 has shape {theta0.shape}, expected {(n,)}")
        step = default_step(self.dither) if self.step is None else float(self.step)
        max_step = (2.0 * math.pi / self.dither.frequencies.max()) / MIN_SAMPLES_PER_FASTEST_TONE
        if not step > 0:
            raise InputError("step must be positive")
        if step > max_step * (1 + 1e-12):
            raise InputError(f"step {step:g} exceeds {max_step:g} (20 samples of the fastest tone)")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise InputError("t_end must be finite and nonnegative")
        if self.washout is not None and not self.washout > 0:
            raise InputError("washout cutoff must be positive")
        gain.setflags(write=False)
        theta0.setflags(write=False)
        object.__setattr__(self, "gain", gain)
        object.__setattr__(self, "theta_hat0", theta0)
        object.__setattr__(self, "step", step)
        object.__setattr__(self, "alpha", as_simplex(self.alpha, self.plant.hessian.n_vertices))

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    @property
    def hessian(self) -> np.ndarray:
        return hessian_at(self.plant.hessian, self.alpha)


@dataclass(frozen=True)
class SimTrace:
    """Samples of the full loop, one row per integration step."""

    times: np.ndarray
    theta_hat: np.ndarray
    theta: np.ndarray
    u: np.ndarray
    u_sat: np.ndarray
    g_hat: np.ndarray
    y: np.ndarray
    diverged: bool = False

    @property
    def dim(self) -> int:
        return self.theta_hat.shape[1]

    def columns(self) -> list:
        n = self.dim
        names = ["t"]
        for prefix in ("theta_hat", "theta", "u", "usat", "ghat"):
            names += [f"{prefix}_{i + 1}" for i in range(n)]
        return names + ["y"]

    def table(self) -> np.ndarray:
        return np.column_stack(
            [self.times, self.theta_hat, self.theta, self.u, self.u_sat, self.g_hat, self.y]
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.columns())
            for row in self.table():
                writer.writerow([f"{v:.12g}" for v in row])


@dataclass(frozen=True)
class AverageTrace:
    """Averaged gradient trajectories; ``g_hat`` is (samples, n) or (samples, batch, n)."""

    times: np.ndarray
    g_hat: np.ndarray


def gradient_estimate(plant: PlantSpec, dither: DitherSpec, alpha, theta_hat, t: float) -> np.ndarray:
    """``G_hat(t) = M(t) y(t)`` with ``y = Q(theta_hat + S(t))``."""
    theta = np.asarray(theta_hat, dtype=float) + probe_signal(dither, t)
    return demod_signal(dither, t) * map_eval(plant, alpha, theta)


def expanded_gradient(plant: PlantSpec, dither: DitherSpec, alpha, theta_tilde, t: float) -> np.ndarray:
    """Four-term expansion ``M Q* + 1/2 M e'He + Omega e + 1/2 Omega S`` with ``e = theta_tilde``."""
    e = np.asarray(theta_tilde, dtype=float)
    h = hessian_at(plant.hessian, alpha)
    m = demod_signal(dither, t)
    s = probe_signal(dither, t)
    omega = omega_matrix(dither, h, t)
    return m * plant.optimum_value + 0.5 * m * (e @ h @ e) + omega @ e + 0.5 * omega @ s


def _n_steps(t_end: float, step: float) -> tuple[int, float]:
    if t_end == 0:
        return 0, step
    n = max(1, math.ceil(t_end / step - 1e-9))
    return n, t_end / n


def _rk4(field, x0, n, h, t0=0.0):
    """Classical RK4; returns the state samples and the index of the first bad sample (or None)."""
    xs = np.empty((n + 1,) + np.shape(x0))
    xs[0] = x = np.asarray(x0, dtype=float)
    for k in range(n):
        t = t0 + k * h
        k1 = field(t, x)
        k2 = field(t + 0.5 * h, x + 0.5 * h * k1)
        k3 = field(t + 0.5 * h, x + 0.5 * h * k2)
        k4 = field(t + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)) or np.abs(x).max() > DIVERGENCE_THRESHOLD:
            return xs[: k + 1], k + 1
        xs[k + 1] = x
    return xs, None


def _full_field(cfg: SimConfig):
    n = cfg.plant.dim
    a = cfg.dither.amplitudes
    w = cfg.dither.frequencies
    demod_gain = 2.0 / a
    h = cfg.hessian
    theta_star = cfg.plant.optimizer
    q_star = cfg.plant.optimum_value
    k = cfg.gain
    ub = cfg.plant.sat_limits
    wh = cfg.washout

    if wh is None:
        def field(t, x):
            s = np.sin(w * t)
            d = x + a * s - theta_star
            y = q_star + 0.5 * (d @ h @ d)
            return np.clip(k @ (demod_gain * s * y), -ub, ub)
    else:
        def field(t, x):
            s = np.sin(w * t)
            d = x[:n] + a * s - theta_star
            y = q_star + 0.5 * (d @ h @ d)
            out = np.empty(n + 1)
            out[:n] = np.clip(k @ (demod_gain * s * (y - x[n])), -ub, ub)
            out[n] = wh * (y - x[n])
            return out
    return field


def _trace_from_states(cfg: SimConfig, times, states, diverged=False) -> SimTrace:
    n = cfg.plant.dim
    theta_hat = states[:, :n]
    s = probe_signal(cfg.dither, times)
    m = demod_signal(cfg.dither, times)
    theta = theta_hat + s
    d = theta - cfg.plant.optimizer
    y = cfg.plant.optimum_value + 0.5 * np.einsum("ti,ij,tj->t", d, cfg.hessian, d)
    signal = y if cfg.washout is None else y - states[:, n]
    g_hat = m * signal[:, None]
    u = g_hat @ cfg.gain.T
    u_sat = np.clip(u, -cfg.plant.sat_limits, cfg.plant.sat_limits)
    return SimTrace(times, theta_hat, theta, u, u_sat, g_hat, y, diverged)


def simulate_full(cfg: SimConfig) -> SimTrace:
    """Integrate the saturated loop with RK4 and record every step.

    Raises :class:`DivergenceError` (carrying the finite part of the trace)
    if the state leaves the finite range.
    """
    n_steps, h = _n_steps(cfg.t_end, cfg.step)
    x0 = np.array(cfg.theta_hat0, dtype=float)
    if cfg.washout is not None:
        y0 = map_eval(cfg.plant, cfg.alpha, x0 + probe_signal(cfg.dither, 0.0))
        x0 = np.append(x0, y0)
    states, bad = _rk4(_full_field(cfg), x0, n_steps, h)
    times = h * np.arange(states.shape[0])
    if bad is not None:
        trace = _trace_from_states(cfg, times, states, diverged=True)
        raise DivergenceError(f"state diverged at t = {bad * h:g}", trace)
    return _trace_from_states(cfg, times, states)


def simulate_average(plant: PlantSpec, gain, alpha, g0, t_end: float, step: float) -> AverageTrace:
    """RK4 trace of ``dG/dt = H(alpha) sat(K G)``; ``g0`` may be a batch of shape (m, n)."""
    h = hessian_at(plant.hessian, alpha)
    k = np.asarray(gain, dtype=float)
    ub = plant.sat_limits
    g0 = np.asarray(g0, dtype=float)
    if g0.shape[-1] != plant.dim or k.shape != (plant.dim, plant.dim):
        raise InputError("dimension mismatch between plant, gain and initial state")
    if not step > 0:
        raise InputError("step must be positive")

    def field(t, g):
        return np.clip(g @ k.T, -ub, ub) @ h.T

    n_steps, dt = _n_steps(t_end, step)
    states, bad = _rk4(field, g0, n_steps, dt)
    times = dt * np.arange(states.shape[0])
    if bad is not None:
        raise DivergenceError(f"averaged state diverged at t = {bad * dt:g}", AverageTrace(times, states))
    return AverageTrace(times, states)


def exact_average_field(cfg: SimConfig, theta_tilde, quadrature_points: int = 1024) -> np.ndarray:
    """Period average of ``sat(K M(t) y(t))`` with ``theta_hat`` frozen.

    This is the averaged vector field of the unfiltered loop; it differs
    from ``H sat(K G)`` whenever the dithered signal saturates.
    """
    period = common_period(cfg.dither)
    t = np.linspace(0.0, period.period, quadrature_points, endpoint=False)
    s = probe_signal(cfg.dither, t)
    m = demod_signal(cfg.dither, t)
    d = np.asarray(theta_tilde, dtype=float) + s
    y = cfg.plant.optimum_value + 0.5 * np.einsum("ti,ij,tj->t", d, cfg.hessian, d)
    u = (m * y[:, None]) @ cfg.gain.T
    return np.clip(u, -cfg.plant.sat_limits, cfg.plant.sat_limits).mean(axis=0)


def simulate_exact_average(cfg: SimConfig, step: float = 0.025, quadrature_points: int = 1024):
    """RK4 of ``d theta_tilde/dt = exact_average_field``; returns (times, theta_tilde)."""
    if cfg.washout is not None:
        raise InputError("exact averaging is only implemented for the unfiltered loop")
    n_steps, dt = _n_steps(cfg.t_end, step)
    x0 = cfg.theta_hat0 - cfg.plant.optimizer
    states, bad = _rk4(lambda t, e: exact_average_field(cfg, e, quadrature_points), x0, n_steps, dt)
    if bad is not None:
        raise DivergenceError("exact-average state diverged")
    return dt * np.arange(states.shape[0]), states


def to_tau(trace, period: PeriodInfo):
    """Relabel sample times by ``tau = omega t``; values are untouched."""
    return dataclasses.replace(trace, times=trace.times * period.base_frequency)


def from_tau(trace, period: PeriodInfo):
    return dataclasses.replace(trace, times=trace.times / period.base_frequency)
