"""Sinusoidal probe/demodulation signals and their one-period averages.

Frequencies are kept as exact rational multipliers of a real base frequency,
``omega_i = m_i * omega``.  The common period and the frequency exclusion
rules are then decided in exact arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Callable

import numpy as np
from scipy.integrate import simpson

from .exceptions import InputError

DEFAULT_QUADRATURE_POINTS = 4096


def to_fraction(value) -> Fraction:
    """Parse an exact rational from an int, Fraction or string like ``"7/2"``.

    Floats are rejected: a binary float silently turns ``0.1`` into a huge
    denominator and breaks the period computation.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise InputError(f"not a rational: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"invalid rational {value!r}") from exc
    raise InputError(f"multipliers must be exact rationals (int, Fraction or str), got {value!r}")


@dataclass(frozen=True)
class FrequencyViolation:
    index: int
    value: Fraction
    rule: str
    partners: tuple


@dataclass(frozen=True)
class FrequencyReport:
    valid: bool
    violations: list = field(default_factory=list)

    def __bool__(self):
        return self.valid


def validate_frequencies(multipliers) -> FrequencyReport:
    """Check the dither frequency exclusion rules.

    For every index ``i`` the multiplier must avoid the other multipliers,
    every pairwise half-sum, and every pairwise sum and absolute difference
    (pairs of distinct indices).
    """
    m = [to_fraction(v) for v in multipliers]
    for i, v in enumerate(m):
        if v <= 0:
            raise InputError(f"multiplier {i} must be positive, got {v}")
    violations = []
    pairs = list(combinations(range(len(m)), 2))
    for i, mi in enumerate(m):
        for j, mj in enumerate(m):
            if j != i and mi == mj:
                violations.append(FrequencyViolation(i, mi, "duplicate", (j,)))
        for k, l in pairs:
            if mi == (m[k] + m[l]) / 2:
                violations.append(FrequencyViolation(i, mi, "half-sum", (k, l)))
            if mi == m[k] + m[l]:
                violations.append(FrequencyViolation(i, mi, "sum", (k, l)))
            if mi == abs(m[k] - m[l]):
                violations.append(FrequencyViolation(i, mi, "difference", (k, l)))
    return FrequencyReport(not violations, violations)


@dataclass(frozen=True)
class PeriodInfo:
    period: float
    base_frequency: float


@dataclass(frozen=True)
class DitherSpec:
    """Amplitudes ``a_i`` and frequencies ``omega_i = multipliers[i] * base_frequency``."""

    amplitudes: np.ndarray
    multipliers: tuple
    base_frequency: float = 1.0

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=float)
        if a.ndim != 1 or a.size == 0:
            raise InputError("amplitudes must be a non-empty vector")
        if np.any(a == 0) or not np.all(np.isfinite(a)):
            raise InputError(f"amplitudes must be finite and nonzero, got {a}")
        mult = tuple(to_fraction(v) for v in self.multipliers)
        if len(mult) != a.size:
            raise InputError(f"{len(mult)} multipliers for {a.size} amplitudes")
        report = validate_frequencies(mult)
        if not report.valid:
            v = report.violations[0]
            raise InputError(
                f"multiplier {v.index} ({v.value}) violates the {v.rule} rule with {v.partners}"
            )
        if not (self.base_frequency > 0 and math.isfinite(self.base_frequency)):
            raise InputError("base_frequency must be positive and finite")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "multipliers", mult)
        object.__setattr__(self, "base_frequency", float(self.base_frequency))

    @classmethod
    def from_frequencies(cls, amplitudes, frequencies, base_frequency: float = 1.0) -> "DitherSpec":
        """Build from absolute frequencies given as exact rationals (ints or strings)."""
        base = to_fraction(str(base_frequency)) if isinstance(base_frequency, float) else to_fraction(base_frequency)
        mult = [to_fraction(f) / base for f in frequencies]
        return cls(amplitudes, tuple(mult), float(base))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([float(m) for m in self.multipliers]) * self.base_frequency

    def scaled(self, factor) -> "DitherSpec":
        """Same multipliers, base frequency multiplied by ``factor``."""
        return DitherSpec(self.amplitudes, self.multipliers, self.base_frequency * float(factor))

    def with_amplitudes(self, amplitudes) -> "DitherSpec":
        return DitherSpec(amplitudes, self.multipliers, self.base_frequency)


def probe_signal(spec: DitherSpec, t) -> np.ndarray:
    """``S(t)``; a vector of length n, or shape (len(t), n) for array ``t``."""
    t = np.asarray(t, dtype=float)
    return spec.amplitudes * np.sin(np.multiply.outer(t, spec.frequencies))


def demod_signal(spec: DitherSpec, t) -> np.ndarray:
    """``M(t)`` with entries ``(2 / a_i) sin(omega_i t)``."""
    t = np.asarray(t, dtype=float)
    return (2.0 / spec.amplitudes) * np.sin(np.multiply.outer(t, spec.frequencies))


def probe_rate(spec: DitherSpec, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    w = spec.frequencies
    return spec.amplitudes * w * np.cos(np.multiply.outer(t, w))


def demod_rate(spec: DitherSpec, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    w = spec.frequencies
    return (2.0 / spec.amplitudes) * w * np.cos(np.multiply.outer(t, w))


def period_of(multipliers, base_frequency: float) -> PeriodInfo:
    """Common period of tones ``m_i * base_frequency`` from the exact rational LCM.

    With ``m_i = p_i / q_i`` the tone periods are
    ``(2 pi / omega) * q_i / p_i``; their LCM is ``lcm(q) / gcd(p)``.
    No validity check on the multipliers is made here.
    """
    mult = [to_fraction(m) for m in multipliers]
    if not mult or any(m <= 0 for m in mult):
        raise InputError("multipliers must be positive")
    lcm_ratio = Fraction(math.lcm(*(m.denominator for m in mult)), math.gcd(*(m.numerator for m in mult)))
    period = 2.0 * math.pi / base_frequency * float(lcm_ratio)
    return PeriodInfo(period=period, base_frequency=2.0 * math.pi / period)


def common_period(spec: DitherSpec) -> PeriodInfo:
    """Smallest ``T`` such that every dither tone is T-periodic."""
    return period_of(spec.multipliers, spec.base_frequency)


def delta_matrix(spec: DitherSpec, hess_dim: int, t: float) -> np.ndarray:
    """Fluctuation ``Delta(t) = M(t) S(t)' - I`` in closed form.

    Diagonal ``-cos(2 w_i t)``; off-diagonal
    ``(a_j / a_i) [cos((w_i - w_j) t) - cos((w_i + w_j) t)]``.
    """
    if hess_dim != spec.dim:
        raise InputError(f"dither has {spec.dim} channels, Hessian is {hess_dim}x{hess_dim}")
    w = spec.frequencies
    a = spec.amplitudes
    wi, wj = np.meshgrid(w, w, indexing="ij")
    ratio = a[None, :] / a[:, None]
    d = ratio * (np.cos((wi - wj) * t) - np.cos((wi + wj) * t))
    np.fill_diagonal(d, -np.cos(2.0 * w * t))
    return d


def omega_matrix(spec: DitherSpec, hessian: np.ndarray, t: float) -> np.ndarray:
    """``Omega(t) = (I + Delta(t)) H = M(t) S(t)' H``.

    Built from the outer product so it shares phase rounding with ``M`` and ``S``.
    """
    hessian = np.asarray(hessian, dtype=float)
    if hessian.shape != (spec.dim, spec.dim):
        raise InputError(f"dither has {spec.dim} channels, Hessian is {hessian.shape[0]}x{hessian.shape[0]}")
    return np.outer(demod_signal(spec, t), probe_signal(spec, t)) @ hessian


def signal_average(
    f: Callable[[float], np.ndarray],
    period: PeriodInfo,
    quadrature_points: int = DEFAULT_QUADRATURE_POINTS,
) -> np.ndarray:
    """``(1/T) * integral_0^T f(t) dt`` by composite Simpson on a uniform grid."""
    if quadrature_points < 64:
        raise InputError("quadrature_points must be at least 64")
    if quadrature_points % 2:
        quadrature_points += 1
    t = np.linspace(0.0, period.period, quadrature_points + 1)
    values = np.stack([np.asarray(f(tk), dtype=float) for tk in t])
    return simpson(values, x=t, axis=0) / period.period
