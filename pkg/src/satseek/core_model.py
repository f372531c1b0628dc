"""Static quadratic map, actuator nonlinearities and the Hessian polytope.

Everything here is immutable; arrays stored on the dataclasses are marked
read-only so a spec object can be shared between threads and simulations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InputError

SYMMETRY_RTOL = 1e-12
DEFINITENESS_RTOL = 1e-10
SIMPLEX_ATOL = 1e-12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def _vector(x, name: str, n: int | None = None) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise InputError(f"{name} must be a vector, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise InputError(f"{name} has length {v.shape[0]}, expected {n}")
    return v


@dataclass(frozen=True)
class SimplexWeight:
    """A point of the unit simplex (the convex weights of the Hessian vertices)."""

    weights: np.ndarray

    def __post_init__(self):
        w = _vector(self.weights, "weights")
        if w.size == 0:
            raise InputError("simplex weight must have at least one entry")
        if np.any(w < 0):
            raise InputError(f"simplex weights must be nonnegative, got {w}")
        if abs(w.sum() - 1.0) > SIMPLEX_ATOL:
            raise InputError(f"simplex weights must sum to 1, got {w.sum()!r}")
        object.__setattr__(self, "weights", _frozen(w))

    def __len__(self):
        return self.weights.shape[0]

    @classmethod
    def vertex(cls, i: int, n_vertices: int) -> "SimplexWeight":
        w = np.zeros(n_vertices)
        w[i] = 1.0
        return cls(w)


def as_simplex(alpha, n_vertices: int | None = None) -> SimplexWeight:
    if not isinstance(alpha, SimplexWeight):
        alpha = SimplexWeight(alpha)
    if n_vertices is not None and len(alpha) != n_vertices:
        raise InputError(f"simplex weight has {len(alpha)} entries, polytope has {n_vertices} vertices")
    return alpha


@dataclass(frozen=True)
class PolytopicHessian:
    """Convex hull of known symmetric vertex matrices containing the true Hessian.

    Every vertex is checked for symmetry and for definiteness with the
    declared sign, so any convex combination is definite as well.
    """

    vertices: tuple
    definiteness_sign: str = "positive"

    def __post_init__(self):
        if self.definiteness_sign not in ("positive", "negative"):
            raise InputError("definiteness_sign must be 'positive' or 'negative'")
        verts = [np.asarray(h, dtype=float) for h in self.vertices]
        if not verts:
            raise InputError("a polytope needs at least one vertex")
        n = verts[0].shape[0]
        for i, h in enumerate(verts):
            if h.shape != (n, n):
                raise InputError(f"vertex {i} has shape {h.shape}, expected {(n, n)}")
            scale = max(np.abs(h).max(), np.finfo(float).tiny)
            if np.abs(h - h.T).max() > SYMMETRY_RTOL * scale:
                raise InputError(f"vertex {i} is not symmetric")
            eig = np.linalg.eigvalsh(h)
            sign = 1.0 if self.definiteness_sign == "positive" else -1.0
            if np.min(sign * eig) <= DEFINITENESS_RTOL * np.linalg.norm(h, 2):
                raise InputError(
                    f"vertex {i} is not {self.definiteness_sign} definite (eigenvalues {eig})"
                )
        object.__setattr__(self, "vertices", tuple(_frozen(h) for h in verts))

    @classmethod
    def scaled(cls, nominal, delta: float, sign: str = "positive") -> "PolytopicHessian":
        """Two-vertex polytope ``{(1 - delta) H0, (1 + delta) H0}``."""
        h0 = np.asarray(nominal, dtype=float)
        return cls(((1.0 - delta) * h0, (1.0 + delta) * h0), sign)

    @property
    def dim(self) -> int:
        return self.vertices[0].shape[0]

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def norm(self) -> float:
        """Largest spectral norm over the vertices."""
        return max(np.linalg.norm(h, 2) for h in self.vertices)


def hessian_at(hess: PolytopicHessian, alpha) -> np.ndarray:
    """Convex combination ``sum_i alpha_i H_i``."""
    alpha = as_simplex(alpha, hess.n_vertices)
    return np.tensordot(alpha.weights, np.stack(hess.vertices), axes=1)


@dataclass(frozen=True)
class PlantSpec:
    """Quadratic static map ``Q* + 1/2 (theta - theta*)' H (theta - theta*)``."""

    optimum_value: float
    optimizer: np.ndarray
    hessian: PolytopicHessian
    sat_limits: np.ndarray

    def __post_init__(self):
        n = self.hessian.dim
        theta_star = _vector(self.optimizer, "optimizer", n)
        limits = _vector(self.sat_limits, "sat_limits", n)
        if not np.all(limits > 0):
            raise InputError(f"sat_limits must be strictly positive, got {limits}")
        object.__setattr__(self, "optimum_value", float(self.optimum_value))
        object.__setattr__(self, "optimizer", _frozen(theta_star))
        object.__setattr__(self, "sat_limits", _frozen(limits))

    @property
    def dim(self) -> int:
        return self.hessian.dim


def map_eval(plant: PlantSpec, alpha, theta) -> float:
    theta = _vector(theta, "theta", plant.dim)
    d = theta - plant.optimizer
    return plant.optimum_value + 0.5 * d @ hessian_at(plant.hessian, alpha) @ d


def _check_limits(u, limits):
    u = np.asarray(u, dtype=float)
    limits = np.asarray(limits, dtype=float)
    if u.shape[-1] != limits.shape[-1]:
        raise InputError(f"input has {u.shape[-1]} channels, limits have {limits.shape[-1]}")
    return u, limits


def saturate(u, limits) -> np.ndarray:
    """Elementwise clamp to ``[-limits, limits]``; broadcasts over leading axes."""
    u, limits = _check_limits(u, limits)
    return np.clip(u, -limits, limits)


def deadzone(u, limits) -> np.ndarray:
    """``u - saturate(u)``: zero exactly when every channel is inside its limit."""
    u, limits = _check_limits(u, limits)
    return u - np.clip(u, -limits, limits)


def sample_simplex(n: int, rng_seed: int | None = None) -> SimplexWeight:
    """Uniform draw from the unit simplex via normalized exponentials."""
    if n < 1:
        raise InputError("simplex dimension must be at least 1")
    if n == 1:
        return SimplexWeight([1.0])
    e = np.random.default_rng(rng_seed).exponential(size=n)
    w = e / e.sum()
    # renormalize the last entry so the sum is 1 to the last bit
    w[-1] = max(0.0, 1.0 - w[:-1].sum())
    return SimplexWeight(w)
