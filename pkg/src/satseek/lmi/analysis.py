"""Stability certificates for the averaged saturated loop ``dG/dt = H sat(K G)``.

A certificate ``(P, L, U, eta)`` proves ``V(G) = G'PG`` decays at rate
``2 eta`` on the ellipsoid ``{G'PG <= 1}``, provided

* the block matrix ``[K'HP + PHK + 2 eta P, L'U - PH; UL - HP, -2U]`` is
  negative definite at every Hessian vertex, and
* ``[P, (K - L)_l'; *, ubar_l^2]`` is positive definite for every row, so
  the ellipsoid sits inside the region where the sector condition holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..core_model import PolytopicHessian
from ..exceptions import InputError, SolverError
from .backend import get_backend
from .problem import LMIProblem


def default_margin_tol(hess: PolytopicHessian) -> float:
    return 1e-7 * (1.0 + hess.norm())


@dataclass(frozen=True)
class Certificate:
    P: np.ndarray
    L: np.ndarray
    U: np.ndarray
    eta: float

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        L = np.asarray(self.L, dtype=float)
        U = np.asarray(self.U, dtype=float)
        n = P.shape[0]
        if P.shape != (n, n) or L.shape != (n, n) or U.shape != (n, n):
            raise InputError("certificate matrices must all be n x n")
        if np.abs(P - P.T).max() > 1e-9 * max(1.0, np.abs(P).max()):
            raise InputError("P must be symmetric")
        if np.any(U - np.diag(np.diag(U))):
            raise InputError("U must be diagonal")
        if not self.eta > 0:
            raise InputError("eta must be positive")
        for name, arr in (("P", 0.5 * (P + P.T)), ("L", L), ("U", U)):
            arr = np.array(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "eta", float(self.eta))

    @property
    def dim(self) -> int:
        return self.P.shape[0]

    @property
    def kappa(self) -> float:
        """``sqrt(lambda_max(P) / lambda_min(P))``."""
        ev = np.linalg.eigvalsh(self.P)
        return math.sqrt(ev[-1] / ev[0])

    def lyapunov(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        return np.einsum("...i,ij,...j->...", g, self.P, g)

    def to_dict(self) -> dict:
        return {"P": self.P.tolist(), "L": self.L.tolist(), "U": self.U.tolist(), "eta": self.eta}

    @classmethod
    def from_dict(cls, data) -> "Certificate":
        return cls(np.array(data["P"]), np.array(data["L"]), np.array(data["U"]), data["eta"])


def analysis_matrix(hessian, gain, cert: Certificate) -> np.ndarray:
    h = np.asarray(hessian, dtype=float)
    k = np.asarray(gain, dtype=float)
    P, L, U = cert.P, cert.L, cert.U
    top = k.T @ h @ P + P @ h @ k + 2.0 * cert.eta * P
    off = U @ L - h @ P
    return np.block([[top, off.T], [off, -2.0 * U]])


def inclusion_matrix(cert: Certificate, gain, limits, row: int) -> np.ndarray:
    r = (np.asarray(gain, dtype=float) - cert.L)[row]
    n = cert.dim
    out = np.empty((n + 1, n + 1))
    out[:n, :n] = cert.P
    out[:n, n] = out[n, :n] = r
    out[n, n] = float(limits[row]) ** 2
    return out


@dataclass
class AnalysisReport:
    vertex_max_eigs: list
    margin_tol: float

    @property
    def margin(self) -> float:
        return -max(self.vertex_max_eigs)

    @property
    def passed(self) -> bool:
        return all(e < -self.margin_tol for e in self.vertex_max_eigs)

    def to_dict(self) -> dict:
        return {
            "vertex_max_eigs": list(self.vertex_max_eigs),
            "margin_tol": self.margin_tol,
            "passed": self.passed,
        }


def check_analysis(hess: PolytopicHessian, gain, cert: Certificate, margin_tol: float | None = None) -> AnalysisReport:
    """Largest eigenvalue of the decay LMI at each vertex.

    The matrix is affine in ``H``, so negativity at the vertices covers the
    whole polytope.
    """
    k = np.asarray(gain, dtype=float)
    if k.shape != (hess.dim, hess.dim) or cert.dim != hess.dim:
        raise InputError("gain, certificate and Hessian dimensions disagree")
    tol = default_margin_tol(hess) if margin_tol is None else margin_tol
    eigs = []
    for h in hess.vertices:
        m = analysis_matrix(h, k, cert)
        if np.abs(m - m.T).max() > 1e-9 * max(1.0, np.abs(m).max()):
            raise InputError("analysis matrix is not symmetric")
        eigs.append(float(np.linalg.eigvalsh(0.5 * (m + m.T)).max()))
    return AnalysisReport(eigs, tol)


@dataclass
class InclusionReport:
    row_min_eigs: list
    sampled_max_ratio: float
    n_samples: int

    @property
    def passed(self) -> bool:
        return all(e > 0 for e in self.row_min_eigs) and self.sampled_max_ratio <= 1.0 + 1e-9

    def to_dict(self) -> dict:
        return {
            "row_min_eigs": list(self.row_min_eigs),
            "sampled_max_ratio": self.sampled_max_ratio,
            "n_samples": self.n_samples,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class Ellipsoid:
    """``{g : g'Pg <= 1}`` with its semi-axes and volume."""

    P: np.ndarray
    semi_axes: np.ndarray
    axes: np.ndarray
    volume: float

    def contains(self, g, tol: float = 1e-9) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        return np.einsum("...i,ij,...j->...", g, self.P, g) <= 1.0 + tol

    def boundary_points(self, n_points: int, seed: int | None = 0) -> np.ndarray:
        """Points with ``g'Pg = 1``; evenly spread on a circle in 2-D, random otherwise."""
        dim = self.P.shape[0]
        if dim == 1:
            z = np.resize(np.array([1.0, -1.0]), n_points)[:, None]
        elif dim == 2:
            ang = 2.0 * math.pi * np.arange(n_points) / n_points
            z = np.column_stack([np.cos(ang), np.sin(ang)])
        else:
            z = np.random.default_rng(seed).standard_normal((n_points, dim))
            z /= np.linalg.norm(z, axis=1, keepdims=True)
        # P = R R' (Cholesky), g = R^{-T} z gives g'Pg = |z|^2 = 1
        r = np.linalg.cholesky(self.P)
        return np.linalg.solve(r.T, z.T).T


def ellipsoid_of(cert) -> Ellipsoid:
    P = cert.P if isinstance(cert, Certificate) else np.asarray(cert, dtype=float)
    ev, vec = np.linalg.eigh(P)
    if ev[0] <= 0:
        raise InputError("P must be positive definite")
    n = P.shape[0]
    unit_ball = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
    return Ellipsoid(P, 1.0 / np.sqrt(ev), vec, unit_ball / math.sqrt(np.prod(ev)))


def check_inclusion(cert: Certificate, gain, limits, n_samples: int = 1000, seed: int | None = 0) -> InclusionReport:
    """Per-row inclusion LMI plus a sampled check on the ellipsoid boundary."""
    k = np.asarray(gain, dtype=float)
    limits = np.asarray(limits, dtype=float)
    if k.shape != (cert.dim, cert.dim) or limits.shape != (cert.dim,):
        raise InputError("gain, limits and certificate dimensions disagree")
    eigs = [float(np.linalg.eigvalsh(inclusion_matrix(cert, k, limits, l)).min()) for l in range(cert.dim)]
    ratio = float("inf")
    if np.linalg.eigvalsh(cert.P)[0] > 0:
        pts = ellipsoid_of(cert).boundary_points(n_samples, seed)
        ratio = float((np.abs(pts @ (k - cert.L).T) / limits).max())
    return InclusionReport(eigs, ratio, n_samples)


@dataclass
class AnalysisResult:
    status: str
    certificate: Certificate | None = None
    analysis: AnalysisReport | None = None
    inclusion: InclusionReport | None = None
    problem: LMIProblem | None = None
    solver_margins: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.certificate is not None and self.analysis.passed and self.inclusion.passed


def analysis_problem(hess: PolytopicHessian, gain, eta: float, limits, margin: float, objective: str | None = "logdet") -> LMIProblem:
    """Decay and inclusion LMIs for a fixed gain.

    The product ``U L`` is removed by the congruence ``D = diag(P^-1, U^-1)``
    with variables ``X = P^-1``, ``S = U^-1`` (diagonal) and ``Y = L X``.
    Margins are meant in the original coordinates: ``M <= -m I`` becomes
    ``D M_X D``-form ``[[M_X, D], [D, -I/m]] <= 0`` by a Schur complement,
    and likewise for the inclusion rows and ``P >= m I`` (``X <= I/m``).
    """
    n = hess.dim
    k = np.asarray(gain, dtype=float)
    limits = np.asarray(limits, dtype=float)
    eye_n = np.eye(n)
    prob = LMIProblem("analysis")
    prob.add_variable("X", (n, n), "symmetric")
    prob.add_variable("Y", (n, n), "full")
    prob.add_variable("S", (n, n), "diagonal")
    for i, h in enumerate(hess.vertices):
        def decay(v, h=h):
            X, Y, S = v["X"], v["Y"], v["S"]
            top = X @ k.T @ h + h @ k @ X + 2.0 * eta * X
            off = Y - S @ h
            mx = np.block([[top, off.T], [off, -2.0 * S]])
            d = np.block([[X, np.zeros((n, n))], [np.zeros((n, n)), S]])
            return np.block([[mx, d], [d, -np.eye(2 * n) / margin]])
        prob.add_lmi(f"decay[{i}]", decay, "nsd", 0.0)
    for l in range(n):
        def incl(v, l=l):
            X, Y = v["X"], v["Y"]
            r = (k @ X - Y)[l][:, None]
            nx = np.block([[X, r], [r.T, np.array([[limits[l] ** 2]])]])
            e = np.zeros((n + 1, n + 1))
            e[:n, :n] = X
            e[n, n] = 1.0
            return np.block([[nx, e], [e, np.eye(n + 1) / margin]])
        prob.add_lmi(f"inclusion[{l}]", incl, "psd", 0.0)
    prob.add_lmi("P>=m", lambda v: eye_n / margin - v["X"], "psd", 0.0)
    # P <= I/m: excludes the degenerate X -> 0 limit (a point-sized ellipsoid)
    prob.add_lmi("P<=1/m", lambda v: v["X"], "psd", margin)
    prob.add_lmi("S>0", lambda v: v["S"], "psd", margin)
    if objective == "logdet":
        prob.maximize_logdet("X")
    return prob


def solve_analysis(
    hess: PolytopicHessian,
    gain,
    eta: float,
    limits,
    backend=None,
    margin_tol: float | None = None,
    objective: str | None = "logdet",
    seed: int = 0,
) -> AnalysisResult:
    """Search ``(P, L, U)`` certifying the fixed gain ``K`` at decay rate ``eta``.

    The default objective maximizes the certified ellipsoid's volume.
    Infeasibility is reported through ``status``; a backend failure raises
    :class:`SolverError`.
    """
    if not eta > 0:
        raise InputError("eta must be positive")
    limits = np.asarray(limits, dtype=float)
    k = np.asarray(gain, dtype=float)
    if k.shape != (hess.dim, hess.dim) or limits.shape != (hess.dim,):
        raise InputError("gain/limits dimension mismatch")
    tol = default_margin_tol(hess) if margin_tol is None else margin_tol
    # solve with twice the check margin so the recovered certificate clears it
    prob = analysis_problem(hess, k, eta, limits, 2.0 * tol, objective)
    backend = backend or get_backend()
    res = backend.solve(prob)
    if res.status == "infeasible":
        return AnalysisResult("infeasible", problem=prob)
    if not res.ok:
        raise SolverError(f"analysis solve failed ({res.message})", res.status)
    X, Y, S = res.values["X"], res.values["Y"], res.values["S"]
    P = np.linalg.inv(X)
    cert = Certificate(0.5 * (P + P.T), Y @ P, np.diag(1.0 / np.diag(S)), eta)
    result = AnalysisResult(
        res.status,
        cert,
        check_analysis(hess, k, cert, tol),
        check_inclusion(cert, k, limits, seed=seed),
        prob,
        prob.margins(res.values),
    )
    if res.status == "feasible" and not result.feasible:
        # inaccurate solve whose point does not verify: no certificate exists at this margin
        result.status = "infeasible"
    return result
