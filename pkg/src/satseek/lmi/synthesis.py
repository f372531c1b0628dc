"""Robust gain synthesis over a Hessian polytope.

Decision variables ``W`` (symmetric), ``V`` (diagonal), ``Z``, ``Y`` and a
square slack ``T`` (called ``slack`` here; it is unrelated to the dither
period).  After solving, ``K = Z T^-1`` and the analysis certificate is
recovered as ``P = T^-T W T^-1``, ``L = Y T^-1``, ``U = V^-1``, then checked
independently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core_model import PolytopicHessian
from ..exceptions import CrossValidationError, InputError, SolverError, SynthesisError
from .analysis import (
    AnalysisReport,
    Certificate,
    InclusionReport,
    check_analysis,
    check_inclusion,
    default_margin_tol,
)
from .backend import get_backend
from .problem import LMIProblem

SLACK_COND_LIMIT = 1e10
BLOCK_31_VARIANTS = ("standard", "with_z")
EPSILON_GRID = tuple(np.logspace(-2, 1, 7))


@dataclass
class SynthesisResult:
    status: str
    gain: np.ndarray | None = None
    W: np.ndarray | None = None
    V: np.ndarray | None = None
    Z: np.ndarray | None = None
    Y: np.ndarray | None = None
    slack: np.ndarray | None = None
    epsilon: float | None = None
    Q0: np.ndarray | None = None
    recovered_certificate: Certificate | None = None
    analysis: AnalysisReport | None = None
    inclusion: InclusionReport | None = None
    objective: float | None = None
    problem: LMIProblem | None = None
    solver_margins: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.gain is not None

    def to_dict(self) -> dict:
        def arr(a):
            return None if a is None else np.asarray(a).tolist()

        return {
            "status": self.status,
            "gain": arr(self.gain),
            "epsilon": self.epsilon,
            "objective_logdet_Q0": self.objective,
            "variables": {
                "W": arr(self.W), "V": arr(self.V), "Z": arr(self.Z),
                "Y": arr(self.Y), "slack": arr(self.slack), "Q0": arr(self.Q0),
            },
            "certificate": None if self.recovered_certificate is None else self.recovered_certificate.to_dict(),
            "analysis": None if self.analysis is None else self.analysis.to_dict(),
            "inclusion": None if self.inclusion is None else self.inclusion.to_dict(),
            "solver_margins": self.solver_margins,
        }


def synthesis_problem(
    hess: PolytopicHessian,
    limits,
    eta: float,
    epsilon: float,
    margin: float,
    lmi_31_block: str = "standard",
) -> LMIProblem:
    """Assemble the synthesis LMIs with the volume objective ``max logdet(Q0)``, ``W >= Q0``."""
    if lmi_31_block not in BLOCK_31_VARIANTS:
        raise InputError(f"lmi_31_block must be one of {BLOCK_31_VARIANTS}")
    n = hess.dim
    limits = np.asarray(limits, dtype=float)
    prob = LMIProblem("synthesis")
    for name, structure in (("W", "symmetric"), ("V", "diagonal"), ("Z", "full"),
                            ("Y", "full"), ("T", "full"), ("Q0", "symmetric")):
        prob.add_variable(name, (n, n), structure)

    for i, h in enumerate(hess.vertices):
        def block(v, h=h):
            W, V, Z, Y, T = v["W"], v["V"], v["Z"], v["Y"], v["T"]
            b11 = h @ Z + Z.T @ h.T + 2.0 * eta * W
            b21 = W - T.T + epsilon * h @ Z
            b22 = -epsilon * (T.T + T)
            b31 = Y - V @ h.T if lmi_31_block == "standard" else Z + Y - V @ h.T
            b32 = -epsilon * V @ h.T
            b33 = -2.0 * V
            return np.block([[b11, b21.T, b31.T], [b21, b22, b32.T], [b31, b32, b33]])
        prob.add_lmi(f"decay[{i}]", block, "nsd", margin)

    for l in range(n):
        def sat_row(v, l=l):
            r = (v["Z"] - v["Y"])[l][:, None]
            return np.block([[v["W"], r], [r.T, np.array([[limits[l] ** 2]])]])
        prob.add_lmi(f"inclusion[{l}]", sat_row, "psd", margin)

    prob.add_lmi("W>0", lambda v: v["W"], "psd", margin)
    prob.add_lmi("V>0", lambda v: v["V"], "psd", margin)
    prob.add_lmi("Q0>0", lambda v: v["Q0"], "psd", margin)
    prob.add_lmi("W>=Q0", lambda v: v["W"] - v["Q0"], "psd", 0.0)
    prob.maximize_logdet("Q0")
    return prob


def solve_synthesis(
    hess: PolytopicHessian,
    limits,
    eta: float,
    epsilon: float = 0.5,
    backend=None,
    margin_tol: float | None = None,
    lmi_31_block: str = "standard",
    seed: int = 0,
) -> SynthesisResult:
    """Solve for a robust gain; infeasibility is returned, not raised.

    Raises :class:`SynthesisError` if the slack is numerically singular and
    :class:`CrossValidationError` if the recovered certificate does not pass
    :func:`check_analysis` and :func:`check_inclusion`.
    """
    if not eta > 0 or not epsilon > 0:
        raise InputError("eta and epsilon must be positive")
    limits = np.asarray(limits, dtype=float)
    if limits.shape != (hess.dim,) or np.any(limits <= 0):
        raise InputError("limits must be a positive vector matching the Hessian dimension")
    tol = default_margin_tol(hess) if margin_tol is None else margin_tol
    prob = synthesis_problem(hess, limits, eta, epsilon, tol, lmi_31_block)
    backend = backend or get_backend()
    res = backend.solve(prob)
    if res.status == "infeasible":
        return SynthesisResult("infeasible", epsilon=epsilon, problem=prob)
    if not res.ok:
        raise SolverError(f"synthesis solve failed ({res.message})", res.status)

    v = res.values
    slack = v["T"]
    cond = np.linalg.cond(slack)
    if not np.isfinite(cond) or cond > SLACK_COND_LIMIT:
        raise SynthesisError(f"slack matrix is numerically singular (condition number {cond:.3g})")
    t_inv = np.linalg.inv(slack)
    gain = v["Z"] @ t_inv
    P = t_inv.T @ v["W"] @ t_inv
    cert = Certificate(0.5 * (P + P.T), v["Y"] @ t_inv, np.diag(1.0 / np.diag(v["V"])), eta)
    analysis = check_analysis(hess, gain, cert, tol)
    inclusion = check_inclusion(cert, gain, limits, seed=seed)
    result = SynthesisResult(
        res.status, gain, v["W"], v["V"], v["Z"], v["Y"], slack, epsilon, v["Q0"],
        cert, analysis, inclusion, res.objective, prob, prob.margins(v),
    )
    if not (analysis.passed and inclusion.passed):
        if res.status == "feasible":
            # inaccurate solve that does not verify; nothing certified
            return SynthesisResult("infeasible", epsilon=epsilon, problem=prob,
                                   analysis=analysis, inclusion=inclusion)
        raise CrossValidationError(
            f"recovered certificate failed cross-validation (analysis margin {analysis.margin:.3g}, "
            f"inclusion eigs {inclusion.row_min_eigs})",
            analysis,
            inclusion,
        )
    return result


def search_epsilon(hess: PolytopicHessian, limits, eta: float, grid=EPSILON_GRID, **kwargs) -> SynthesisResult:
    """Solve over a grid of ``epsilon`` values and keep the largest ``logdet(Q0)``.

    Grid points that fail cross-validation are skipped.
    """
    best = None
    for eps in grid:
        try:
            res = solve_synthesis(hess, limits, eta, float(eps), **kwargs)
        except (CrossValidationError, SynthesisError):
            continue
        if res.feasible and (best is None or (res.objective or -np.inf) > (best.objective or -np.inf)):
            best = res
    return best if best is not None else SynthesisResult("infeasible")
