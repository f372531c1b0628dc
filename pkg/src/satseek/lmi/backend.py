"""Conic backends that solve an :class:`LMIProblem`.

Only a cvxpy-based backend ships; which underlying solver it drives is
picked by name (``clarabel``, ``scs``, ``cvxopt``) or by the
``SATSEEK_BACKEND`` environment variable.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from ..exceptions import InputError
from .problem import LMIProblem

STATUSES = ("optimal", "feasible", "infeasible", "numerical-failure")


@dataclass
class BackendResult:
    status: str
    values: dict = field(default_factory=dict)
    objective: float | None = None
    solver: str = ""
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "feasible")


class ConicBackend(Protocol):
    name: str
    capabilities: frozenset

    def solve(self, problem: LMIProblem) -> BackendResult: ...


_SOLVERS = {
    # name: (cvxpy solver id, capabilities)
    "clarabel": ("CLARABEL", frozenset({"semidefinite", "linear_equalities", "log_determinant"})),
    "scs": ("SCS", frozenset({"semidefinite", "linear_equalities", "log_determinant"})),
    "cvxopt": ("CVXOPT", frozenset({"semidefinite", "linear_equalities"})),
}


class CvxpyBackend:
    """Translate the affine LMI description to cvxpy and solve it.

    The logdet objective goes through cvxpy's ``log_det`` atom (exponential
    cones on the diagonal of a triangular factor).  Solvers without
    exponential cones get the geometric-mean surrogate ``det(Q)^(1/n)``,
    built from the same triangular factor.
    """

    def __init__(self, solver: str = "clarabel", **solver_options):
        key = solver.lower()
        if key not in _SOLVERS:
            raise InputError(f"unknown backend {solver!r}; choose from {sorted(_SOLVERS)}")
        self.name = key
        self._solver_id, self.capabilities = _SOLVERS[key]
        self.solver_options = solver_options

    def __repr__(self):
        return f"CvxpyBackend({self.name!r})"

    def _build(self, problem: LMIProblem, with_objective: bool):
        import cvxpy as cp

        x = cp.Variable(problem.n_scalars)
        cons = []
        for lmi in problem.constraints:
            m = lmi.size
            a = problem.coefficient_matrix(lmi)
            expr = cp.reshape(a @ x, (m, m), order="C") + lmi.constant
            expr = 0.5 * (expr + expr.T)
            if lmi.sense == "psd":
                cons.append(expr >> lmi.margin * np.eye(m))
            else:
                cons.append(expr << -lmi.margin * np.eye(m))
        objective = cp.Minimize(0)
        obj = problem.objective if with_objective else None
        if obj is not None:
            var = problem.variable(obj["variable"])
            offs = problem.offsets()[var.name]
            basis = np.stack([var.basis(idx).ravel() for idx in var.entries()], axis=1)
            n = var.shape[0]
            q = cp.reshape(basis @ x[offs: offs + var.size], (n, n), order="C")
            q = 0.5 * (q + q.T)
            if "log_determinant" in self.capabilities:
                objective = cp.Maximize(cp.log_det(q))
            else:
                tri = cp.Variable((n, n))
                cons += [tri[i, j] == 0 for i in range(n) for j in range(i + 1, n)]
                cons.append(cp.bmat([[q, tri], [tri.T, cp.diag(cp.diag(tri))]]) >> 0)
                objective = cp.Maximize(cp.geo_mean(cp.diag(tri)))
        return x, cp.Problem(objective, cons)

    def solve(self, problem: LMIProblem) -> BackendResult:
        import cvxpy as cp

        x, prob = self._build(problem, with_objective=True)
        status = self._run(prob)
        if status.startswith("unbounded") and problem.objective is not None:
            # objective unbounded means feasible; recover a finite point
            x, prob = self._build(problem, with_objective=False)
            status = self._run(prob)
        mapped = {
            cp.OPTIMAL: "optimal",
            cp.OPTIMAL_INACCURATE: "feasible",
            cp.INFEASIBLE: "infeasible",
            cp.INFEASIBLE_INACCURATE: "infeasible",
        }.get(status, "numerical-failure")
        values = {}
        if mapped in ("optimal", "feasible") and x.value is not None:
            values = problem.unpack(x.value)
        elif mapped in ("optimal", "feasible"):
            mapped = "numerical-failure"
        objective = prob.value if mapped in ("optimal", "feasible") and problem.objective else None
        return BackendResult(mapped, values, objective, self.name, status)

    def _run(self, prob) -> str:
        import cvxpy as cp

        try:
            with warnings.catch_warnings():
                # inaccuracy is reported through the status instead
                warnings.simplefilter("ignore", UserWarning)
                prob.solve(solver=self._solver_id, **self.solver_options)
        except cp.error.SolverError as exc:
            return f"solver_error: {exc}"
        return prob.status


class FallbackBackend:
    """Try backends in order; move on only when a solver errors out.

    A definite "infeasible" or a solution from the first backend is final.
    Clarabel sometimes aborts on strictly infeasible SDPs where SCS returns
    an infeasibility certificate, hence the default chain.
    """

    def __init__(self, *backends):
        if not backends:
            raise InputError("FallbackBackend needs at least one backend")
        self.backends = backends
        self.name = "+".join(b.name for b in backends)
        self.capabilities = frozenset.intersection(*(b.capabilities for b in backends))

    def __repr__(self):
        return f"FallbackBackend{self.backends!r}"

    def solve(self, problem: LMIProblem) -> BackendResult:
        res = None
        for backend in self.backends:
            res = backend.solve(problem)
            if res.status != "numerical-failure":
                return res
        return res


def get_backend(name: str | None = None):
    """Backend by name, falling back to ``$SATSEEK_BACKEND`` then Clarabel.

    Anything other than SCS is chained with SCS for solver errors.
    """
    primary = CvxpyBackend(name or os.environ.get("SATSEEK_BACKEND", "clarabel"))
    if primary.name == "scs":
        return primary
    return FallbackBackend(primary, CvxpyBackend("scs"))
