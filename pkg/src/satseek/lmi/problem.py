"""Backend-independent description of an LMI problem.

Each constraint is stored as an affine matrix function of the scalar
entries of the decision variables::

    F(x) = F0 + sum_k x_k F_k    with   F(x) >= margin I   or   F(x) <= -margin I

The coefficients are extracted once by evaluating an affine builder on the
variables' basis matrices, so the same object can be handed to any conic
backend or dumped to JSON and replayed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import InputError

STRUCTURES = ("symmetric", "diagonal", "full")


@dataclass(frozen=True)
class MatrixVariable:
    name: str
    shape: tuple
    structure: str = "full"

    def __post_init__(self):
        if self.structure not in STRUCTURES:
            raise InputError(f"unknown structure {self.structure!r}")
        r, c = self.shape
        if self.structure != "full" and r != c:
            raise InputError(f"{self.structure} variable {self.name} must be square")
        object.__setattr__(self, "shape", (int(r), int(c)))

    def entries(self) -> list:
        """Free scalar entries as ``(i, j)`` index pairs."""
        r, c = self.shape
        if self.structure == "symmetric":
            return [(i, j) for i in range(r) for j in range(i, c)]
        if self.structure == "diagonal":
            return [(i, i) for i in range(r)]
        return [(i, j) for i in range(r) for j in range(c)]

    def basis(self, index) -> np.ndarray:
        i, j = index
        b = np.zeros(self.shape)
        b[i, j] = 1.0
        if self.structure == "symmetric":
            b[j, i] = 1.0
        return b

    @property
    def size(self) -> int:
        return len(self.entries())

    def assemble(self, x) -> np.ndarray:
        out = np.zeros(self.shape)
        for xi, idx in zip(x, self.entries()):
            out += xi * self.basis(idx)
        return out


@dataclass
class AffineLMI:
    name: str
    sense: str  # "psd": F >= margin I, "nsd": F <= -margin I
    margin: float
    constant: np.ndarray
    terms: list  # (variable name, (i, j), coefficient matrix)

    @property
    def size(self) -> int:
        return self.constant.shape[0]

    def evaluate(self, values: dict) -> np.ndarray:
        out = self.constant.copy()
        for name, (i, j), coef in self.terms:
            out += values[name][i, j] * coef
        return out

    def eig_margin(self, values: dict) -> float:
        """Signed slack: positive when the strict constraint holds."""
        f = self.evaluate(values)
        f = 0.5 * (f + f.T)
        if self.sense == "psd":
            return float(np.linalg.eigvalsh(f).min())
        return float(-np.linalg.eigvalsh(f).max())


@dataclass
class LMIProblem:
    name: str = "lmi"
    variables: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    objective: dict | None = None  # {"sense": "maximize", "type": "logdet", "variable": name}

    def add_variable(self, name, shape, structure="full") -> MatrixVariable:
        if any(v.name == name for v in self.variables):
            raise InputError(f"duplicate variable {name}")
        var = MatrixVariable(name, tuple(shape), structure)
        self.variables.append(var)
        return var

    def variable(self, name) -> MatrixVariable:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def _zeros(self) -> dict:
        return {v.name: np.zeros(v.shape) for v in self.variables}

    def add_lmi(self, name, builder, sense="nsd", margin=0.0) -> AffineLMI:
        """Register ``builder(values) >= margin I`` (psd) or ``<= -margin I`` (nsd).

        ``builder`` must be affine in its arguments and return a symmetric matrix.
        """
        if sense not in ("psd", "nsd"):
            raise InputError("sense must be 'psd' or 'nsd'")
        zeros = self._zeros()
        const = np.asarray(builder(zeros), dtype=float)
        if const.ndim != 2 or const.shape[0] != const.shape[1]:
            raise InputError(f"LMI {name} builder must return a square matrix")
        terms = []
        for var in self.variables:
            for idx in var.entries():
                vals = dict(zeros)
                vals[var.name] = var.basis(idx)
                coef = np.asarray(builder(vals), dtype=float) - const
                if np.any(coef):
                    if np.abs(coef - coef.T).max() > 1e-12 * max(1.0, np.abs(coef).max()):
                        raise InputError(f"LMI {name} is not symmetric in {var.name}{idx}")
                    terms.append((var.name, idx, coef))
        if np.abs(const - const.T).max() > 1e-12 * max(1.0, np.abs(const).max()):
            raise InputError(f"LMI {name} has a non-symmetric constant term")
        lmi = AffineLMI(name, sense, float(margin), const, terms)
        self.constraints.append(lmi)
        return lmi

    def maximize_logdet(self, variable: str) -> None:
        self.variable(variable)
        self.objective = {"sense": "maximize", "type": "logdet", "variable": variable}

    @property
    def n_scalars(self) -> int:
        return sum(v.size for v in self.variables)

    def offsets(self) -> dict:
        out, k = {}, 0
        for v in self.variables:
            out[v.name] = k
            k += v.size
        return out

    def unpack(self, x) -> dict:
        x = np.asarray(x, dtype=float)
        offs = self.offsets()
        return {v.name: v.assemble(x[offs[v.name]: offs[v.name] + v.size]) for v in self.variables}

    def coefficient_matrix(self, lmi: AffineLMI) -> np.ndarray:
        """Dense (size*size, n_scalars) map from the flat decision vector to vec(F - F0)."""
        offs = self.offsets()
        entry_pos = {}
        for v in self.variables:
            for k, idx in enumerate(v.entries()):
                entry_pos[(v.name, idx)] = offs[v.name] + k
        a = np.zeros((lmi.size * lmi.size, self.n_scalars))
        for name, idx, coef in lmi.terms:
            a[:, entry_pos[(name, tuple(idx))]] += coef.ravel()
        return a

    def margins(self, values: dict) -> dict:
        return {c.name: c.eig_margin(values) for c in self.constraints}

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "variables": [
                {"name": v.name, "dimension": list(v.shape), "structure": v.structure}
                for v in self.variables
            ],
            "lmis": [
                {
                    "name": c.name,
                    "sense": c.sense,
                    "margin": c.margin,
                    "size": c.size,
                    "constant": c.constant.tolist(),
                    "terms": [
                        {"variable": name, "index": list(idx), "coefficient": coef.tolist()}
                        for name, idx, coef in c.terms
                    ],
                }
                for c in self.constraints
            ],
            "objective": self.objective,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LMIProblem":
        prob = cls(name=data.get("name", "lmi"))
        for v in data["variables"]:
            prob.add_variable(v["name"], tuple(v["dimension"]), v["structure"])
        for c in data["lmis"]:
            terms = [
                (t["variable"], tuple(t["index"]), np.array(t["coefficient"], dtype=float))
                for t in c["terms"]
            ]
            prob.constraints.append(
                AffineLMI(c["name"], c["sense"], float(c["margin"]), np.array(c["constant"], dtype=float), terms)
            )
        prob.objective = data.get("objective")
        return prob

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "LMIProblem":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))
