"""JSON project configuration.

Every section is a small dataclass; unknown keys are rejected and parse
errors name the offending location (``dither.multipliers[1]``).
Frequency multipliers are kept as exact rational strings.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from .core_model import PlantSpec, PolytopicHessian
from .dither import DitherSpec, to_fraction
from .exceptions import InputError
from .lmi.synthesis import BLOCK_31_VARIANTS


class ConfigError(InputError):
    def __init__(self, location: str, message: str):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


def _number(value, loc: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(loc, f"expected a number, got {value!r}")
    return float(value)


def _optional(parser):
    def parse(value, loc):
        return None if value is None else parser(value, loc)
    return parse


_optional_number = _optional(_number)


def _vector(value, loc: str) -> list:
    if not isinstance(value, list):
        raise ConfigError(loc, f"expected a list of numbers, got {value!r}")
    return [_number(v, f"{loc}[{i}]") for i, v in enumerate(value)]


def _matrix(value, loc: str) -> list:
    if not isinstance(value, list) or not value:
        raise ConfigError(loc, "expected a non-empty list of rows")
    rows = [_vector(r, f"{loc}[{i}]") for i, r in enumerate(value)]
    if len({len(r) for r in rows}) != 1:
        raise ConfigError(loc, "rows have different lengths")
    return rows


def _matrix_list(value, loc: str) -> list:
    if not isinstance(value, list) or not value:
        raise ConfigError(loc, "expected a non-empty list of matrices")
    return [_matrix(m, f"{loc}[{i}]") for i, m in enumerate(value)]


def _rational(value, loc: str) -> str:
    if not isinstance(value, (str, int)) or isinstance(value, bool):
        raise ConfigError(loc, f"expected an exact rational string such as \"7/2\", got {value!r}")
    try:
        frac = to_fraction(value)
    except InputError as exc:
        raise ConfigError(loc, str(exc)) from None
    return str(frac)


def _section(data, cls, loc: str, parsers: dict):
    """Build ``cls`` from ``data`` using one parser per field; unknown keys are errors."""
    if not isinstance(data, dict):
        raise ConfigError(loc, f"expected an object, got {type(data).__name__}")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{loc}.{unknown[0]}" if loc else unknown[0], "unknown key")
    kwargs = {}
    for key, value in data.items():
        kwargs[key] = parsers[key](value, f"{loc}.{key}" if loc else key)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(loc, str(exc)) from None


def _rationals(value, loc: str) -> list:
    if not isinstance(value, list):
        raise ConfigError(loc, "expected a list of rational strings")
    return [_rational(x, f"{loc}[{i}]") for i, x in enumerate(value)]


@dataclass
class HessianSection:
    vertices: list | None = None
    nominal: list | None = None
    delta: float | None = None
    definiteness: str = "positive"

    def build(self) -> PolytopicHessian:
        if self.vertices is not None:
            return PolytopicHessian(tuple(np.array(v) for v in self.vertices), self.definiteness)
        return PolytopicHessian.scaled(np.array(self.nominal), self.delta, self.definiteness)


def _parse_hessian(data, loc):
    sec = _section(data, HessianSection, loc, {
        "vertices": _optional(_matrix_list),
        "nominal": _optional(_matrix),
        "delta": _optional_number,
        "definiteness": _choice("positive", "negative"),
    })
    if (sec.vertices is None) == (sec.nominal is None):
        raise ConfigError(loc, "give either 'vertices' or 'nominal' with 'delta'")
    if sec.nominal is not None and sec.delta is None:
        raise ConfigError(f"{loc}.delta", "required with 'nominal'")
    return sec


def _choice(*options):
    def parse(value, loc):
        if value not in options:
            raise ConfigError(loc, f"expected one of {list(options)}, got {value!r}")
        return value
    return parse


@dataclass
class PlantSection:
    optimum_value: float
    optimizer: list
    hessian: HessianSection
    sat_limits: list

    def build(self) -> PlantSpec:
        return PlantSpec(self.optimum_value, np.array(self.optimizer), self.hessian.build(), np.array(self.sat_limits))


@dataclass
class DitherSection:
    amplitudes: list
    multipliers: list
    base_frequency: float = 1.0

    def build(self) -> DitherSpec:
        return DitherSpec(np.array(self.amplitudes), tuple(Fraction(m) for m in self.multipliers), self.base_frequency)


@dataclass
class SynthesisSection:
    eta: float = 1.0
    epsilon: float = 0.5
    margin_tol: float | None = None
    lmi_31_block: str = "standard"


@dataclass
class SimulationSection:
    theta_hat0: list
    t_end: float
    step: float | None = None
    alpha: list | None = None
    washout: float | None = None
    gain: list | None = None


@dataclass
class SweepSection:
    omega_multipliers: list = field(default_factory=lambda: [1.0, 2.0, 4.0, 8.0])
    t_end: float | None = None
    reference: str = "averaged"


@dataclass
class ComparisonSection:
    diagonal_gain: float = -0.02


@dataclass
class OutputsSection:
    directory: str = "out"
    formats: list = field(default_factory=lambda: ["csv", "json", "svg"])


def _formats(value, loc):
    if not isinstance(value, list):
        raise ConfigError(loc, "expected a list")
    return [_choice("csv", "json", "svg")(v, f"{loc}[{i}]") for i, v in enumerate(value)]


def _string(value, loc):
    if not isinstance(value, str):
        raise ConfigError(loc, f"expected a string, got {value!r}")
    return value


@dataclass
class ProjectConfig:
    plant: PlantSection
    dither: DitherSection
    simulation: SimulationSection
    synthesis: SynthesisSection = field(default_factory=SynthesisSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    comparison: ComparisonSection = field(default_factory=ComparisonSection)
    outputs: OutputsSection = field(default_factory=OutputsSection)

    @classmethod
    def from_dict(cls, data: dict) -> "ProjectConfig":
        cfg = _section(data, cls, "", {
            "plant": lambda v, l: _section(v, PlantSection, l, {
                "optimum_value": _number, "optimizer": _vector,
                "hessian": _parse_hessian, "sat_limits": _vector,
            }),
            "dither": lambda v, l: _section(v, DitherSection, l, {
                "amplitudes": _vector,
                "multipliers": _rationals,
                "base_frequency": _number,
            }),
            "synthesis": lambda v, l: _section(v, SynthesisSection, l, {
                "eta": _number, "epsilon": _number, "margin_tol": _optional_number,
                "lmi_31_block": _choice(*BLOCK_31_VARIANTS),
            }),
            "simulation": lambda v, l: _section(v, SimulationSection, l, {
                "theta_hat0": _vector, "t_end": _number, "step": _optional_number,
                "alpha": _optional(_vector),
                "washout": _optional_number,
                "gain": _optional(_matrix),
            }),
            "sweep": lambda v, l: _section(v, SweepSection, l, {
                "omega_multipliers": _vector, "t_end": _optional_number,
                "reference": _choice("averaged", "exact"),
            }),
            "comparison": lambda v, l: _section(v, ComparisonSection, l, {"diagonal_gain": _number}),
            "outputs": lambda v, l: _section(v, OutputsSection, l, {"directory": _string, "formats": _formats}),
        })
        cfg.validate()
        return cfg

    def validate(self) -> None:
        """Build the domain objects once so semantic errors surface at load time."""
        for loc, build in (("plant", self.plant.build), ("dither", self.dither.build)):
            try:
                build()
            except InputError as exc:
                raise ConfigError(loc, str(exc)) from None
        n = self.plant.hessian.build().dim
        if self.dither.build().dim != n:
            raise ConfigError("dither.amplitudes", f"expected {n} entries")
        if len(self.simulation.theta_hat0) != n:
            raise ConfigError("simulation.theta_hat0", f"expected {n} entries")

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "ProjectConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None
        except OSError as exc:
            raise ConfigError(str(path), exc.strerror or str(exc)) from None
        return cls.from_dict(data)

    # convenience builders

    def plant_spec(self) -> PlantSpec:
        return self.plant.build()

    def dither_spec(self) -> DitherSpec:
        return self.dither.build()

    def alpha(self):
        a = self.simulation.alpha
        if a is None:
            n = self.plant.hessian.build().n_vertices
            return np.full(n, 1.0 / n)
        return np.array(a)


def bundled_config(name: str) -> Path:
    """Path of a configuration shipped with the package (``benchmark_2d``, ``diagonal_gain``)."""
    path = Path(__file__).parent / "configs" / f"{name}.json"
    if not path.exists():
        raise InputError(f"no bundled config named {name!r}")
    return path
