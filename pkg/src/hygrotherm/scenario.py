"""Scenario configuration: geometry, boundary data, initial state and solver settings.

A scenario is read from a TOML document of flat dotted keys, for example::

    boundary.sides = ["FIRE", "FIRE", "FIRE", "FIRE"]   # bottom, right, top, left
    fire.curve = "iso"
    solver.dt = 5.0
    mesh.nx = 80
    mesh.ny = 80

Every key is optional except ``boundary.sides``, which must be given before
a mesh can be built; the defaults reproduce the standard fire benchmark of
a 0.2 m x 0.2 m concrete column.  Times are in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, Callable

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from . import materials as mt
from .assembly import BoundaryConditions
from .mesh import BoundaryTag, Mesh, build_structured_mesh
from .solver import SolverConfig


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the offending key."""


def iso_fire_curve(t: float, ambient: float = 298.15) -> float:
    """Standard ISO fire temperature [K] at time ``t`` [s]."""
    if t < 0:
        raise ValueError(f"fire curve time must be non-negative, got {t!r}")
    return 345.0 * math.log10(8.0 * t / 60.0 + 1.0) + ambient


FIRE_CURVES = ("iso", "constant")


@dataclass(frozen=True)
class Scenario:
    """Complete description of one simulation.

    ``side_tags`` lists the tags of the bottom, right, top and left sides;
    it is ``None`` until set explicitly.  ``fire_ambient`` is the offset of
    the ISO curve and ``fire_temperature`` the value of the constant curve.
    ``theta_ambient`` is the surrounding temperature seen by AMBIENT sides.
    """

    Lx: float = 0.2
    Ly: float = 0.2
    nx: int = 80
    ny: int = 80
    side_tags: tuple[BoundaryTag, ...] | None = None
    fire_curve: str = "iso"
    fire_ambient: float = 298.15
    fire_temperature: float = 298.15
    theta_ambient: float = 298.15
    theta_0: float = 298.15
    P_0: float = 2754.2
    alpha_c: float = 25.0
    beta_c: float = 0.019
    emissivity: float = 0.7
    sigma: float = 5.67e-8
    P_inf: float = 2754.2
    material: mt.MaterialConstants = field(default_factory=mt.MaterialConstants)
    solver: SolverConfig = field(default_factory=SolverConfig)
    snapshot_every: float = 600.0

    def fire_temperature_at(self, t: float) -> float:
        if self.fire_curve == "iso":
            return iso_fire_curve(t, self.fire_ambient)
        return self.fire_temperature

    def boundary_conditions(self) -> BoundaryConditions:
        theta_amb, p_inf = self.theta_ambient, self.P_inf
        return BoundaryConditions(
            theta_fire=self.fire_temperature_at,
            theta_ambient=lambda t: theta_amb,
            P_inf=lambda t: p_inf,
            alpha_c=self.alpha_c,
            beta_c=self.beta_c,
            emissivity=self.emissivity,
            sigma=self.sigma,
        )

    def build_mesh(self) -> Mesh:
        if self.side_tags is None:
            raise ConfigError("boundary.sides: the fire-exposed and ambient sides must be given explicitly")
        return build_structured_mesh(self.Lx, self.Ly, self.nx, self.ny, self.side_tags)


# -- schema --------------------------------------------------------------

def _positive(x):
    return x > 0


def _non_negative(x):
    return x >= 0


@dataclass(frozen=True)
class _Key:
    target: str             # "attr" on Scenario, "material.attr" or "solver.attr"
    kind: type
    check: Callable[[Any], bool] | None = None
    bound: str = ""


_SCHEMA: dict[str, _Key] = {
    "geometry.Lx": _Key("Lx", float, _positive, "> 0"),
    "geometry.Ly": _Key("Ly", float, _positive, "> 0"),
    "mesh.nx": _Key("nx", int, lambda n: n >= 1, ">= 1"),
    "mesh.ny": _Key("ny", int, lambda n: n >= 1, ">= 1"),
    "boundary.sides": _Key("side_tags", list),
    "boundary.alpha_c": _Key("alpha_c", float, _non_negative, ">= 0"),
    "boundary.beta_c": _Key("beta_c", float, _non_negative, ">= 0"),
    "boundary.emissivity": _Key("emissivity", float, lambda e: 0 <= e <= 1, "in [0, 1]"),
    "boundary.sigma": _Key("sigma", float, _positive, "> 0"),
    "boundary.P_inf": _Key("P_inf", float, _non_negative, ">= 0"),
    "boundary.theta_ambient": _Key("theta_ambient", float, _positive, "> 0"),
    "fire.curve": _Key("fire_curve", str, lambda c: c in FIRE_CURVES, f"one of {FIRE_CURVES}"),
    "fire.ambient": _Key("fire_ambient", float, _positive, "> 0"),
    "fire.temperature": _Key("fire_temperature", float, _positive, "> 0"),
    "initial.theta_0": _Key("theta_0", float, _positive, "> 0"),
    "initial.P_0": _Key("P_0", float, _non_negative, ">= 0"),
    "output.snapshot_every": _Key("snapshot_every", float, _positive, "> 0"),
    "solver.dt": _Key("solver.dt", float, _positive, "> 0"),
    "solver.t_end": _Key("solver.t_end", float, _non_negative, ">= 0"),
    "solver.newton_tol": _Key("solver.newton_tol", float, _positive, "> 0"),
    "solver.newton_max_iter": _Key("solver.newton_max_iter", int, lambda n: n >= 1, ">= 1"),
    "solver.relaxation": _Key("solver.relaxation", float, lambda r: 0 < r <= 1, "in (0, 1]"),
    "solver.max_backtracks": _Key("solver.max_backtracks", int, _non_negative, ">= 0"),
    "solver.retry_halving": _Key("solver.retry_halving", int, _non_negative, ">= 0"),
}
for _f in fields(mt.MaterialConstants):
    _bound = "in (0, 1)" if _f.name == "porosity" else "> 0"
    _check = (lambda x: 0 < x < 1) if _f.name == "porosity" else _positive
    _SCHEMA[f"material.{_f.name}"] = _Key(f"material.{_f.name}", float, _check, _bound)


def _flatten(table: dict, prefix: str = "") -> dict[str, Any]:
    flat = {}
    for key, value in table.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, path + "."))
        else:
            flat[path] = value
    return flat


def _coerce(path: str, spec: _Key, value):
    if spec.kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{path}: must be finite, got {value!r}")
    elif spec.kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
    elif spec.kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
    if spec.check is not None and not spec.check(value):
        raise ConfigError(f"{path}: value {value!r} out of range (must be {spec.bound})")
    return value


def _side_tags(path: str, value) -> tuple[BoundaryTag, ...]:
    if not isinstance(value, list) or len(value) != 4:
        raise ConfigError(f"{path}: expected a list of 4 tags (bottom, right, top, left), got {value!r}")
    try:
        return tuple(BoundaryTag.parse(v) for v in value)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def scenario_from_mapping(values: dict, base: Scenario | None = None) -> Scenario:
    """Build a validated scenario from a (possibly nested) key-value mapping."""
    flat = _flatten(values)
    unknown = sorted(set(flat) - set(_SCHEMA))
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown configuration key")
    if ("mesh.nx" in flat) != ("mesh.ny" in flat):
        missing = "mesh.ny" if "mesh.nx" in flat else "mesh.nx"
        raise ConfigError(f"{missing}: mesh counts must be given together")
    top, material, solver = {}, {}, {}
    for path, value in flat.items():
        spec = _SCHEMA[path]
        value = _side_tags(path, value) if spec.kind is list else _coerce(path, spec, value)
        group, _, name = spec.target.rpartition(".")
        {"": top, "material": material, "solver": solver}[group][name] = value
    base = base or Scenario()
    try:
        mat = replace(base.material, **material)
        cfg = replace(base.solver, **solver)
    except ValueError as exc:
        raise ConfigError(f"invalid constants: {exc}") from None
    return replace(base, material=mat, solver=cfg, **top)


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a TOML scenario document."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    return scenario_from_mapping(data)


def _toml_value(value) -> str:
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot serialise {value!r}")


def serialize_scenario(scenario: Scenario) -> str:
    """Flat dotted-key TOML text that parses back to ``scenario``."""
    lines = []
    for path, spec in _SCHEMA.items():
        group, _, name = spec.target.rpartition(".")
        owner = {"": scenario, "material": scenario.material, "solver": scenario.solver}[group]
        value = getattr(owner, name)
        if value is None:
            continue
        if spec.kind is list:
            value = [BoundaryTag(v).name for v in value]
        elif spec.kind is float:
            value = float(value)
        lines.append(f"{path} = {_toml_value(value)}")
    return "\n".join(lines) + "\n"
