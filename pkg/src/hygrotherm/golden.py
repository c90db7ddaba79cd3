"""Comparison of the material laws against the committed golden fixtures.

The fixtures (``data/golden/*.csv``, columns ``theta_K,P_Pa,value``) are
produced by ``tools/make_goldens.py``, an independent arbitrary-precision
implementation of the same laws.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from . import materials as mt

GOLDEN_TOLERANCE = 1e-9

LAWS: dict[str, Callable[[np.ndarray, np.ndarray], np.ndarray]] = {
    "thermal_conductivity": lambda t, p: mt.thermal_conductivity(t),
    "specific_heat_solid": lambda t, p: mt.specific_heat_solid(t),
    "dehydrated_water": lambda t, p: mt.dehydrated_water(t)[0],
    "dehydrated_water_slope": lambda t, p: mt.dehydrated_water(t)[1],
    "evaporation_enthalpy": lambda t, p: mt.evaporation_enthalpy(t),
    "saturation_pressure": lambda t, p: mt.saturation_pressure(t),
    "saturation_pressure_slope": lambda t, p: mt.saturation_pressure(t, derivative=True)[1],
    "liquid_density": lambda t, p: mt.liquid_density(t),
    "tensile_strength": lambda t, p: mt.tensile_strength(t),
    "permeability": lambda t, p: mt.permeability(t, p),
    "sorption_isotherm": lambda t, p: mt.sorption_isotherm(t, p)[0],
    "sorption_isotherm_dtheta": lambda t, p: mt.sorption_isotherm(t, p)[1],
    "sorption_isotherm_dP": lambda t, p: mt.sorption_isotherm(t, p)[2],
}


@dataclass(frozen=True)
class GoldenComparison:
    law: str
    points: int
    max_rel_error: float

    @property
    def ok(self) -> bool:
        return self.max_rel_error <= GOLDEN_TOLERANCE

    def line(self) -> str:
        status = "ok" if self.ok else "FAIL"
        return f"{self.law}\t{self.points}\t{self.max_rel_error:.3e}\t{status}"


def golden_directory() -> Path:
    return Path(str(resources.files("hygrotherm") / "data" / "golden"))


def load_fixture(law: str, directory: Path | None = None) -> np.ndarray:
    """Rows of ``(theta_K, P_Pa, value)`` of one law's fixture."""
    path = (directory or golden_directory()) / f"{law}.csv"
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def relative_error(actual: np.ndarray, expected: np.ndarray) -> np.ndarray:
    """|actual - expected| / |expected|, with exact agreement at zero counting as zero."""
    diff = np.abs(actual - expected)
    scale = np.abs(expected)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(diff == 0.0, 0.0, diff / scale)


def compare_law(law: str, directory: Path | None = None) -> GoldenComparison:
    table = load_fixture(law, directory)
    actual = LAWS[law](table[:, 0], table[:, 1])
    err = relative_error(actual, table[:, 2])
    return GoldenComparison(law, len(table), float(err.max()))


def compare_all(directory: Path | None = None) -> list[GoldenComparison]:
    return [compare_law(law, directory) for law in LAWS]
