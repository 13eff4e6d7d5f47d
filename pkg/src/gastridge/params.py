"""Cell parameters for the low-fidelity electrochemical model.

Parameters live in frozen dataclasses so a perturbed copy (``dataclasses.replace``)
never aliases the nominal set. Files are TOML with one ``[cell]`` table, two
electrode sub-tables and two OCV sub-tables holding paired arrays.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ConfigError, ParameterError

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = [
    "OcvCurve",
    "ElectrodeParameters",
    "CellParameters",
    "default_cell_parameters",
    "load_cell_parameters",
    "cell_parameters_from_dict",
    "cell_parameters_to_dict",
]


@dataclass(frozen=True)
class OcvCurve:
    """Open-circuit potential as a monotone cubic over stoichiometry in [0, 1]."""

    stoichiometry: tuple[float, ...]
    voltage: tuple[float, ...]

    def __post_init__(self):
        x = np.asarray(self.stoichiometry, dtype=float)
        v = np.asarray(self.voltage, dtype=float)
        if x.ndim != 1 or x.shape != v.shape or x.size < 2:
            raise ParameterError("OCV table needs paired 1-D arrays of length >= 2")
        if not np.all(np.diff(x) > 0):
            raise ParameterError("OCV stoichiometry grid must be strictly increasing")
        if x[0] > 0.0 or x[-1] < 1.0:
            raise ParameterError("OCV table must cover stoichiometry [0, 1]")
        dv = np.diff(v)
        if not (np.all(dv <= 0) or np.all(dv >= 0)):
            raise ParameterError("OCV table must be monotone")
        object.__setattr__(self, "stoichiometry", tuple(float(a) for a in x))
        object.__setattr__(self, "voltage", tuple(float(a) for a in v))

    @cached_property
    def _interp(self) -> PchipInterpolator:
        return PchipInterpolator(self.stoichiometry, self.voltage, extrapolate=False)

    def __call__(self, theta):
        return self._interp(theta)


_ELECTRODE_KEYS = {
    "particle_radius": "particle_radius",
    "diffusion_coefficient": "diffusion_coefficient",
    "active_material_fraction": "active_material_fraction",
    "thickness": "thickness",
    "max_concentration": "max_concentration",
    "reaction_rate": "reaction_rate",
    "activation_energy": "activation_energy",
    "electrolyte_concentration": "electrolyte_concentration",
    "current_density_scaling": "current_density_scaling",
    "stoich_0": "stoich_0",
    "stoich_100": "stoich_100",
}


@dataclass(frozen=True)
class ElectrodeParameters:
    """Per-electrode constants.

    ``current_density_scaling`` is the signed factor J in the overpotential
    expression, folded as +-1/(a_s L A). It is negative for the positive
    electrode so that both overpotentials lower the voltage on discharge.
    ``stoich_0``/``stoich_100`` map state of charge to stoichiometry; when
    ``initial_concentration`` is omitted it is set from ``stoich_100``.
    """

    particle_radius: float
    diffusion_coefficient: float
    active_material_fraction: float
    thickness: float
    max_concentration: float
    reaction_rate: float
    activation_energy: float
    electrolyte_concentration: float
    current_density_scaling: float
    stoich_0: float
    stoich_100: float
    initial_concentration: float | None = None

    def __post_init__(self):
        positive = (
            "particle_radius",
            "diffusion_coefficient",
            "active_material_fraction",
            "thickness",
            "max_concentration",
            "reaction_rate",
            "activation_energy",
            "electrolyte_concentration",
        )
        for name in positive:
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be finite and > 0, got {value!r}")
        if not math.isfinite(self.current_density_scaling) or self.current_density_scaling == 0:
            raise ParameterError("current_density_scaling must be finite and non-zero")
        for name in ("stoich_0", "stoich_100"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ParameterError(f"{name} must lie in (0, 1)")
        if self.initial_concentration is None:
            object.__setattr__(self, "initial_concentration", self.stoich_100 * self.max_concentration)
        if not 0.0 < self.initial_concentration < self.max_concentration:
            raise ParameterError("initial_concentration must lie in (0, max_concentration)")

    def stoichiometry_at(self, soc: float) -> float:
        return self.stoich_0 + soc * (self.stoich_100 - self.stoich_0)

    @property
    def initial_stoichiometry(self) -> float:
        return self.initial_concentration / self.max_concentration


@dataclass(frozen=True)
class CellParameters:
    positive: ElectrodeParameters
    negative: ElectrodeParameters
    cell_thickness: float
    area: float
    surface_area: float
    contact_resistance: float
    electrolyte_diffusivity: float
    electrolyte_concentration: float
    transference_number: float
    beta: float
    gamma_pos: float
    gamma_neg: float
    conductivity: float
    temperature: float
    reference_temperature: float
    ocv_positive: OcvCurve
    ocv_negative: OcvCurve
    gas_constant: float = 8.314
    faraday_constant: float = 96485.0
    # kappa = sum_ij a[i][j] * (c_e0/1000)**i * (T - T_ref)**j when set
    conductivity_poly: tuple[tuple[float, ...], ...] | None = field(default=None)

    def __post_init__(self):
        positive = (
            "cell_thickness",
            "area",
            "surface_area",
            "contact_resistance",
            "electrolyte_diffusivity",
            "electrolyte_concentration",
            "beta",
            "gamma_pos",
            "gamma_neg",
            "conductivity",
            "temperature",
            "reference_temperature",
            "gas_constant",
            "faraday_constant",
        )
        for name in positive:
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be finite and > 0, got {value!r}")
        if not 0.0 < self.transference_number < 1.0:
            raise ParameterError("transference_number must lie in (0, 1)")
        if self.conductivity_poly is not None:
            poly = tuple(tuple(float(a) for a in row) for row in self.conductivity_poly)
            object.__setattr__(self, "conductivity_poly", poly)
            if not self.kappa > 0:
                raise ParameterError("conductivity polynomial must evaluate to > 0")

    @property
    def kappa(self) -> float:
        """Electrolyte conductivity in S/m (constant unless a polynomial is configured)."""
        if self.conductivity_poly is None:
            return self.conductivity
        x = self.electrolyte_concentration / 1000.0
        y = self.temperature - self.reference_temperature
        return float(
            sum(a * x**i * y**j for i, row in enumerate(self.conductivity_poly) for j, a in enumerate(row))
        )

    @property
    def capacity_ah(self) -> float:
        """Usable capacity of the negative electrode between 0% and 100% SOC."""
        e = self.negative
        moles = e.active_material_fraction * e.thickness * self.area * e.max_concentration
        return moles * abs(e.stoich_100 - e.stoich_0) * self.faraday_constant / 3600.0

    @property
    def soc(self) -> float:
        e = self.negative
        return (e.initial_stoichiometry - e.stoich_0) / (e.stoich_100 - e.stoich_0)

    def with_soc(self, soc: float) -> "CellParameters":
        """Copy with both initial concentrations set to the given state of charge."""
        if not 0.0 <= soc <= 1.0:
            raise ParameterError("soc must lie in [0, 1]")
        pos = dataclasses.replace(
            self.positive, initial_concentration=self.positive.stoichiometry_at(soc) * self.positive.max_concentration
        )
        neg = dataclasses.replace(
            self.negative, initial_concentration=self.negative.stoichiometry_at(soc) * self.negative.max_concentration
        )
        return dataclasses.replace(self, positive=pos, negative=neg)

    def equilibrium_voltage(self) -> float:
        return float(
            self.ocv_positive(self.positive.initial_stoichiometry) - self.ocv_negative(self.negative.initial_stoichiometry)
        )


# -- (de)serialization -------------------------------------------------------

_CELL_SCALARS = (
    "cell_thickness",
    "area",
    "surface_area",
    "contact_resistance",
    "electrolyte_diffusivity",
    "electrolyte_concentration",
    "transference_number",
    "beta",
    "gamma_pos",
    "gamma_neg",
    "conductivity",
    "temperature",
    "reference_temperature",
    "gas_constant",
    "faraday_constant",
)


def _electrode_from_dict(d: Mapping[str, Any], name: str) -> ElectrodeParameters:
    missing = [k for k in _ELECTRODE_KEYS if k not in d]
    if missing:
        raise ConfigError(f"[cell.{name}] missing keys: {', '.join(missing)}")
    unknown = set(d) - set(_ELECTRODE_KEYS) - {"initial_concentration"}
    if unknown:
        raise ConfigError(f"[cell.{name}] unknown keys: {', '.join(sorted(unknown))}")
    return ElectrodeParameters(**{k: float(v) for k, v in d.items()})


def _ocv_from_dict(d: Mapping[str, Any], name: str) -> OcvCurve:
    try:
        return OcvCurve(tuple(d["stoichiometry"]), tuple(d["voltage"]))
    except KeyError as exc:
        raise ConfigError(f"[cell.{name}] needs 'stoichiometry' and 'voltage' arrays") from exc


def cell_parameters_from_dict(d: Mapping[str, Any]) -> CellParameters:
    """Build parameters from the contents of a ``[cell]`` table."""
    d = dict(d)
    try:
        pos = _electrode_from_dict(d.pop("positive"), "positive")
        neg = _electrode_from_dict(d.pop("negative"), "negative")
        ocv_p = _ocv_from_dict(d.pop("ocv_positive"), "ocv_positive")
        ocv_n = _ocv_from_dict(d.pop("ocv_negative"), "ocv_negative")
    except KeyError as exc:
        raise ConfigError(f"[cell] missing sub-table {exc}") from exc
    soc = d.pop("initial_soc", None)
    poly = d.pop("conductivity_poly", None)
    unknown = set(d) - set(_CELL_SCALARS)
    if unknown:
        raise ConfigError(f"[cell] unknown keys: {', '.join(sorted(unknown))}")
    missing = [k for k in _CELL_SCALARS if k not in d and k not in ("gas_constant", "faraday_constant")]
    if missing:
        raise ConfigError(f"[cell] missing keys: {', '.join(missing)}")
    params = CellParameters(
        positive=pos,
        negative=neg,
        ocv_positive=ocv_p,
        ocv_negative=ocv_n,
        conductivity_poly=poly,
        **{k: float(v) for k, v in d.items()},
    )
    if soc is not None:
        params = params.with_soc(float(soc))
    return params


def cell_parameters_to_dict(p: CellParameters) -> dict[str, Any]:
    out: dict[str, Any] = {k: getattr(p, k) for k in _CELL_SCALARS}
    for name in ("positive", "negative"):
        e = getattr(p, name)
        out[name] = {k: getattr(e, k) for k in _ELECTRODE_KEYS} | {"initial_concentration": e.initial_concentration}
    for name in ("ocv_positive", "ocv_negative"):
        c = getattr(p, name)
        out[name] = {"stoichiometry": list(c.stoichiometry), "voltage": list(c.voltage)}
    if p.conductivity_poly is not None:
        out["conductivity_poly"] = [list(row) for row in p.conductivity_poly]
    return out


def load_toml(path) -> dict[str, Any]:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_cell_parameters(path) -> CellParameters:
    data = load_toml(path)
    if "cell" not in data:
        raise ConfigError(f"{path}: no [cell] table")
    return cell_parameters_from_dict(data["cell"])


def default_cell_parameters() -> CellParameters:
    """The shipped NMC/graphite parameter set at 100% SOC."""
    ref = resources.files("gastridge") / "data" / "default_cell.toml"
    with resources.as_file(ref) as path:
        return load_cell_parameters(Path(path))
