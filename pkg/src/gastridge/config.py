"""Run configuration read from a TOML file.

Sections (all optional)::

    seed = 7
    dt = 1.0

    [cell]            # either a full parameter table or
    file = "cell.toml"  # a path to one; remaining keys override scalars

    [surrogate]
    diffusion = 1.05      # multipliers for D_i, k_i and kappa
    reaction_rate = 1.05
    conductivity = 1.05
    noise_std = 0.0
    e_r0 = 0.0
    [[surrogate.planted]]
    family = "pol"
    exponents = [1, 0, 0, 0]
    coefficient = 0.04
    [surrogate.normalization]   # required with planted terms
    mean = [0, 0, 0, 0]
    std = [1, 1, 1, 1]

    [library]
    preset = "default"    # or max_degree / families / cross_families / cross_degree

    [ga]                  # any GaConfig field

    [paths]
    cycles_dir = "cycles"
    output_dir = "out"

Relative paths are resolved against the configuration file's directory.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .ga import GaConfig
from .library import BasisDescriptor, LibraryConfig, Normalization
from .params import (
    CellParameters,
    cell_parameters_from_dict,
    cell_parameters_to_dict,
    default_cell_parameters,
    load_cell_parameters,
    load_toml,
)
from .reference import SurrogateSpec, perturb_parameters

__all__ = ["RunConfig", "load_run_config"]

_TOP = {"seed", "dt", "cell", "surrogate", "library", "ga", "paths"}
_SURROGATE = {"diffusion", "reaction_rate", "conductivity", "noise_std", "e_r0", "planted", "normalization", "seed"}


@dataclass
class RunConfig:
    cell: CellParameters = field(default_factory=default_cell_parameters)
    surrogate: dict[str, Any] = field(default_factory=dict)
    library: LibraryConfig = field(default_factory=LibraryConfig)
    ga: GaConfig = field(default_factory=GaConfig)
    cycles_dir: Path | None = None
    output_dir: Path = Path(".")
    seed: int | None = None
    dt: float = 1.0

    def surrogate_spec(self, seed: int | None = None) -> SurrogateSpec:
        s = self.surrogate
        perturbed = perturb_parameters(
            self.cell, s.get("diffusion", 1.0), s.get("reaction_rate", 1.0), s.get("conductivity", 1.0)
        )
        planted = []
        for j, t in enumerate(s.get("planted", [])):
            try:
                d = BasisDescriptor(j, str(t["family"]), tuple(int(a) for a in t["exponents"]))
                planted.append((d, float(t["coefficient"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"[[surrogate.planted]] entry {j}: {exc}") from exc
        norm = s.get("normalization")
        if planted and norm is None:
            raise ConfigError("[surrogate] planted terms need a [surrogate.normalization] table")
        return SurrogateSpec(
            perturbed,
            planted,
            None if norm is None else Normalization.from_dict(norm),
            float(s.get("noise_std", 0.0)),
            s.get("seed", seed if seed is not None else self.seed),
            float(s.get("e_r0", 0.0)),
        )


def _library_config(d: dict) -> LibraryConfig:
    d = dict(d)
    preset = d.pop("preset", None)
    base = LibraryConfig.preset(preset) if preset else LibraryConfig()
    names = {f.name for f in dataclasses.fields(LibraryConfig)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"[library] unknown keys: {', '.join(sorted(unknown))}")
    for k in ("families", "cross_families"):
        if k in d:
            d[k] = tuple(d[k])
    return dataclasses.replace(base, **d)


def _cell(d: dict, root: Path) -> CellParameters:
    d = dict(d)
    path = d.pop("file", None)
    if path is None and not d:
        return default_cell_parameters()
    if path is None:
        return cell_parameters_from_dict(d)
    path = root / path
    if not path.is_file():
        raise ConfigError(f"[cell] file {path} does not exist")
    if not d:
        return load_cell_parameters(path)
    merged = cell_parameters_to_dict(load_cell_parameters(path))
    for k, v in d.items():
        if isinstance(v, dict) and isinstance(merged.get(k), dict):
            merged[k] = {**merged[k], **v}
        else:
            merged[k] = v
    return cell_parameters_from_dict(merged)


def load_run_config(path=None) -> RunConfig:
    """Parse a run configuration; ``None`` gives all defaults."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    data = load_toml(path)
    root = path.parent
    unknown = set(data) - _TOP
    if unknown:
        raise ConfigError(f"{path}: unknown sections or keys: {', '.join(sorted(unknown))}")
    surrogate = dict(data.get("surrogate", {}))
    bad = set(surrogate) - _SURROGATE
    if bad:
        raise ConfigError(f"[surrogate] unknown keys: {', '.join(sorted(bad))}")
    paths = data.get("paths", {})
    cycles_dir = root / paths["cycles_dir"] if "cycles_dir" in paths else None
    if cycles_dir is not None and not cycles_dir.is_dir():
        raise ConfigError(f"[paths] cycles_dir {cycles_dir} does not exist")
    seed = data.get("seed")
    ga = dict(data.get("ga", {}))
    if seed is not None and "seed" not in ga:
        ga["seed"] = int(seed)
    return RunConfig(
        cell=_cell(data.get("cell", {}), root),
        surrogate=surrogate,
        library=_library_config(data.get("library", {})),
        ga=GaConfig.from_dict(ga),
        cycles_dir=cycles_dir,
        output_dir=root / paths.get("output_dir", "."),
        seed=None if seed is None else int(seed),
        dt=float(data.get("dt", 1.0)),
    )
