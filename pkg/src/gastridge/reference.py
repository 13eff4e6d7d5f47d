"""Reference ("high-fidelity") voltage traces and the voltage error signal.

A reference trace is either ingested from CSV or produced by a surrogate:
a perturbed copy of the low-fidelity model plus an optional planted sparse
error recursion plus Gaussian noise. The planted recursion is driven by the
*base* model's signals, so in the noiseless, unperturbed case the error
``v_ref - v_lfm`` follows it exactly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._io import read_csv_columns, write_csv
from .cycles import DriveCycle
from .errors import AlignmentError, DivergenceError, FeatureEvaluationError, GenerationError, ParseError
from .library import BasisDescriptor, ErrorSegment, FeatureLibrary, Normalization, SelectedLibrary
from .lfm import VoltageTrace, simulate_cycle
from .params import CellParameters
from .stridge import SparseErrorModel, simulate_recursive

__all__ = [
    "ReferenceTrace",
    "SurrogateSpec",
    "compute_error_series",
    "generate_surrogate_trace",
    "perturb_parameters",
    "load_reference_csv",
    "save_reference_csv",
    "save_error_csv",
    "load_error_csv",
]


@dataclass(eq=False)
class ReferenceTrace:
    t: np.ndarray
    current: np.ndarray
    v_ref: np.ndarray
    source_tag: str = "ingested"
    name: str = "cycle"

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.current = np.asarray(self.current, dtype=float)
        self.v_ref = np.asarray(self.v_ref, dtype=float)
        if not (self.t.shape == self.current.shape == self.v_ref.shape) or self.t.ndim != 1:
            raise ValueError("reference arrays must be 1-D and equally long")
        if self.source_tag not in ("ingested", "surrogate"):
            raise ValueError("source_tag must be 'ingested' or 'surrogate'")

    def __len__(self) -> int:
        return self.t.size


def compute_error_series(ref: ReferenceTrace, lfm: VoltageTrace) -> np.ndarray:
    """e_r[k] = v_ref[k] - v_lfm[k], after checking the two traces are aligned."""
    if len(ref) != len(lfm):
        raise AlignmentError(f"length mismatch: reference {len(ref)}, lfm {len(lfm)}", index=min(len(ref), len(lfm)))
    bad = np.flatnonzero(ref.t != lfm.t)
    if bad.size:
        k = int(bad[0])
        raise AlignmentError(f"timestamps differ at index {k}: {ref.t[k]!r} vs {lfm.t[k]!r}", index=k)
    return ref.v_ref - lfm.v_lfm


@dataclass
class SurrogateSpec:
    """Stand-in for a high-fidelity model.

    ``planted_terms`` pairs descriptors with coefficients; they are evaluated
    with ``normalization`` (required whenever terms are given).
    """

    perturbed_parameters: CellParameters
    planted_terms: Sequence[tuple[BasisDescriptor, float]] = ()
    normalization: Normalization | None = None
    noise_std: float = 0.0
    seed: int | None = None
    e_r0: float = 0.0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.noise_std >= 0:
            raise ValueError("noise_std must be >= 0")
        if self.planted_terms and self.normalization is None:
            raise ValueError("planted terms need a normalization")

    def planted_model(self) -> SparseErrorModel | None:
        if not self.planted_terms:
            return None
        coefs: dict[tuple, float] = {}
        for d, c in self.planted_terms:
            key = (d.family, d.exponents)
            coefs[key] = coefs.get(key, 0.0) + float(c)
        # throwaway library: the mandatory constant followed by the planted terms
        keys = [k for k in coefs if k != ("pol", (0, 0, 0, 0))]
        lib_descs = [BasisDescriptor(0, "pol", (0, 0, 0, 0))]
        lib_descs += [BasisDescriptor(j + 1, fam, exps) for j, (fam, exps) in enumerate(keys)]
        lib = FeatureLibrary(lib_descs, self.normalization)
        const = coefs.get(("pol", (0, 0, 0, 0)), 0.0)
        xi = np.array([const] + [coefs[k] for k in keys])
        sel = SelectedLibrary(lib, np.ones(len(lib_descs), dtype=bool))
        return SparseErrorModel(sel, xi, 0.0, 0.0)


def perturb_parameters(p: CellParameters, diffusion=1.0, reaction_rate=1.0, conductivity=1.0) -> CellParameters:
    """Scale both electrodes' D and k and the electrolyte conductivity."""
    def scale(e):
        return dataclasses.replace(
            e, diffusion_coefficient=e.diffusion_coefficient * diffusion, reaction_rate=e.reaction_rate * reaction_rate
        )

    return dataclasses.replace(
        p, positive=scale(p.positive), negative=scale(p.negative), conductivity=p.conductivity * conductivity
    )


def planted_error(spec: SurrogateSpec, base: VoltageTrace) -> np.ndarray:
    model = spec.planted_model()
    if model is None:
        return np.zeros(len(base))
    try:
        return simulate_recursive(model, base, spec.e_r0)
    except (DivergenceError, FeatureEvaluationError) as exc:
        raise GenerationError(f"planted error recursion failed: {exc}") from exc


def generate_surrogate_trace(
    spec: SurrogateSpec,
    cycle: DriveCycle,
    p_base: CellParameters,
    base_trace: VoltageTrace | None = None,
) -> ReferenceTrace:
    """v_ref = V_lfm(perturbed) + planted error (on base signals) + N(0, noise_std)."""
    base = simulate_cycle(p_base, cycle) if base_trace is None else base_trace
    if spec.perturbed_parameters == p_base:
        v = base.v_lfm.copy()
    else:
        v = simulate_cycle(spec.perturbed_parameters, cycle).v_lfm
    v = v + planted_error(spec, base)
    if spec.noise_std > 0:
        rng = np.random.default_rng(spec.seed)
        v = v + rng.normal(0.0, spec.noise_std, size=v.size)
    return ReferenceTrace(cycle.timestamps.copy(), cycle.current.copy(), v, "surrogate", cycle.name)


_REF_HEADER = ("t_s", "current_a", "v_ref_v")


def load_reference_csv(path, name: str | None = None) -> ReferenceTrace:
    cols = read_csv_columns(path, _REF_HEADER)
    t = cols["t_s"]
    if t.size < 2:
        raise ParseError(f"{path}: need at least 2 samples", line=len(t) + 1)
    steps = np.diff(t)
    bad = np.flatnonzero(np.abs(steps - steps[0]) > 1e-9)
    if bad.size:
        raise ParseError(f"{path}: non-uniform time step", line=int(bad[0]) + 3)
    return ReferenceTrace(t, cols["current_a"], cols["v_ref_v"], "ingested", name or Path(path).stem)


def save_reference_csv(ref: ReferenceTrace, path) -> None:
    write_csv(path, _REF_HEADER, zip(ref.t.tolist(), ref.current.tolist(), ref.v_ref.tolist()))


_ERROR_HEADER = ("t_s", "e_r_v", "current_a", "c_sp_molm3", "c_sn_molm3")


def save_error_csv(t, segment: ErrorSegment, path) -> None:
    cols = (np.asarray(t, dtype=float), segment.e_r, segment.current, segment.c_sp, segment.c_sn)
    write_csv(path, _ERROR_HEADER, zip(*(c.tolist() for c in cols)))


def load_error_csv(path, name: str | None = None) -> ErrorSegment:
    """Regression signals (error plus the base model's I, c_sp, c_sn) for one cycle."""
    c = read_csv_columns(path, _ERROR_HEADER)
    if c["t_s"].size < 2:
        raise ParseError(f"{path}: need at least 2 samples", line=c["t_s"].size + 1)
    return ErrorSegment(c["e_r_v"], c["current_a"], c["c_sp_molm3"], c["c_sn_molm3"], name or Path(path).stem)
