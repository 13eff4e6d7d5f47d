"""Candidate basis functions over the regression signals.

Every basis function is a *family* (polynomial, trigonometric, hyperbolic,
log, exp or square root) applied to a monomial of the four z-scored signals
``(e_r, I, c_sp, c_sn)``. A :class:`FeatureLibrary` fixes the ordered list of
descriptors plus the normalization statistics; a :class:`SelectedLibrary` is a
boolean mask over it, which is what the genetic search manipulates.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, FeatureEvaluationError, NormalizationError

__all__ = [
    "SIGNALS",
    "FAMILIES",
    "BasisDescriptor",
    "Normalization",
    "LibraryConfig",
    "FeatureLibrary",
    "SelectedLibrary",
    "ErrorSegment",
    "RegressionData",
    "apply_family",
    "build_candidate_library",
    "fit_normalization",
    "evaluate_features",
]

SIGNALS = ("e_r", "current", "c_sp", "c_sn")
_SHORT = ("e", "I", "c_sp", "c_sn")
FAMILIES = ("pol", "cos", "sin", "tan", "cosh", "sinh", "tanh", "ln", "exp", "sqrt")

DOMAIN_EPS = 1e-12
TAN_LIMIT = np.pi / 2 - 0.01


def _ln(x):
    return np.log(np.maximum(np.abs(x), DOMAIN_EPS))


def _sqrt(x):
    return np.sqrt(np.abs(x))


def _tan(x):
    return np.tan(np.clip(x, -TAN_LIMIT, TAN_LIMIT))


_FAMILY_FUNCS = {
    "pol": lambda x: x,
    "cos": np.cos,
    "sin": np.sin,
    "tan": _tan,
    "cosh": np.cosh,
    "sinh": np.sinh,
    "tanh": np.tanh,
    "ln": _ln,
    "exp": np.exp,
    "sqrt": _sqrt,
}


def apply_family(family: str, arg):
    """Evaluate one family on an argument (array or scalar), with domain guards.

    ln uses max(|x|, 1e-12), sqrt uses |x| and tan clips its argument to
    (-pi/2 + 0.01, pi/2 - 0.01). Inside the natural domains the guards are
    inactive and the values equal the unguarded functions exactly.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        return _FAMILY_FUNCS[family](arg)


@dataclass(frozen=True)
class BasisDescriptor:
    id: int
    family: str
    exponents: tuple[int, int, int, int]

    def __post_init__(self):
        if self.family not in _FAMILY_FUNCS:
            raise ConfigError(f"unknown family {self.family!r}")
        exps = tuple(int(a) for a in self.exponents)
        if len(exps) != len(SIGNALS) or min(exps) < 0:
            raise ConfigError(f"exponents must be {len(SIGNALS)} non-negative integers")
        if self.family != "pol" and sum(exps) == 0:
            raise ConfigError("only the polynomial family may have a constant argument")
        object.__setattr__(self, "exponents", exps)

    @property
    def degree(self) -> int:
        return sum(self.exponents)

    @property
    def is_constant(self) -> bool:
        return self.family == "pol" and self.degree == 0

    @property
    def uses_error(self) -> bool:
        return self.exponents[0] > 0

    @property
    def name(self) -> str:
        parts = []
        for s, a in zip(_SHORT, self.exponents):
            if a == 1:
                parts.append(s)
            elif a > 1:
                parts.append(f"{s}^{a}")
        mono = "*".join(parts) or "1"
        return mono if self.family == "pol" else f"{self.family}({mono})"

    def to_dict(self) -> dict:
        return {"id": self.id, "family": self.family, "exponents": list(self.exponents)}

    @classmethod
    def from_dict(cls, d) -> "BasisDescriptor":
        return cls(int(d["id"]), str(d["family"]), tuple(d["exponents"]))


@dataclass(frozen=True)
class Normalization:
    """Per-signal z-score statistics (population std)."""

    mean: tuple[float, ...]
    std: tuple[float, ...]

    def __post_init__(self):
        mean = tuple(float(a) for a in self.mean)
        std = tuple(float(a) for a in self.std)
        if len(mean) != len(SIGNALS) or len(std) != len(SIGNALS):
            raise NormalizationError(f"need {len(SIGNALS)} means and stds")
        for name, s in zip(SIGNALS, std):
            if not (np.isfinite(s) and s > 0):
                raise NormalizationError(f"std of {name} must be finite and > 0")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def apply(self, signals) -> np.ndarray:
        x = np.asarray(signals, dtype=float)
        return (x - np.asarray(self.mean)) / np.asarray(self.std)

    def to_dict(self) -> dict:
        return {"signals": list(SIGNALS), "mean": list(self.mean), "std": list(self.std)}

    @classmethod
    def from_dict(cls, d) -> "Normalization":
        return cls(tuple(d["mean"]), tuple(d["std"]))


def fit_normalization(signals) -> Normalization:
    """z-score statistics of an (n, 4) signal array; raises on constant columns."""
    x = np.asarray(signals, dtype=float)
    if x.ndim != 2 or x.shape[1] != len(SIGNALS):
        raise NormalizationError(f"signals must be an (n, {len(SIGNALS)}) array")
    if x.shape[0] < 2:
        raise NormalizationError("need at least 2 samples to normalize")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    for name, s, col in zip(SIGNALS, std, x.T):
        if not s > 0 or np.ptp(col) == 0:
            raise NormalizationError(f"signal {name!r} has zero variance")
    return Normalization(tuple(mean), tuple(std))


@dataclass(frozen=True)
class LibraryConfig:
    max_degree: int = 2
    families: tuple[str, ...] = FAMILIES
    # families additionally applied to every monomial of exactly cross_degree
    cross_families: tuple[str, ...] = ()
    cross_degree: int = 2

    @classmethod
    def preset(cls, name: str) -> "LibraryConfig":
        """``default``: 51 terms (quadratic monomials plus every family on each
        signal). ``extended``: 81 terms (cubic monomials, the single-signal
        families, and tanh of every quadratic monomial)."""
        if name == "default":
            return cls()
        if name == "extended":
            return cls(max_degree=3, cross_families=("tanh",), cross_degree=2)
        raise ConfigError(f"unknown library preset {name!r}")


def _monomials(degree: int) -> list[tuple[int, ...]]:
    out = []
    for combo in itertools.combinations_with_replacement(range(len(SIGNALS)), degree):
        exps = [0] * len(SIGNALS)
        for s in combo:
            exps[s] += 1
        out.append(tuple(exps))
    return out


class FeatureLibrary:
    """Ordered candidate descriptors plus (optional) normalization."""

    def __init__(self, descriptors: Sequence[BasisDescriptor], normalization: Normalization | None = None):
        descriptors = tuple(descriptors)
        ids = [d.id for d in descriptors]
        if ids != list(range(len(descriptors))):
            raise ConfigError("descriptor ids must be 0..n-1 in order")
        if sum(d.is_constant for d in descriptors) != 1:
            raise ConfigError("a library needs exactly one constant term")
        self.descriptors = descriptors
        self.normalization = normalization

    def __len__(self) -> int:
        return len(self.descriptors)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FeatureLibrary)
            and self.descriptors == other.descriptors
            and self.normalization == other.normalization
        )

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.descriptors]

    def with_normalization(self, normalization: Normalization) -> "FeatureLibrary":
        return FeatureLibrary(self.descriptors, normalization)

    def fitted(self, signals) -> "FeatureLibrary":
        return self.with_normalization(fit_normalization(signals))

    def evaluate(self, signals, ids: Iterable[int] | None = None) -> np.ndarray:
        """Theta matrix (n x m) for raw signals; all descriptors when ``ids`` is None."""
        if self.normalization is None:
            raise NormalizationError("library normalization has not been fitted")
        z = np.atleast_2d(self.normalization.apply(signals))
        descs = self.descriptors if ids is None else [self.descriptors[i] for i in ids]
        return evaluate_normalized(descs, z)

    def select(self, mask) -> "SelectedLibrary":
        return SelectedLibrary(self, mask)

    def to_dict(self) -> dict:
        return {
            "descriptors": [d.to_dict() for d in self.descriptors],
            "normalization": None if self.normalization is None else self.normalization.to_dict(),
        }

    @classmethod
    def from_dict(cls, d) -> "FeatureLibrary":
        norm = d.get("normalization")
        return cls(
            [BasisDescriptor.from_dict(x) for x in d["descriptors"]],
            None if norm is None else Normalization.from_dict(norm),
        )


def evaluate_normalized(descriptors: Sequence[BasisDescriptor], z: np.ndarray) -> np.ndarray:
    """Evaluate descriptors on already-normalized signals ``z`` (n x 4)."""
    n = z.shape[0]
    theta = np.empty((n, len(descriptors)))
    for j, d in enumerate(descriptors):
        arg = np.ones(n)
        for s, a in enumerate(d.exponents):
            if a:
                arg = arg * z[:, s] ** a
        col = apply_family(d.family, arg)
        bad = ~np.isfinite(col)
        if bad.any():
            raise FeatureEvaluationError(d.id, int(np.flatnonzero(bad)[0]))
        theta[:, j] = col
    return theta


def build_candidate_library(config: LibraryConfig | None = None) -> FeatureLibrary:
    """Constant, polynomial monomials up to ``max_degree``, then each non-polynomial
    family on every single signal, then ``cross_families`` on monomials of
    ``cross_degree``. The ordering is deterministic."""
    config = config or LibraryConfig()
    if config.max_degree < 1:
        raise ConfigError("max_degree must be >= 1")
    families = tuple(config.families)
    if not families:
        raise ConfigError("at least one family must be active")
    unknown = set(families) - set(FAMILIES)
    if unknown:
        raise ConfigError(f"unknown families: {', '.join(sorted(unknown))}")
    entries = [("pol", (0,) * len(SIGNALS))]
    if "pol" in families:
        for deg in range(1, config.max_degree + 1):
            entries += [("pol", m) for m in _monomials(deg)]
    for fam in FAMILIES[1:]:
        if fam in families:
            entries += [(fam, m) for m in _monomials(1)]
    for fam in config.cross_families:
        if fam == "pol" or fam not in FAMILIES:
            raise ConfigError(f"invalid cross family {fam!r}")
        entries += [(fam, m) for m in _monomials(config.cross_degree)]
    seen = set()
    descriptors = []
    for fam, exps in entries:
        if (fam, exps) in seen:
            continue
        seen.add((fam, exps))
        descriptors.append(BasisDescriptor(len(descriptors), fam, exps))
    return FeatureLibrary(descriptors)


class SelectedLibrary:
    """Boolean mask over a parent library; column j maps to ``ids[j]``."""

    def __init__(self, parent: FeatureLibrary, mask):
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (len(parent),):
            raise ConfigError(f"mask length {mask.size} does not match library size {len(parent)}")
        if not mask.any():
            raise ConfigError("a selected library needs at least one column")
        mask = mask.copy()
        mask.flags.writeable = False
        self.parent = parent
        self.mask = mask

    @classmethod
    def from_ids(cls, parent: FeatureLibrary, ids: Iterable[int]) -> "SelectedLibrary":
        mask = np.zeros(len(parent), dtype=bool)
        mask[list(ids)] = True
        return cls(parent, mask)

    @property
    def ids(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def m(self) -> int:
        return int(self.mask.sum())

    @property
    def descriptors(self) -> list[BasisDescriptor]:
        return [self.parent.descriptors[i] for i in self.ids]

    def evaluate(self, signals) -> np.ndarray:
        return self.parent.evaluate(signals, self.ids)


def evaluate_features(lib: SelectedLibrary, signals) -> np.ndarray:
    return lib.evaluate(signals)


# -- regression data ---------------------------------------------------------


@dataclass(eq=False)
class ErrorSegment:
    """One contiguous run of aligned regression signals."""

    e_r: np.ndarray
    current: np.ndarray
    c_sp: np.ndarray
    c_sn: np.ndarray
    name: str = "segment"

    def __post_init__(self):
        arrays = [np.asarray(a, dtype=float) for a in (self.e_r, self.current, self.c_sp, self.c_sn)]
        if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 1 or arrays[0].size < 2:
            raise ValueError("segment signals must be 1-D arrays of equal length >= 2")
        self.e_r, self.current, self.c_sp, self.c_sn = arrays

    def __len__(self) -> int:
        return self.e_r.size

    @property
    def signals(self) -> np.ndarray:
        return np.column_stack([self.e_r, self.current, self.c_sp, self.c_sn])

    @classmethod
    def from_trace(cls, e_r, trace) -> "ErrorSegment":
        return cls(e_r, trace.current, trace.c_sp, trace.c_sn, trace.name)


@dataclass(eq=False)
class RegressionData:
    """Teacher-forced one-step pairs: signals at k (rows of ``X``) predict e_r at k+1."""

    segments: list[ErrorSegment] = field(default_factory=list)

    def __post_init__(self):
        if not self.segments:
            raise ValueError("regression data needs at least one segment")
        self.X = np.vstack([s.signals[:-1] for s in self.segments])
        self.y = np.concatenate([s.e_r[1:] for s in self.segments])

    @classmethod
    def from_segments(cls, *segments: ErrorSegment) -> "RegressionData":
        return cls(list(segments))

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def all_signals(self) -> np.ndarray:
        return np.vstack([s.signals for s in self.segments])
