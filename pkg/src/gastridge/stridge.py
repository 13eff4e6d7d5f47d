"""Sequentially thresholded ridge regression and the sparse error model.

The fit alternates ridge solves with hard thresholding: coefficients whose
magnitude falls below ``lambda2`` are zeroed, the library is restricted to the
survivors and the ridge problem is solved again. A zeroed column never
re-enters. The learned model predicts the next voltage error from the current
signals, either teacher-forced (measured error as regressor) or free-running
(its own prediction fed back).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as la

from .errors import DivergenceError, FeatureEvaluationError
from .library import FeatureLibrary, RegressionData, SelectedLibrary, apply_family

__all__ = [
    "ridge_solve",
    "RidgeProblem",
    "StridgeResult",
    "stridge_fit",
    "SparseErrorModel",
    "fit_error_model",
    "predict_one_step",
    "simulate_recursive",
    "stridge_fit_gram",
    "RolloutPlan",
]

DIVERGENCE_LIMIT = 10.0


def ridge_solve(theta, y, lambda1: float) -> np.ndarray:
    """Solve (Theta^T Theta + lambda1 I) xi = Theta^T y.

    For ``lambda1 > 0`` a Cholesky factorization is used. With ``lambda1 == 0``,
    or if the regularized Gram matrix is numerically indefinite, the
    minimum-norm least-squares solution is returned instead of raising.
    """
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    if lambda1 < 0:
        raise ValueError("lambda1 must be >= 0")
    m = theta.shape[1]
    if lambda1 > 0:
        gram = theta.T @ theta
        gram[np.diag_indices(m)] += lambda1
        try:
            return la.cho_solve(la.cho_factor(gram), theta.T @ y)
        except la.LinAlgError:
            aug = np.vstack([theta, np.sqrt(lambda1) * np.eye(m)])
            return np.linalg.lstsq(aug, np.concatenate([y, np.zeros(m)]), rcond=None)[0]
    return np.linalg.lstsq(theta, y, rcond=None)[0]


def _ridge_from_gram(gram, rhs, lambda1):
    m = gram.shape[0]
    A = gram + lambda1 * np.eye(m)
    if lambda1 > 0:
        try:
            return la.cho_solve(la.cho_factor(A), rhs)
        except la.LinAlgError:
            pass
    return np.linalg.lstsq(A, rhs, rcond=None)[0]


@dataclass
class StridgeResult:
    xi: np.ndarray
    supports: list[np.ndarray]
    iterations: int

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.xi)

    @property
    def active_count(self) -> int:
        return int(np.count_nonzero(self.xi))

    @property
    def zero_model(self) -> bool:
        return self.active_count == 0


def _threshold_loop(solve: Callable[[np.ndarray], np.ndarray], m: int, lambda2: float, max_iters: int) -> StridgeResult:
    big = np.arange(m)
    xi = np.zeros(m)
    xi[big] = solve(big)
    supports = [big]
    it = 0
    for it in range(1, max_iters + 1):
        keep = np.abs(xi[big]) >= lambda2
        new_big = big[keep]
        xi[big[~keep]] = 0.0
        if new_big.size == big.size:
            break
        big = new_big
        supports.append(big)
        if big.size == 0:
            break
        xi[big] = solve(big)
    return StridgeResult(xi, supports, it)


@dataclass
class RidgeProblem:
    theta: np.ndarray
    target: np.ndarray
    lambda1: float = 0.0
    lambda2: float = 0.0
    max_iters: int = 10

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.target = np.asarray(self.target, dtype=float)
        n, m = self.theta.shape
        if self.target.shape != (n,):
            raise ValueError("target length must match theta rows")
        if not (np.all(np.isfinite(self.theta)) and np.all(np.isfinite(self.target))):
            raise ValueError("ridge problem contains non-finite entries")
        if self.lambda1 < 0 or self.lambda2 < 0 or self.max_iters < 1:
            raise ValueError("lambda1, lambda2 must be >= 0 and max_iters >= 1")
        if n <= m:
            warnings.warn(f"underdetermined ridge problem ({n} rows, {m} columns)", stacklevel=3)


def stridge_fit(problem: RidgeProblem) -> StridgeResult:
    """Sequential thresholding on an explicit design matrix."""
    theta, y = problem.theta, problem.target

    def solve(idx):
        return ridge_solve(theta[:, idx], y, problem.lambda1)

    return _threshold_loop(solve, theta.shape[1], problem.lambda2, problem.max_iters)


def stridge_fit_gram(gram, rhs, lambda1: float, lambda2: float, max_iters: int = 10) -> StridgeResult:
    """Same iteration from precomputed Theta^T Theta and Theta^T y (used by the GA)."""

    def solve(idx):
        return _ridge_from_gram(gram[np.ix_(idx, idx)], rhs[idx], lambda1)

    return _threshold_loop(solve, gram.shape[0], lambda2, max_iters)


# -- the learned error model -------------------------------------------------


@dataclass(eq=False)
class SparseErrorModel:
    selected: SelectedLibrary
    xi: np.ndarray
    lambda1: float
    lambda2: float
    training_mse: float = float("nan")
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float)
        if self.xi.shape != (self.selected.m,):
            raise ValueError("xi length must equal the number of selected columns")

    @property
    def library(self) -> FeatureLibrary:
        return self.selected.parent

    @property
    def active_count(self) -> int:
        return int(np.count_nonzero(self.xi))

    @property
    def zero_model(self) -> bool:
        return self.active_count == 0

    @property
    def active_ids(self) -> np.ndarray:
        return self.selected.ids[self.xi != 0]

    @property
    def active_xi(self) -> np.ndarray:
        return self.xi[self.xi != 0]

    def equation(self, precision: int = 4) -> str:
        terms = [
            f"{c:+.{precision}g}*{d.name}"
            for c, d in zip(self.active_xi, (self.library.descriptors[i] for i in self.active_ids))
        ]
        return "e[k+1] = " + (" ".join(terms) if terms else "0")

    def predict_one_step(self, signals) -> np.ndarray:
        return predict_one_step(self, signals)

    def to_dict(self) -> dict:
        descs = self.selected.descriptors
        return {
            "format": "gastridge.sparse_error_model/1",
            "descriptors": [d.to_dict() for d in descs],
            "exponents": [list(d.exponents) for d in descs],
            "normalization": self.library.normalization.to_dict() if self.library.normalization else None,
            "xi": [float(v) for v in self.xi],
            "lambda1": float(self.lambda1),
            "lambda2": float(self.lambda2),
            "active_count": self.active_count,
            "training_mse": None if np.isnan(self.training_mse) else float(self.training_mse),
            "library": self.library.to_dict()["descriptors"],
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    @classmethod
    def from_dict(cls, d) -> "SparseErrorModel":
        lib = FeatureLibrary.from_dict({"descriptors": d["library"], "normalization": d["normalization"]})
        ids = [int(x["id"]) for x in d["descriptors"]]
        for x in d["descriptors"]:
            if lib.descriptors[int(x["id"])].to_dict() != {**x, "exponents": list(x["exponents"])}:
                raise ValueError(f"descriptor {x['id']} does not match the stored library")
        return cls(
            SelectedLibrary.from_ids(lib, ids),
            np.asarray(d["xi"], dtype=float),
            float(d["lambda1"]),
            float(d["lambda2"]),
            float("nan") if d.get("training_mse") is None else float(d["training_mse"]),
            dict(d.get("metadata") or {}),
        )

    @classmethod
    def from_json(cls, text: str) -> "SparseErrorModel":
        return cls.from_dict(json.loads(text))


def fit_error_model(
    selected: SelectedLibrary,
    data: RegressionData,
    lambda1: float,
    lambda2: float,
    max_iters: int = 10,
) -> SparseErrorModel:
    """STRidge on teacher-forced one-step pairs built from ``data``."""
    theta = selected.evaluate(data.X)
    result = stridge_fit(RidgeProblem(theta, data.y, lambda1, lambda2, max_iters))
    resid = data.y - theta @ result.xi
    return SparseErrorModel(selected, result.xi, lambda1, lambda2, float(np.mean(resid**2)))


def predict_one_step(model: SparseErrorModel, signals) -> np.ndarray:
    """e_r[k+1] predicted from raw signals at k; accepts one row or an (n, 4) array."""
    signals = np.asarray(signals, dtype=float)
    single = signals.ndim == 1
    pred = model.selected.evaluate(np.atleast_2d(signals)) @ model.xi
    return float(pred[0]) if single else pred


class RolloutPlan:
    """Precomputed pieces for feeding a model's own prediction back.

    Columns that do not involve e_r are evaluated once over the whole trace.
    For each e_r-dependent descriptor the product of its other signal powers
    is stored, so a step only evaluates ``family(z_e**a * rest[k])`` through
    the same :func:`apply_family` used for the design matrix.
    """

    def __init__(self, library: FeatureLibrary, current, c_sp, c_sn, ids=None):
        norm = library.normalization
        current = np.asarray(current, dtype=float)
        n = current.size
        raw = np.column_stack([np.zeros(n), current, c_sp, c_sn])
        z = norm.apply(raw)
        ids = range(len(library)) if ids is None else ids
        self.library = library
        self.n = n
        self.static: dict[int, np.ndarray] = {}
        self.rest: dict[int, np.ndarray] = {}
        static_ids = [i for i in ids if not library.descriptors[i].uses_error]
        if static_ids:
            cols = library.evaluate(raw, static_ids)
            self.static = {i: cols[:, j] for j, i in enumerate(static_ids)}
        for i in ids:
            d = library.descriptors[i]
            if not d.uses_error:
                continue
            rest = np.ones(n)
            for s, a in enumerate(d.exponents[1:], start=1):
                if a:
                    rest = rest * z[:, s] ** a
            self.rest[i] = rest
        self.e_mean = norm.mean[0]
        self.e_std = norm.std[0]

    def run(self, ids, xi, e0: float = 0.0, limit: float = DIVERGENCE_LIMIT) -> np.ndarray:
        base = np.zeros(self.n)
        terms = []
        for i, c in zip(ids, xi):
            if c == 0:
                continue
            if i in self.static:
                base += c * self.static[i]
            else:
                d = self.library.descriptors[i]
                terms.append((d.family, d.exponents[0], self.rest[i], float(c), d.id))
        out = np.empty(self.n)
        out[0] = e = float(e0)
        for k in range(self.n - 1):
            ze = (e - self.e_mean) / self.e_std
            e = float(base[k])
            for family, power, rest, coef, did in terms:
                v = apply_family(family, ze**power * rest[k])
                if not np.isfinite(v):
                    raise FeatureEvaluationError(did, k)
                e += coef * v
            if not abs(e) <= limit:
                raise DivergenceError(k + 1, e)
            out[k + 1] = e
        return out


def simulate_recursive(model: SparseErrorModel, trace, e_r0: float = 0.0) -> np.ndarray:
    """Free-running rollout over a trace with ``current``, ``c_sp`` and ``c_sn``.

    ``e[0] = e_r0`` and ``e[k+1] = Theta(e[k], I[k], c_sp[k], c_sn[k]) xi``.
    Raises :class:`DivergenceError` once ``|e| > 10 V``.
    """
    ids = model.active_ids
    plan = RolloutPlan(model.library, trace.current, trace.c_sp, trace.c_sn, ids)
    return plan.run(ids, model.active_xi, e_r0)
