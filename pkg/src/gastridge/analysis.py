"""Accuracy metrics, hybrid-model evaluation and SVD ranking of model terms."""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._io import read_csv_rows, write_csv
from .errors import ParseError
from .library import ErrorSegment
from .lfm import VoltageTrace
from .reference import ReferenceTrace, compute_error_series
from .stridge import SparseErrorModel, predict_one_step, simulate_recursive

__all__ = [
    "mse",
    "rmse",
    "pearson",
    "rrr",
    "MetricsReport",
    "HybridEvaluation",
    "evaluate_hybrid",
    "RankingReport",
    "svd_rank",
    "svd_rank_matrix",
    "timing_report",
    "save_metrics_csv",
    "save_ranking_csv",
    "load_metrics_csv",
    "load_ranking_csv",
]


def mse(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.size == 0:
        raise ValueError("series must be non-empty and equally long")
    return float(np.mean((a - b) ** 2))


def rmse(a, b) -> float:
    return math.sqrt(mse(a, b))


def pearson(a, b) -> float:
    """Sample Pearson correlation; NaN when either series is constant."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("pearson needs two 1-D series of equal length >= 2")
    da = a - a.mean()
    db = b - b.mean()
    sa = math.sqrt(float(da @ da))
    sb = math.sqrt(float(db @ db))
    if sa == 0 or sb == 0:
        return float("nan")
    return float(np.clip((da @ db) / (sa * sb), -1.0, 1.0))


def rrr(rmse_lfm: float, rmse_hybrid: float) -> float:
    """Relative RMSE reduction in percent; NaN when ``rmse_lfm`` is zero."""
    if rmse_lfm < 0 or rmse_hybrid < 0:
        raise ValueError("RMSE values must be >= 0")
    if rmse_lfm == 0:
        return float("nan")
    return 100.0 * (rmse_lfm - rmse_hybrid) / rmse_lfm


@dataclass(frozen=True)
class MetricsReport:
    mse: float
    rmse: float
    pearson_rho: float
    rrr_percent: float
    cycle_name: str
    mode: str

    @property
    def rho_defined(self) -> bool:
        return not math.isnan(self.pearson_rho)


@dataclass(frozen=True)
class HybridEvaluation:
    """Voltage accuracy of the low-fidelity model and of the hybrid model.

    ``lfm.pearson_rho`` correlates ``v_lfm`` with ``v_ref``; ``hybrid.pearson_rho``
    correlates the measured error with the predicted one. ``hybrid.mse`` is
    also the mean squared residual of the error prediction.
    """

    lfm: MetricsReport
    hybrid: MetricsReport
    e_r: np.ndarray
    e_hat: np.ndarray
    v_hybrid: np.ndarray

    def __iter__(self):
        return iter((self.lfm, self.hybrid))

    @property
    def rrr_percent(self) -> float:
        return self.hybrid.rrr_percent


def evaluate_hybrid(
    model: SparseErrorModel,
    lfm_trace: VoltageTrace,
    ref_trace: ReferenceTrace,
    mode: str = "free_running",
    e_r0: float | None = 0.0,
) -> HybridEvaluation:
    """Compare ``v_lfm`` and ``v_lfm + e_hat`` against the reference.

    In ``free_running`` mode ``e_hat`` is the model's own rollout started from
    ``e_r0`` (pass ``None`` to start from the measured first error). In
    ``one_step`` mode each step is predicted from the measured error.
    """
    e_r = compute_error_series(ref_trace, lfm_trace)
    if mode == "free_running":
        start = float(e_r[0]) if e_r0 is None else float(e_r0)
        e_hat = simulate_recursive(model, lfm_trace, start)
    elif mode == "one_step":
        sig = ErrorSegment.from_trace(e_r, lfm_trace).signals
        e_hat = np.empty_like(e_r)
        e_hat[0] = e_r[0] if e_r0 is None else e_r0
        e_hat[1:] = predict_one_step(model, sig[:-1])
    else:
        raise ValueError("mode must be 'free_running' or 'one_step'")
    v_hybrid = lfm_trace.v_lfm + e_hat
    mse_lfm = mse(lfm_trace.v_lfm, ref_trace.v_ref)
    mse_hyb = mse(v_hybrid, ref_trace.v_ref)
    name = ref_trace.name
    rm_lfm, rm_hyb = math.sqrt(mse_lfm), math.sqrt(mse_hyb)
    lfm = MetricsReport(mse_lfm, rm_lfm, pearson(lfm_trace.v_lfm, ref_trace.v_ref), 0.0 if rm_lfm else float("nan"), name, mode)
    hybrid = MetricsReport(mse_hyb, rm_hyb, pearson(e_r, e_hat), rrr(rm_lfm, rm_hyb), name, mode)
    return HybridEvaluation(lfm, hybrid, e_r, e_hat, v_hybrid)


# -- SVD ranking -------------------------------------------------------------


@dataclass(frozen=True)
class RankingReport:
    descriptor_ids: np.ndarray  # in input column order
    xbar: np.ndarray  # weight per column, input order
    ranks: np.ndarray  # 1-based rank per column, input order
    singular_values: np.ndarray
    cumulative_info: np.ndarray  # indexed by rank position
    U: np.ndarray
    Vt: np.ndarray
    coefficients: np.ndarray  # least-squares u_{i,k}
    zero_matrix: bool = False

    @property
    def order(self) -> np.ndarray:
        """Column indices sorted from rank 1 downwards."""
        return np.argsort(self.ranks, kind="stable")

    def rows(self, library=None) -> list[tuple]:
        out = []
        for r, j in enumerate(self.order):
            did = int(self.descriptor_ids[j])
            if library is not None:
                d = library.descriptors[did]
                fam, exps = d.family, " ".join(str(a) for a in d.exponents)
            else:
                fam, exps = "", ""
            out.append((r + 1, did, fam, exps, float(self.xbar[j]), float(self.cumulative_info[r])))
        return out


def svd_rank_matrix(S, descriptor_ids: Sequence[int] | None = None, atol: float = 1e-9) -> RankingReport:
    """Rank the columns of a weighted feature matrix ``S`` (n x m).

    The thin SVD ``S = U diag(sigma) V^T`` is computed; the coordinates of each
    column of ``S`` in the basis ``U`` are found by least squares and
    cross-checked against the orthonormal projection ``U^T S``. The weight of
    column ``i`` is ``sum_k u[i, k] sigma_k / sum_k sigma_k`` with ``u[i, k]``
    the coordinate of column ``i`` on direction ``k``. Columns are ranked by
    ``|xbar|``; ties go to the smaller descriptor id. Each singular pair is
    signed so its right vector's largest-magnitude entry is positive.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[1] < 1:
        raise ValueError("S must be a 2-D matrix with at least one column")
    n, m = S.shape
    ids = np.arange(m) if descriptor_ids is None else np.asarray(descriptor_ids, dtype=int)
    if ids.shape != (m,):
        raise ValueError("one descriptor id per column is required")
    U, sigma, Vt = np.linalg.svd(S, full_matrices=False)
    # singular vectors are defined up to sign; make the largest-magnitude
    # entry of each right vector positive so xbar does not depend on column order
    flip = np.sign(Vt[np.arange(Vt.shape[0]), np.argmax(np.abs(Vt), axis=1)])
    flip[flip == 0] = 1.0
    U = U * flip
    Vt = Vt * flip[:, None]
    if not np.allclose(U @ np.diag(sigma) @ Vt, S, rtol=0, atol=atol * max(1.0, float(np.max(np.abs(S))))):
        raise ArithmeticError("SVD reconstruction check failed")
    coef = np.linalg.lstsq(U, S, rcond=None)[0]  # k x m
    proj = U.T @ S
    if not np.allclose(coef, proj, rtol=0, atol=atol * max(1.0, float(np.max(np.abs(proj))))):
        raise ArithmeticError("least-squares coordinates disagree with the orthonormal projection")
    total = float(sigma.sum())
    zero = total == 0.0
    xbar = np.zeros(m) if zero else (coef.T @ sigma) / total
    mag = np.abs(xbar)
    order = np.lexsort((ids, -mag))
    ranks = np.empty(m, dtype=int)
    ranks[order] = np.arange(1, m + 1)
    if zero:
        cumulative = np.linspace(1.0 / m, 1.0, m)
    else:
        cumulative = np.cumsum(mag[order]) / mag.sum()
        cumulative[-1] = 1.0 if abs(cumulative[-1] - 1.0) <= 1e-9 else cumulative[-1]
    return RankingReport(ids, xbar, ranks, sigma, cumulative, U, Vt, coef.T, zero)


def svd_rank(model: SparseErrorModel, lfm_trace: VoltageTrace | None = None, signals=None) -> RankingReport:
    """Rank a model's active terms on a trace.

    ``S[k, j] = theta_j(signals[k]) * xi_j`` over active terms. The error
    column is the model's own free-running rollout unless ``signals``
    (n x 4: e_r, I, c_sp, c_sn) are supplied.
    """
    if model.active_count < 1:
        raise ValueError("model has no active terms to rank")
    if signals is None:
        if lfm_trace is None:
            raise ValueError("either lfm_trace or signals is required")
        e_hat = simulate_recursive(model, lfm_trace)
        signals = np.column_stack([e_hat, lfm_trace.current, lfm_trace.c_sp, lfm_trace.c_sn])
    ids = model.active_ids
    S = model.library.evaluate(signals, ids) * model.active_xi
    if S.shape[0] <= S.shape[1]:
        raise ValueError("need more rows than active terms")
    return svd_rank_matrix(S, ids)


# -- timing ------------------------------------------------------------------


def timing_report(fn: Callable[[], object], repeats: int = 5) -> float:
    """Median wall-clock seconds of ``fn()`` over ``repeats`` (>= 5) runs."""
    if repeats < 5:
        raise ValueError("at least 5 repeats are required")
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


# -- CSV output --------------------------------------------------------------

_METRICS_HEADER = ("cycle", "mode", "rmse_lfm_v", "rmse_hybrid_v", "rrr_pct", "mse_er_v2", "pearson_rho")
_RANKING_HEADER = ("rank", "descriptor_id", "family", "exponents", "xbar", "cumulative_info")


def save_metrics_csv(evaluations: Sequence[HybridEvaluation], path) -> None:
    rows = [
        (ev.hybrid.cycle_name, ev.hybrid.mode, ev.lfm.rmse, ev.hybrid.rmse, ev.hybrid.rrr_percent, ev.hybrid.mse, ev.hybrid.pearson_rho)
        for ev in evaluations
    ]
    write_csv(path, _METRICS_HEADER, rows)


def save_ranking_csv(report: RankingReport, path, library=None) -> None:
    write_csv(path, _RANKING_HEADER, report.rows(library))


def _parse(path, header, types) -> list[dict]:
    out = []
    for lineno, row in read_csv_rows(path, header):
        try:
            out.append({h: t(v) for h, t, v in zip(header, types, row)})
        except ValueError:
            raise ParseError(f"{path}: malformed field in {row}", line=lineno) from None
    return out


def load_metrics_csv(path) -> list[dict]:
    return _parse(path, _METRICS_HEADER, (str, str, float, float, float, float, float))


def load_ranking_csv(path) -> list[dict]:
    return _parse(path, _RANKING_HEADER, (int, int, str, str, float, float))
