"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary lists
every criterion's outcome.
"""

from __future__ import annotations

import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from gastridge import cli
from gastridge.analysis import evaluate_hybrid, load_metrics_csv, load_ranking_csv, mse, pearson, rmse, rrr, svd_rank_matrix
from gastridge.cycles import constant_current
from gastridge.ga import GaConfig, run_ga
from gastridge.library import RegressionData, build_candidate_library
from gastridge.lfm import LowFidelityModel, electrolyte_c1, realize_electrolyte, realize_solid_diffusion, simulate_cycle
from gastridge.stridge import RidgeProblem, ridge_solve, simulate_recursive, stridge_fit

from helpers import cell, perturbed_problem, planted_problem


def report(n: int, ok: bool, detail: str) -> None:
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")


def normal_equations(theta, y, lam):
    """Independent oracle: explicit normal equations (pseudo-inverse when lam = 0)."""
    if lam == 0:
        return np.linalg.pinv(theta) @ y
    return np.linalg.solve(theta.T @ theta + lam * np.eye(theta.shape[1]), theta.T @ y)


def test_criterion_01_ridge_oracle_equivalence():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(10, 101))
        m = int(rng.integers(2, 11))
        lam = float(rng.choice([0.0, 1e-6, 1e-2, 1.0]))
        theta = rng.standard_normal((n, m))
        y = rng.standard_normal(n)
        worst = max(worst, float(np.max(np.abs(ridge_solve(theta, y, lam) - normal_equations(theta, y, lam)))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and elapsed < 5
    report(1, ok, f"max deviation {worst:.2e}, {elapsed:.2f} s")
    assert worst <= 1e-8
    assert elapsed < 5


def test_criterion_02_planted_model_recovery():
    t0 = time.perf_counter()
    prob = planted_problem()
    result = run_ga(GaConfig(seed=7), prob.train, prob.valid, prob.lib)
    best = result.best
    elapsed = time.perf_counter() - t0
    support_ok = np.array_equal(best.support, prob.planted_ids)
    coef_err = float(np.max(np.abs(best.xi[prob.planted_ids] - prob.planted_xi))) if support_ok else np.inf
    rollout_err = np.inf
    if support_ok:
        model = best.model
        seg = prob.valid_segment
        e_hat = simulate_recursive(model, prob.valid_trace, float(seg.e_r[0]))
        # generator rollout: the planted model on the same base signals
        e_gen = simulate_recursive(prob.spec.planted_model(), prob.valid_trace, float(seg.e_r[0]))
        assert e_hat.size == 2000
        rollout_err = float(np.max(np.abs(e_hat - e_gen)))
    ok = support_ok and coef_err <= 1e-6 and rollout_err <= 1e-9 and elapsed < 180
    report(
        2, ok,
        f"support {best.support.tolist()} vs {prob.planted_ids.tolist()}, coef err {coef_err:.1e}, "
        f"rollout err {rollout_err:.1e}, valid mse {best.mse_valid:.1e}, {elapsed:.1f} s",
    )
    assert support_ok
    assert coef_err <= 1e-6
    assert rollout_err <= 1e-9
    assert best.mse_valid < 1e-10
    assert elapsed < 180


def test_criterion_03_noise_robustness():
    t0 = time.perf_counter()
    prob = planted_problem(noise_std=1e-3)
    best = run_ga(GaConfig(seed=7), prob.train, prob.valid, prob.lib).best
    seg = prob.valid_segment
    e_hat = simulate_recursive(best.model, prob.valid_trace, float(seg.e_r[0]))
    rho = pearson(seg.e_r, e_hat)
    elapsed = time.perf_counter() - t0
    support = set(best.support.tolist())
    planted = set(prob.planted_ids.tolist())
    spurious = len(support - planted)
    ok = planted <= support and spurious <= 2 and rho >= 0.90 and elapsed < 180
    report(3, ok, f"support {sorted(support)}, spurious {spurious}, rho {rho:.4f}, {elapsed:.1f} s")
    assert planted <= support
    assert spurious <= 2
    assert rho >= 0.90
    assert elapsed < 180


def test_criterion_04_hybrid_improvement():
    t0 = time.perf_counter()
    data = perturbed_problem(1.05)
    train_seg, valid_seg = data["train"][2], data["valid"][2]
    lib = build_candidate_library().fitted(train_seg.signals)
    cfg = GaConfig(seed=7, loss_scaling="relative", validation_mode="free_running")
    result = run_ga(cfg, RegressionData([train_seg]), RegressionData([valid_seg]), lib)
    trace, ref, _ = data["test"]
    ev = evaluate_hybrid(result.model, trace, ref)
    elapsed = time.perf_counter() - t0
    ok = ev.rrr_percent >= 50 and elapsed < 300
    report(
        4, ok,
        f"rmse lfm {ev.lfm.rmse * 1e3:.3f} mV, hybrid {ev.hybrid.rmse * 1e3:.3f} mV, "
        f"RRR {ev.rrr_percent:.2f}%, {elapsed:.1f} s",
    )
    assert ev.rrr_percent >= 50
    assert elapsed < 300


def _first_threshold_support(res):
    return set((res.supports[1] if len(res.supports) > 1 else res.supports[0]).tolist())


def test_criterion_05_stridge_structure():
    rng = np.random.default_rng(5)
    t0 = time.perf_counter()
    failures = []
    for trial in range(200):
        n = int(rng.integers(15, 60))
        m = int(rng.integers(2, 12))
        theta = rng.standard_normal((n, m))
        xi_true = rng.standard_normal(m) * (rng.random(m) < 0.5)
        y = theta @ xi_true + 0.1 * rng.standard_normal(n)
        lam1 = float(10 ** rng.uniform(-6, 1))
        lam2a, lam2b = np.sort(10 ** rng.uniform(-3, 0.5, size=2))
        res_a = stridge_fit(RidgeProblem(theta, y, lam1, lam2a))
        res_b = stridge_fit(RidgeProblem(theta, y, lam1, lam2b))
        for res in (res_a, res_b):
            if any(not set(s.tolist()) <= set(p.tolist()) for p, s in zip(res.supports, res.supports[1:])):
                failures.append((trial, "support grew"))
        if not _first_threshold_support(res_b) <= _first_threshold_support(res_a):
            failures.append((trial, "threshold monotonicity"))
        norms = [np.linalg.norm(ridge_solve(theta, y, lam)) for lam in (0.0, lam1, 10 * lam1, 100 * lam1)]
        if any(b > a * (1 + 1e-12) for a, b in zip(norms, norms[1:])):
            failures.append((trial, "shrinkage"))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 10
    report(5, ok, f"{len(failures)} violations in 200 problems, {elapsed:.2f} s")
    assert not failures
    assert elapsed < 10


def test_criterion_06_lfm_analytic_checks():
    p = cell()
    checks = {}
    for name, e in (("positive", p.positive), ("negative", p.negative)):
        gain = -e.particle_radius / (3 * p.faraday_constant * e.active_material_fraction * e.thickness * p.area)
        gd = realize_solid_diffusion(e, 1.0, p.area, p.faraday_constant, parts=("diffusion",))
        checks[f"G_d {name}"] = abs(gd.dc_gain() / gain / (e.particle_radius / (5 * e.diffusion_coefficient)) - 1)
    elec = realize_electrolyte(p, 1.0)
    expected = (0.124 * p.gamma_pos + 0.117 * p.gamma_neg) * electrolyte_c1(p) / p.electrolyte_diffusivity
    checks["electrolyte"] = abs(elec.dc_gain() / expected - 1)
    # bulk slope: d c_sn / dt -> -I / (F eps L A) once the lags have settled
    I0 = 0.5
    trace = simulate_cycle(p, constant_current(I0, 3000.0))
    n = p.negative
    slope = (trace.c_sn[2999] - trace.c_sn[1999]) / 1000.0
    want = -I0 / (p.faraday_constant * n.active_material_fraction * n.thickness * p.area)
    checks["bulk slope"] = abs(slope / want - 1)
    rest = simulate_cycle(p, constant_current(0.0, 500.0))
    drift = float(np.max(np.abs(rest.v_lfm - rest.v_lfm[0])))
    ok = all(v <= 1e-6 for k, v in checks.items() if k != "bulk slope") and checks["bulk slope"] <= 1e-4 and drift <= 1e-12
    report(6, ok, ", ".join(f"{k} rel {v:.1e}" for k, v in checks.items()) + f", rest drift {drift:.1e} V")
    for k, v in checks.items():
        assert v <= (1e-4 if k == "bulk slope" else 1e-6), k
    assert drift <= 1e-12


def test_criterion_07_metric_identities():
    rng = np.random.default_rng(7)
    a = rng.standard_normal(50)
    b = a + 0.1 * rng.standard_normal(50)
    r = rrr(0.0160, 0.0070)
    rel = abs(rmse(a, b) ** 2 - mse(a, b)) / mse(a, b)
    ok = (
        abs(pearson(a, a) - 1) < 1e-12
        and abs(pearson(a, -a) + 1) < 1e-12
        and abs(r - 56.28) <= 0.1
        and rel <= 1e-12
    )
    report(7, ok, f"rho(a,a)={pearson(a, a):.15f}, rho(a,-a)={pearson(a, -a):.15f}, RRR={r:.4f}%, rmse^2/mse rel {rel:.1e}")
    assert pearson(a, a) == pytest.approx(1, abs=1e-12)
    assert pearson(a, -a) == pytest.approx(-1, abs=1e-12)
    assert r == pytest.approx(56.25, abs=1e-9)
    assert abs(r - 56.28) <= 0.1
    assert rel <= 1e-12


def test_criterion_08_svd_ranking():
    rng = np.random.default_rng(8)
    S = rng.standard_normal((50, 6))
    rep = svd_rank_matrix(S)
    recon = float(np.max(np.abs(rep.U @ np.diag(rep.singular_values) @ rep.Vt - S)))
    proj = float(np.max(np.abs(rep.coefficients - (rep.U.T @ S).T)))
    D = 1e-3 * rng.standard_normal((40, 4))
    D[:, 2] = 5 * rng.standard_normal(40)
    dom = svd_rank_matrix(D, [10, 11, 12, 13])
    cum = rep.cumulative_info
    ok = (
        recon <= 1e-9
        and proj <= 1e-9
        and dom.ranks[2] == 1
        and np.all(np.diff(cum) >= 0)
        and abs(cum[-1] - 1) <= 1e-9
    )
    report(8, ok, f"reconstruction {recon:.1e}, lstsq vs projection {proj:.1e}, dominant rank {dom.ranks[2]}, terminal {cum[-1]:.12f}")
    assert recon <= 1e-9 and proj <= 1e-9
    assert dom.ranks[2] == 1
    assert np.all(np.diff(cum) >= 0)
    assert abs(cum[-1] - 1) <= 1e-9


PLANTED_CONFIG = """
seed = 7
[surrogate]
e_r0 = 0.0
[[surrogate.planted]]
family = "pol"
exponents = [1, 0, 0, 0]
coefficient = 0.04
[[surrogate.planted]]
family = "pol"
exponents = [0, 1, 0, 0]
coefficient = 0.03
[surrogate.normalization]
mean = [0.0, 0.8, 30000.0, 25000.0]
std = [0.05, 2.5, 2000.0, 2000.0]
[ga]
generations = 15
"""


def test_criterion_09_train_determinism(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(PLANTED_CONFIG)
    base = ["--config", str(cfg)]
    assert cli.main(base + ["--out", str(tmp_path), "build-cycle", "--kind", "walk", "--duration", "800", "--name", "a", "--seed", "1"]) == 0
    assert cli.main(base + ["--out", str(tmp_path), "build-cycle", "--kind", "walk", "--duration", "500", "--name", "b", "--seed", "2"]) == 0
    assert cli.main(base + ["--out", str(tmp_path), "gen-data", str(tmp_path / "a.csv"), str(tmp_path / "b.csv")]) == 0
    outputs = []
    for run in ("r1", "r2"):
        out = tmp_path / run
        code = cli.main(base + ["--out", str(out), "train", "--train", str(tmp_path / "a_error.csv"), "--valid", str(tmp_path / "b_error.csv")])
        assert code in (0, 2)
        outputs.append(((out / "model.json").read_bytes(), (out / "model_history.csv").read_bytes()))
    ok = outputs[0] == outputs[1]
    report(9, ok, f"model {len(outputs[0][0])} bytes, history {len(outputs[0][1])} bytes, identical={ok}")
    assert ok


PERTURBED_CONFIG = """
seed = 7
[surrogate]
diffusion = 1.05
reaction_rate = 1.05
conductivity = 1.05
[ga]
loss_scaling = "relative"
validation_mode = "free_running"
"""


def test_criterion_10_end_to_end(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(PERTURBED_CONFIG)
    out = tmp_path / "out"
    base = ["--config", str(cfg), "--out", str(out)]
    t0 = time.perf_counter()
    steps = [
        ["build-cycle", "--kind", "walk", "--duration", "3600", "--name", "train", "--seed", "1"],
        ["build-cycle", "--kind", "walk", "--duration", "1800", "--name", "valid", "--seed", "2"],
        ["build-cycle", "--kind", "walk", "--duration", "3600", "--name", "test", "--seed", "3"],
        ["gen-data", str(out / "train.csv"), str(out / "valid.csv"), str(out / "test.csv")],
        ["train", "--train", str(out / "train_error.csv"), "--valid", str(out / "valid_error.csv")],
        ["evaluate", "--model", str(out / "model.json"), "--pair", str(out / "test_trace.csv"), str(out / "test_ref.csv")],
        ["rank", "--model", str(out / "model.json"), "--trace", str(out / "test_trace.csv")],
    ]
    codes = [cli.main(base + s) for s in steps]
    elapsed = time.perf_counter() - t0
    metrics = load_metrics_csv(out / "metrics.csv")
    ranking = load_ranking_csv(out / "ranking.csv")
    ok = codes == [0] * len(steps) and len(metrics) == 1 and ranking and elapsed < 600
    report(10, ok, f"exit codes {codes}, test RRR {metrics[0]['rrr_pct']:.2f}%, {len(ranking)} ranked terms, {elapsed:.1f} s")
    assert codes == [0] * len(steps)
    assert elapsed < 600
