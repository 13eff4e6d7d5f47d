"""
A hybrid model for a mis-parameterised cell
===========================================

The reference is the same model with diffusion coefficients, reaction rates
and conductivity all 5% higher. A sparse error model learned by GA-STRidge is
added to the low-fidelity voltage and evaluated free-running on a held-out
cycle.
"""

from gastridge import (
    ErrorSegment,
    GaConfig,
    RegressionData,
    SurrogateSpec,
    build_candidate_library,
    compute_error_series,
    default_cell_parameters,
    evaluate_hybrid,
    generate_surrogate_trace,
    perturb_parameters,
    random_walk,
    run_ga,
    simulate_cycle,
)

p = default_cell_parameters()
spec = SurrogateSpec(perturb_parameters(p, diffusion=1.05, reaction_rate=1.05, conductivity=1.05))

data = {}
for name, duration, seed in (("train", 3000, 21), ("valid", 1500, 22), ("test", 3000, 23)):
    cycle = random_walk(duration, p.capacity_ah, seed=seed, name=name)
    trace = simulate_cycle(p, cycle)
    ref = generate_surrogate_trace(spec, cycle, p, trace)
    data[name] = (trace, ref, ErrorSegment.from_trace(compute_error_series(ref, trace), trace))

train_seg = data["train"][2]
lib = build_candidate_library().fitted(train_seg.signals)

# errors here are a few mV, so the MSE terms are scaled by the error power and
# the validation term uses the free-running rollout
config = GaConfig(seed=7, loss_scaling="relative", validation_mode="free_running")
result = run_ga(config, RegressionData([train_seg]), RegressionData([data["valid"][2]]), lib)
print(result.model.equation())

trace, ref, _ = data["test"]
ev = evaluate_hybrid(result.model, trace, ref)
print(f"LFM    RMSE {ev.lfm.rmse * 1e3:.3f} mV")
print(f"hybrid RMSE {ev.hybrid.rmse * 1e3:.3f} mV  (RRR {ev.rrr_percent:.1f}%, rho {ev.hybrid.pearson_rho:.3f})")
