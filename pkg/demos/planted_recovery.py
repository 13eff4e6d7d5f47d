"""
Recovering a planted error model
================================

The surrogate reference adds a known sparse recursion to the model voltage.
GA-STRidge searches the 51-term library and should return exactly the
planted terms and coefficients.
"""

import numpy as np

from gastridge import (
    ErrorSegment,
    GaConfig,
    Normalization,
    RegressionData,
    SurrogateSpec,
    build_candidate_library,
    compute_error_series,
    default_cell_parameters,
    generate_surrogate_trace,
    random_walk,
    run_ga,
    simulate_cycle,
)

p = default_cell_parameters()
train_cycle = random_walk(3000, p.capacity_ah, seed=11, name="train")
valid_cycle = random_walk(2000, p.capacity_ah, seed=12, name="valid")
train_trace = simulate_cycle(p, train_cycle)
valid_trace = simulate_cycle(p, valid_cycle)

# normalize I, c_sp, c_sn by the training statistics, e_r by a fixed 50 mV
sig = np.column_stack([train_trace.current, train_trace.c_sp, train_trace.c_sn])
norm = Normalization((0.0, *sig.mean(axis=0)), (0.05, *sig.std(axis=0)))
lib = build_candidate_library().with_normalization(norm)

# e[k+1] = 0.04 e~ + 0.03 I~ + 0.02 I~ c~_sn
planted = [(lib.descriptors[1], 0.04), (lib.descriptors[2], 0.03), (lib.descriptors[11], 0.02)]
spec = SurrogateSpec(p, planted, norm)

segments = []
for cycle, trace in ((train_cycle, train_trace), (valid_cycle, valid_trace)):
    ref = generate_surrogate_trace(spec, cycle, p, trace)
    segments.append(ErrorSegment.from_trace(compute_error_series(ref, trace), trace))

result = run_ga(GaConfig(seed=7), RegressionData([segments[0]]), RegressionData([segments[1]]), lib)
best = result.best
print("planted :", ", ".join(f"{c:+.4f}*{d.name}" for d, c in planted))
print("found   :", result.model.equation())
print(f"mse train {best.mse_train:.2e}, valid {best.mse_valid:.2e}, generations {len(result.history) - 1}")

for h in result.history[:5]:
    print(f"gen {h.generation:3d}  best fitness {h.best_fitness:.6f}  mean {h.mean_fitness:.4f}  N {h.best_n_active}")
