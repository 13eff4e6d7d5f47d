"""Shared fixtures-as-functions: planted and perturbed surrogate problems."""

from __future__ import annotations

from functools import lru_cache
from types import SimpleNamespace

import numpy as np

from gastridge.cycles import random_walk
from gastridge.library import ErrorSegment, Normalization, RegressionData, build_candidate_library
from gastridge.lfm import simulate_cycle
from gastridge.params import default_cell_parameters
from gastridge.reference import SurrogateSpec, compute_error_series, generate_surrogate_trace, perturb_parameters

# e_r, I and I*c_sn in the default 51-term library
PLANTED = ((1, 0.04), (2, 0.03), (11, 0.02))
E_SCALE = 0.05


@lru_cache(maxsize=None)
def cell():
    return default_cell_parameters()


@lru_cache(maxsize=None)
def walk_trace(duration: int, seed: int, name: str):
    p = cell()
    cycle = random_walk(duration, p.capacity_ah, seed=seed, name=name)
    return cycle, simulate_cycle(p, cycle)


@lru_cache(maxsize=None)
def planted_problem(noise_std: float = 0.0, n_train: int = 3000, n_valid: int = 2000):
    """Noiseless (or noisy) surrogate whose error follows a planted 3-term recursion.

    The library normalization uses the training cycle's I, c_sp, c_sn
    statistics and a fixed scale for e_r, so the planted terms are exact
    library columns.
    """
    p = cell()
    tr_c, tr = walk_trace(n_train, 11, "train")
    va_c, va = walk_trace(n_valid, 12, "valid")
    sig = np.column_stack([tr.current, tr.c_sp, tr.c_sn])
    norm = Normalization((0.0, *sig.mean(axis=0)), (E_SCALE, *sig.std(axis=0)))
    lib = build_candidate_library().with_normalization(norm)
    spec = SurrogateSpec(p, [(lib.descriptors[i], c) for i, c in PLANTED], norm, noise_std=noise_std, seed=3)
    segs, refs = [], []
    for c, t in ((tr_c, tr), (va_c, va)):
        ref = generate_surrogate_trace(spec, c, p, t)
        refs.append(ref)
        segs.append(ErrorSegment.from_trace(compute_error_series(ref, t), t))
    return SimpleNamespace(
        lib=lib,
        spec=spec,
        train=RegressionData([segs[0]]),
        valid=RegressionData([segs[1]]),
        train_trace=tr,
        valid_trace=va,
        valid_ref=refs[1],
        valid_segment=segs[1],
        planted_ids=np.array([i for i, _ in PLANTED]),
        planted_xi=np.array([c for _, c in PLANTED]),
    )


@lru_cache(maxsize=None)
def perturbed_problem(factor: float = 1.05):
    """5% perturbation of D, k and kappa; train/valid/test on separate random walks."""
    p = cell()
    spec = SurrogateSpec(perturb_parameters(p, factor, factor, factor))
    out = {}
    for name, dur, seed in (("train", 3000, 21), ("valid", 1500, 22), ("test", 3000, 23)):
        c, t = walk_trace(dur, seed, name)
        ref = generate_surrogate_trace(spec, c, p, t)
        out[name] = (t, ref, ErrorSegment.from_trace(compute_error_series(ref, t), t))
    return out
