"""The sampling noise floor of stochastic natural-gradient optimization.

A noise-free run drives the exact gradient norm toward zero; any finite
batch size stalls at a floor.  This scaled-down study (6-site chain, short
runs) measures the floors at several batch sizes and fits their squared
values against b/N_s + c/N_s^2, the additive structure the sampling-error
analysis predicts.  The full-size version of this experiment lives in the
acceptance suite at N = 10 with 10^5-iteration reference runs.
"""

import numpy as np

from spinvmc import fit_sampling_floor, min_grad_curve, run_experiment
from spinvmc.runner import read_records

BASE = {
    "model.kind": "tfi",
    "model.length": 6,
    "model.h": 1.0,
    "ansatz.density": 5,
    "ansatz.seed": 0,
    "optimizer.lambda": 1e-3,
    "optimizer.mu": 0.9,
    "optimizer.eta0": 0.01,
    "optimizer.c": 0.0,
    "optimizer.norm_constraint": float("inf"),
    "optimizer.clip_std": None,
    "run.record_every": 1,
}

full = run_experiment(
    {**BASE, "optimizer.kind": "fspring", "optimizer.iterations": 4000},
    "/tmp/spinvmc-demo5/full",
)
full_curve = min_grad_curve(full)
print(f"noise-free run: gradient norm {full_curve[0]:.3e} -> {full_curve[-1]:.3e}")

points = []
for n_s in (32, 128, 512, 2048):
    out = run_experiment(
        {
            **BASE,
            "optimizer.kind": "spring",
            "optimizer.iterations": 3000,
            "sampler.mode": "direct",
            "sampler.n_samples": n_s,
            "sampler.seed": 1,
            "run.full_grad_norm": True,
        },
        f"/tmp/spinvmc-demo5/ns{n_s}",
    )
    floor = float(min_grad_curve(out)[-1])
    points.append((n_s, floor))
    print(f"  N_s = {n_s:5d}: floor {floor:.3e}")

b, c, residual = fit_sampling_floor(points)
print(f"\nfit min_grad ~ sqrt(b/N_s + c/N_s^2):")
print(f"  b = {b:.3e}, c = {c:.3e}, relative residual {residual:.3f}")
print(f"  predicted floors: "
      + ", ".join(f"{np.sqrt(b / n + c / n**2):.2e}" for n, _ in points))
