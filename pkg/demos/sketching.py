"""Primal, dual and full orthogonal sketches: MSE relative to ridge at fixed and at tuned lambda."""
from ridgesketch import ExperimentConfig, run_experiment

for kind in ("primal_orth", "dual_orth", "full"):
    cfg = ExperimentConfig(kind=kind, n=400, gamma=2.0, alpha=3, sigma=1, lam=1.0,
                           ratios=(0.25, 0.5, 0.75), sketch_family="haar", replicates=5, seed=0)
    table = run_experiment(cfg)
    for row in table.select(quantity="mse_ratio"):
        opt = table.value("theory", quantity="mse_ratio_opt", ratio=row["ratio"])
        print(f"{kind:12s} ratio={row['ratio']:.2f}  mse/ridge theory={row['theory']:.4f} "
              f"mc={row['mc_mean']:.4f}  at tuned lam={opt:.4f}")
