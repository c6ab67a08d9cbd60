"""Ridge risk: limiting bias, variance and MSE next to Monte Carlo over a lambda grid."""
from ridgesketch import ExperimentConfig, run_experiment

cfg = ExperimentConfig(kind="ridge_risk", n=500, gamma=0.5, alpha=3, sigma=1,
                       lam_grid=(0.03, 0.1, 0.3, 1.0, 3.0), replicates=10, seed=0)
table = run_experiment(cfg)
print(f"{'lam':>6} {'theory':>9} {'mc':>9} {'se':>8}")
for row in table.select(quantity="mse"):
    print(f"{row['lam']:6.2f} {row['theory']:9.4f} {row['mc_mean']:9.4f} {row['mc_se']:8.4f}")
