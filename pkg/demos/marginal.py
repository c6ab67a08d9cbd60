"""Marginal regression against tuned ridge across aspect ratios and signal strengths."""
from ridgesketch import ModelParams, marginal_optimum, ridge_optimal_mse

print(f"{'gamma':>6} {'snr':>6} {'lam*':>7} {'M*':>7} {'ratio':>7}")
for gamma in (0.1, 0.7, 3.0):
    for snr in (0.2, 1.0, 5.0):
        model = ModelParams(snr, 1.0)
        lam, mse = marginal_optimum(gamma, model)
        print(f"{gamma:6.1f} {snr:6.1f} {lam:7.3f} {mse:7.4f} {mse / ridge_optimal_mse(gamma, model):7.4f}")
