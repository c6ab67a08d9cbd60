"""Squared bias of Gaussian sketches: free-convolution root for dual, finite-matrix proxy for primal."""
from ridgesketch import ExperimentConfig, run_experiment

dual = run_experiment(ExperimentConfig(kind="dual_gaussian", n=300, gamma=0.4, alpha=1, lam=1.0,
                                       ratios=(0.2, 0.5, 1.0), replicates=10, seed=0))
for row in dual.select(quantity="bias2"):
    print(f"dual   d/p={row['ratio']:.2f}  theory={row['theory']:.4f}  mc={row['mc_mean']:.4f}+-{row['mc_se']:.4f}")
print(f"ridge bias2 = {dual.value('theory', quantity='ridge_bias2'):.4f}")

primal = run_experiment(ExperimentConfig(kind="primal_gaussian", n=300, gamma=2.0, alpha=1, lam=1.0,
                                         ratios=(0.5,), proxy_n=300, replicates=5, seed=0))
row = primal.select(quantity="bias2")[0]
print(f"primal m/n=0.50  proxy={row['theory']:.4f}+-{row['theory_se']:.4f}  mc={row['mc_mean']:.4f}+-{row['mc_se']:.4f}")
