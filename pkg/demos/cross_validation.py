"""K-fold CV picks a penalty for n(K-1)/K samples; scaling by (K-1)/K corrects it."""
from ridgesketch import ExperimentConfig, run_experiment

table = run_experiment(ExperimentConfig(kind="cv", n=400, p=280, alpha=1, sigma=1, folds=5,
                                        replicates=10, seed=0))
for q in ("lam_cv", "lam_debiased", "test_err_cv", "test_err_debiased", "test_err_delta"):
    row = table.select(quantity=q)[0]
    print(f"{q:18s} theory={row['theory']:.4f}  mc={row['mc_mean']:.4f}+-{row['mc_se']:.4f}")
