"""Ridge regression and sketched ridge regression: limiting risk, deterministic
equivalents, cross-validation and a seeded Monte Carlo harness."""

from .core_types import (ModelParams, RegressionProblem, RngStream, SpectrumParams, draw_response,
                         generate_problem, sqrt_psd)
from .estimators import (LinearEstimator, RiskReport, SketchSpec, dual_sketch_map, full_sketch_map,
                         linear_risk, make_sketch, marginal_map, primal_sketch_map, ridge_map,
                         sketched_map)
from .mp_theory import (mp_stieltjes, optimal_lambda_ridge, ridge_optimal_mse, ridge_risk_theory,
                        theta, theta_bar)
from .det_equiv import representation_pair, solve_cp
from .sketch_theory import (dual_gaussian_bias, dual_orth_mse, full_sketch_mse, marginal_mse,
                            marginal_optimum, optimal_lambda_sketch, primal_gaussian_bias,
                            primal_orth_mse, theory_mse)
from .cross_validation import CvReport, kfold_cv, loo_shortcut, train_test_validate
from .config import ExperimentConfig, load_config
from .datasets import Dataset, cv_on_dataset, ingest_csv
from .experiments import __version__, run_experiment, timing_benchmark
