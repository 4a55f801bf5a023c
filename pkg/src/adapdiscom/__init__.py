"""Direct sparse regression for block-missing multimodal data.

Estimates the predictor covariance from all pairwise-available (optionally
Huber-robust) moments, fuses the per-modality blocks, the cross-modality
part and an identity term with adaptive weights into a positive
semi-definite matrix, corrects additive measurement error, and solves the
penalized quadratic program by coordinate descent.
"""

from .datamodel import (BlockMissingDataset, ModalityLayout,
                        StandardizationReport, load_dataset,
                        observation_counts, standardize)
from .fusion import (CombinedCovariance, FastBounds, FusionWeights,
                     cocolasso_correct, combine_adapdiscom, combine_discom,
                     fast_bounds, fast_combine, gamma_star, make_weights,
                     min_eigenvalue, optimal_loss, oracle_weights, psd_clip)
from .kernels import using_numba
from .moments import (HuberPolicy, MomentPartition, PairwiseMoments,
                      gram_moments, huber_location, huber_moments,
                      pairwise_covariance, partition)
from .simulation import (MetricsReport, ScenarioSpec, TrueModel,
                         baseline_complete_case, baseline_mean_impute,
                         baseline_svd_impute, evaluate, gen_covariance,
                         gen_scenario, inject_measurement_error,
                         run_experiment, summarize, true_model)
from .solver import (FitResult, LambdaGrid, SolverOptions, cd_lasso, fit_path,
                     kkt_residual, lambda_path, objective, predict)
from .tuning import (ALL_METHODS, TuneResult, TuneSpec, transform_validation,
                     tune)

__version__ = "0.1.0"
