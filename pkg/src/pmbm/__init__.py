"""PMBM filtering for coexisting point and extended targets."""
__version__ = "0.1.0"

from .association import (InfeasibleAssignmentError, MurtyStream, all_partitions,
                          dbscan_partitions, gate, murty_kbest, unique_subsets)
from .filtering import (BirthModel, ClutterModel, FilterConfig, PMBMFilter, PruneConfig,
                        bernoulli_detect, bernoulli_misdetect, check_invariants, new_bernoulli,
                        predict, prune, update, update_ppp_intensity)
from .metrics import (ExtendedEstimate, GospaResult, PointEstimate, estimate,
                      gaussian_wasserstein, gospa)
from .models import (ExtendedMeasModel, GGIWPredictParams, PointMeasModel, PointMotionModel,
                     constant_velocity, gamma_merge, gaussian_mixture_moments, ggiw_mixture_merge,
                     ggiw_predict, ggiw_update, kalman_predict, kalman_update)
from .pmb import marginal_weights, pmb_project
from .sim import (ScenarioConfig, generate_measurements, make_filter_config, run_monte_carlo,
                  sample_ground_truth)
from .state import (DegeneratePosteriorError, ExtendedState, GaussianDensity, GGIWParams,
                    GlobalHypothesis, HybridDensity, LocalHypothesis, PMBMDensity, PointState,
                    PPPIntensity, Track, hybrid_integral)
