"""Diffusions in alpha-stable Levy environments: simulation and
statistical verification of their local-time limit laws."""

from .conditioned import (BERTOIN, BESSEL3, TANAKA, UP, UP_HAT,
                          ConditionedPath, LimitEnvironment,
                          bertoin_transform, overshoot_weight,
                          pre_post_split, regeneration_time,
                          sample_conditioned, sample_tilde, tanaka_transform,
                          time_above_zero)
from .diffusion import (BROX, CHAIN, DiffusionRun, LocalTimeProfile,
                        brox_simulate, chain_simulate, favorite_point,
                        local_time_profile, scale_function)
from .errors import (ParameterError, RangeError, ReplicationAborted,
                     WindowTooSmallError)
from .path_core import (ProfileWeights, exp_integral, future_infimum,
                        laplace_ratio, normalize_profile, recenter, rescale,
                        running_infimum, running_supremum)
from .stable_env import (GridPath, StableLawSpec, TwoSidedPath, charfn_check,
                         rho_estimate, sample_one_sided, sample_two_sided)
from .valley import (MINUS, PLUS, EnvironmentStream, Valley, ab_window,
                     find_c_extrema, one_sided_stats,
                     sample_valley_environment, standard_valley)
from .verify import (McReport, corollary_limsup_experiment, ks_one_sample,
                     ks_two_sample, ks_two_sample_weighted,
                     scaling_experiment, theorem_cvloi_experiment,
                     theorem_cvptfav_experiment, valley_law_experiment)

__version__ = "0.1.0"
