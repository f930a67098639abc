"""Scale-sensitive learning theory on finite classes: fat-shattering
dimensions, l-infinity covers, cover-based learning, sample compression and
distribution selection under integral probability metrics."""

__version__ = "0.1.0"

from .core import (TAU, FullCube, FunctionClass, PartialConceptClass, aggregate, canonical,
                   discretize, dual, hat_embed, restrict, to_partial)
from .covers import (Cover, EntropyReport, box_cover_step, compression_to_cover, disambiguate,
                     entropy_profile, exact_cover_number, greedy_cover, is_cover, iterated_cover,
                     packing_number)
from .errors import (BudgetError, ConstructionError, InputError, PropertyViolation,
                     RealizabilityError, ScalelabError, SolverError)
from .evaluation import (DiscreteDistribution, MixtureInstance, build_lower_bound_instance,
                         embed_shattered_blocks, error_probability_experiment, factor3_ratio_check,
                         ipm_distance, plug_in_argmin, plug_in_score, random_choice, scheffe_evaluate,
                         tv_distance)
from .learning import (CompressionScheme, LabeledSample, build_compression, erm_consistent,
                       erm_over_cover, learner_experiment, minimax_distribution, solve_zero_sum,
                       uc_deviation)
from .shattering import (common_threshold_dim, common_threshold_shatter, fat_dim, is_shattered,
                         partial_vc_dim)

__all__ = [name for name in dir() if not name.startswith("_")]
