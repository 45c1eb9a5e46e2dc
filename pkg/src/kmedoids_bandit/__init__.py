"""k-medoids clustering: exact PAM and bandit-accelerated BanditPAM / BanditPAM++."""

from .bandit import (
    BanditConfig,
    adaptive_search,
    banditpam_swap,
    banditpampp_swap,
    swap_rewards,
)
from .cache import PicCache, Permutation, cached_distance, new_permutation, reference_at
from .core import (
    DataError,
    Dataset,
    Instrumentation,
    MedoidState,
    Metric,
    UsageError,
    assign_nearest,
    clustering_loss,
    distance,
)
from .data import generate_synthetic, load_csv, subsample_with_replacement, write_csv
from .driver import Algorithm, ClusteringResult, fit, normalized_cost, update_state_after_swap
from .exact import pam_build_step, pam_fit, pam_swap_step, swap_delta

__all__ = [
    "Algorithm",
    "BanditConfig",
    "ClusteringResult",
    "DataError",
    "Dataset",
    "Instrumentation",
    "MedoidState",
    "Metric",
    "Permutation",
    "PicCache",
    "UsageError",
    "adaptive_search",
    "assign_nearest",
    "banditpam_swap",
    "banditpampp_swap",
    "cached_distance",
    "clustering_loss",
    "distance",
    "fit",
    "generate_synthetic",
    "load_csv",
    "new_permutation",
    "normalized_cost",
    "pam_build_step",
    "pam_fit",
    "pam_swap_step",
    "reference_at",
    "subsample_with_replacement",
    "swap_delta",
    "swap_rewards",
    "update_state_after_swap",
    "write_csv",
]
