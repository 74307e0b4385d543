"""
lifemine - Models Module
Matrix and tensor factorization plus the lifestyle analyses built on them
"""

from .clustering import LifestyleClusters, cluster_preferences
from .cp_als import ActivityTensor, TensorFactorModel, cp_als, rank_sweep
from .lifestyle import (
    GroupKey,
    GroupPreferences,
    build_spatial_matrix,
    build_temporal_matrix,
    build_tensor,
    describe_tensor_components,
    group_preferences,
    profiles_for,
    rank_categories,
    top_components,
)
from .nmf import ActivityMatrix, FactorModel, nmf, nmf_rank_sweep
from .tensor_ops import fit, frobenius_norm, khatri_rao, minmax_normalize, mode_unfold, reconstruct_tensor
from .time_ranges import (
    CIRCADIAN_BANDS,
    TimeRanges,
    band_activity_share,
    bands_agree,
    extract_time_ranges,
    label_circadian_components,
)

__all__ = [
    'ActivityMatrix',
    'FactorModel',
    'nmf',
    'nmf_rank_sweep',
    'ActivityTensor',
    'TensorFactorModel',
    'cp_als',
    'rank_sweep',
    'fit',
    'frobenius_norm',
    'khatri_rao',
    'minmax_normalize',
    'mode_unfold',
    'reconstruct_tensor',
    'GroupKey',
    'GroupPreferences',
    'build_spatial_matrix',
    'build_temporal_matrix',
    'build_tensor',
    'describe_tensor_components',
    'group_preferences',
    'profiles_for',
    'rank_categories',
    'top_components',
    'CIRCADIAN_BANDS',
    'TimeRanges',
    'band_activity_share',
    'bands_agree',
    'extract_time_ranges',
    'label_circadian_components',
    'LifestyleClusters',
    'cluster_preferences',
]
