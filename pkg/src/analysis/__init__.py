"""
lifemine - Analysis Module
Descriptive statistics over check-in datasets (charts live in analysis.charts)
"""

from .stats import (
    BoxStats,
    ShareSeries,
    VisitStats,
    category_box_stats,
    ccdf,
    peak_buckets,
    restrict_to_city,
    share_series,
    visiting_frequency,
)

__all__ = [
    'BoxStats',
    'ShareSeries',
    'VisitStats',
    'category_box_stats',
    'ccdf',
    'peak_buckets',
    'restrict_to_city',
    'share_series',
    'visiting_frequency',
]
