"""
lifemine - Preprocessing Module
User filters and spatial check-in extension
"""

from src.core.config import ExtensionConfig

from .extension import extend_checkins, nearest_venue_bruteforce, preprocess_dataset
from .filters import activity_span_days, filter_low_activity, filter_tourists
from .geo import EARTH_RADIUS_M, VenueGridIndex, haversine_m, offset_north

__all__ = [
    'ExtensionConfig',
    'extend_checkins',
    'nearest_venue_bruteforce',
    'preprocess_dataset',
    'activity_span_days',
    'filter_low_activity',
    'filter_tourists',
    'EARTH_RADIUS_M',
    'VenueGridIndex',
    'haversine_m',
    'offset_north',
]
