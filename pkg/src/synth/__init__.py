"""
lifemine - Synthetic Data Module
Seeded generators with planted lifestyles for tests and demos
"""

from .generator import (
    CitySegment,
    CitySpec,
    PlantedUsers,
    SynthSpec,
    band_profiles,
    generate_dataset,
    generate_matrix,
    generate_tensor,
    generate_users,
    load_spec,
    planted_low_rank,
)

__all__ = [
    'CitySegment',
    'CitySpec',
    'PlantedUsers',
    'SynthSpec',
    'band_profiles',
    'generate_dataset',
    'generate_matrix',
    'generate_tensor',
    'generate_users',
    'load_spec',
    'planted_low_rank',
]
