"""
lifemine - Lifestyle Mining from Geo-tagged Check-ins

Library and command line tools that extract latent temporal and spatial
lifestyles from check-in streams with matrix and tensor decompositions.
"""

__version__ = "1.0.0"
