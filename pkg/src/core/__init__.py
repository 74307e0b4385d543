"""
Core module for lifemine

This module contains the domain types, configuration, exceptions
and application wiring shared by every other package.
"""

__version__ = "1.0.0"
