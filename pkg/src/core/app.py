"""
Application wiring for lifemine

Logging setup and the named random-stream splitter every stage draws from.
"""

import logging
import zlib
from typing import Dict, Optional

import numpy as np

from src.core.config import get_settings

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def configure_logging(level: Optional[str] = None) -> None:
    """Install the root log handler once per process."""
    settings = get_settings()
    logging.basicConfig(
        level=getattr(logging, (level or settings.LOG_LEVEL).upper(), logging.INFO),
        format=LOG_FORMAT,
        force=True,
    )
    # matplotlib is chatty at INFO when it builds its font cache
    logging.getLogger("matplotlib").setLevel(logging.WARNING)


class SeedStreams:
    """
    Derives independent, reproducible random streams from one root seed.

    A stream is addressed by name, so adding a stage never shifts the
    randomness seen by the others.
    """

    def __init__(self, root_seed: int):
        self.root_seed = int(root_seed)
        self._issued: Dict[str, int] = {}

    def _sequence(self, name: str) -> np.random.SeedSequence:
        key = zlib.crc32(name.encode("utf-8"))
        return np.random.SeedSequence(entropy=self.root_seed, spawn_key=(key,))

    def rng(self, name: str) -> np.random.Generator:
        return np.random.default_rng(self._sequence(name))

    def seed(self, name: str) -> int:
        """Integer seed for APIs that take one (recorded for the run manifest)."""
        value = int(self._sequence(name).generate_state(1, dtype=np.uint32)[0])
        self._issued[name] = value
        return value

    @property
    def issued(self) -> Dict[str, int]:
        return dict(sorted(self._issued.items()))
