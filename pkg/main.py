#!/usr/bin/env python3
"""
lifemine - Lifestyle Mining from Check-in Streams
Main application entry point

    python main.py synth --spec configs/two_cities.json --out data/two_cities
    python main.py run --config configs/pipeline_two_cities.json
"""

import sys
from pathlib import Path

# Make the src package importable when run from any directory
sys.path.insert(0, str(Path(__file__).parent))

from src.cli.commands import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
