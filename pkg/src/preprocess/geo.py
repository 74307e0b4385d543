"""
Great-circle distance and the venue grid index used by check-in extension.

The grid is a fixed latitude/longitude lattice whose row height equals the
search radius expressed as an arc. Queries probe the neighbouring rows and
as many columns as the radius can span at the query latitude, then rank the
candidates with the exact haversine distance, so results are identical to
an exhaustive scan.
"""

import logging
import math
from collections import defaultdict
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from src.core.models import Venue

logger = logging.getLogger(__name__)

EARTH_RADIUS_M = 6_371_000.0

# Widens cell probing so rounding in the cell arithmetic never hides a venue
_CELL_MARGIN = 1e-6


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in metres between two lat/lon points in degrees."""
    phi1 = math.radians(lat1)
    phi2 = math.radians(lat2)
    dphi = phi2 - phi1
    dlmb = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(math.sqrt(min(1.0, a)))


def offset_north(lat: float, lon: float, meters: float) -> Tuple[float, float]:
    """Point `meters` due north along the meridian (used to plant test posts)."""
    return lat + math.degrees(meters / EARTH_RADIUS_M), lon


def nearest_within(lat: float, lon: float, venues: Iterable[Venue],
                   radius_m: float) -> Optional[Tuple[Venue, float]]:
    """Closest venue within radius (inclusive); ties go to the smallest venue_id."""
    best: Optional[Tuple[float, str, Venue]] = None
    for venue in venues:
        distance = haversine_m(lat, lon, venue.lat, venue.lon)
        if distance > radius_m:
            continue
        key = (distance, venue.venue_id, venue)
        if best is None or key[:2] < best[:2]:
            best = key
    if best is None:
        return None
    return best[2], best[0]


class VenueGridIndex:
    """Exact radius search over a venue registry."""

    def __init__(self, venues: Sequence[Venue], radius_m: float):
        if radius_m <= 0:
            raise ValueError(f"radius_m must be positive, got {radius_m}")
        self.radius_m = float(radius_m)
        self.venues = list(venues)

        self.radius_deg = math.degrees(self.radius_m / EARTH_RADIUS_M)
        self.cell_deg = self.radius_deg * (1.0 + _CELL_MARGIN)
        self.n_rows = int(math.ceil(180.0 / self.cell_deg)) + 1
        self.n_cols = max(1, int(math.ceil(360.0 / self.cell_deg)))

        self._cells: Dict[Tuple[int, int], List[int]] = defaultdict(list)
        self._rows: Dict[int, List[int]] = defaultdict(list)
        for position, venue in enumerate(self.venues):
            row, col = self._cell(venue.lat, venue.lon)
            self._cells[(row, col)].append(position)
            self._rows[row].append(position)

        logger.debug(
            f"Venue grid: {len(self.venues)} venues in {len(self._cells)} cells "
            f"(cell {self.cell_deg:.6f} deg)"
        )

    def _cell(self, lat: float, lon: float) -> Tuple[int, int]:
        row = min(int(math.floor((lat + 90.0) / self.cell_deg)), self.n_rows - 1)
        col = int(math.floor((lon + 180.0) / self.cell_deg)) % self.n_cols
        return row, col

    def _column_span(self, lat: float) -> Optional[int]:
        """Columns to probe on each side, or None when the whole row must be scanned."""
        phi_max = min(abs(lat) + self.radius_deg, 90.0)
        cos_max = math.cos(math.radians(phi_max))
        if cos_max <= 0.0:
            return None
        ratio = math.sin(self.radius_m / (2.0 * EARTH_RADIUS_M)) / cos_max
        if ratio >= 1.0:
            return None
        dlon_deg = math.degrees(2.0 * math.asin(ratio)) * (1.0 + _CELL_MARGIN)
        # +2: one for flooring and one for the narrower last column at the antimeridian
        span = int(math.ceil(dlon_deg / self.cell_deg)) + 2
        if 2 * span + 1 >= self.n_cols:
            return None
        return span

    def candidates(self, lat: float, lon: float) -> List[Venue]:
        row, col = self._cell(lat, lon)
        span = self._column_span(lat)
        positions: List[int] = []
        for r in (row - 1, row, row + 1):
            if r < 0 or r >= self.n_rows:
                continue
            in_row = self._rows.get(r, ())
            # near the poles the span grows large; a sparse row is cheaper to scan whole
            if span is None or 2 * span + 1 >= len(in_row):
                positions.extend(in_row)
                continue
            for offset in range(-span, span + 1):
                positions.extend(self._cells.get((r, (col + offset) % self.n_cols), ()))
        return [self.venues[p] for p in positions]

    def nearest(self, lat: float, lon: float) -> Optional[Tuple[Venue, float]]:
        return nearest_within(lat, lon, self.candidates(lat, lon), self.radius_m)
