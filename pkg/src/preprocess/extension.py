"""
Check-in extension

Assigns venue-less posts to the nearest registered venue within a small
radius, and chains the user filters with the extension in either order.
"""

import logging
from typing import List, Optional, Sequence, Tuple

from src.core.config import ExtensionConfig
from src.core.models import CheckIn, Dataset, Venue

from .filters import filter_low_activity, filter_tourists
from .geo import VenueGridIndex, nearest_within

logger = logging.getLogger(__name__)


def nearest_venue_bruteforce(lat: float, lon: float, venues: Sequence[Venue],
                             radius_m: float) -> Optional[Tuple[Venue, float]]:
    """Exhaustive reference for the grid index: compares against every venue."""
    return nearest_within(lat, lon, venues, radius_m)


def extend_checkins(ds: Dataset, cfg: Optional[ExtensionConfig] = None) -> Dataset:
    """
    Attach venue-less check-ins to the closest venue within ``cfg.radius_m``.

    Check-ins that already name a venue are left alone, and so are posts
    with nothing in range. An assigned check-in takes the venue's
    categories. The number and order of check-ins never change.
    """
    cfg = cfg or ExtensionConfig()
    venues = list(ds.venue_index.values())
    if not venues:
        logger.warning("Venue registry is empty; check-in extension skipped")
        return ds

    index = VenueGridIndex(venues, cfg.radius_m)
    extended: List[CheckIn] = []
    assigned = 0
    for checkin in ds.checkins:
        if checkin.has_venue:
            extended.append(checkin)
            continue
        match = index.nearest(checkin.lat, checkin.lon)
        if match is None:
            extended.append(checkin)
            continue
        venue, _ = match
        extended.append(
            CheckIn(
                user_id=checkin.user_id,
                timestamp=checkin.timestamp,
                lat=checkin.lat,
                lon=checkin.lon,
                venue_id=venue.venue_id,
                categories=venue.categories,
            )
        )
        assigned += 1

    venueless = sum(1 for c in ds.checkins if not c.has_venue)
    logger.info(
        f"Check-in extension (radius {cfg.radius_m} m): assigned {assigned} of {venueless} venue-less posts"
    )
    result = ds.derive(f"extend_checkins(radius_m={cfg.radius_m})", checkins=tuple(extended))
    result.provenance["extension"] = {"radius_m": cfg.radius_m, "venueless": venueless, "assigned": assigned}
    return result


def preprocess_dataset(ds: Dataset, cfg: Optional[ExtensionConfig] = None) -> Dataset:
    """
    Tourist filter, low-activity filter, then extension.

    With ``extend_first`` the extension runs before the filters. The
    filters count every post, venue or not, so both orders keep the same
    users and only the provenance history differs.
    """
    cfg = cfg or ExtensionConfig()
    if cfg.extend_first:
        ds = extend_checkins(ds, cfg)
    ds = filter_tourists(ds, cfg.min_span_days)
    ds = filter_low_activity(ds, cfg.min_checkins)
    if not cfg.extend_first:
        ds = extend_checkins(ds, cfg)
    return ds
