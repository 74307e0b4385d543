"""
Domain models for lifemine

Immutable containers for check-in streams, venue registries and user
profiles. A Dataset is built once by ingestion (or the synthetic generator)
and every later stage derives a new Dataset instead of mutating one.
"""

import dataclasses
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from functools import cached_property
from typing import Any, Dict, Iterable, List, Optional, Tuple

import pandas as pd

logger = logging.getLogger(__name__)

UNKNOWN_CITY = "unknown"
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M"


class Gender(str, Enum):
    """Demographic label supplied with the input (never inferred)."""

    MALE = "male"
    FEMALE = "female"
    UNKNOWN = "unknown"


def check_coordinates(lat: float, lon: float) -> None:
    if not -90.0 <= lat <= 90.0:
        raise ValueError(f"latitude {lat} outside [-90, 90]")
    if not -180.0 <= lon <= 180.0:
        raise ValueError(f"longitude {lon} outside [-180, 180]")


@dataclass(frozen=True)
class CheckIn:
    """One geo-tagged event. Timestamps are local civil time, minute precision."""

    user_id: str
    timestamp: datetime
    lat: float
    lon: float
    venue_id: Optional[str] = None
    categories: Tuple[str, ...] = ()

    def __post_init__(self):
        if not self.user_id:
            raise ValueError("user_id must not be empty")
        check_coordinates(self.lat, self.lon)

    @property
    def has_venue(self) -> bool:
        return self.venue_id is not None

    @property
    def is_weekend(self) -> bool:
        return self.timestamp.weekday() >= 5


@dataclass(frozen=True)
class Venue:
    """Point of interest; a venue may carry several categories."""

    venue_id: str
    lat: float
    lon: float
    categories: Tuple[str, ...] = ()

    def __post_init__(self):
        if not self.venue_id:
            raise ValueError("venue_id must not be empty")
        check_coordinates(self.lat, self.lon)


@dataclass(frozen=True)
class UserProfile:
    user_id: str
    city: str = UNKNOWN_CITY
    gender: Gender = Gender.UNKNOWN


@dataclass(frozen=True)
class Dataset:
    """
    Check-ins plus the venue and user registries they refer to.

    Equality is structural over check-ins and registries; provenance is
    free-form metadata and does not take part in comparisons.
    """

    checkins: Tuple[CheckIn, ...] = ()
    venues: Tuple[Venue, ...] = ()
    users: Tuple[UserProfile, ...] = ()
    provenance: Dict[str, Any] = field(default_factory=dict, compare=False, hash=False)

    @cached_property
    def venue_index(self) -> Dict[str, Venue]:
        """venue_id -> Venue; the first registration wins for duplicated ids."""
        index: Dict[str, Venue] = {}
        for venue in self.venues:
            index.setdefault(venue.venue_id, venue)
        return index

    @cached_property
    def user_index(self) -> Dict[str, UserProfile]:
        index: Dict[str, UserProfile] = {}
        for user in self.users:
            index.setdefault(user.user_id, user)
        return index

    @cached_property
    def checkins_by_user(self) -> Dict[str, List[CheckIn]]:
        grouped: Dict[str, List[CheckIn]] = defaultdict(list)
        for checkin in self.checkins:
            grouped[checkin.user_id].append(checkin)
        return dict(grouped)

    @property
    def cities(self) -> List[str]:
        return sorted({user.city for user in self.users})

    def derive(self, note: Optional[str] = None, **changes) -> "Dataset":
        """Copy with replaced fields; `note` is appended to the provenance history."""
        provenance = dict(self.provenance)
        if note:
            provenance["history"] = list(provenance.get("history", [])) + [note]
        return dataclasses.replace(self, provenance=provenance, **changes)

    def with_registered_users(self) -> "Dataset":
        """Auto-register users that only appear in check-ins (city unknown)."""
        known = self.user_index
        missing = sorted({c.user_id for c in self.checkins if c.user_id not in known})
        if not missing:
            return self
        logger.info(f"Auto-registering {len(missing)} users with unknown demographics")
        extra = tuple(UserProfile(user_id=uid) for uid in missing)
        return dataclasses.replace(self, users=self.users + extra)

    def to_frame(self, explode_categories: bool = False) -> pd.DataFrame:
        """
        Tabular view of the check-ins joined with user demographics.

        With ``explode_categories`` every (check-in, category) pair becomes a
        row in a ``category`` column; check-ins without categories drop out.
        """
        users = self.user_index
        records = [
            {
                "user_id": c.user_id,
                "timestamp": c.timestamp,
                "lat": c.lat,
                "lon": c.lon,
                "venue_id": c.venue_id,
                "categories": list(c.categories),
                "city": users[c.user_id].city if c.user_id in users else UNKNOWN_CITY,
            }
            for c in self.checkins
        ]
        frame = pd.DataFrame.from_records(
            records,
            columns=["user_id", "timestamp", "lat", "lon", "venue_id", "categories", "city"],
        )
        if explode_categories:
            frame = frame.explode("categories").rename(columns={"categories": "category"})
            frame = frame.dropna(subset=["category"]).reset_index(drop=True)
        return frame

    def summary(self) -> Dict[str, Any]:
        return {
            "checkins": len(self.checkins),
            "venues": len(self.venues),
            "users": len(self.users),
            "with_venue": sum(1 for c in self.checkins if c.has_venue),
        }


@dataclass
class ValidationReport:
    """Referential problems found in a Dataset; empty means clean."""

    issues: List[Tuple[str, str]] = field(default_factory=list)

    def add(self, kind: str, identifier: str) -> None:
        self.issues.append((kind, identifier))

    @property
    def is_empty(self) -> bool:
        return not self.issues

    def counts(self) -> Dict[str, int]:
        return dict(Counter(kind for kind, _ in self.issues))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "counts": self.counts(),
            "issues": [{"kind": kind, "id": ident} for kind, ident in self.issues],
        }


def validate_dataset(ds: Dataset) -> ValidationReport:
    """
    Report dangling venue references, duplicate ids and empty category sets.

    Report-only: nothing is removed or repaired.
    """
    report = ValidationReport()

    venue_counts = Counter(v.venue_id for v in ds.venues)
    for venue_id, count in venue_counts.items():
        if count > 1:
            report.add("duplicate_venue", venue_id)

    for venue in ds.venues:
        if not venue.categories:
            report.add("empty_categories", venue.venue_id)

    user_counts = Counter(u.user_id for u in ds.users)
    for user_id, count in user_counts.items():
        if count > 1:
            report.add("duplicate_user", user_id)

    seen_dangling = set()
    for checkin in ds.checkins:
        if checkin.venue_id is not None and checkin.venue_id not in venue_counts:
            if checkin.venue_id not in seen_dangling:
                seen_dangling.add(checkin.venue_id)
                report.add("dangling_venue", checkin.venue_id)

    if not report.is_empty:
        logger.warning(f"Dataset validation found issues: {report.counts()}")
    return report


def categories_of(checkins: Iterable[CheckIn]) -> Counter:
    """Category -> number of (check-in, category) contributions."""
    counts: Counter = Counter()
    for checkin in checkins:
        counts.update(checkin.categories)
    return counts
