"""
Check-in, venue and user parsers for lifemine

Row schemas (pydantic) for the three input tables, the parsers built on
them, and the dataset-level ingestion / export helpers.

File layouts:
    checkins: user_id,timestamp,lat,lon,venue_id,categories
    venues:   venue_id,lat,lon,categories
    users:    user_id,city,gender
Timestamps are ``YYYY-MM-DDTHH:MM`` without offset; categories are
``|``-separated in CSV and may be a list or a ``|`` string in JSONL.
"""

import logging
from datetime import datetime
from pathlib import Path
from typing import Any, BinaryIO, Dict, List, Optional, Tuple, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.core.models import (
    TIMESTAMP_FORMAT,
    UNKNOWN_CITY,
    CheckIn,
    Dataset,
    Gender,
    UserProfile,
    Venue,
)

from .base_parser import BaseParser, FileTypeDetector, IngestReport, ParsingError

logger = logging.getLogger(__name__)

CHECKIN_COLUMNS = ("user_id", "timestamp", "lat", "lon", "venue_id", "categories")
VENUE_COLUMNS = ("venue_id", "lat", "lon", "categories")
USER_COLUMNS = ("user_id", "city", "gender")

CATEGORY_SEPARATOR = "|"


def split_categories(value: Any) -> Tuple[str, ...]:
    """Normalise a category field to an ordered tuple without duplicates or blanks."""
    if value is None:
        return ()
    if isinstance(value, str):
        items = value.split(CATEGORY_SEPARATOR)
    elif isinstance(value, (list, tuple)):
        items = [str(v) for v in value]
    else:
        raise ValueError(f"categories must be a string or a list, got {type(value).__name__}")
    seen: Dict[str, None] = {}
    for item in items:
        item = item.strip()
        if item:
            seen.setdefault(item, None)
    return tuple(seen)


class CheckInRow(BaseModel):
    model_config = ConfigDict(extra="forbid", str_strip_whitespace=True)

    user_id: str = Field(min_length=1)
    timestamp: datetime
    lat: float = Field(ge=-90.0, le=90.0)
    lon: float = Field(ge=-180.0, le=180.0)
    venue_id: Optional[str] = None
    categories: Tuple[str, ...] = ()

    @field_validator("timestamp", mode="before")
    @classmethod
    def _parse_timestamp(cls, value: Any) -> datetime:
        if isinstance(value, datetime):
            return value
        if not isinstance(value, str):
            raise ValueError("timestamp must be a YYYY-MM-DDTHH:MM string")
        return datetime.strptime(value.strip(), TIMESTAMP_FORMAT)

    @field_validator("venue_id", mode="before")
    @classmethod
    def _empty_venue(cls, value: Any) -> Optional[str]:
        if value is None:
            return None
        value = str(value).strip()
        return value or None

    @field_validator("categories", mode="before")
    @classmethod
    def _split(cls, value: Any) -> Tuple[str, ...]:
        return split_categories(value)


class VenueRow(BaseModel):
    model_config = ConfigDict(extra="forbid", str_strip_whitespace=True)

    venue_id: str = Field(min_length=1)
    lat: float = Field(ge=-90.0, le=90.0)
    lon: float = Field(ge=-180.0, le=180.0)
    categories: Tuple[str, ...] = ()

    @field_validator("categories", mode="before")
    @classmethod
    def _split(cls, value: Any) -> Tuple[str, ...]:
        return split_categories(value)


class UserRow(BaseModel):
    model_config = ConfigDict(extra="forbid", str_strip_whitespace=True)

    user_id: str = Field(min_length=1)
    city: str = UNKNOWN_CITY
    gender: Gender = Gender.UNKNOWN

    @field_validator("city", mode="before")
    @classmethod
    def _default_city(cls, value: Any) -> str:
        return (str(value).strip() if value is not None else "") or UNKNOWN_CITY

    @field_validator("gender", mode="before")
    @classmethod
    def _default_gender(cls, value: Any) -> Any:
        if value is None or (isinstance(value, str) and not value.strip()):
            return Gender.UNKNOWN
        return value.strip().lower() if isinstance(value, str) else value


class CheckInParser(BaseParser[CheckIn]):
    """Parser for check-in streams."""

    row_model = CheckInRow
    columns = CHECKIN_COLUMNS
    required_columns = ("user_id", "timestamp", "lat", "lon")

    def __init__(self):
        super().__init__("CheckInParser")

    def to_record(self, row: CheckInRow) -> CheckIn:
        return CheckIn(
            user_id=row.user_id,
            timestamp=row.timestamp,
            lat=row.lat,
            lon=row.lon,
            venue_id=row.venue_id,
            categories=row.categories,
        )


class VenueParser(BaseParser[Venue]):
    """Parser for venue registries."""

    row_model = VenueRow
    columns = VENUE_COLUMNS
    required_columns = VENUE_COLUMNS

    def __init__(self):
        super().__init__("VenueParser")

    def to_record(self, row: VenueRow) -> Venue:
        return Venue(venue_id=row.venue_id, lat=row.lat, lon=row.lon, categories=row.categories)


class UserParser(BaseParser[UserProfile]):
    """Parser for user profile registries."""

    row_model = UserRow
    columns = USER_COLUMNS
    required_columns = ("user_id",)

    def __init__(self):
        super().__init__("UserParser")

    def to_record(self, row: UserRow) -> UserProfile:
        return UserProfile(user_id=row.user_id, city=row.city, gender=row.gender)


def ingest_checkins(source: BinaryIO, file_format: str = "csv",
                    source_name: str = "<stream>") -> Dataset:
    """
    Ingest a check-in stream into a Dataset.

    Rejected rows are logged and recorded in ``provenance['ingest']``
    (line numbers and reasons); users seen only in check-ins are
    registered with unknown demographics.

    Raises:
        ParsingError: the stream itself is unreadable
    """
    checkins, report = CheckInParser().parse_stream(source, file_format, source_name)
    dataset = Dataset(
        checkins=tuple(checkins),
        provenance={"source": source_name, "ingest": {"checkins": report.to_dict()}},
    )
    return dataset.with_registered_users()


def ingest_dataset(checkins_path: Union[str, Path],
                   venues_path: Optional[Union[str, Path]] = None,
                   users_path: Optional[Union[str, Path]] = None,
                   file_format: Optional[str] = None) -> Tuple[Dataset, Dict[str, IngestReport]]:
    """
    Read check-ins plus optional venue and user registries from files.

    Returns:
        (Dataset, {"checkins": report, "venues": report, "users": report})
    """
    reports: Dict[str, IngestReport] = {}

    checkins, reports["checkins"] = CheckInParser().parse_file(checkins_path, file_format)
    venues: List[Venue] = []
    users: List[UserProfile] = []
    if venues_path is not None:
        venues, reports["venues"] = VenueParser().parse_file(venues_path, file_format)
    if users_path is not None:
        users, reports["users"] = UserParser().parse_file(users_path, file_format)

    dataset = Dataset(
        checkins=tuple(checkins),
        venues=tuple(venues),
        users=tuple(users),
        provenance={
            "source": str(checkins_path),
            "ingest": {name: r.to_dict() for name, r in reports.items()},
        },
    )
    return dataset.with_registered_users(), reports


def _find_table(directory: Path, stem: str) -> Optional[Path]:
    for suffix in (".csv", ".jsonl"):
        candidate = directory / f"{stem}{suffix}"
        if candidate.is_file():
            return candidate
    return None


def load_dataset(directory: Union[str, Path]) -> Dataset:
    """
    Load a dataset directory (checkins / venues / users as .csv or .jsonl).

    Raises:
        ParsingError: the directory has no check-in table
    """
    directory = Path(directory)
    checkins_path = _find_table(directory, "checkins")
    if checkins_path is None:
        raise ParsingError(f"No checkins.csv or checkins.jsonl in {directory}", str(directory))
    dataset, _ = ingest_dataset(
        checkins_path,
        _find_table(directory, "venues"),
        _find_table(directory, "users"),
    )
    return dataset


def checkins_frame(checkins) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "user_id": c.user_id,
                "timestamp": c.timestamp.strftime(TIMESTAMP_FORMAT),
                "lat": c.lat,
                "lon": c.lon,
                "venue_id": c.venue_id if c.venue_id is not None else "",
                "categories": "|".join(c.categories),
            }
            for c in checkins
        ],
        columns=list(CHECKIN_COLUMNS),
    )


def write_dataset(dataset: Dataset, directory: Union[str, Path]) -> Path:
    """Write checkins.csv, venues.csv and users.csv; re-ingesting yields an equal Dataset."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    checkins_frame(dataset.checkins).to_csv(directory / "checkins.csv", index=False)
    pd.DataFrame(
        [
            {"venue_id": v.venue_id, "lat": v.lat, "lon": v.lon, "categories": "|".join(v.categories)}
            for v in dataset.venues
        ],
        columns=list(VENUE_COLUMNS),
    ).to_csv(directory / "venues.csv", index=False)
    pd.DataFrame(
        [{"user_id": u.user_id, "city": u.city, "gender": u.gender.value} for u in dataset.users],
        columns=list(USER_COLUMNS),
    ).to_csv(directory / "users.csv", index=False)

    logger.info(f"Wrote dataset to {directory}: {dataset.summary()}")
    return directory


__all__ = [
    "CheckInParser",
    "VenueParser",
    "UserParser",
    "FileTypeDetector",
    "ingest_checkins",
    "ingest_dataset",
    "load_dataset",
    "write_dataset",
]
