"""
lifemine - Parsers Module
Readers and writers for check-in, venue and user tables (CSV / JSONL)
"""

from .base_parser import BaseParser, FileTypeDetector, IngestReport, ParsingError, RowReject
from .checkin_parser import (
    CheckInParser,
    UserParser,
    VenueParser,
    ingest_checkins,
    ingest_dataset,
    load_dataset,
    write_dataset,
)

__all__ = [
    'BaseParser',
    'FileTypeDetector',
    'IngestReport',
    'ParsingError',
    'RowReject',
    'CheckInParser',
    'VenueParser',
    'UserParser',
    'ingest_checkins',
    'ingest_dataset',
    'load_dataset',
    'write_dataset',
]
