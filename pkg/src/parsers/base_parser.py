"""
Base Parser Classes for lifemine

Provides the abstract record parser, the ingestion report and the format
detector shared by the check-in, venue and user parsers. Parsers stream
CSV or JSONL input, validate every row against a pydantic schema and keep
going past bad rows: each rejected row is reported with its line number.
"""

import csv
import io
import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, BinaryIO, Dict, Generic, Iterator, List, Optional, TextIO, Tuple, Type, TypeVar, Union

from pydantic import BaseModel, ValidationError

logger = logging.getLogger(__name__)

SUPPORTED_FORMATS = ("csv", "jsonl")

RecordT = TypeVar("RecordT")


class ParsingError(Exception):
    """Fatal error: the stream as a whole cannot be read."""

    def __init__(self, message: str, file_path: Optional[str] = None, line_number: Optional[int] = None):
        self.file_path = file_path
        self.line_number = line_number
        super().__init__(message)


@dataclass(frozen=True)
class RowReject:
    line_number: int
    reason: str


@dataclass
class IngestReport:
    """Row accounting for one parsed stream: accepted + rejected = total rows."""

    source: str
    file_type: str
    total_rows: int = 0
    accepted_rows: int = 0
    rejects: List[RowReject] = field(default_factory=list)

    def add_reject(self, line_number: int, reason: str) -> None:
        self.rejects.append(RowReject(line_number, reason))
        logger.warning(f"{self.source}:{line_number}: row rejected ({reason})")

    @property
    def rejected_rows(self) -> int:
        return len(self.rejects)

    @property
    def rejected_lines(self) -> List[int]:
        return [r.line_number for r in self.rejects]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "source": self.source,
            "file_type": self.file_type,
            "total_rows": self.total_rows,
            "accepted_rows": self.accepted_rows,
            "rejected_rows": self.rejected_rows,
            "rejects": [{"line": r.line_number, "reason": r.reason} for r in self.rejects],
        }


def _describe(error: ValidationError) -> str:
    parts = []
    for err in error.errors():
        location = ".".join(str(p) for p in err.get("loc", ())) or "row"
        parts.append(f"{location}: {err.get('msg')}")
    return "; ".join(parts)


class BaseParser(ABC, Generic[RecordT]):
    """
    Abstract base class for all record parsers.

    Subclasses declare the pydantic row schema, the CSV columns they need
    and how a validated row becomes a domain object.
    """

    row_model: Type[BaseModel]
    columns: Tuple[str, ...] = ()
    required_columns: Tuple[str, ...] = ()

    def __init__(self, parser_name: str):
        self.parser_name = parser_name
        self.logger = logging.getLogger(f"{__name__}.{parser_name}")

    @abstractmethod
    def to_record(self, row: BaseModel) -> RecordT:
        """Convert a validated row into the domain object."""

    def parse_stream(self, source: Union[BinaryIO, TextIO], file_format: str = "csv",
                     source_name: str = "<stream>") -> Tuple[List[RecordT], IngestReport]:
        """
        Parse a whole stream.

        Args:
            source: byte or text stream
            file_format: 'csv' or 'jsonl'
            source_name: label used in logs and in the report

        Returns:
            (accepted records in input order, IngestReport)

        Raises:
            ParsingError: unsupported format, unreadable stream or missing CSV columns
        """
        if file_format not in SUPPORTED_FORMATS:
            raise ParsingError(f"Unsupported format '{file_format}'", source_name)

        report = IngestReport(source=source_name, file_type=file_format)
        records: List[RecordT] = []
        text = self._as_text(source, source_name)

        rows = self._csv_rows(text, source_name) if file_format == "csv" else self._jsonl_rows(text)
        try:
            for line_number, payload, problem in rows:
                report.total_rows += 1
                if problem is not None:
                    report.add_reject(line_number, problem)
                    continue
                try:
                    row = self.row_model.model_validate(payload)
                    records.append(self.to_record(row))
                except ValidationError as e:
                    report.add_reject(line_number, _describe(e))
                except ValueError as e:
                    report.add_reject(line_number, str(e))
                else:
                    report.accepted_rows += 1
        except (UnicodeDecodeError, csv.Error) as e:
            raise ParsingError(f"Failed to read {source_name}: {e}", source_name)

        self.logger.info(
            f"Parsed {source_name}: {report.accepted_rows} accepted, {report.rejected_rows} rejected"
        )
        return records, report

    def parse_file(self, file_path: Union[str, Path],
                   file_format: Optional[str] = None) -> Tuple[List[RecordT], IngestReport]:
        path = Path(file_path)
        if not path.is_file():
            raise ParsingError(f"File not found: {file_path}", str(file_path))
        file_format = file_format or FileTypeDetector.detect_format(path)
        try:
            with open(path, "rb") as f:
                return self.parse_stream(f, file_format, source_name=str(path))
        except OSError as e:
            raise ParsingError(f"Failed to read file {file_path}: {e}", str(file_path))

    @staticmethod
    def _as_text(source: Union[BinaryIO, TextIO], source_name: str) -> TextIO:
        try:
            if isinstance(source, io.TextIOBase):
                return source
            return io.TextIOWrapper(source, encoding="utf-8", newline="")
        except Exception as e:
            raise ParsingError(f"Unreadable stream {source_name}: {e}", source_name)

    def _csv_rows(self, text: TextIO, source_name: str) -> Iterator[Tuple[int, Dict[str, str], Optional[str]]]:
        reader = csv.reader(text)
        header = next(reader, None)
        if header is None:
            return
        header = [h.strip() for h in header]
        missing = [c for c in self.required_columns if c not in header]
        if missing:
            raise ParsingError(f"{source_name}: missing columns {missing}", source_name, 1)

        for fields in reader:
            if not fields or all(not f.strip() for f in fields):
                continue
            line_number = reader.line_num
            if len(fields) != len(header):
                yield line_number, {}, f"expected {len(header)} fields, got {len(fields)}"
                continue
            yield line_number, dict(zip(header, fields)), None

    @staticmethod
    def _jsonl_rows(text: TextIO) -> Iterator[Tuple[int, Dict[str, Any], Optional[str]]]:
        for line_number, line in enumerate(text, 1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as e:
                yield line_number, {}, f"invalid JSON: {e.msg}"
                continue
            if not isinstance(payload, dict):
                yield line_number, {}, "JSON line is not an object"
                continue
            yield line_number, payload, None


class FileTypeDetector:
    """
    Utility class to pick the input format of a file.
    """

    @staticmethod
    def detect_format(file_path: Union[str, Path]) -> str:
        """
        Detect csv or jsonl from the extension, falling back to the first character.

        Returns:
            'csv' or 'jsonl'
        """
        path = Path(file_path)
        extension = path.suffix.lower()
        if extension in (".jsonl", ".ndjson", ".json"):
            return "jsonl"
        if extension in (".csv", ".txt"):
            return "csv"
        try:
            with open(path, "r", encoding="utf-8", errors="replace") as f:
                head = f.read(64).lstrip()
            return "jsonl" if head.startswith("{") else "csv"
        except OSError:
            return "csv"
