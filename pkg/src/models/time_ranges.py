"""
Work-rest time ranges of a 24-hour activity profile

Starting from 5 am and walking the day cyclically, the first ~15% of the
activity mass is "get up", the next ~70% "most active" and the last ~15%
"go to bed". The circadian bands below are the reference ranges the three
temporal lifestyles are compared against.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.core.exceptions import AnalysisError

logger = logging.getLogger(__name__)

ANCHOR_HOUR = 5
FRACTIONS = (0.15, 0.70, 0.15)
# cumulative shares are compared with this slack so 0.15 written as a sum still counts
_CUM_TOLERANCE = 1e-12

HourRange = Tuple[int, int]

# (start, end) hours per lifestyle, end exclusive, cyclic
CIRCADIAN_BANDS: Dict[str, Dict[str, HourRange]] = {
    "early_bird": {"get_up": (6, 8), "most_active": (7, 14), "go_to_bed": (20, 22)},
    "intermediate": {"get_up": (8, 10), "most_active": (14, 20), "go_to_bed": (22, 24)},
    "night_owl": {"get_up": (10, 12), "most_active": (21, 1), "go_to_bed": (3, 6)},
}
RANGE_NAMES = ("get_up", "most_active", "go_to_bed")


def cyclic_hours(start: int, end: int) -> List[int]:
    """Hours from start to end inclusive, wrapping past midnight."""
    length = (end - start) % 24
    return [(start + i) % 24 for i in range(length + 1)]


def in_cyclic_interval(hour: int, start: int, end: int) -> bool:
    return (hour - start) % 24 <= (end - start) % 24


@dataclass(frozen=True)
class TimeRanges:
    """Inclusive hour intervals; an interval may wrap past midnight (e.g. (21, 1))."""

    get_up: HourRange
    most_active: HourRange
    go_to_bed: HourRange
    fractions: Tuple[float, float, float] = FRACTIONS
    anchor_hour: int = ANCHOR_HOUR

    def as_dict(self) -> Dict[str, HourRange]:
        return {"get_up": self.get_up, "most_active": self.most_active, "go_to_bed": self.go_to_bed}

    def to_dict(self) -> Dict[str, object]:
        return {
            **{name: list(value) for name, value in self.as_dict().items()},
            "fractions": list(self.fractions),
            "anchor_hour": self.anchor_hour,
        }


def extract_time_ranges(profile: Sequence[float], anchor_hour: int = ANCHOR_HOUR,
                        fractions: Tuple[float, float, float] = FRACTIONS) -> TimeRanges:
    """
    Split a 24-hour profile into get-up, most-active and go-to-bed ranges.

    get_up runs from the first hour with mass to the first hour where the
    cumulative share reaches fractions[0]; most_active ends where it
    reaches fractions[0] + fractions[1]; go_to_bed ends at the last hour
    with mass. Each later range starts at the next hour carrying mass.
    A range that has nothing left to cover collapses onto the previous
    range's last hour.

    Raises:
        AnalysisError: wrong length, negative entries or an all-zero profile
    """
    values = np.asarray(profile, dtype=float)
    if values.shape != (24,):
        raise AnalysisError(f"time profile must have 24 hourly values, got shape {values.shape}")
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise AnalysisError("time profile must be finite and non-negative")
    total = values.sum()
    if total <= 0:
        raise AnalysisError("time profile is all-zero; no ranges can be extracted")

    walk = [(anchor_hour + i) % 24 for i in range(24)]
    mass = values[walk]
    cumulative = np.cumsum(mass) / total
    support = [i for i in range(24) if mass[i] > 0]
    last = support[-1]

    def first_reaching(share: float) -> int:
        return int(np.argmax(cumulative >= share - _CUM_TOLERANCE))

    def next_support(after: int) -> Optional[int]:
        return next((i for i in support if i > after), None)

    first_cut = first_reaching(fractions[0])
    second_cut = max(first_reaching(fractions[0] + fractions[1]), first_cut)

    get_up = (walk[support[0]], walk[first_cut])

    start = next_support(first_cut)
    if second_cut == first_cut or start is None:
        most_active = (walk[first_cut], walk[first_cut])
    else:
        most_active = (walk[start], walk[second_cut])

    start = next_support(second_cut)
    if start is None:
        go_to_bed = (walk[second_cut], walk[second_cut])
    else:
        go_to_bed = (walk[start], walk[last])

    return TimeRanges(get_up, most_active, go_to_bed, tuple(fractions), anchor_hour)


def band_hours(band: HourRange) -> List[int]:
    """Hours covered by a reference band (end exclusive)."""
    start, end = band
    return [(start + i) % 24 for i in range((end - start) % 24 or 24)]


def band_activity_share(profile: Sequence[float], band: HourRange) -> float:
    """Fraction of the profile's mass inside a band."""
    values = np.asarray(profile, dtype=float)
    total = values.sum()
    if total <= 0:
        return 0.0
    return float(values[band_hours(band)].sum() / total)


def bands_agree(ranges: TimeRanges, lifestyle: str, slack_hours: int = 1) -> bool:
    """Both ends of every range fall inside the lifestyle's bands widened by `slack_hours`."""
    bands = CIRCADIAN_BANDS[lifestyle]
    for name, (lo, hi) in ranges.as_dict().items():
        start, end = bands[name]
        wide_start, wide_end = (start - slack_hours) % 24, (end + slack_hours) % 24
        if not (in_cyclic_interval(lo, wide_start, wide_end) and in_cyclic_interval(hi, wide_start, wide_end)):
            logger.debug(f"{lifestyle} {name} range {lo}-{hi} outside band {start}-{end} +/- {slack_hours}h")
            return False
    return True


def anchored_centre(profile: Sequence[float], anchor_hour: int = ANCHOR_HOUR) -> float:
    """Centre of mass of a profile measured in hours after the anchor."""
    values = np.asarray(profile, dtype=float)
    positions = (np.arange(24) - anchor_hour) % 24
    total = values.sum()
    return float((positions * values).sum() / total) if total > 0 else float("inf")


def label_circadian_components(L: np.ndarray, anchor_hour: int = ANCHOR_HOUR) -> List[str]:
    """
    Name temporal components by how late their activity sits in the day.

    The earliest centre of mass is the early bird, the latest the night
    owl, everything in between intermediate (numbered when there are
    several).
    """
    rows = np.atleast_2d(np.asarray(L, dtype=float))
    k = rows.shape[0]
    if k == 1:
        return ["intermediate"]
    order = sorted(range(k), key=lambda r: (anchored_centre(rows[r], anchor_hour), r))
    labels = [""] * k
    middle = order[1:-1]
    labels[order[0]] = "early_bird"
    labels[order[-1]] = "night_owl"
    for rank, r in enumerate(middle, 1):
        labels[r] = "intermediate" if len(middle) == 1 else f"intermediate_{rank}"
    return labels
