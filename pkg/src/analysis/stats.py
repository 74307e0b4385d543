"""
City-level descriptive statistics for check-in datasets

Visiting frequency per venue, its spread per category, the complementary
CDF of venue popularity, and category shares per hour / weekday / month.
All functions aggregate an immutable Dataset through pandas and never
modify it.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.core.models import Dataset, Venue

logger = logging.getLogger(__name__)

Bucketing = Literal["hour24", "dow7", "month12"]
DayFilter = Literal["all", "weekday", "weekend"]

BUCKETINGS: Dict[str, Tuple[List[int], List[str]]] = {
    "hour24": (list(range(24)), [f"{h:02d}" for h in range(24)]),
    "dow7": (list(range(7)), ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"]),
    "month12": (
        list(range(1, 13)),
        ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"],
    ),
}
DAY_FILTERS = ("all", "weekday", "weekend")


@dataclass(frozen=True)
class VisitStats:
    venue_id: str
    visits: int
    unique_visitors: int
    visiting_frequency: float


@dataclass(frozen=True)
class BoxStats:
    """Five-number summary (linear-interpolation quantiles)."""

    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    count: int

    def to_dict(self) -> Dict[str, float]:
        return {
            "min": self.minimum,
            "q1": self.q1,
            "median": self.median,
            "q3": self.q3,
            "max": self.maximum,
            "venues": self.count,
        }


@dataclass
class ShareSeries:
    """
    Category shares per time bucket.

    ``shares[b, c]`` is the fraction of bucket ``b``'s check-in/category
    contributions that belong to ``categories[c]``; ``totals[b]`` is that
    bucket's contribution count over all categories. Shares in a bucket
    sum to at most 1, the rest being other categories.
    """

    bucketing: str
    day_filter: str
    buckets: List[int]
    labels: List[str]
    categories: List[str]
    shares: np.ndarray
    totals: np.ndarray
    city: Optional[str] = None
    category_totals: Dict[str, int] = field(default_factory=dict)

    def share_of(self, category: str) -> np.ndarray:
        return self.shares[:, self.categories.index(category)]

    def other(self) -> np.ndarray:
        return np.clip(1.0 - self.shares.sum(axis=1), 0.0, 1.0) * (self.totals > 0)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.shares, columns=self.categories)
        frame.insert(0, "total", self.totals.astype(int))
        frame.insert(0, "label", self.labels)
        frame.insert(0, "bucket", self.buckets)
        frame["other"] = self.other()
        return frame


def restrict_to_city(ds: Dataset, city: Optional[str]) -> Dataset:
    """Check-ins and users of one city (None keeps everything)."""
    if city is None:
        return ds
    members = {u.user_id for u in ds.users if u.city == city}
    if not members:
        logger.warning(f"No users registered for city '{city}'")
    return ds.derive(
        f"city={city}",
        checkins=tuple(c for c in ds.checkins if c.user_id in members),
        users=tuple(u for u in ds.users if u.user_id in members),
    )


def visiting_frequency(ds: Dataset) -> List[VisitStats]:
    """
    Visits divided by unique visitors, one record per venue with check-ins.

    Venue-less check-ins are ignored; records are ordered by venue_id.
    """
    frame = ds.to_frame()
    frame = frame[frame["venue_id"].notna()]
    if frame.empty:
        return []
    grouped = frame.groupby("venue_id", sort=True)["user_id"].agg(["size", "nunique"])
    return [
        VisitStats(
            venue_id=str(venue_id),
            visits=int(row["size"]),
            unique_visitors=int(row["nunique"]),
            visiting_frequency=float(row["size"]) / float(row["nunique"]),
        )
        for venue_id, row in grouped.iterrows()
    ]


def visit_stats_frame(stats: Sequence[VisitStats]) -> pd.DataFrame:
    return pd.DataFrame(
        [(s.venue_id, s.visits, s.unique_visitors, s.visiting_frequency) for s in stats],
        columns=["venue_id", "visits", "unique_visitors", "visiting_frequency"],
    )


def box_stats(values: Iterable[float]) -> BoxStats:
    data = np.asarray(list(values), dtype=float)
    q = np.quantile(data, [0.0, 0.25, 0.5, 0.75, 1.0], method="linear")
    return BoxStats(*(float(v) for v in q), count=int(data.size))


def category_box_stats(stats: Sequence[VisitStats],
                       venues: Union[Mapping[str, Venue], Iterable[Venue]]) -> Dict[str, BoxStats]:
    """
    Five-number summary of visiting frequency per venue category.

    A venue contributes to each of its categories; stats for venues missing
    from the registry are skipped. Categories come back sorted by name.
    """
    registry = venues if isinstance(venues, Mapping) else {v.venue_id: v for v in venues}
    per_category: Dict[str, List[float]] = {}
    skipped = 0
    for stat in stats:
        venue = registry.get(stat.venue_id)
        if venue is None:
            skipped += 1
            continue
        for category in venue.categories:
            per_category.setdefault(category, []).append(stat.visiting_frequency)
    if skipped:
        logger.warning(f"{skipped} venues with check-ins are not in the registry; left out of box stats")
    return {category: box_stats(values) for category, values in sorted(per_category.items())}


def box_stats_frame(boxes: Mapping[str, BoxStats]) -> pd.DataFrame:
    return pd.DataFrame(
        [{"category": name, **box.to_dict()} for name, box in boxes.items()],
        columns=["category", "min", "q1", "median", "q3", "max", "venues"],
    )


def ccdf(counts: Iterable[float]) -> List[Tuple[float, float]]:
    """
    P(count >= v) for every distinct value v, in increasing v.

    The first probability is 1.0 and the sequence never increases.
    """
    series = pd.Series(list(counts), dtype=float)
    if series.empty:
        return []
    if (series < 0).any():
        raise ValueError("ccdf counts must be non-negative")
    n = len(series)
    at_value = series.value_counts().sort_index()
    # venues with a count >= v = n - venues with a smaller count
    at_least = n - at_value.cumsum().shift(fill_value=0)
    return [(_plain(v), float(c) / n) for v, c in at_least.items()]


def _plain(value: float) -> Union[int, float]:
    return int(value) if float(value).is_integer() else float(value)


def venue_checkin_counts(ds: Dataset) -> List[int]:
    return [s.visits for s in visiting_frequency(ds)]


def _tokens_overlap(candidate: str, chosen: str) -> bool:
    a, b = candidate.split(), chosen.split()
    shorter, longer = (a, b) if len(a) <= len(b) else (b, a)
    return bool(shorter) and longer[-len(shorter):] == shorter


def select_top_categories(totals: pd.Series, top_n: int, dedupe: bool = True) -> List[str]:
    """
    Most frequent categories (ties by name), skipping near-duplicates.

    With ``dedupe`` a category whose word sequence ends with an already
    chosen name, or is the ending of one, is skipped
    (e.g. "Restaurant" after "American Restaurant").
    """
    ranked = sorted(totals.items(), key=lambda item: (-item[1], item[0]))
    chosen: List[str] = []
    for category, _ in ranked:
        if len(chosen) >= top_n:
            break
        if dedupe and any(_tokens_overlap(category, c) for c in chosen):
            logger.debug(f"Category '{category}' suppressed as a duplicate")
            continue
        chosen.append(category)
    return chosen


def _bucket_of(timestamps: pd.Series, bucketing: str) -> pd.Series:
    if bucketing == "hour24":
        return timestamps.dt.hour
    if bucketing == "dow7":
        return timestamps.dt.dayofweek
    return timestamps.dt.month


def apply_day_filter(frame: pd.DataFrame, day_filter: str) -> pd.DataFrame:
    if day_filter not in DAY_FILTERS:
        raise ValueError(f"day_filter must be one of {DAY_FILTERS}, got {day_filter!r}")
    if day_filter == "all" or frame.empty:
        return frame
    weekend = pd.to_datetime(frame["timestamp"]).dt.dayofweek >= 5
    return frame[weekend] if day_filter == "weekend" else frame[~weekend]


def share_series(ds: Dataset, bucketing: Bucketing = "hour24", top_n: int = 10,
                 day_filter: DayFilter = "all", dedupe: bool = True,
                 city: Optional[str] = None) -> ShareSeries:
    """
    Share of the top categories in each time bucket.

    Args:
        ds: dataset whose check-ins carry categories
        bucketing: 'hour24', 'dow7' (0 = Monday) or 'month12'
        top_n: number of categories to report
        day_filter: 'all', 'weekday' or 'weekend' by calendar day
        dedupe: apply the near-duplicate category rule
        city: restrict to users of one city

    Returns:
        ShareSeries over every bucket of the bucketing (empty buckets report 0)
    """
    if bucketing not in BUCKETINGS:
        raise ValueError(f"bucketing must be one of {tuple(BUCKETINGS)}, got {bucketing!r}")
    if top_n < 1:
        raise ValueError(f"top_n must be >= 1, got {top_n}")
    buckets, labels = BUCKETINGS[bucketing]

    frame = restrict_to_city(ds, city).to_frame(explode_categories=True)
    frame = apply_day_filter(frame, day_filter)

    if frame.empty:
        categories: List[str] = []
        counts = pd.DataFrame(index=buckets)
        totals = pd.Series(0, index=buckets)
        category_totals: Dict[str, int] = {}
    else:
        frame = frame.assign(bucket=_bucket_of(pd.to_datetime(frame["timestamp"]), bucketing))
        by_category = frame["category"].value_counts()
        categories = select_top_categories(by_category, top_n, dedupe)
        category_totals = {c: int(by_category[c]) for c in categories}
        totals = frame.groupby("bucket").size().reindex(buckets, fill_value=0)
        counts = (
            frame[frame["category"].isin(categories)]
            .groupby(["bucket", "category"]).size()
            .unstack(fill_value=0)
            .reindex(index=buckets, columns=categories, fill_value=0)
        )

    total_values = totals.to_numpy(dtype=float)
    count_values = counts.to_numpy(dtype=float).reshape(len(buckets), len(categories))
    shares = np.zeros_like(count_values)
    np.divide(count_values, total_values[:, None], out=shares, where=total_values[:, None] > 0)

    if len(categories) < top_n:
        logger.info(f"share_series: only {len(categories)} categories available (asked for {top_n})")
    return ShareSeries(
        bucketing=bucketing,
        day_filter=day_filter,
        buckets=list(buckets),
        labels=list(labels),
        categories=categories,
        shares=shares,
        totals=total_values,
        city=city,
        category_totals=category_totals,
    )


def peak_buckets(series: ShareSeries, category: str) -> List[int]:
    """Buckets where the category's share is highest (all of them on ties)."""
    curve = series.share_of(category)
    if not np.any(curve > 0):
        return []
    return [b for b, v in zip(series.buckets, curve) if v == curve.max()]
