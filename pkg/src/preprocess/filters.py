"""
User filters

Both filters keep or drop whole users based only on that user's own
check-ins, so they commute and are idempotent.
"""

import logging
from typing import Callable, List

from src.core.models import CheckIn, Dataset

logger = logging.getLogger(__name__)

UserPredicate = Callable[[List[CheckIn]], bool]


def _keep_users(ds: Dataset, predicate: UserPredicate, note: str) -> Dataset:
    grouped = ds.checkins_by_user
    # registered users without check-ins are judged on an empty list
    candidates = set(grouped) | {u.user_id for u in ds.users}
    kept = {user_id for user_id in candidates if predicate(grouped.get(user_id, []))}
    removed = len(candidates) - len(kept)

    result = ds.derive(
        note,
        checkins=tuple(c for c in ds.checkins if c.user_id in kept),
        users=tuple(u for u in ds.users if u.user_id in kept),
    )
    logger.info(f"{note}: kept {len(kept)} users, removed {removed}")
    return result


def activity_span_days(checkins: List[CheckIn]) -> int:
    """Whole days between a user's first and last check-in."""
    stamps = [c.timestamp for c in checkins]
    return (max(stamps) - min(stamps)).days


def filter_tourists(ds: Dataset, min_span_days: int = 7) -> Dataset:
    """
    Drop users active for less than `min_span_days` whole days.

    A span of exactly `min_span_days` is kept. Users without check-ins have
    no span and are dropped as well.
    """
    if min_span_days < 0:
        raise ValueError(f"min_span_days must be >= 0, got {min_span_days}")
    return _keep_users(
        ds,
        lambda items: bool(items) and activity_span_days(items) >= min_span_days,
        f"filter_tourists(min_span_days={min_span_days})",
    )


def filter_low_activity(ds: Dataset, min_checkins: int = 10) -> Dataset:
    """Drop users with fewer than `min_checkins` check-ins (0 keeps idle registered users)."""
    if min_checkins < 0:
        raise ValueError(f"min_checkins must be >= 0, got {min_checkins}")
    return _keep_users(
        ds,
        lambda items: len(items) >= min_checkins,
        f"filter_low_activity(min_checkins={min_checkins})",
    )
