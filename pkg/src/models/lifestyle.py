"""
Lifestyle analysis: activity matrices and tensors from check-ins, group
preference averaging and readable summaries of the learned components.

Rows are always ordered by (city, user_id) so the weight matrix of a
decomposition splits into contiguous per-city blocks.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.core.exceptions import AnalysisError
from src.core.models import Dataset, Gender, UserProfile

from .cp_als import ActivityTensor, TensorFactorModel
from .nmf import ActivityMatrix, FactorModel, component_names
from .tensor_ops import minmax_normalize

logger = logging.getLogger(__name__)

DayClass = Literal["weekday", "weekend", "all"]
TimeMode = Literal["hour24", "dow7"]
Grouping = Literal["city", "city_gender"]

HOUR_LABELS = [str(h) for h in range(24)]
DOW_LABELS = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"]


def ordered_users(ds: Dataset) -> List[UserProfile]:
    """Registered users (auto-registering check-in-only ids) sorted by (city, user_id)."""
    registry = ds.with_registered_users().user_index
    return sorted(registry.values(), key=lambda u: (u.city, u.user_id))


def _day_matches(weekday: int, day_class: str) -> bool:
    if day_class == "all":
        return True
    return (weekday >= 5) == (day_class == "weekend")


def build_temporal_matrix(ds: Dataset, day_class: DayClass = "weekday") -> ActivityMatrix:
    """
    Check-ins per user and hour of day (24 columns).

    Every registered user gets a row, zero rows included; weekday/weekend
    follows the calendar day of the timestamp.
    """
    if day_class not in ("weekday", "weekend", "all"):
        raise AnalysisError(f"day_class must be weekday, weekend or all, got {day_class!r}")
    users = ordered_users(ds)
    rows = {u.user_id: i for i, u in enumerate(users)}
    values = np.zeros((len(users), 24))
    for checkin in ds.checkins:
        if _day_matches(checkin.timestamp.weekday(), day_class):
            values[rows[checkin.user_id], checkin.timestamp.hour] += 1

    logger.info(f"Temporal matrix ({day_class}): {len(users)} users, {int(values.sum())} check-ins")
    return ActivityMatrix(
        values=values,
        row_keys=[u.user_id for u in users],
        col_labels=HOUR_LABELS,
        provenance={"kind": "temporal", "day_class": day_class, "cities": [u.city for u in users]},
    )


def rank_categories(ds: Dataset, top: Optional[int] = None) -> List[str]:
    """Categories by descending check-in contributions, ties by name."""
    counts = Counter()
    for checkin in ds.checkins:
        counts.update(checkin.categories)
    ranked = sorted(counts, key=lambda c: (-counts[c], c))
    return ranked if top is None else ranked[:top]


def build_spatial_matrix(ds: Dataset, categories: Optional[Sequence[str]] = None) -> ActivityMatrix:
    """
    Check-ins per user and venue category.

    A multi-category check-in adds one to each of its listed categories;
    categories not in the list are ignored. Without a list, every category
    in the data is used in rank order.
    """
    columns = list(categories) if categories is not None else rank_categories(ds)
    if len(set(columns)) != len(columns):
        raise AnalysisError("category list contains duplicates")
    users = ordered_users(ds)
    rows = {u.user_id: i for i, u in enumerate(users)}
    cols = {c: j for j, c in enumerate(columns)}

    values = np.zeros((len(users), len(columns)))
    for checkin in ds.checkins:
        for category in checkin.categories:
            j = cols.get(category)
            if j is not None:
                values[rows[checkin.user_id], j] += 1

    logger.info(f"Spatial matrix: {len(users)} users x {len(columns)} categories")
    return ActivityMatrix(
        values=values,
        row_keys=[u.user_id for u in users],
        col_labels=columns,
        provenance={"kind": "spatial", "cities": [u.city for u in users]},
    )


def build_tensor(ds: Dataset, time_mode: TimeMode = "hour24", top_p: int = 100,
                 prune_h: int = 5) -> ActivityTensor:
    """
    User x time bucket x category tensor over the top_p categories.

    Users with fewer than `prune_h` check-ins are pruned first; categories
    are then ranked by contributions of the remaining users.
    """
    if time_mode not in ("hour24", "dow7"):
        raise AnalysisError(f"time_mode must be hour24 or dow7, got {time_mode!r}")
    if top_p < 1 or prune_h < 0:
        raise AnalysisError(f"invalid tensor parameters top_p={top_p}, prune_h={prune_h}")

    per_user = Counter(c.user_id for c in ds.checkins)
    users = [u for u in ordered_users(ds) if per_user.get(u.user_id, 0) >= prune_h]
    kept = {u.user_id for u in users}
    checkins = [c for c in ds.checkins if c.user_id in kept]
    pruned = len(ordered_users(ds)) - len(users)

    categories = rank_categories(ds.derive(checkins=tuple(checkins)), top_p)
    if len(categories) < top_p:
        logger.warning(f"Only {len(categories)} categories available for the tensor (top_p={top_p})")

    labels = HOUR_LABELS if time_mode == "hour24" else DOW_LABELS
    rows = {u.user_id: i for i, u in enumerate(users)}
    cols = {c: j for j, c in enumerate(categories)}
    values = np.zeros((len(users), len(labels), len(categories)))
    for checkin in checkins:
        t = checkin.timestamp.hour if time_mode == "hour24" else checkin.timestamp.weekday()
        for category in checkin.categories:
            j = cols.get(category)
            if j is not None:
                values[rows[checkin.user_id], t, j] += 1

    logger.info(
        f"Tensor ({time_mode}): {len(users)} users (pruned {pruned} below h={prune_h}), "
        f"{len(categories)} categories"
    )
    return ActivityTensor(
        values=values,
        user_keys=[u.user_id for u in users],
        time_labels=list(labels),
        category_labels=categories,
        time_mode=time_mode,
        provenance={"prune_h": prune_h, "top_p": top_p, "cities": [u.city for u in users]},
    )


@dataclass(frozen=True)
class GroupKey:
    city: str
    gender: Optional[Gender] = None

    @property
    def label(self) -> str:
        return self.city if self.gender is None else f"{self.city}/{self.gender.value}"


@dataclass
class GroupPreferences:
    """Mean weight vector and member count per group."""

    groups: List[GroupKey]
    means: np.ndarray
    sizes: List[int]
    component_labels: List[str] = field(default_factory=list)

    def mean_of(self, key: Union[GroupKey, str]) -> np.ndarray:
        label = key.label if isinstance(key, GroupKey) else key
        for i, group in enumerate(self.groups):
            if group.label == label:
                return self.means[i]
        raise KeyError(label)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.means, columns=self.component_labels or component_names(self.means.shape[1]))
        frame.insert(0, "size", self.sizes)
        frame.insert(0, "gender", [g.gender.value if g.gender else "" for g in self.groups])
        frame.insert(0, "city", [g.city for g in self.groups])
        frame.insert(0, "group", [g.label for g in self.groups])
        return frame


def profiles_for(ds: Dataset, row_keys: Sequence[str]) -> List[UserProfile]:
    """User profiles in the row order of a matrix, tensor or model."""
    registry = ds.with_registered_users().user_index
    missing = [k for k in row_keys if k not in registry]
    if missing:
        raise AnalysisError(f"{len(missing)} row keys are not registered users, e.g. {missing[0]!r}")
    return [registry[k] for k in row_keys]


def group_preferences(model: Union[FactorModel, TensorFactorModel, np.ndarray],
                      users: Sequence[UserProfile], grouping: Grouping = "city",
                      component_labels: Optional[Sequence[str]] = None) -> GroupPreferences:
    """
    Average the weight rows of each city (or city x gender) group.

    Args:
        model: fitted model (its W is used) or a bare weight matrix
        users: profiles aligned with the rows of W
        grouping: 'city' or 'city_gender'
        component_labels: optional names for the columns

    Returns:
        GroupPreferences ordered by city, then gender; empty city x gender
        combinations are left out with a warning
    """
    W = np.asarray(model.W if hasattr(model, "W") else model, dtype=float)
    if W.shape[0] != len(users):
        raise AnalysisError(f"W has {W.shape[0]} rows but {len(users)} user profiles were given")
    if grouping not in ("city", "city_gender"):
        raise AnalysisError(f"grouping must be city or city_gender, got {grouping!r}")

    cities = sorted({u.city for u in users})
    if grouping == "city":
        candidates = [GroupKey(city) for city in cities]
    else:
        genders = [g for g in Gender if any(u.gender == g for u in users)]
        candidates = [GroupKey(city, gender) for city in cities for gender in genders]

    groups: List[GroupKey] = []
    means: List[np.ndarray] = []
    sizes: List[int] = []
    for key in candidates:
        members = [
            i for i, u in enumerate(users)
            if u.city == key.city and (key.gender is None or u.gender == key.gender)
        ]
        if not members:
            logger.warning(f"Group {key.label} has no users; omitted")
            continue
        groups.append(key)
        means.append(W[members].mean(axis=0))
        sizes.append(len(members))

    labels = list(component_labels) if component_labels is not None else component_names(W.shape[1])
    return GroupPreferences(
        groups=groups,
        means=np.vstack(means) if means else np.zeros((0, W.shape[1])),
        sizes=sizes,
        component_labels=labels,
    )


def top_components(L: np.ndarray, labels: Sequence[str], n: int = 5) -> List[List[Tuple[str, float]]]:
    """Highest-weighted labels of each component row (ties by label)."""
    L = np.atleast_2d(np.asarray(L, dtype=float))
    result = []
    for row in L:
        ranked = sorted(zip(labels, row), key=lambda item: (-item[1], item[0]))
        result.append([(label, float(weight)) for label, weight in ranked[:n]])
    return result


def describe_tensor_components(model: TensorFactorModel, n_top: int = 5) -> List[Dict[str, object]]:
    """
    Per component: min-max normalised time profile, its peak bucket and the
    top categories by normalised category weight.
    """
    time_profiles = minmax_normalize(model.L_M)
    category_weights = minmax_normalize(model.L_P)
    time_labels = model.time_labels or [str(i) for i in range(model.L_M.shape[1])]
    category_labels = model.category_labels or [str(i) for i in range(model.L_P.shape[1])]
    tops = top_components(category_weights, category_labels, n_top)

    described = []
    for r in range(model.k):
        described.append({
            "component": r,
            "weight_norm": float(np.linalg.norm(model.W[:, r])),
            "peak_time": time_labels[int(np.argmax(time_profiles[r]))],
            "time_profile": [float(v) for v in time_profiles[r]],
            "top_categories": [{"category": c, "weight": w} for c, w in tops[r]],
        })
    return described
