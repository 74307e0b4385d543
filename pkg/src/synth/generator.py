"""
Synthetic check-in generator with planted ground truth

Every user mixes a few temporal lifestyles (24-hour profiles) and a few
spatial lifestyles (category distributions). Counts are drawn per
(user, temporal component, hour) so the hourly tallies of a generated
Dataset equal the sample returned by generate_matrix for the same seed.

Random streams (all derived from SynthSpec.seed):
    users     genders and per-user weights
    affinity  default category affinities
    counts    Poisson counts per (user, component, hour)
    events    day, minute, category and venue of every event
    spatial   Poisson sample of the spatial matrix
    offsets   owners and times of planted offset posts
"""

import json
import logging
import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.core.app import SeedStreams
from src.core.exceptions import ConfigurationError
from src.core.models import CheckIn, Dataset, Gender, UserProfile, Venue
from src.models.nmf import ActivityMatrix
from src.models.lifestyle import HOUR_LABELS
from src.models.tensor_ops import reconstruct_tensor
from src.preprocess.geo import EARTH_RADIUS_M, offset_north

logger = logging.getLogger(__name__)

TEMPORAL_NAMES = ["early_bird", "intermediate", "night_owl"]

# hour -> share of activity for the three default temporal lifestyles
_BAND_MASSES = {
    "early_bird": {6: 0.08, 7: 0.08, **{h: 0.10 for h in range(8, 15)}, 20: 0.05, 21: 0.05, 22: 0.04},
    "intermediate": {8: 0.08, 9: 0.08, **{h: 0.10 for h in range(14, 21)}, 22: 0.05, 23: 0.05, 0: 0.04},
    "night_owl": {10: 0.08, 11: 0.08, **{h: 0.14 for h in (21, 22, 23, 0, 1)}, 3: 0.07, 4: 0.07},
}


def band_profiles() -> np.ndarray:
    """Early bird, intermediate and night owl hourly profiles (3 x 24, unit mass)."""
    profiles = np.zeros((3, 24))
    for r, name in enumerate(TEMPORAL_NAMES):
        for hour, share in _BAND_MASSES[name].items():
            profiles[r, hour] = share
    return profiles / profiles.sum(axis=1, keepdims=True)


class CitySegment(BaseModel):
    """A share of a city's users with its own temporal weights."""

    model_config = ConfigDict(extra="forbid")

    share: float = Field(gt=0, le=1)
    temporal_weights: List[float]


class CitySpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = Field(min_length=1)
    n_users: int = Field(ge=1)
    female_fraction: float = Field(default=0.5, ge=0, le=1)
    unknown_fraction: float = Field(default=0.0, ge=0, le=1)
    # mean weight on each temporal / spatial lifestyle
    temporal_weights: List[float]
    spatial_weights: Optional[List[float]] = None
    # sub-populations replacing temporal_weights for their share of users, in user order
    segments: Optional[List[CitySegment]] = None
    lat: Optional[float] = Field(default=None, ge=-80, le=80)
    lon: Optional[float] = Field(default=None, ge=-179, le=179)

    @model_validator(mode="after")
    def _check(self) -> "CitySpec":
        if self.female_fraction + self.unknown_fraction > 1:
            raise ValueError("female_fraction + unknown_fraction must not exceed 1")
        weight_lists = [("temporal_weights", self.temporal_weights), ("spatial_weights", self.spatial_weights)]
        weight_lists += [("segment temporal_weights", s.temporal_weights) for s in self.segments or []]
        for name, weights in weight_lists:
            if weights is not None and (any(w < 0 for w in weights) or sum(weights) <= 0):
                raise ValueError(f"{name} must be non-negative with a positive sum")
        if self.segments is not None and abs(sum(s.share for s in self.segments) - 1.0) > 1e-9:
            raise ValueError("segment shares must sum to 1")
        return self

    def temporal_means(self) -> np.ndarray:
        """Mean temporal weights of every user of the city (n_users x k)."""
        if not self.segments:
            return np.tile(np.asarray(self.temporal_weights, dtype=float), (self.n_users, 1))
        bounds = np.rint(np.cumsum([s.share for s in self.segments]) * self.n_users).astype(int)
        bounds[-1] = self.n_users
        segment_of = np.searchsorted(bounds, np.arange(self.n_users), side="right")
        return np.vstack([self.segments[s].temporal_weights for s in segment_of]).astype(float)


class SynthSpec(BaseModel):
    """Planted model behind a synthetic dataset."""

    model_config = ConfigDict(extra="forbid")

    seed: int = 42
    cities: List[CitySpec] = Field(min_length=1)
    temporal_profiles: Optional[List[List[float]]] = None
    temporal_names: Optional[List[str]] = None
    categories: List[str] = Field(min_length=1)
    spatial_k: int = Field(default=3, ge=1)
    # spatial lifestyles: spatial_k x |categories|
    category_affinity: Optional[List[List[float]]] = None
    # category preferences of each temporal lifestyle: k_t x |categories|
    component_affinity: Optional[List[List[float]]] = None
    # weight of the user's spatial mix versus the temporal component's affinity
    spatial_mix: float = Field(default=0.5, ge=0, le=1)

    checkins_per_user: float = Field(default=60.0, gt=0)
    # gamma shape of the per-user weight jitter (mean preserved)
    weight_shape: float = Field(default=4.0, gt=0)
    noise: bool = True

    start_date: date = date(2024, 6, 3)
    n_days: int = Field(default=28, ge=1)
    venue_spacing_m: float = Field(default=100.0, gt=0)
    venues_per_category: int = Field(default=3, ge=1)
    venueless_fraction: float = Field(default=0.0, ge=0, le=1)
    planted_offsets_m: List[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check(self) -> "SynthSpec":
        if len(set(self.categories)) != len(self.categories):
            raise ValueError("categories must be unique")
        if len({c.name for c in self.cities}) != len(self.cities):
            raise ValueError("city names must be unique")
        k_t = self.k_temporal
        if self.temporal_profiles is not None:
            for row in self.temporal_profiles:
                if len(row) != 24 or any(v < 0 for v in row) or sum(row) <= 0:
                    raise ValueError("temporal profiles need 24 non-negative values with positive mass")
        if self.temporal_names is not None and len(self.temporal_names) != k_t:
            raise ValueError(f"temporal_names needs {k_t} entries")
        for city in self.cities:
            if len(city.temporal_weights) != k_t:
                raise ValueError(f"city {city.name}: temporal_weights needs {k_t} entries")
            if any(len(s.temporal_weights) != k_t for s in city.segments or []):
                raise ValueError(f"city {city.name}: segment temporal_weights need {k_t} entries")
            if city.spatial_weights is not None and len(city.spatial_weights) != self.spatial_k:
                raise ValueError(f"city {city.name}: spatial_weights needs {self.spatial_k} entries")
        for name, rows in (("category_affinity", self.category_affinity),
                           ("component_affinity", self.component_affinity)):
            expected = self.spatial_k if name == "category_affinity" else k_t
            if rows is None:
                continue
            if len(rows) != expected or any(len(r) != len(self.categories) for r in rows):
                raise ValueError(f"{name} must be {expected} x {len(self.categories)}")
            if any(v < 0 for r in rows for v in r) or any(sum(r) <= 0 for r in rows):
                raise ValueError(f"{name} rows must be non-negative with positive mass")
        return self

    @property
    def k_temporal(self) -> int:
        return len(self.temporal_profiles) if self.temporal_profiles is not None else 3


def load_spec(path: Union[str, Path]) -> SynthSpec:
    """
    Raises:
        ConfigurationError: unreadable file or invalid spec
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            return SynthSpec.model_validate(json.load(f))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"Cannot read synth spec {path}: {e}", field="synth_spec")
    except ValidationError as e:
        raise ConfigurationError(f"Invalid synth spec {path}: {e}", field="synth_spec")


def _normalized(rows) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    return arr / arr.sum(axis=1, keepdims=True)


def temporal_profiles(spec: SynthSpec) -> np.ndarray:
    if spec.temporal_profiles is None:
        return band_profiles()
    return _normalized(spec.temporal_profiles)


def temporal_names(spec: SynthSpec) -> List[str]:
    if spec.temporal_names is not None:
        return list(spec.temporal_names)
    if spec.temporal_profiles is None:
        return list(TEMPORAL_NAMES)
    return [f"temporal_{r}" for r in range(spec.k_temporal)]


def _affinities(spec: SynthSpec, streams: SeedStreams) -> Tuple[np.ndarray, np.ndarray]:
    """(spatial lifestyles, temporal component affinities), rows with unit mass."""
    rng = streams.rng("affinity")
    n_categories = len(spec.categories)
    drawn_spatial = rng.dirichlet(np.full(n_categories, 0.3), size=spec.spatial_k)
    drawn_component = rng.dirichlet(np.full(n_categories, 1.0), size=spec.k_temporal)
    spatial = _normalized(spec.category_affinity) if spec.category_affinity is not None else drawn_spatial
    component = (
        _normalized(spec.component_affinity) if spec.component_affinity is not None else drawn_component
    )
    return spatial, component


@dataclass
class PlantedUsers:
    """Users in (city, user_id) order with their planted weights."""

    profiles: List[UserProfile]
    temporal_weights: np.ndarray
    spatial_weights: np.ndarray

    @property
    def user_ids(self) -> List[str]:
        return [p.user_id for p in self.profiles]


def _plant_users(spec: SynthSpec, streams: SeedStreams) -> PlantedUsers:
    rng = streams.rng("users")
    profiles: List[UserProfile] = []
    temporal: List[np.ndarray] = []
    spatial: List[np.ndarray] = []
    width = max(5, len(str(max(c.n_users for c in spec.cities))))

    for city in sorted(spec.cities, key=lambda c: c.name):
        t_means = city.temporal_means()
        s_mean = np.asarray(city.spatial_weights if city.spatial_weights is not None
                            else [1.0] * spec.spatial_k, dtype=float)
        for i in range(city.n_users):
            u = rng.random()
            if u < city.female_fraction:
                gender = Gender.FEMALE
            elif u < city.female_fraction + city.unknown_fraction:
                gender = Gender.UNKNOWN
            else:
                gender = Gender.MALE
            jitter_t = rng.gamma(spec.weight_shape, 1.0 / spec.weight_shape, size=t_means.shape[1])
            jitter_s = rng.gamma(spec.weight_shape, 1.0 / spec.weight_shape, size=s_mean.size)
            profiles.append(UserProfile(f"{city.name}-u{i:0{width}d}", city.name, gender))
            temporal.append(t_means[i] * jitter_t)
            spatial.append(s_mean * jitter_s)

    return PlantedUsers(profiles, np.vstack(temporal), np.vstack(spatial))


def generate_users(spec: SynthSpec) -> PlantedUsers:
    return _plant_users(spec, SeedStreams(spec.seed))


def _component_hour_counts(spec: SynthSpec, planted: PlantedUsers, streams: SeedStreams) -> np.ndarray:
    """Counts per (user, temporal component, hour): Poisson draws or rounded expectations."""
    expected = (
        spec.checkins_per_user
        * planted.temporal_weights[:, :, None]
        * temporal_profiles(spec)[None, :, :]
    )
    if spec.noise:
        return streams.rng("counts").poisson(expected).astype(float)
    return np.rint(expected)


def generate_matrix(spec: SynthSpec, kind: str = "temporal") -> Tuple[ActivityMatrix, np.ndarray, np.ndarray]:
    """
    Planted activity matrix with its ground truth.

    Returns:
        (A, W*, L*) where A = W* L* without noise and a Poisson sample of it
        with noise. For 'temporal' the sample is the one generate_dataset
        turns into events for the same seed.
    """
    streams = SeedStreams(spec.seed)
    planted = _plant_users(spec, streams)
    spatial_affinity, _ = _affinities(spec, streams)

    if kind == "temporal":
        W = spec.checkins_per_user * planted.temporal_weights
        L = temporal_profiles(spec)
        labels = HOUR_LABELS
        if spec.noise:
            values = _component_hour_counts(spec, planted, streams).sum(axis=1)
        else:
            values = W @ L
    elif kind == "spatial":
        W = spec.checkins_per_user * planted.spatial_weights
        L = spatial_affinity
        labels = list(spec.categories)
        values = streams.rng("spatial").poisson(W @ L).astype(float) if spec.noise else W @ L
    else:
        raise ConfigurationError(f"kind must be temporal or spatial, got {kind!r}", field="kind")

    matrix = ActivityMatrix(
        values=values,
        row_keys=planted.user_ids,
        col_labels=labels,
        provenance={"kind": kind, "synthetic": True, "seed": spec.seed,
                    "cities": [p.city for p in planted.profiles]},
    )
    return matrix, W, L


def _city_origin(spec: SynthSpec, city: CitySpec, index: int) -> Tuple[float, float]:
    lat = city.lat if city.lat is not None else 40.0 + index
    lon = city.lon if city.lon is not None else -75.0 + index
    return lat, lon


def _venue_grid(spec: SynthSpec) -> Dict[str, Dict[str, List[Venue]]]:
    """city -> category -> venues on a square grid with fixed spacing."""
    grid: Dict[str, Dict[str, List[Venue]]] = {}
    per_city = len(spec.categories) * spec.venues_per_category
    side = int(math.ceil(math.sqrt(per_city)))
    for index, city in enumerate(sorted(spec.cities, key=lambda c: c.name)):
        lat0, lon0 = _city_origin(spec, city, index)
        dlat = math.degrees(spec.venue_spacing_m / EARTH_RADIUS_M)
        dlon = math.degrees(spec.venue_spacing_m / (EARTH_RADIUS_M * math.cos(math.radians(lat0))))
        by_category: Dict[str, List[Venue]] = {c: [] for c in spec.categories}
        slot = 0
        for category in spec.categories:
            for _ in range(spec.venues_per_category):
                row, col = divmod(slot, side)
                by_category[category].append(
                    Venue(f"{city.name}-v{slot:05d}", lat0 + row * dlat, lon0 + col * dlon, (category,))
                )
                slot += 1
        grid[city.name] = by_category
    return grid


def generate_dataset(spec: SynthSpec) -> Dataset:
    """
    Check-in events sampled from the planted model.

    Events sit on venue coordinates. A `venueless_fraction` of them carry no
    venue or category (the extension resolves them at distance 0); each
    planted offset distance adds one venue-less post that far north of every
    venue.
    """
    streams = SeedStreams(spec.seed)
    planted = _plant_users(spec, streams)
    spatial_affinity, component_affinity = _affinities(spec, streams)
    counts = _component_hour_counts(spec, planted, streams)
    grid = _venue_grid(spec)
    rng = streams.rng("events")

    start = datetime.combine(spec.start_date, datetime.min.time())
    n_categories = len(spec.categories)
    checkins: List[CheckIn] = []

    for u, profile in enumerate(planted.profiles):
        spatial_mix = planted.spatial_weights[u] @ spatial_affinity
        spatial_mix = spatial_mix / spatial_mix.sum()
        venues = grid[profile.city]
        user_events: List[CheckIn] = []
        for r in range(counts.shape[1]):
            p = spec.spatial_mix * spatial_mix + (1.0 - spec.spatial_mix) * component_affinity[r]
            p = p / p.sum()
            for hour in range(24):
                n = int(counts[u, r, hour])
                if n == 0:
                    continue
                days = rng.integers(spec.n_days, size=n)
                minutes = rng.integers(60, size=n)
                categories = rng.choice(n_categories, size=n, p=p)
                slots = rng.integers(spec.venues_per_category, size=n)
                venueless = rng.random(n) < spec.venueless_fraction
                for day, minute, c, slot, bare in zip(days, minutes, categories, slots, venueless):
                    venue = venues[spec.categories[c]][slot]
                    stamp = start + timedelta(days=int(day), hours=hour, minutes=int(minute))
                    user_events.append(CheckIn(
                        user_id=profile.user_id,
                        timestamp=stamp,
                        lat=venue.lat,
                        lon=venue.lon,
                        venue_id=None if bare else venue.venue_id,
                        categories=() if bare else venue.categories,
                    ))
        user_events.sort(key=lambda c: c.timestamp)
        checkins.extend(user_events)

    all_venues = [v for city in sorted(grid) for c in spec.categories for v in grid[city][c]]
    checkins.extend(_offset_posts(spec, planted, all_venues, streams))

    dataset = Dataset(
        checkins=tuple(checkins),
        venues=tuple(all_venues),
        users=tuple(planted.profiles),
        provenance={"source": "synth", "seed": spec.seed},
    )
    logger.info(f"Generated synthetic dataset: {dataset.summary()}")
    return dataset


def _offset_posts(spec: SynthSpec, planted: PlantedUsers, venues: List[Venue],
                  streams: SeedStreams) -> List[CheckIn]:
    if not spec.planted_offsets_m:
        return []
    rng = streams.rng("offsets")
    by_city: Dict[str, List[UserProfile]] = {}
    for profile in planted.profiles:
        by_city.setdefault(profile.city, []).append(profile)

    start = datetime.combine(spec.start_date, datetime.min.time())
    posts = []
    for distance in spec.planted_offsets_m:
        for venue in venues:
            city = venue.venue_id.rsplit("-v", 1)[0]
            owner = by_city[city][int(rng.integers(len(by_city[city])))]
            lat, lon = offset_north(venue.lat, venue.lon, distance)
            stamp = start + timedelta(days=int(rng.integers(spec.n_days)), hours=12)
            posts.append(CheckIn(owner.user_id, stamp, lat, lon))
    logger.info(f"Planted {len(posts)} offset posts at {spec.planted_offsets_m} m")
    return posts


def planted_low_rank(n_rows: int, n_cols: int, rank: int,
                     seed: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Exact non-negative rank-`rank` matrix A = W L.

    Each column of L is dominated by one component so the factorization is
    well conditioned.
    """
    rng = np.random.default_rng(seed)
    W = rng.uniform(0.1, 1.0, size=(n_rows, rank))
    L = rng.uniform(0.0, 0.1, size=(rank, n_cols))
    for j in range(n_cols):
        L[j % rank, j] += rng.uniform(0.5, 1.0)
    return W @ L, W, L


def generate_tensor(shape: Tuple[int, int, int], rank: int, seed: Optional[int] = None,
                    noise_level: float = 0.0) -> Tuple[np.ndarray, Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """
    Planted non-negative CP tensor.

    Returns:
        (T, (W, L_M, L_P)) with W: N x rank, L_M: rank x M, L_P: rank x P;
        with noise_level > 0, Gaussian noise of that size relative to the
        tensor's RMS entry is added.
    """
    rng = np.random.default_rng(seed)
    N, M, P = shape
    W = rng.random((N, rank))
    L_M = rng.random((rank, M))
    L_P = rng.random((rank, P))
    T = reconstruct_tensor(W, L_M, L_P)
    if noise_level > 0:
        rms = np.sqrt(np.mean(T ** 2))
        T = T + rng.normal(0.0, noise_level * rms, size=T.shape)
    return T, (W, L_M, L_P)
