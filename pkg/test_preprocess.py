#!/usr/bin/env python3
"""
Tests for great-circle distance, user filters and check-in extension
"""

import math
import sys
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

# Add project root to Python path
sys.path.insert(0, str(Path(__file__).parent))

from src.core.models import CheckIn, Dataset, UserProfile, Venue
from src.preprocess import (
    EARTH_RADIUS_M,
    ExtensionConfig,
    VenueGridIndex,
    extend_checkins,
    filter_low_activity,
    filter_tourists,
    haversine_m,
    nearest_venue_bruteforce,
    preprocess_dataset,
)

T0 = datetime(2024, 6, 3, 12, 0)


def _user_with_days(user_id: str, days) -> list:
    return [CheckIn(user_id, T0 + timedelta(days=d), 40.0, -74.0) for d in days]


def _user_with_count(user_id: str, n: int) -> list:
    return [CheckIn(user_id, T0 + timedelta(days=i), 40.0, -74.0) for i in range(n)]


class TestHaversine:
    def test_identity(self):
        assert haversine_m(43.1566, -77.6088, 43.1566, -77.6088) == 0.0

    def test_antipodal_on_equator(self):
        assert haversine_m(0.0, 0.0, 0.0, 180.0) == pytest.approx(math.pi * EARTH_RADIUS_M, rel=1e-12)
        assert haversine_m(0.0, 0.0, 0.0, 180.0) == pytest.approx(20_015_087, abs=1)

    def test_thirty_metres_north(self):
        expected = 0.00027 * math.pi / 180 * EARTH_RADIUS_M
        d = haversine_m(43.1566, -77.6088, 43.1566 + 0.00027, -77.6088)
        assert d == pytest.approx(expected, abs=1e-3)
        assert abs(d - 30.0) < 1.0

    def test_symmetric(self):
        assert haversine_m(10, 20, -30, 140) == pytest.approx(haversine_m(-30, 140, 10, 20), rel=1e-14)


class TestTouristFilter:
    def test_short_span_removed(self):
        ds = Dataset(checkins=tuple(_user_with_days("u", [1, 3])))
        assert filter_tourists(ds, 7).checkins == ()

    def test_exact_span_kept(self):
        ds = Dataset(checkins=tuple(_user_with_days("u", [0, 7])))
        assert len(filter_tourists(ds, 7).checkins) == 2

    def test_span_fixture(self):
        checkins = []
        for i, span in enumerate([1, 3, 6, 7, 30]):
            checkins += _user_with_days(f"u{i}", [0, span])
        ds = Dataset(checkins=tuple(checkins), users=tuple(UserProfile(f"u{i}") for i in range(5)))
        kept = filter_tourists(ds, 7)
        assert {c.user_id for c in kept.checkins} == {"u3", "u4"}
        assert {u.user_id for u in kept.users} == {"u3", "u4"}

    def test_registered_user_without_checkins_dropped(self):
        ds = Dataset(checkins=tuple(_user_with_days("u", [0, 10])), users=(UserProfile("u"), UserProfile("idle")))
        assert [u.user_id for u in filter_tourists(ds, 7).users] == ["u"]


class TestLowActivityFilter:
    def test_nine_removed_ten_kept(self):
        ds = Dataset(checkins=tuple(_user_with_count("nine", 9) + _user_with_count("ten", 10)))
        kept = filter_low_activity(ds, 10)
        assert {c.user_id for c in kept.checkins} == {"ten"}

    def test_count_fixture(self):
        checkins = []
        for n in (1, 9, 10, 11):
            checkins += _user_with_count(f"u{n}", n)
        kept = filter_low_activity(Dataset(checkins=tuple(checkins)), 10)
        assert sorted({c.user_id for c in kept.checkins}) == ["u10", "u11"]

    def test_zero_threshold_keeps_idle_registered_users(self):
        ds = Dataset(checkins=tuple(_user_with_count("u", 1)), users=(UserProfile("u"), UserProfile("idle")))
        kept = filter_low_activity(ds, 0)
        assert [u.user_id for u in kept.users] == ["u", "idle"]
        assert len(kept.checkins) == 1

    def test_idle_registered_user_dropped_above_zero(self):
        ds = Dataset(checkins=tuple(_user_with_count("u", 1)), users=(UserProfile("u"), UserProfile("idle")))
        assert [u.user_id for u in filter_low_activity(ds, 1).users] == ["u"]

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValueError):
            filter_low_activity(Dataset(), -1)


def test_filters_commute_and_are_idempotent():
    rng = np.random.default_rng(5)
    checkins = []
    for u in range(40):
        n = int(rng.integers(1, 25))
        days = sorted(rng.integers(0, 20, size=n))
        checkins += [CheckIn(f"u{u:02d}", T0 + timedelta(days=int(d)), 40.0, -74.0) for d in days]
    ds = Dataset(checkins=tuple(checkins))

    a = filter_low_activity(filter_tourists(ds, 7), 10)
    b = filter_tourists(filter_low_activity(ds, 10), 7)
    assert a == b
    assert filter_tourists(a, 7) == a
    assert filter_low_activity(a, 10) == a


class TestExtension:
    def test_post_at_venue_coordinates_assigned(self):
        venue = Venue("v1", 43.1566, -77.6088, ("Park",))
        ds = Dataset(checkins=(CheckIn("u", T0, 43.1566, -77.6088),), venues=(venue,))
        extended = extend_checkins(ds, ExtensionConfig(radius_m=30))
        assert extended.checkins[0].venue_id == "v1"
        assert extended.checkins[0].categories == ("Park",)

    def test_post_forty_metres_away_stays_venueless(self):
        venue = Venue("v1", 43.1566, -77.6088, ("Park",))
        lat = 43.1566 + math.degrees(40.0 / EARTH_RADIUS_M)
        ds = Dataset(checkins=(CheckIn("u", T0, lat, -77.6088),), venues=(venue,))
        extended = extend_checkins(ds, ExtensionConfig(radius_m=30))
        assert extended.checkins[0].venue_id is None

    def test_existing_venue_untouched_and_order_kept(self):
        venues = (Venue("v1", 40.0, -74.0, ("Bar",)), Venue("v2", 40.0001, -74.0, ("Gym",)))
        checkins = (
            CheckIn("u", T0, 40.0, -74.0, "v2", ("Gym",)),
            CheckIn("u", T0 + timedelta(hours=1), 40.0, -74.0),
        )
        extended = extend_checkins(Dataset(checkins=checkins, venues=venues), ExtensionConfig())
        assert extended.checkins[0] == checkins[0]
        assert extended.checkins[1].venue_id == "v1"
        assert [c.timestamp for c in extended.checkins] == [c.timestamp for c in checkins]

    def test_tie_goes_to_smaller_venue_id(self):
        venues = (Venue("vb", 40.0, -74.0, ("Bar",)), Venue("va", 40.0, -74.0, ("Gym",)))
        ds = Dataset(checkins=(CheckIn("u", T0, 40.0, -74.0),), venues=venues)
        assert extend_checkins(ds, ExtensionConfig()).checkins[0].venue_id == "va"

    def test_empty_registry_is_noop(self):
        ds = Dataset(checkins=(CheckIn("u", T0, 40.0, -74.0),))
        assert extend_checkins(ds, ExtensionConfig()) == ds

    def test_idempotent(self):
        venues = (Venue("v1", 40.0, -74.0, ("Bar",)),)
        ds = Dataset(checkins=(CheckIn("u", T0, 40.0001, -74.0),), venues=venues)
        once = extend_checkins(ds, ExtensionConfig())
        assert extend_checkins(once, ExtensionConfig()) == once

    def test_negative_radius_rejected(self):
        with pytest.raises(ValidationError):
            ExtensionConfig(radius_m=-1)


@pytest.mark.parametrize("seed,n_posts,n_venues,spread", [
    (1, 200, 20, 0.001),
    (2, 1000, 100, 0.002),
    (3, 1000, 100, 0.0005),
])
def test_grid_matches_bruteforce(seed, n_posts, n_venues, spread):
    rng = np.random.default_rng(seed)
    lat0, lon0 = 40.7, -74.0
    venues = [
        Venue(f"v{i:03d}", lat0 + rng.uniform(-spread, spread), lon0 + rng.uniform(-spread, spread), ("c",))
        for i in range(n_venues)
    ]
    index = VenueGridIndex(venues, 30.0)
    for _ in range(n_posts):
        lat = lat0 + rng.uniform(-spread, spread)
        lon = lon0 + rng.uniform(-spread, spread)
        expected = nearest_venue_bruteforce(lat, lon, venues, 30.0)
        got = index.nearest(lat, lon)
        if expected is None:
            assert got is None
        else:
            assert got is not None
            assert got[0].venue_id == expected[0].venue_id
            assert got[1] == expected[1]


@pytest.mark.parametrize("lat0,lon0", [(0.0, 179.9999), (89.9990, 10.0), (-45.0, -180.0)])
def test_grid_handles_antimeridian_and_poles(lat0, lon0):
    rng = np.random.default_rng(11)
    venues = [
        Venue(f"v{i}", max(-90.0, min(90.0, lat0 + rng.uniform(-3e-4, 3e-4))),
              ((lon0 + rng.uniform(-3e-4, 3e-4) + 180.0) % 360.0) - 180.0, ("c",))
        for i in range(30)
    ]
    index = VenueGridIndex(venues, 30.0)
    for _ in range(200):
        lat = max(-90.0, min(90.0, lat0 + rng.uniform(-3e-4, 3e-4)))
        lon = ((lon0 + rng.uniform(-3e-4, 3e-4) + 180.0) % 360.0) - 180.0
        expected = nearest_venue_bruteforce(lat, lon, venues, 30.0)
        got = index.nearest(lat, lon)
        assert (got is None) == (expected is None)
        if expected is not None:
            assert got[0].venue_id == expected[0].venue_id


def test_preprocess_order_does_not_change_users():
    venues = (Venue("v1", 40.0, -74.0, ("Bar",)),)
    checkins = tuple(
        CheckIn(f"u{u}", T0 + timedelta(days=d), 40.0, -74.0)
        for u in range(4) for d in range(3 + 4 * u)
    )
    ds = Dataset(checkins=checkins, venues=venues)
    default = preprocess_dataset(ds, ExtensionConfig())
    extend_first = preprocess_dataset(ds, ExtensionConfig(extend_first=True))
    assert default == extend_first
    assert {c.user_id for c in default.checkins} == {"u2", "u3"}
    assert all(c.venue_id == "v1" for c in default.checkins)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
