#!/usr/bin/env python3
"""
Tests for activity builders, group preferences, time ranges and lifestyle clustering
"""

import sys
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np
import pytest

# Add project root to Python path
sys.path.insert(0, str(Path(__file__).parent))

from src.core.exceptions import AnalysisError
from src.core.models import CheckIn, Dataset, Gender, UserProfile
from src.models import (
    CIRCADIAN_BANDS,
    band_activity_share,
    bands_agree,
    build_spatial_matrix,
    build_temporal_matrix,
    build_tensor,
    cluster_preferences,
    cp_als,
    describe_tensor_components,
    extract_time_ranges,
    group_preferences,
    label_circadian_components,
    nmf,
    profiles_for,
    top_components,
)
from src.models.clustering import lloyd
from src.synth.generator import TEMPORAL_NAMES, SynthSpec, band_profiles, generate_matrix, generate_users

MONDAY = datetime(2024, 6, 3)
SATURDAY = datetime(2024, 6, 8)


def _checkin(user, stamp, categories=("Bar",)):
    return CheckIn(user, stamp, 40.0, -74.0, "v1", tuple(categories))


class TestTemporalMatrix:
    def test_single_user_monday_mornings(self):
        checkins = tuple(_checkin("u", MONDAY + timedelta(days=7 * w, hours=9, minutes=5 * w)) for w in range(3))
        A = build_temporal_matrix(Dataset(checkins=checkins), "weekday")
        expected = np.zeros(24)
        expected[9] = 3
        np.testing.assert_array_equal(A.values[0], expected)

    def test_saturday_after_midnight_is_weekend(self):
        ds = Dataset(checkins=(_checkin("u", SATURDAY + timedelta(minutes=30)),))
        assert build_temporal_matrix(ds, "weekend").values[0, 0] == 1
        assert build_temporal_matrix(ds, "weekday").values.sum() == 0

    def test_hand_tallied_fixture(self):
        stamps = {
            "a": [MONDAY + timedelta(hours=8), MONDAY + timedelta(days=1, hours=8), MONDAY + timedelta(hours=22)],
            "b": [MONDAY + timedelta(days=2, hours=0, minutes=59)],
            "c": [SATURDAY + timedelta(hours=13)],
            "d": [MONDAY + timedelta(days=4, hours=23), MONDAY + timedelta(days=4, hours=23, minutes=30)],
        }
        checkins = tuple(_checkin(u, s) for u, items in stamps.items() for s in items)
        users = tuple(UserProfile(u, "Metropolis") for u in stamps)
        A = build_temporal_matrix(Dataset(checkins=checkins, users=users), "weekday")
        expected = np.zeros((4, 24))
        expected[0, 8], expected[0, 22] = 2, 1
        expected[1, 0] = 1
        expected[3, 23] = 2
        assert A.row_keys == ["a", "b", "c", "d"]
        np.testing.assert_array_equal(A.values, expected)

    def test_rows_ordered_by_city(self):
        users = (UserProfile("z", "Brookside"), UserProfile("a", "Metropolis"), UserProfile("m", "Brookside"))
        A = build_temporal_matrix(Dataset(users=users), "all")
        assert A.row_keys == ["m", "z", "a"]
        assert A.provenance["cities"] == ["Brookside", "Brookside", "Metropolis"]

    def test_bad_day_class(self):
        with pytest.raises(AnalysisError):
            build_temporal_matrix(Dataset(), "holiday")


class TestSpatialMatrix:
    def test_multi_category_counts_each(self):
        checkins = tuple(_checkin("u", MONDAY + timedelta(hours=h), ("Bar", "Music Venue")) for h in (20, 21))
        A = build_spatial_matrix(Dataset(checkins=checkins), ["Bar", "Music Venue", "Gym"])
        np.testing.assert_array_equal(A.values, [[2, 2, 0]])

    def test_unlisted_category_ignored(self):
        ds = Dataset(checkins=(_checkin("u", MONDAY, ("Gym",)),))
        assert build_spatial_matrix(ds, ["Bar"]).values.sum() == 0

    def test_duplicate_columns_rejected(self):
        with pytest.raises(AnalysisError):
            build_spatial_matrix(Dataset(), ["Bar", "Bar"])


class TestTensor:
    def test_prune_boundary(self):
        checkins = [_checkin("four", MONDAY + timedelta(hours=h)) for h in range(4)]
        checkins += [_checkin("five", MONDAY + timedelta(hours=h)) for h in range(5)]
        T = build_tensor(Dataset(checkins=tuple(checkins)), "hour24", top_p=10, prune_h=5)
        assert T.user_keys == ["five"]
        assert T.values.sum() == 5

    def test_top_p_drops_rarest(self):
        categories = [f"Cat{i:03d}" for i in range(120)]
        checkins = []
        for i, category in enumerate(categories):
            # category i gets 121 - i contributions
            checkins += [_checkin("u", MONDAY + timedelta(minutes=n), (category,)) for n in range(121 - i)]
        T = build_tensor(Dataset(checkins=tuple(checkins)), "dow7", top_p=100, prune_h=1)
        assert T.category_labels == categories[:100]
        assert T.shape == (1, 7, 100)

    def test_fewer_categories_than_top_p(self):
        checkins = tuple(_checkin("u", MONDAY + timedelta(hours=h), ("Bar", "Gym")) for h in range(6))
        T = build_tensor(Dataset(checkins=checkins), "hour24", top_p=100, prune_h=5)
        assert T.category_labels == ["Bar", "Gym"]


CATEGORY_POOL = ["Bar", "Gym", "Office", "Park", "Cafe", "Music Venue"]


def _random_dataset(rng) -> Dataset:
    checkins = []
    for u in range(int(rng.integers(1, 12))):
        for _ in range(int(rng.integers(0, 30))):
            stamp = MONDAY + timedelta(days=int(rng.integers(0, 14)), minutes=int(rng.integers(0, 24 * 60)))
            picked = rng.choice(len(CATEGORY_POOL), size=int(rng.integers(0, 4)), replace=False)
            checkins.append(_checkin(f"u{u:02d}", stamp, tuple(CATEGORY_POOL[j] for j in sorted(picked))))
    users = tuple(UserProfile(f"u{u:02d}", "Metropolis" if u % 2 else "Brookside") for u in range(12))
    return Dataset(checkins=tuple(checkins), users=users)


@pytest.mark.parametrize("seed", range(30))
def test_builders_conserve_checkins(seed):
    rng = np.random.default_rng(seed)
    ds = _random_dataset(rng)
    n = len(ds.checkins)
    contributions = sum(len(c.categories) for c in ds.checkins)

    everything = build_temporal_matrix(ds, "all").values
    assert everything.sum() == n
    np.testing.assert_array_equal(
        build_temporal_matrix(ds, "weekday").values + build_temporal_matrix(ds, "weekend").values, everything
    )
    assert build_spatial_matrix(ds).values.sum() == contributions

    prune_h = int(rng.integers(0, 20))
    per_user = {}
    for c in ds.checkins:
        per_user.setdefault(c.user_id, []).append(c)
    kept = sum(len(c.categories) for items in per_user.values() if len(items) >= prune_h for c in items)
    T = build_tensor(ds, "hour24" if seed % 2 else "dow7", top_p=len(CATEGORY_POOL), prune_h=prune_h)
    assert T.values.sum() == kept


class TestGroupPreferences:
    def _users(self):
        return [
            UserProfile("a", "Metropolis", Gender.FEMALE),
            UserProfile("b", "Metropolis", Gender.MALE),
            UserProfile("c", "Brookside", Gender.FEMALE),
        ]

    def test_single_user_group(self):
        W = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.2, 0.3, 0.5]])
        prefs = group_preferences(W, self._users(), "city")
        np.testing.assert_array_equal(prefs.mean_of("Brookside"), [0.2, 0.3, 0.5])

    def test_two_user_mean(self):
        W = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.2, 0.3, 0.5]])
        prefs = group_preferences(W, self._users(), "city")
        np.testing.assert_array_equal(prefs.mean_of("Metropolis"), [0.5, 0.5, 0.0])
        assert prefs.sizes == [1, 2]

    def test_city_gender_skips_empty_groups(self):
        W = np.eye(3)
        prefs = group_preferences(W, self._users(), "city_gender")
        assert [g.label for g in prefs.groups] == ["Brookside/female", "Metropolis/male", "Metropolis/female"]
        np.testing.assert_array_equal(prefs.mean_of("Metropolis/male"), [0.0, 1.0, 0.0])
        frame = prefs.to_frame()
        assert list(frame.columns[:4]) == ["group", "city", "gender", "size"]

    def test_misaligned_rows(self):
        with pytest.raises(AnalysisError):
            group_preferences(np.eye(2), self._users())

    @pytest.mark.parametrize("seed", range(20))
    @pytest.mark.parametrize("grouping", ["city", "city_gender"])
    def test_population_mean_is_size_weighted(self, seed, grouping):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 60))
        cities = ["Alpha", "Brookside", "Metropolis"]
        genders = list(Gender)
        users = [
            UserProfile(f"u{i:02d}", cities[int(rng.integers(0, 3))], genders[int(rng.integers(0, len(genders)))])
            for i in range(n)
        ]
        W = rng.random((n, int(rng.integers(1, 6))))
        prefs = group_preferences(W, users, grouping)
        sizes = np.asarray(prefs.sizes, dtype=float)
        assert sizes.sum() == n
        np.testing.assert_allclose(sizes @ prefs.means / n, W.mean(axis=0), rtol=1e-10, atol=1e-12)


def _night_owl_spec(seed: int) -> SynthSpec:
    return SynthSpec(
        seed=seed,
        cities=[
            {"name": "Alpha", "n_users": 40, "temporal_weights": [0.3, 0.3, 0.4]},
            {"name": "Beta", "n_users": 40, "temporal_weights": [0.3, 0.3, 0.2]},
        ],
        categories=["Bar", "Office", "Park"],
        checkins_per_user=80,
    )


def test_night_owl_ordering_recovered_across_seeds():
    wins = 0
    for seed in range(100):
        spec = _night_owl_spec(seed)
        matrix, _, _ = generate_matrix(spec, "temporal")
        model = nmf(matrix, 3, seed=seed)
        labels = label_circadian_components(model.L)
        owl = labels.index("night_owl")
        prefs = group_preferences(model, generate_users(spec).profiles, "city")
        if prefs.mean_of("Alpha")[owl] > prefs.mean_of("Beta")[owl]:
            wins += 1
    assert wins >= 95


class TestTimeRanges:
    def test_uniform_daytime_profile(self):
        profile = np.zeros(24)
        profile[7:22] = 1.0
        ranges = extract_time_ranges(profile)
        assert ranges.get_up == (7, 9)
        assert ranges.most_active == (10, 19)
        assert ranges.go_to_bed == (20, 21)

    def test_single_hour(self):
        profile = np.zeros(24)
        profile[12] = 4.0
        ranges = extract_time_ranges(profile)
        assert ranges.get_up == ranges.most_active == ranges.go_to_bed == (12, 12)

    def test_wraps_past_midnight(self):
        profile = np.zeros(24)
        for hour in (22, 23, 0, 1, 2):
            profile[hour] = 1.0
        ranges = extract_time_ranges(profile)
        assert ranges.get_up[0] == 22
        assert ranges.go_to_bed[1] == 2

    def test_all_zero_rejected(self):
        with pytest.raises(AnalysisError):
            extract_time_ranges(np.zeros(24))

    @pytest.mark.parametrize("row,name", list(enumerate(TEMPORAL_NAMES)))
    def test_planted_band_profiles_within_bands(self, row, name):
        ranges = extract_time_ranges(band_profiles()[row])
        assert bands_agree(ranges, name, slack_hours=1)

    def test_early_bird_gets_up_between_six_and_eight(self):
        ranges = extract_time_ranges(band_profiles()[0])
        assert 6 <= ranges.get_up[0] <= ranges.get_up[1] <= 8

    def test_band_share(self):
        profile = np.zeros(24)
        profile[6], profile[12] = 1.0, 3.0
        assert band_activity_share(profile, CIRCADIAN_BANDS["early_bird"]["get_up"]) == 0.25

    def test_labels_follow_centre_of_activity(self):
        labels = label_circadian_components(band_profiles()[[2, 0, 1]])
        assert labels == ["night_owl", "early_bird", "intermediate"]

    @pytest.mark.parametrize("seed", range(50))
    def test_ranges_partition_support_in_walk_order(self, seed):
        rng = np.random.default_rng(seed)
        if seed % 2:
            profile = rng.poisson(rng.uniform(0.05, 3.0), size=24).astype(float)
        else:
            profile = np.where(rng.random(24) < rng.uniform(0.05, 0.5), rng.random(24), 0.0)
        if not profile.any():
            profile[int(rng.integers(0, 24))] = 1.0
        ranges = extract_time_ranges(profile)

        def pos(hour):
            return (hour - 5) % 24

        spans = [ranges.get_up, ranges.most_active, ranges.go_to_bed]
        for start, end in spans:
            assert pos(start) <= pos(end)
        for (_, prev_end), (start, end) in zip(spans, spans[1:]):
            if start == end == prev_end:
                continue
            assert pos(prev_end) < pos(start)
        for hour in np.flatnonzero(profile):
            assert any(pos(start) <= pos(hour) <= pos(end) for start, end in spans)


class TestClustering:
    def test_well_separated_blobs(self):
        rng = np.random.default_rng(0)
        X = np.vstack([rng.normal(0.0, 0.1, size=(30, 3)), rng.normal(5.0, 0.1, size=(30, 3))])
        truth = np.array([0] * 30 + [1] * 30)
        users = [UserProfile(f"u{i:02d}", "Metropolis") for i in range(60)]
        clusters = cluster_preferences(X, users, n_clusters=2, seed=1, restarts=3)
        mapping = {clusters.labels[0]: 0, clusters.labels[-1]: 1}
        assert len(mapping) == 2
        np.testing.assert_array_equal([mapping[c] for c in clusters.labels], truth)

    def test_city_normalised_composition(self):
        day = [0.0] * 8 + [1.0] * 11 + [0.0] * 5
        night = [1.0] * 3 + [0.0] * 17 + [1.0] * 4
        home, out = [1.0, 0.05], [0.05, 1.0]
        spec = SynthSpec(
            seed=4,
            cities=[
                {"name": "Brookside", "n_users": 100, "temporal_weights": home,
                 "segments": [{"share": 0.56, "temporal_weights": home}, {"share": 0.44, "temporal_weights": out}]},
                {"name": "Metropolis", "n_users": 100, "temporal_weights": out,
                 "segments": [{"share": 0.44, "temporal_weights": home}, {"share": 0.56, "temporal_weights": out}]},
            ],
            temporal_profiles=[day, night],
            categories=["Bar", "Office"],
            checkins_per_user=80,
            weight_shape=50.0,
        )
        matrix, _, _ = generate_matrix(spec, "temporal")
        model = nmf(matrix, 2, seed=1)
        users = generate_users(spec).profiles
        clusters = cluster_preferences(model.W, users, n_clusters=2, seed=3, restarts=5, normalize_rows=True)
        home_cluster = clusters.assignments[users[0].user_id]
        shares = clusters.city_composition[home_cluster]
        assert shares["Brookside"] == pytest.approx(0.56, abs=0.05)
        assert shares["Metropolis"] == pytest.approx(0.44, abs=0.05)

    def test_identical_rows(self):
        X = np.ones((5, 3))
        users = [UserProfile(f"u{i}", "Metropolis") for i in range(5)]
        clusters = cluster_preferences(X, users, n_clusters=5, seed=0, restarts=2)
        assert sum(clusters.sizes) == 5
        assert clusters.inertia == 0.0

    def test_too_many_clusters(self):
        with pytest.raises(AnalysisError):
            cluster_preferences(np.ones((3, 2)), [UserProfile(f"u{i}") for i in range(3)], n_clusters=4)

    def test_restarts_are_deterministic(self):
        X = np.random.default_rng(9).random((40, 3))
        users = [UserProfile(f"u{i:02d}", "Metropolis") for i in range(40)]
        a = cluster_preferences(X, users, n_clusters=4, seed=7, n_jobs=1)
        b = cluster_preferences(X, users, n_clusters=4, seed=7, n_jobs=2)
        np.testing.assert_array_equal(a.labels, b.labels)
        assert a.restart == b.restart

    def test_gender_composition_keys(self):
        X = np.vstack([np.zeros((4, 2)), np.ones((4, 2))])
        users = [UserProfile(f"u{i}", "Metropolis", Gender.FEMALE if i % 2 else Gender.MALE) for i in range(8)]
        clusters = cluster_preferences(X, users, n_clusters=2, seed=0)
        for shares in clusters.composition.values():
            assert set(shares) == {"Metropolis/female", "Metropolis/male"}
            assert sum(shares.values()) == pytest.approx(1.0)

    @pytest.mark.parametrize("seed", range(20))
    def test_lloyd_inertia_never_increases(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.integers(0, 3, size=(60, 2)).astype(float)
        centers = X[rng.choice(60, size=8, replace=False)]
        _, labels, trace = lloyd(X, centers)
        assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))
        assert np.bincount(labels, minlength=8).min() >= 1

    @pytest.mark.parametrize("seed", range(10))
    def test_row_order_does_not_change_clusters(self, seed):
        rng = np.random.default_rng(seed)
        X = np.vstack([rng.normal(5.0 * c, 0.2, size=(15, 3)) for c in range(4)])
        users = [UserProfile(f"u{i:02d}", "Metropolis" if i % 3 else "Brookside") for i in range(60)]
        order = rng.permutation(60)
        a = cluster_preferences(X, users, n_clusters=4, seed=seed, restarts=5, n_jobs=1)
        b = cluster_preferences(X[order], [users[i] for i in order], n_clusters=4, seed=seed, restarts=5, n_jobs=1)
        assert b.inertia == pytest.approx(a.inertia, rel=1e-9)
        assert sorted(b.sizes) == sorted(a.sizes)
        ids = [u.user_id for u in users]
        for x in ids:
            for y in ids:
                same_a = a.assignments[x] == a.assignments[y]
                same_b = b.assignments[x] == b.assignments[y]
                assert same_a == same_b


def test_describe_tensor_components():
    checkins = []
    for u in range(6):
        for d in range(7):
            checkins.append(_checkin(f"u{u}", MONDAY + timedelta(days=d, hours=9), ("Office",)))
            checkins.append(_checkin(f"u{u}", MONDAY + timedelta(days=d, hours=21 + u % 2), ("Bar", "Music Venue")))
    ds = Dataset(checkins=tuple(checkins))
    tensor = build_tensor(ds, "hour24", top_p=3, prune_h=5)
    model = cp_als(tensor, 2, seed=0)
    described = describe_tensor_components(model, n_top=2)
    assert len(described) == 2
    assert all(len(d["time_profile"]) == 24 for d in described)
    assert {d["peak_time"] for d in described} <= {"9", "21", "22"}
    assert len(profiles_for(ds, model.user_keys)) == 6


def test_top_components_orders_by_weight():
    tops = top_components(np.array([[0.1, 0.7, 0.2]]), ["a", "b", "c"], n=2)
    assert tops == [[("b", 0.7), ("c", 0.2)]]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
