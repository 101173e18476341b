import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from loadcluster import bench, io, submodular
from loadcluster.bench import SyntheticSpec


def test_noise_free_matrix_has_rank_two():
    spec = SyntheticSpec(n_patterns=2, areas_per_pattern=3, noise_sigma=0, spike_fraction=0)
    raw, labels = bench.generate(spec)
    assert labels.tolist() == [0, 0, 0, 1, 1, 1]
    s = np.linalg.svd(io.normalize(raw).values, compute_uv=False)
    assert s[2] / s[0] < 1e-10


def test_generate_is_deterministic():
    spec = SyntheticSpec(n_patterns=3, areas_per_pattern=2, t=2000, seed=9)
    a, la = bench.generate(spec)
    b, lb = bench.generate(spec)
    assert np.array_equal(a.values, b.values) and np.array_equal(la, lb)
    assert np.array_equal(a.timestamps, b.timestamps)
    c, _ = bench.generate(SyntheticSpec(n_patterns=3, areas_per_pattern=2, t=2000, seed=10))
    assert not np.array_equal(a.values, c.values)


def test_generate_shape_and_ids():
    raw, labels = bench.generate(SyntheticSpec(t=1440))
    assert raw.shape == (1440, 32)
    assert raw.area_ids[0] == "A01" and raw.area_ids[-1] == "A32"
    assert np.bincount(labels).tolist() == [8] * 4
    assert np.all(np.diff(raw.timestamps).astype(int) == 3600)


def test_short_series_rejected():
    with pytest.raises(ValueError):
        bench.generate(SyntheticSpec(t=1439))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_patterns": 0},
        {"areas_per_pattern": 0},
        {"n_patterns": 7},
        {"spike_fraction": 1.0},
        {"spike_fraction": -0.1},
        {"noise_sigma": -1},
    ],
)
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        SyntheticSpec(**kwargs)


def test_archetypes_are_distinct():
    ts = np.datetime64("2017-01-01T00", "s") + np.arange(8760).astype("timedelta64[h]")
    shapes = bench.archetype_shapes(ts)
    names = list(shapes)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            assert np.corrcoef(shapes[a], shapes[b])[0, 1] < 0.95, (a, b)


def test_brute_force_examples():
    w = bench.random_kernel(6, np.random.default_rng(0))
    subset, val = bench.brute_force_best_subset(w, 6)
    assert subset == tuple(range(6)) and val == pytest.approx(6.0)
    subset, val = bench.brute_force_best_subset(w, 1)
    assert subset == (int(np.argmax(w.sum(axis=0))),)
    assert val == pytest.approx(w.sum(axis=0).max())


@given(st.integers(0, 2**32 - 1))
def test_brute_force_dominates_greedy(seed):
    w = bench.random_kernel(10, np.random.default_rng(seed))
    _, best = bench.brute_force_best_subset(w, 3)
    greedy = submodular.lazy_greedy_select(w, 3).objective_trace[-1]
    assert best >= greedy - 1e-12
    assert greedy >= (1 - 1 / math.e) * best


def test_brute_force_guard():
    w = bench.random_kernel(16, np.random.default_rng(0))
    with pytest.raises(ValueError):
        bench.brute_force_best_subset(w, 2)
    w = bench.random_kernel(15, np.random.default_rng(0))
    with pytest.raises(ValueError):
        bench.brute_force_best_subset(w, 7, max_subsets=1000)
    with pytest.raises(ValueError):
        bench.brute_force_best_subset(w, 0)


@given(st.lists(st.integers(0, 3), min_size=2, max_size=30), st.permutations(range(4)))
def test_ari_is_permutation_invariant(labels, perm):
    planted = np.arange(len(labels)) % 3
    relabelled = np.array(perm)[labels]
    assert bench.adjusted_rand_index(planted, labels) == pytest.approx(
        bench.adjusted_rand_index(planted, relabelled), abs=1e-12
    )


def test_ari_examples():
    assert bench.adjusted_rand_index([0, 0, 1, 1], [5, 5, 2, 2]) == 1.0
    assert bench.adjusted_rand_index([0, 0, 1, 1], [0, 1, 0, 1]) < 0


def test_csv_round_trip_through_io(tmp_path):
    raw, _ = bench.generate(SyntheticSpec(n_patterns=2, areas_per_pattern=2, t=1500, seed=4))
    io.write_profiles(raw, tmp_path / "loads.csv")
    back = io.load_profiles(tmp_path / "loads.csv")
    assert back.area_ids == raw.area_ids
    assert np.array_equal(back.values, raw.values)
    assert np.array_equal(back.timestamps, raw.timestamps)


@pytest.mark.slow
def test_default_bench_recovers_planting(planted_default):
    res = planted_default
    best = res["sweep"].assignments[res["sweep"].ks.index(4)]
    assert bench.adjusted_rand_index(res["planted"], best.labels) >= 0.9
