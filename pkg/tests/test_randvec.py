import math

import numpy as np
import pytest
from scipy import stats

from alpha_embed.errors import RangeError, SizeError
from alpha_embed.randvec import (
    RandMethod,
    generate_betas,
    int_to_hypercube,
    int_to_neighbor,
    naive_sample_unique,
    reservoir_sample_unique,
)


def test_hypercube_bijective_small_dims():
    for d in range(1, 11):
        seen = set()
        for i in range(2**d):
            v = int_to_hypercube(i, d)
            assert v.shape == (d,)
            assert set(np.unique(v)) <= {-1.0, 1.0}
            seen.add(tuple(v))
        assert len(seen) == 2**d


def test_neighbor_bijective_small_dims():
    for d in range(1, 7):
        seen = set()
        for i in range(3**d - 1):
            v = int_to_neighbor(i, d)
            assert set(np.unique(v)) <= {-1.0, 0.0, 1.0}
            assert np.any(v != 0.0)  # origin excluded
            seen.add(tuple(v))
        assert len(seen) == 3**d - 1


def test_neighbor_zero_index_skip():
    # The index of the all-zeros digit string sits exactly mid-range.
    d = 3
    i_z = (3**d - 1) // 2
    below = int_to_neighbor(i_z - 1, d)
    at = int_to_neighbor(i_z, d)
    assert np.any(below != 0.0) and np.any(at != 0.0)


def test_int_mapping_range_errors():
    with pytest.raises(RangeError):
        int_to_hypercube(16, 4)
    with pytest.raises(RangeError):
        int_to_hypercube(-1, 4)
    with pytest.raises(RangeError):
        int_to_neighbor(26, 3)


def test_reservoir_distinct_and_in_range():
    rng = np.random.default_rng(3)
    for _ in range(50):
        out = reservoir_sample_unique(10, 1000, rng)
        assert len(out) == 10 and len(set(out)) == 10
        assert all(0 <= i < 1000 for i in out)


def test_reservoir_full_set_is_permutation():
    rng = np.random.default_rng(4)
    out = reservoir_sample_unique(20, 20, rng)
    assert sorted(out) == list(range(20))


def test_reservoir_bounds():
    rng = np.random.default_rng(5)
    with pytest.raises(SizeError):
        reservoir_sample_unique(5, 4, rng)
    with pytest.raises(OverflowError):
        reservoir_sample_unique(5, 2**64, rng)
    assert reservoir_sample_unique(0, 10, rng) == []


def test_reservoir_subsets_uniform():
    # Every 2-subset of a 9-element set should be hit equally often.
    rng = np.random.default_rng(11)
    counts: dict[tuple, int] = {}
    for _ in range(100_000):
        key = tuple(sorted(reservoir_sample_unique(2, 9, rng)))
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == math.comb(9, 2)
    p = stats.chisquare(list(counts.values())).pvalue
    assert p > 0.001


def test_reservoir_order_uniform_after_shuffle():
    rng = np.random.default_rng(12)
    first = np.zeros(9, dtype=np.int64)
    for _ in range(30_000):
        first[reservoir_sample_unique(3, 9, rng)[0]] += 1
    p = stats.chisquare(first).pvalue
    assert p > 0.001


def test_naive_sample_matches_contract():
    rng = np.random.default_rng(6)
    out = naive_sample_unique(8, 9, rng)
    assert len(set(out)) == 8 and all(0 <= i < 9 for i in out)
    with pytest.raises(SizeError):
        naive_sample_unique(10, 9, rng)


def test_randmethod_flags():
    assert RandMethod("normal", 16).enforce_unique is False
    assert RandMethod("hypercube", 32).enforce_unique is True
    assert RandMethod("hypercube", 33).enforce_unique is False
    assert RandMethod("neighbor", 4).set_size == 80
    assert RandMethod("hypercube", 4).set_size == 16
    assert RandMethod("normal", 4).set_size is None
    assert RandMethod("hypercube", 0).set_size == 1  # degenerate: only the empty vector
    with pytest.raises(ValueError):
        RandMethod("gaussian", 4)
    with pytest.raises(ValueError):
        RandMethod("normal", -1)


def test_randmethod_spec_roundtrip():
    m = RandMethod("neighbor", 8)
    assert RandMethod.from_spec(m.spec()) == m


def test_generate_normal():
    rng = np.random.default_rng(8)
    out = generate_betas(RandMethod("normal", 12), 1000, rng)
    assert out.shape == (1000, 12)
    assert abs(out.mean()) < 0.05 and abs(out.std() - 1.0) < 0.05


def test_generate_hypercube_exhaustive():
    rng = np.random.default_rng(9)
    out = generate_betas(RandMethod("hypercube", 4), 16, rng)
    assert len({tuple(r) for r in out}) == 16


def test_generate_neighbor_exhaustive():
    rng = np.random.default_rng(10)
    out = generate_betas(RandMethod("neighbor", 3), 26, rng)
    rows = {tuple(r) for r in out}
    assert len(rows) == 26
    assert (0.0, 0.0, 0.0) not in rows


def test_generate_unique_overdraw_raises():
    rng = np.random.default_rng(13)
    with pytest.raises(SizeError):
        generate_betas(RandMethod("hypercube", 3), 9, rng)


def test_generate_high_dim_paths():
    rng = np.random.default_rng(14)
    # d > 32: uniqueness off, integer path while the set still fits in 64 bits.
    out = generate_betas(RandMethod("neighbor", 40), 50, rng)
    assert out.shape == (50, 40)
    assert not np.any((out == 0.0).all(axis=1))
    # Set size at or beyond 2^64: componentwise path.
    out = generate_betas(RandMethod("hypercube", 64), 50, rng)
    assert set(np.unique(out)) == {-1.0, 1.0}
    out = generate_betas(RandMethod("neighbor", 41), 50, rng)
    assert not np.any((out == 0.0).all(axis=1))


def test_generate_empty():
    rng = np.random.default_rng(15)
    assert generate_betas(RandMethod("hypercube", 4), 0, rng).shape == (0, 4)
