import numpy as np
import pytest
from scipy import stats

from perclab.randomness import SeedSpec, StreamRole, derive_stream, poisson_count


def test_same_address_same_stream(seed):
    a = derive_stream(seed, 7, StreamRole.COLOR, 2).random(16)
    b = derive_stream(seed, 7, StreamRole.COLOR, 2).random(16)
    assert np.array_equal(a, b)


@pytest.mark.parametrize(
    "other",
    [
        (8, StreamRole.COLOR, 2),
        (7, StreamRole.ENVIRONMENT, 2),
        (7, StreamRole.COLOR, 3),
    ],
)
def test_distinct_addresses_differ(seed, other):
    a = derive_stream(seed, 7, StreamRole.COLOR, 2).random(16)
    b = derive_stream(seed, *other).random(16)
    assert not np.array_equal(a, b)


def test_tag_and_master_seed_change_stream(seed):
    base = derive_stream(seed, 0, StreamRole.ENVIRONMENT).random(8)
    retagged = derive_stream(seed.child("x"), 0, StreamRole.ENVIRONMENT).random(8)
    reseeded = derive_stream(
        SeedSpec(master_seed=seed.master_seed + 1, experiment_tag=seed.experiment_tag),
        0,
        StreamRole.ENVIRONMENT,
    ).random(8)
    assert not np.array_equal(base, retagged)
    assert not np.array_equal(base, reseeded)


def test_child_extends_tag(seed):
    child = seed.child("R=4")
    assert child.master_seed == seed.master_seed
    assert child.experiment_tag == "tests/R=4"


def test_tag_hash_is_stable():
    # blake2b, not the per-process salted hash()
    assert SeedSpec(experiment_tag="arm").tag_hash == SeedSpec(experiment_tag="arm").tag_hash
    assert SeedSpec(experiment_tag="arm").tag_hash != SeedSpec(experiment_tag="crossing").tag_hash


@pytest.mark.parametrize("index, substream", [(-1, 0), (0, -1)])
def test_negative_address_rejected(seed, index, substream):
    with pytest.raises(ValueError):
        derive_stream(seed, index, StreamRole.COLOR, substream)


def test_poisson_zero_mean(seed):
    assert poisson_count(derive_stream(seed, 0, StreamRole.AUXILIARY), 0.0) == 0


@pytest.mark.parametrize("mean", [-1.0, float("nan"), float("inf")])
def test_poisson_invalid_mean(seed, mean):
    with pytest.raises(ValueError):
        poisson_count(derive_stream(seed, 0, StreamRole.AUXILIARY), mean)


@pytest.mark.parametrize("mean", [3.0, 40.0])
def test_poisson_mean(seed, mean):
    stream = derive_stream(seed, 0, StreamRole.AUXILIARY)
    draws = np.array([poisson_count(stream, mean) for _ in range(4000)])
    assert abs(draws.mean() - mean) < 5 * np.sqrt(mean / len(draws))
    assert (draws >= 0).all()


def test_stream_draws_are_uniform(seed):
    draws = np.concatenate(
        [
            derive_stream(seed, i, StreamRole.COLOR, k).random(500)
            for i in range(10)
            for k in range(2)
        ]
    )
    counts, _ = np.histogram(draws, bins=20, range=(0.0, 1.0))
    assert stats.chisquare(counts).pvalue > 1e-3


def test_first_draws_are_uniform_across_addresses(seed):
    # the first value of each stream, so neighbouring sample indices are not correlated
    firsts = np.array([derive_stream(seed, i, StreamRole.ENVIRONMENT).random() for i in range(4000)])
    counts, _ = np.histogram(firsts, bins=10, range=(0.0, 1.0))
    assert stats.chisquare(counts).pvalue > 1e-3
