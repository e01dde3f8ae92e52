import numpy as np
import pytest

from alignlab.rng import Rng


def test_same_seed_same_stream():
    a = Rng(42).random((100,))
    b = Rng(42).random((100,))
    assert np.array_equal(a, b)


def test_different_seeds_differ():
    assert not np.array_equal(Rng(0).random((100,)), Rng(1).random((100,)))


def test_child_is_deterministic():
    a = Rng(7).child("alpha").normal((50,))
    b = Rng(7).child("alpha").normal((50,))
    assert np.array_equal(a, b)


def test_child_tags_independent():
    a = Rng(7).child("alpha").random((100,))
    b = Rng(7).child("beta").random((100,))
    assert not np.array_equal(a, b)


def test_child_differs_from_parent():
    assert not np.array_equal(Rng(7).random((100,)), Rng(7).child("x").random((100,)))


def test_nested_children_deterministic():
    a = Rng(3).child("outer").child("inner").random((20,))
    b = Rng(3).child("outer").child("inner").random((20,))
    assert np.array_equal(a, b)


def test_bernoulli_values_and_mean():
    draws = Rng(0).bernoulli(0.3, (20000,))
    assert set(np.unique(draws)) <= {0.0, 1.0}
    assert abs(draws.mean() - 0.3) < 0.02


@pytest.mark.parametrize("p", [-0.1, 1.5])
def test_bernoulli_rejects_bad_probability(p):
    with pytest.raises(ValueError, match="probability"):
        Rng(0).bernoulli(p, (4,))


def test_permutation_is_permutation():
    perm = Rng(5).permutation(100)
    assert sorted(perm.tolist()) == list(range(100))


def test_choice_without_replacement_distinct():
    picks = Rng(5).choice_without_replacement(10, 10)
    assert sorted(picks.tolist()) == list(range(10))


def test_integers_range():
    vals = Rng(1).integers(2, 9, (1000,))
    assert vals.min() >= 2 and vals.max() < 9
