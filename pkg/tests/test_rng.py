import numpy as np
import pytest

from spsnet.rng import derive_seed, substream


def test_same_path_same_stream():
    a = substream(42, "noise", 7).uniform(size=5)
    b = substream(42, "noise", 7).uniform(size=5)
    assert np.array_equal(a, b)


def test_different_paths_diverge():
    base = substream(42, "noise", 7).uniform(size=5)
    assert not np.array_equal(base, substream(42, "noise", 8).uniform(size=5))
    assert not np.array_equal(base, substream(42, "signs", 7).uniform(size=5))
    assert not np.array_equal(base, substream(43, "noise", 7).uniform(size=5))


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(1, "a") == derive_seed(1, "a")
    assert derive_seed(1, "a") != derive_seed(1, "b")
    assert derive_seed(1, "a", 2) != derive_seed(1, "a", 3)


def test_entropy_part_validation():
    with pytest.raises(ValueError):
        substream(-1)
    with pytest.raises(TypeError):
        derive_seed(1.5)
