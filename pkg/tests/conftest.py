import numpy as np
import pytest

from symdigits import (TrainConfig, augment_shifts, load_bundled_dataset, split)
from symdigits.digits import Dataset


@pytest.fixture(scope="session")
def corpus():
    return load_bundled_dataset()


@pytest.fixture(scope="session")
def augmented(corpus):
    return augment_shifts(corpus)


@pytest.fixture(scope="session")
def small_splits(corpus):
    """Quick train/test pair built from a 400-origin slice of the corpus."""
    head = Dataset(corpus.pixels[:400], corpus.labels[:400], corpus.origin_ids[:400],
                   name="head400")
    return split(augment_shifts(head), test_fraction=0.25, seed=0)


@pytest.fixture(scope="session")
def quick_config():
    return TrainConfig(seed=0, epochs=25)


def random_images(count, seed=0, zero_free=False):
    rng = np.random.default_rng(seed)
    raw = rng.integers(0, 17, size=(count, 64))
    if zero_free:
        raw[raw == 8] = 9
    return raw / 8.0 - 1.0
