import numpy as np
import pytest

from synth import toy_vocabulary


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def toy_vocab(rng):
    """10 words, 4-dim vectors, full stroke coverage."""
    return toy_vocabulary(rng, n_words=10, dim=4)
