import numpy as np
import pytest

from heliogen.data import make_synthetic_dataset


@pytest.fixture()
def synth_dataset(tmp_path):
    """Small deterministic dataset: 6 pairs at 32 px, 2 of them test."""
    return make_synthetic_dataset(tmp_path / "data", n=6, size=32, seed=11, n_test=2)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240901)
