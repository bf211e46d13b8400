"""Analytic-vs-finite-difference agreement for every loss."""
import numpy as np
import pytest

from gradcheck import run_all_checks


@pytest.mark.parametrize("seed", [123, 7])
def test_all_loss_gradients_match_finite_differences(seed):
    results = run_all_checks(seed)
    assert len(results) >= 9  # every loss contributes at least one tensor
    for name, rel in results:
        frac_tight = float((rel < 1e-3).mean())
        assert frac_tight >= 0.95, (name, frac_tight)
        assert float(rel.max()) < 1e-2, (name, rel.max())


def test_gradients_are_actually_nonzero():
    results = run_all_checks(55)
    for name, rel in results:
        assert np.isfinite(rel).all(), name
