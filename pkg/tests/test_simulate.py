import numpy as np
import pytest

from sparsevar.simulate import ar_coefs, companion, diagonal_var, simulate_var, spectral_radius


def test_ar2_generator_is_seeded():
    a = simulate_var(ar_coefs([0.5, 0.3]), 300, seed=7)
    b = simulate_var(ar_coefs([0.5, 0.3]), 300, seed=7)
    assert a.shape == (300, 1)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, simulate_var(ar_coefs([0.5, 0.3]), 300, seed=8))


def test_unstable_rejected():
    assert spectral_radius(ar_coefs([1.05])) == pytest.approx(1.05)
    with pytest.raises(ValueError, match="spectral radius"):
        simulate_var(ar_coefs([1.05]), 10, seed=0)


def test_diagonal_var_gives_independent_series():
    y = simulate_var(diagonal_var([0.5], 3), 4000, seed=1)
    corr = np.corrcoef(y.T)
    assert np.abs(corr[np.triu_indices(3, 1)]).max() < 0.06


def test_companion_shape_and_level():
    coefs = diagonal_var([0.4, 0.2], 2)
    assert companion(coefs).shape == (4, 4)
    y = simulate_var(coefs, 2000, seed=2, level=3.0)
    np.testing.assert_allclose(y.mean(axis=0), 3.0, atol=0.15)


def test_recursion_matches_definition():
    coefs = np.zeros((2, 2, 2))
    coefs[0, 1, 0] = 0.3
    coefs[1, 1, 1] = 0.4
    rng = np.random.default_rng(3)
    eps = rng.standard_normal((250, 2))
    y = simulate_var(coefs, 50, seed=3, burn=200)
    # rebuild with the same draws
    full = np.zeros((252, 2))
    for t in range(2, 252):
        full[t] = eps[t - 2] + coefs[:, :, 0] @ full[t - 1] + coefs[:, :, 1] @ full[t - 2]
    np.testing.assert_allclose(y, full[202:])


def test_bad_shapes():
    with pytest.raises(ValueError):
        simulate_var(np.zeros((2, 3, 1)), 10, seed=0)
    with pytest.raises(ValueError):
        simulate_var(ar_coefs([0.1]), 0, seed=0)
