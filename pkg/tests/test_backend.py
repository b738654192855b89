import numpy as np
import pytest

from amkit import _backend, _ext_py
from amkit.core import make_rng


def test_backend_name_consistent():
    assert _backend.NAME in ("cython", "numpy")
    assert "numpy" in _backend.available()
    with pytest.raises(ValueError):
        _backend.async_sweep(np.ones((2, 1)), np.ones(2), np.arange(2), 0, 2, backend="fortran")


@pytest.mark.parametrize("code,n", [(_backend.POWER, 2), (_backend.POWER, 3), (_backend.EXP, 0)])
def test_sweep_and_stability_parity(code, n):
    r = make_rng(3)
    for trial in range(5):
        xi = 2.0 * r.integers(0, 2, size=(30, 12)) - 1.0
        sigma = 2.0 * r.integers(0, 2, size=30) - 1.0
        order = r.permutation(30)
        outs = [_backend.async_sweep(xi, sigma, order, code, n, backend=b) for b in _backend.available()]
        for o in outs[1:]:
            assert np.array_equal(o, outs[0])
        counts = {_backend.unstable_spins(xi, code, n, backend=b) for b in _backend.available()}
        assert len(counts) == 1


def test_gauss_descent_parity():
    r = make_rng(4)
    V = r.standard_normal((40, 2))
    X = r.standard_normal((3, 2))
    mask = np.array([1.0, 1.0])
    res = [_backend.gauss_descent(V, X, 2.0, 0.5, 0.1, 50, 1e-8, mask, backend=b) for b in _backend.available()]
    for other in res[1:]:
        assert np.max(np.abs(other[0] - res[0][0])) <= 1e-12
        assert np.array_equal(other[1], res[0][1]) and np.array_equal(other[2], res[0][2])


def test_pure_kernel_inputs_untouched():
    xi = np.ones((4, 2))
    sigma = np.array([1.0, -1.0, 1.0, -1.0])
    before = sigma.copy()
    _backend.async_sweep(xi, sigma, np.arange(4), _ext_py.POWER, 2)
    assert np.array_equal(sigma, before)
