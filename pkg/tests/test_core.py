import numpy as np
import pytest

from amkit.core import (PatternMatrix, as_mask, corrupt_state, flip_positions, full_mask, make_rng, overlap,
                        parallel_map, sample_binary_patterns, sign)
from amkit.errors import DimensionError, ValidationError


def test_binary_patterns_codomain_and_shape():
    P = sample_binary_patterns(2, 1, 0)
    assert P.data.shape == (2, 1)
    assert set(np.unique(P.data)) <= {-1.0, 1.0}
    assert P.kind == "binary"


def test_binary_patterns_mean_within_binomial_interval():
    P = sample_binary_patterns(1000, 1, 7)
    assert abs(P.data.mean()) < 3 / np.sqrt(1000)


def test_binary_patterns_deterministic():
    assert np.array_equal(sample_binary_patterns(50, 7, 3).data, sample_binary_patterns(50, 7, 3).data)
    assert not np.array_equal(sample_binary_patterns(50, 7, 3).data, sample_binary_patterns(50, 7, 4).data)


@pytest.mark.parametrize("D,K", [(0, 3), (3, 0)])
def test_binary_patterns_reject_empty(D, K):
    with pytest.raises(DimensionError):
        sample_binary_patterns(D, K, 0)


def test_two_point_correlator_is_identity():
    samples = 4000
    acc = np.zeros((3, 2, 3, 2))
    for s in range(samples):
        P = sample_binary_patterns(3, 2, s).data
        acc += np.einsum("im,jn->imjn", P, P)
    acc /= samples
    expected = np.einsum("ij,mn->imjn", np.eye(3), np.eye(2))
    assert np.max(np.abs(acc - expected)) < 4 / np.sqrt(samples)


def test_corrupt_state_contracts():
    s = sample_binary_patterns(100, 1, 1).column(0)
    assert np.array_equal(corrupt_state(s, 0, 5), s)
    assert np.array_equal(corrupt_state(s, 100, 5), -s)
    assert int(np.sum(corrupt_state(s, 10, 5) != s)) == 10
    assert np.array_equal(corrupt_state(corrupt_state(s, 10, 5), 10, 5), s)
    idx = flip_positions(100, 10, 5)
    assert np.array_equal(np.flatnonzero(corrupt_state(s, 10, 5) != s), idx)


def test_corrupt_state_errors():
    s = np.ones(4)
    with pytest.raises(ValidationError):
        corrupt_state(s, 5, 0)
    with pytest.raises(ValidationError):
        corrupt_state(np.array([0.5, 1.0]), 1, 0)


def test_overlap_examples():
    xi = sample_binary_patterns(8, 1, 2).column(0)
    assert overlap(xi, xi) == 8
    assert overlap(xi, -xi) == -8
    r = make_rng(9)
    a, b = r.standard_normal(10), r.standard_normal(10)
    assert overlap(a, b) == pytest.approx(sum(x * y for x, y in zip(a, b)), rel=1e-14)
    with pytest.raises(DimensionError):
        overlap(np.ones(3), np.ones(4))


def test_pattern_matrix_validation():
    with pytest.raises(ValidationError):
        PatternMatrix(np.array([[1.0, 0.5]]), "binary")
    with pytest.raises(ValidationError):
        PatternMatrix(np.array([[np.nan]]))
    P = PatternMatrix(np.arange(6.0).reshape(3, 2))
    assert (P.D, P.K) == (3, 2)
    with pytest.raises(ValueError):
        P.data[0, 0] = 9.0
    assert np.array_equal(P.subset([1]).data, P.data[:, [1]])
    assert np.array_equal(PatternMatrix.from_rows(P.data.T).data, P.data)


def test_rng_streams():
    a = make_rng(1, 2).standard_normal(5)
    assert np.array_equal(a, make_rng(1, 2).standard_normal(5))
    assert not np.array_equal(a, make_rng(1, 3).standard_normal(5))
    assert not np.array_equal(a, make_rng(2, 2).standard_normal(5))


def test_sign_and_masks():
    assert np.array_equal(sign([-2.0, 0.0, 3.0]), [-1.0, 1.0, 1.0])
    assert np.array_equal(full_mask(3), np.ones(3))
    assert np.array_equal(as_mask(None, 2), np.ones(2))
    with pytest.raises(ValidationError):
        as_mask([0, 2], 2)


def test_parallel_map_preserves_order():
    assert parallel_map(lambda i: i * i, range(20), threads=4) == [i * i for i in range(20)]
