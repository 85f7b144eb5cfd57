"""
Top-k and error-feedback compression
"""
from fractions import Fraction

import numpy as np
import pytest

from app.services.compressor import (
    CompressionError,
    ErrorState,
    ef_compress,
    kept_count,
    top_k,
    top_k_indices,
)


def test_top_k_keeps_largest_magnitudes():
    v = np.array([3.0, -1.0, 2.0])
    assert np.array_equal(top_k(v, Fraction(2, 3)), [3.0, 0.0, 2.0])


def test_top_k_identity_at_full_ratio():
    v = np.random.default_rng(0).standard_normal(17)
    assert np.array_equal(top_k(v, 1.0), v)


def test_top_k_ties_go_to_lowest_index():
    v = np.array([5.0, -5.0, 0.0, 0.0])
    assert np.array_equal(top_k(v, 0.25), [5.0, 0.0, 0.0, 0.0])


def test_top_k_all_equal_magnitudes():
    v = np.array([1.0, -1.0, 1.0, -1.0, 1.0])
    assert list(top_k_indices(v, 0.4)) == [0, 1]


@pytest.mark.parametrize(
    "delta, d, k",
    [(0.25, 4, 1), (0.26, 4, 2), (1e-9, 100, 1), (1.0, 7, 7), (Fraction(1, 3), 3, 1), (0.1, 20, 2)],
)
def test_kept_count_is_ceiling(delta, d, k):
    assert kept_count(delta, d) == k


@pytest.mark.parametrize("delta", [0, -0.1, 1.5, float("nan")])
def test_invalid_ratio_raises(delta):
    with pytest.raises(CompressionError):
        top_k(np.ones(3), delta)


def test_non_finite_input_raises():
    with pytest.raises(CompressionError):
        top_k(np.array([1.0, np.inf]), 0.5)


def test_exact_arrays_use_same_mask():
    values = [Fraction(3), Fraction(-1), Fraction(2), Fraction(-3)]
    exact = np.array(values, dtype=object)
    floats = np.array([float(v) for v in values])
    assert list(top_k_indices(exact, 0.5)) == list(top_k_indices(floats, 0.5)) == [0, 3]


def test_exact_top_k_drops_to_rational_zero():
    v = np.array([Fraction(3), Fraction(1)], dtype=object)
    out = top_k(v, 0.5)
    assert all(isinstance(x, Fraction) for x in out)
    assert all(isinstance(x, Fraction) for x in out / 2)

    update, e_next = ef_compress(v, ErrorState.zeros(2, exact=True), 0.5)
    assert all(isinstance(x, Fraction) for x in update)
    assert all(isinstance(x, Fraction) for x in e_next.residual)


@pytest.mark.parametrize("delta", [0.1, 0.3, Fraction(1, 2), 1.0])
def test_top_k_is_idempotent(delta):
    rng = np.random.default_rng(4)
    for v in rng.standard_normal((50, 13)):
        once = top_k(v, delta)
        assert np.array_equal(top_k(once, delta), once)


@pytest.mark.parametrize("d", [1, 5, 12])
def test_contraction_is_tight_for_equal_magnitudes(d):
    signs = np.where(np.arange(d) % 2 == 0, 1, -1)
    v = np.array([Fraction(int(s) * 3, 2) for s in signs], dtype=object)
    squared = sum(v * v)
    for k in range(1, d + 1):
        dropped = top_k(v, Fraction(k, d)) - v
        assert sum(dropped * dropped) == (1 - Fraction(k, d)) * squared


def test_contraction_is_strict_for_unequal_magnitudes():
    v = np.array([4.0, -1.0, 2.0, 0.5])
    for k in range(1, 4):
        dropped = top_k(v, Fraction(k, 4)) - v
        assert dropped @ dropped < (1 - k / 4) * (v @ v)


def test_ef_compress_without_compression():
    update, e_next = ef_compress(np.array([1.0, 0.0]), ErrorState.zeros(2), 1.0)
    assert np.array_equal(update, [1.0, 0.0])
    assert np.array_equal(e_next.residual, [0.0, 0.0])


def test_ef_compress_keeps_residual():
    update, e_next = ef_compress(np.array([3.0, -1.0, 2.0]), ErrorState.zeros(3), Fraction(2, 3))
    assert np.array_equal(update, [3.0, 0.0, 2.0])
    assert np.array_equal(e_next.residual, [0.0, -1.0, 0.0])


def test_ef_compress_flushes_dominant_residual():
    e = ErrorState(np.array([0.0, -1.0, 0.0]))
    update, e_next = ef_compress(np.zeros(3), e, Fraction(1, 3))
    assert np.array_equal(update, [0.0, -1.0, 0.0])
    assert np.array_equal(e_next.residual, [0.0, 0.0, 0.0])


def test_ef_compress_conserves_mass_exactly():
    rng = np.random.default_rng(11)
    e = ErrorState.zeros(6, exact=True)
    for _ in range(25):
        g = np.array([Fraction(int(x), 7) for x in rng.integers(-20, 20, size=6)], dtype=object)
        update, e_next = ef_compress(g, e, 0.3)
        assert all(a == b for a, b in zip(e_next.residual + update, e.residual + g))
        e = e_next


def test_ef_compress_dimension_mismatch():
    with pytest.raises(CompressionError):
        ef_compress(np.ones(3), ErrorState.zeros(4), 0.5)
