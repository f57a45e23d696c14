import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orbitsep.groups import (
    DimensionMismatch,
    InvalidDimension,
    Permutation,
    ProductGroupElement,
    Signal,
    SymMatrix,
    apply_product,
    conjugate_sym,
    cyclic_shift,
    scalar_root_action,
)
from orbitsep.invariants import (
    conjugation_invariants,
    conjugation_map,
    default_sort_count,
    diag_offdiag_invariants,
    f_star,
    feature_count_bound,
    fourier_invariants,
    fourier_map,
    multiset_equal,
    power_sums,
    sample_sort_separators,
    sort_separator,
    veronese_generators,
    veronese_generators_map,
    veronese_map,
    veronese_separators,
)
from orbitsep.separation import features_close


# -- power sums -------------------------------------------------------------------


def test_power_sums_example():
    np.testing.assert_array_equal(power_sums([1, 2, 3], 3), [6, 14, 36])
    np.testing.assert_array_equal(power_sums(np.zeros(4), 4), np.zeros(4))


@given(st.lists(st.integers(-50, 50), min_size=1, max_size=8), st.randoms(use_true_random=False))
def test_power_sums_symmetric(v, r):
    w = list(v)
    r.shuffle(w)
    np.testing.assert_array_equal(power_sums(v, len(v)), power_sums(w, len(v)))


def test_power_sums_determine_multisets():
    # small integer entries keep every power sum exact in double precision
    rng = np.random.default_rng(0)
    disagreements = 0
    for _ in range(10_000):
        n = int(rng.integers(1, 9))
        a = rng.integers(-3, 4, n)
        b = a.copy() if rng.random() < 0.3 else rng.integers(-3, 4, n)
        rng.shuffle(b)
        same_ps = np.array_equal(power_sums(a, n), power_sums(b, n))
        disagreements += same_ps != multiset_equal(a, b)
    assert disagreements == 0


# -- symmetric-matrix families ------------------------------------------------------------


X22 = SymMatrix.from_dense([[1, 2], [2, 3]])


def test_diag_offdiag_example():
    np.testing.assert_array_equal(diag_offdiag_invariants(X22), [4, 10, 2])


def test_f_star_examples():
    assert f_star(X22) == 8
    assert f_star(SymMatrix([1.0, -2.0, 5.0], np.zeros(3))) == 0


def test_conjugation_invariants_example():
    np.testing.assert_array_equal(conjugation_invariants(X22), [4, 10, 2, 8])


def test_symmatrix_families_reject_n1():
    with pytest.raises(InvalidDimension):
        f_star(SymMatrix([1.0], []))


def test_diag_offdiag_invariant_under_product_group():
    rng = np.random.default_rng(1)
    for _ in range(100):
        X = SymMatrix.random(4, rng)
        g = ProductGroupElement.random(4, rng)
        assert features_close(diag_offdiag_invariants(X), diag_offdiag_invariants(apply_product(g, X)), 1e-9)


def test_diag_offdiag_separates_diag_multisets():
    rng = np.random.default_rng(2)
    for _ in range(200):
        X = SymMatrix.random(4, rng)
        Y = SymMatrix(X.diag + rng.normal(0, 0.1, 4), X.offdiag)
        assert not multiset_equal(X.diag, Y.diag)
        assert not np.allclose(diag_offdiag_invariants(X), diag_offdiag_invariants(Y), rtol=1e-12, atol=0)


def test_f_star_h_invariant():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 7))
        X = SymMatrix.random(n, rng)
        worst = max(worst, abs(f_star(conjugate_sym(Permutation.random(n, rng), X)) - f_star(X)))
    assert worst <= 1e-12


def test_conjugation_invariants_invariant():
    rng = np.random.default_rng(4)
    for _ in range(1000):
        n = int(rng.integers(2, 7))
        X = SymMatrix.random(n, rng)
        Y = conjugate_sym(Permutation.random(n, rng), X)
        assert features_close(conjugation_invariants(X), conjugation_invariants(Y), 1e-9)


def test_conjugation_map_batches_like_scalar_calls():
    rng = np.random.default_rng(5)
    f = conjugation_map(4)
    batch = rng.standard_normal((7, 10))
    out = f(batch)
    for row, x in zip(out, batch):
        np.testing.assert_allclose(row, conjugation_invariants(SymMatrix.from_packed(x)), rtol=1e-14)


def test_feature_map_rejects_wrong_shape():
    with pytest.raises(DimensionMismatch):
        conjugation_map(3)(np.zeros(5))


# -- Veronese ------------------------------------------------------------------------------


def test_veronese_examples():
    assert veronese_separators((1, 2), 2, 1) == (1, 2, 4)
    assert veronese_separators((-1, -2), 2, 1) == (1, 2, 4)
    np.testing.assert_array_equal(veronese_generators((1, 2), 2), [1, 2, 4])


@pytest.mark.parametrize("n", range(1, 9))
def test_veronese_generators_length(n):
    assert veronese_generators((1 + 1j, 0.5), n).size == n + 1
    assert veronese_generators_map(n).output_len == 2 * (n + 1)


def test_veronese_rejects_bad_j():
    with pytest.raises(ValueError):
        veronese_separators((1, 1), 4, 0)
    with pytest.raises(ValueError):
        veronese_separators((1, 1), 4, 4)


@pytest.mark.parametrize("n", range(2, 9))
def test_veronese_invariant_under_every_root(n):
    rng = np.random.default_rng(n)
    maps = [veronese_map(n, j) for j in range(1, n)] + [veronese_generators_map(n)]
    for _ in range(1000):
        pt = rng.uniform(0.5, 1.5, 2) * np.exp(1j * rng.uniform(0, 2 * np.pi, 2))
        k = int(rng.integers(n))
        moved = np.array(scalar_root_action(k, n, pt))
        for f in maps:
            assert features_close(f(pt), f(moved), 1e-9)


# -- Fourier ------------------------------------------------------------------------------------


def test_fourier_delta():
    inv = fourier_invariants(Signal([1, 0, 0, 0]))
    np.testing.assert_allclose(inv.power, np.ones(4))
    np.testing.assert_allclose(inv.bispectrum, np.ones((4, 4)))
    assert inv.mean == 1


def test_fourier_constant():
    inv = fourier_invariants(Signal(np.ones(4)))
    assert inv.mean == 4
    np.testing.assert_allclose(inv.power, [16, 0, 0, 0], atol=1e-12)
    expected = np.zeros((4, 4))
    expected[0, 0] = 64
    np.testing.assert_allclose(inv.bispectrum, expected, atol=1e-12)


def test_fourier_shift_invariance_example():
    x = Signal([1, 2, 3])
    a, b = fourier_invariants(x), fourier_invariants(cyclic_shift(1, x))
    np.testing.assert_allclose(a.flat(), b.flat(), atol=1e-12)


def test_fourier_map_matches_flat():
    rng = np.random.default_rng(6)
    x = rng.standard_normal(6)
    np.testing.assert_allclose(fourier_map(6)(x), fourier_invariants(x).flat(), rtol=1e-13)


def test_bispectrum_symmetric_for_real_signals():
    rng = np.random.default_rng(7)
    for n in range(2, 17):
        b = fourier_invariants(rng.standard_normal(n)).bispectrum
        np.testing.assert_allclose(b, b.T, rtol=1e-12, atol=1e-12)


@given(st.integers(2, 16), st.integers(-40, 40), st.integers(0, 2**32 - 1))
def test_fourier_shift_invariance_property(n, t, seed):
    x = np.random.default_rng(seed).standard_normal(n)
    f = fourier_map(n)
    assert features_close(f(x), f(np.roll(x, t)), 1e-9)


# -- sort separators ----------------------------------------------------------------------------


def test_sort_separator_examples():
    assert sort_separator([[1], [2]], [1, 0], [1]) == 1
    X = np.random.default_rng(8).standard_normal((5, 3))
    assert sort_separator(X, np.zeros(5), [1, 2, 3]) == 0


def test_sort_separator_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        sort_separator(np.zeros((3, 2)), np.zeros(4), np.zeros(2))


@given(st.integers(1, 7), st.integers(1, 4), st.integers(0, 2**32 - 1))
@settings(max_examples=200)
def test_sort_separator_exact_row_permutation_invariance(n, d, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    u, v = rng.standard_normal(n), rng.standard_normal(d)
    assert sort_separator(X, u, v) == sort_separator(X[rng.permutation(n)], u, v)


def test_sort_counts():
    assert default_sort_count(5, 3) == 31 == feature_count_bound(15)
    assert feature_count_bound(15, generic=True) == 16
    assert sample_sort_separators(5, 3, seed=1).output_len == 31
    assert sample_sort_separators(5, 3, 16, seed=1).output_len == 16


def test_sort_separators_deterministic_and_prefix_stable():
    X = np.random.default_rng(9).standard_normal((4, 2))
    a = sample_sort_separators(4, 2, 17, seed=3)(X)
    b = sample_sort_separators(4, 2, 17, seed=3)(X)
    np.testing.assert_array_equal(a, b)
    # feature i is independent of the total count
    np.testing.assert_array_equal(sample_sort_separators(4, 2, 9, seed=3)(X), a[:9])


def test_sort_separators_match_single_feature():
    f = sample_sort_separators(3, 2, 5, seed=4)
    X = np.random.default_rng(10).standard_normal((3, 2))
    U, V = f.params["u"], f.params["v"]
    for i, val in enumerate(f(X)):
        assert val == pytest.approx(sort_separator(X, U[:, i], V[:, i]), rel=1e-14)


def test_sort_separators_reject_zero_count():
    with pytest.raises(ValueError):
        sample_sort_separators(3, 2, 0)


def test_gcd_helper():
    from orbitsep.invariants import gcd_coprime

    assert gcd_coprime(3, 8) and not gcd_coprime(2, 4)
    assert all(gcd_coprime(j, 7) for j in range(1, 7))
    assert math.gcd(6, 9) == 3 and not gcd_coprime(6, 9)
