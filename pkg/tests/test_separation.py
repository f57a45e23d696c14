import numpy as np
import pytest

from orbitsep.galois import BadSetScanner
from orbitsep.groups import GroupTooLarge, enumerate_group
from orbitsep.invariants import (
    conjugation_map,
    diag_offdiag_map,
    fourier_map,
    raw_diag_map,
    sample_sort_separators,
    f_star_map,
    veronese_generators_map,
    veronese_map,
)
from orbitsep.separation import (
    ConjugationAction,
    CyclicAction,
    ProductAction,
    RowPermutationAction,
    ScalarRootAction,
    collision_search,
    features_close,
    features_equal,
    invariance_test,
    same_orbit_bruteforce,
    separation_test,
)


def as_complex(rows):
    a = np.asarray(rows, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


ACTIONS = [ConjugationAction(4), ProductAction(3), CyclicAction(6), ScalarRootAction(5), RowPermutationAction(4, 2)]


# -- tolerance helpers ---------------------------------------------------------------


def test_features_equal_is_coordinatewise():
    assert features_equal([1e6, 1.0], [1e6, 1.0 + 1e-10], 1e-9)
    # a large coordinate does not widen the tolerance of a small one
    assert not features_equal([1e6, 1.0], [1e6, 1.1], 1e-9)
    assert features_equal([1.0], [1.0], 0.0)
    assert not features_equal([1.0], [np.nextafter(1.0, 2.0)], 0.0)


def test_features_close_uses_reference_norm():
    assert features_close([1e6, 1.0], [1e6, 1.0 + 1e-4], 1e-9)
    assert not features_close([1.0, 1.0], [1.0, 1.01], 1e-9)


# -- brute-force oracle ----------------------------------------------------------------


@pytest.mark.parametrize("action", ACTIONS, ids=lambda a: a.name)
def test_oracle_basic_properties(action):
    rng = np.random.default_rng(0)
    for _ in range(30):
        x = action.sample(rng)
        assert same_orbit_bruteforce(x, x, action)
        gx = action.act(action.random_element(rng), x)
        assert action.same_orbit(x, gx) and action.same_orbit(gx, x)
        noisy = np.asarray(x) + 1e-3 * rng.standard_normal(np.shape(x))
        assert not action.same_orbit(x, noisy)


@pytest.mark.parametrize("action", ACTIONS, ids=lambda a: a.name)
def test_oracle_symmetric_and_transitive(action):
    rng = np.random.default_rng(1)
    for _ in range(30):
        x = action.sample(rng)
        y = action.act(action.random_element(rng), x)
        z = action.act(action.random_element(rng), y)
        w = action.sample(rng)
        assert action.same_orbit(x, z)
        assert action.same_orbit(x, w) == action.same_orbit(w, x)


def test_conjugation_oracle_cap():
    with pytest.raises(GroupTooLarge):
        ConjugationAction(9).same_orbit(np.zeros(45), np.zeros(45))


# -- invariance suite ---------------------------------------------------------------------


def test_conjugation_invariance_n5():
    rep = invariance_test(conjugation_map(5), ConjugationAction(5), trials=1000)
    assert rep.passed and not rep.false_splits


def test_fourier_invariance_n16():
    rep = invariance_test(fourier_map(16), CyclicAction(16), trials=1000, tol=1e-9)
    assert rep.passed


def test_raw_diag_violations_carry_witnesses():
    rep = invariance_test(raw_diag_map(4), ConjugationAction(4), trials=200)
    assert not rep.passed and rep.false_splits
    w = rep.false_splits[0]
    assert {"trial", "x1", "x2", "f1", "f2", "element"} <= set(w)
    # replaying the recorded trial alone reproduces the witness
    again = invariance_test(raw_diag_map(4), ConjugationAction(4), trials=200, only=w["trial"])
    assert again.false_splits == [w]


def test_invariance_rejects_zero_trials():
    with pytest.raises(ValueError):
        invariance_test(conjugation_map(3), ConjugationAction(3), trials=0)


# -- separation suite -----------------------------------------------------------------------


@pytest.fixture(scope="module")
def checker3():
    scanner = BadSetScanner([f_star_map(3)], enumerate_group("product", 3))
    return lambda x: bool(scanner.scan(np.asarray(x)[None])[0][0])


def test_conjugation_separation_n3(checker3):
    rep = separation_test(conjugation_map(3), ConjugationAction(3), trials=10_000, badset_checker=checker3)
    assert rep.same_orbit_pairs >= 5000 and rep.distinct_orbit_pairs >= 4000
    assert not rep.false_splits
    assert not rep.uncertified_merges


def test_g_invariants_alone_merge_distinct_h_orbits(checker3):
    rep = separation_test(diag_offdiag_map(3), ConjugationAction(3), trials=1000, badset_checker=checker3)
    assert rep.uncertified_merges
    assert not rep.passed


def test_sort_separation_n4_d2():
    f = sample_sort_separators(4, 2, seed=0)
    rep = separation_test(f, RowPermutationAction(4, 2), trials=10_000)
    assert not rep.false_merges and not rep.false_splits


def test_veronese_noncoprime_merges():
    rep = separation_test(veronese_map(4, 2), ScalarRootAction(4), trials=2000)
    assert rep.false_merges and not rep.false_splits


def test_separation_thread_count_does_not_change_report():
    f, a = conjugation_map(4), ConjugationAction(4)
    r1 = separation_test(f, a, trials=1500, seed=7, workers=1)
    r4 = separation_test(f, a, trials=1500, seed=7, workers=4)
    assert r1.summary() == r4.summary()
    assert r1.false_merges == r4.false_merges and r1.false_splits == r4.false_splits


def test_separation_replay_trial_matches_full_run():
    f, a = diag_offdiag_map(3), ConjugationAction(3)
    full = separation_test(f, a, trials=300, seed=2)
    w = full.false_merges[0]
    single = separation_test(f, a, trials=300, seed=2, only=w["trial"])
    assert single.false_merges == [w]


# -- collision search --------------------------------------------------------------------------


def test_veronese_n4_j2_collision_certified():
    f, a = veronese_map(4, 2), ScalarRootAction(4)
    w = collision_search(f, a, budget=100_000)
    assert w is not None
    x1, x2 = as_complex(w["x1"]), as_complex(w["x2"])
    assert features_equal(f(x1), f(x2), 1e-9)
    assert not a.same_orbit(x1, x2)


@pytest.mark.parametrize("j", [1, 2, 3, 4])
def test_veronese_n5_coprime_no_collision(j):
    assert collision_search(veronese_map(5, j), ScalarRootAction(5), budget=100_000) is None


@pytest.mark.parametrize("n", range(1, 7))
def test_veronese_generators_no_collision(n):
    assert collision_search(veronese_generators_map(n), ScalarRootAction(n), budget=20_000) is None


def test_degree_three_fourier_collision_with_vanishing_bins():
    # signals supported on bins {1, 3} of n = 8: every bispectrum entry pairing
    # two active bins lands on an empty bin, so phases are invisible
    action = CyclicAction(8, support=(1, 3))
    f = fourier_map(8)
    w = collision_search(f, action, budget=1000)
    assert w is not None
    x1, x2 = as_complex(w["x1"]), as_complex(w["x2"])
    assert not action.same_orbit(x1, x2)
    assert features_equal(f(x1), f(x2), 1e-9)


def test_generic_fourier_has_no_collision():
    assert collision_search(fourier_map(7), CyclicAction(7), budget=5000) is None


def test_collision_search_rejects_zero_budget():
    with pytest.raises(ValueError):
        collision_search(conjugation_map(3), ConjugationAction(3), budget=0)
