import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_piecewise_path
from oracles import iterated_integral_piecewise, shuffle_brute
from levysig.paths import CadlagSamplePath, from_increments
from levysig.signature import ito_iterated_sum, marcus_signature, signature_increment
from levysig.tensor import (
    AlgebraError,
    TensorElement,
    WordCombination,
    tensor_exp,
    tensor_product,
)


def _continuous_path(rng, letters=(1, 2, 3), pieces=6):
    return from_increments(letters, [(rng.uniform(0.1, 0.3), rng.normal(size=len(letters)), False) for _ in range(pieces)])


def test_single_segment_is_exp_of_increment():
    v = np.array([0.7, -1.3])
    path = from_increments((1, 2), [(1.0, v, False)])
    sig = marcus_signature(path, 4)
    expected = tensor_exp(TensorElement.from_vector((1, 2), 4, v))
    assert sig.terminal().allclose(expected, atol=1e-14)


def test_axis_path_area_words():
    path = from_increments((1, 2), [(0.5, [1.0, 0.0], False), (0.5, [0.0, 1.0], False)])
    term = marcus_signature(path, 2).terminal()
    assert term[(1, 2)] == pytest.approx(1.0, abs=1e-15)
    assert term[(2, 1)] == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("n", [1, 3, 7])
def test_pure_jump_unit_jumps(n):
    steps = []
    for _ in range(n):
        steps += [(0.1, [0.0], False), (0.0, [1.0], True)]
    steps.append((0.1, [0.0], False))
    term = marcus_signature(from_increments((1,), steps), 2).terminal()
    assert term[(1, 1)] == pytest.approx(n**2 / 2, abs=1e-12)


def test_level_zero_rejected():
    with pytest.raises(ValueError):
        marcus_signature(from_increments((1,), [(1.0, [1.0], False)]), 0)


def test_first_element_is_unit(rng):
    sig = marcus_signature(random_piecewise_path(rng), 3)
    assert sig.element(0).allclose(TensorElement.unit((1, 2), 3), atol=0)


def test_left_limit_stored_on_first_node_of_jump_pair():
    path = from_increments((1,), [(0.5, [1.0], False), (0.0, [2.0], True), (0.5, [0.0], False)])
    sig = marcus_signature(path, 2)
    assert sig.element(1)[(1,)] == pytest.approx(1.0)
    assert sig.at(0.5)[(1,)] == pytest.approx(3.0)


def test_increment_trivial_cases(rng):
    path = random_piecewise_path(rng, n_pieces=10)
    sig = marcus_signature(path, 3)
    t = float(path.times[4])
    assert signature_increment(sig, t, t).allclose(TensorElement.unit((1, 2), 3), atol=1e-13)
    assert signature_increment(sig, 0.0, t).allclose(sig.at(t), atol=1e-13)
    with pytest.raises(ValueError):
        signature_increment(sig, 0.5, 0.1)


def test_increment_rejects_non_node_time(rng):
    path = random_piecewise_path(rng)
    sig = marcus_signature(path, 2)
    off = float(path.times[1]) + 1e-7
    with pytest.raises(Exception):
        signature_increment(sig, 0.0, off)


@given(st.integers(0, 2**32 - 1))
def test_chen_composition_all_node_triples(seed):
    rng = np.random.default_rng(seed)
    path = random_piecewise_path(rng, letters=(1, 2), n_pieces=9)
    sig = marcus_signature(path, 3)
    times = np.unique(path.times)
    for s, u, t in itertools.combinations(times, 3):
        lhs = tensor_product(signature_increment(sig, s, u), signature_increment(sig, u, t))
        assert lhs.max_abs_diff(signature_increment(sig, s, t)) <= 1e-12 * max(1.0, np.max(np.abs(lhs.flat())))


@given(st.integers(0, 2**32 - 1))
def test_signature_elements_are_group_like(seed):
    rng = np.random.default_rng(seed)
    path = random_piecewise_path(rng, letters=(1, 2), n_pieces=6)
    L = 4
    term = marcus_signature(path, L).terminal()
    words = [w for n in range(1, L) for w in itertools.product((1, 2), repeat=n)]
    for a in words:
        for b in words:
            if len(a) + len(b) > L:
                continue
            lhs = term[a] * term[b]
            rhs = sum(c * term[w] for w, c in shuffle_brute(a, b).items())
            assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))


@given(st.integers(0, 2**32 - 1), st.sampled_from([(1,), (1, 2), (1, 2, 3)]))
def test_weak_geometric_symmetric_part(seed, letters):
    rng = np.random.default_rng(seed)
    path = random_piecewise_path(rng, letters=letters, n_pieces=7)
    sig = marcus_signature(path, 2)
    times = np.unique(path.times)
    s, t = float(times[1]), float(times[-2])
    inc = signature_increment(sig, s, t)
    A = len(letters)
    x = inc.levels[1]
    x2 = inc.levels[2].reshape(A, A)
    assert np.max(np.abs((x2 + x2.T) / 2 - 0.5 * np.outer(x, x))) <= 1e-12 * max(1.0, np.max(np.abs(x)) ** 2)


def test_matches_iterated_riemann_stieltjes_integrals(rng):
    path = _continuous_path(rng)
    sig = marcus_signature(path, 3)
    term = sig.terminal()
    for n in range(1, 4):
        for w in itertools.product((1, 2, 3), repeat=n):
            ref = iterated_integral_piecewise(path.times, path.values, w, path.letters)
            assert term[w] == pytest.approx(ref, rel=1e-10, abs=1e-12)


def test_ito_single_jump_is_zero():
    path = from_increments((1,), [(0.3, [0.0], False), (0.0, [1.7], True), (0.3, [0.0], False)])
    assert ito_iterated_sum(path, WordCombination.word((1,)), 1) == 0.0


def test_ito_time_integral_of_constant():
    path = from_increments((-1,), [(0.4, [0.4], False), (0.6, [0.6], False)])
    assert ito_iterated_sum(path, WordCombination.unit(), -1) == pytest.approx(1.0, abs=1e-15)


def test_ito_two_jumps_product():
    a, b = 0.8, -1.9
    path = from_increments(
        (1,), [(0.2, [0.0], False), (0.0, [a], True), (0.2, [0.0], False), (0.0, [b], True), (0.2, [0.0], False)]
    )
    assert ito_iterated_sum(path, WordCombination.word((1,)), 1) == pytest.approx(a * b, abs=1e-15)


def test_ito_rejects_unknown_letter_and_long_word(rng):
    path = random_piecewise_path(rng)
    with pytest.raises(AlgebraError):
        ito_iterated_sum(path, WordCombination.unit(), 7)
    sig = marcus_signature(path, 1)
    with pytest.raises(AlgebraError):
        ito_iterated_sum(path, WordCombination.word((1, 1)), 1, sig)


@given(st.integers(0, 2**32 - 1))
def test_ito_marcus_bridge_pure_jump(seed):
    rng = np.random.default_rng(seed)
    sizes = rng.normal(size=rng.integers(1, 8))
    steps = []
    for a in sizes:
        steps += [(rng.uniform(0.05, 0.2), [0.0], False), (0.0, [a], True)]
    steps.append((0.1, [0.0], False))
    path = from_increments((1,), steps)
    sig = marcus_signature(path, 2)
    gap = sig.terminal()[(1, 1)] - ito_iterated_sum(path, WordCombination.word((1,)), 1, sig)
    assert gap == pytest.approx(0.5 * float(np.sum(sizes**2)), abs=1e-12 * max(1.0, float(np.sum(sizes**2))))


def test_evaluate_returns_one_value_per_node(rng):
    path = random_piecewise_path(rng)
    sig = marcus_signature(path, 2)
    vals = sig.evaluate(WordCombination({(): 2.0, (1,): 1.0}))
    assert vals.shape == (path.n_nodes,)
    np.testing.assert_allclose(vals, 2.0 + path.component(1), atol=1e-13)


def test_brownian_ito_sum_uses_left_points():
    path = CadlagSamplePath((0,), np.array([0.0, 0.5, 1.0]), np.array([[0.0], [1.0], [3.0]]), np.zeros(3, dtype=bool))
    assert ito_iterated_sum(path, WordCombination.word((0,)), 0) == pytest.approx(0.0 * 1.0 + 1.0 * 2.0)
