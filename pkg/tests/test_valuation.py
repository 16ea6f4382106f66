import itertools

import numpy as np
import pytest
import sympy

from conftest import random_pure_jump_primary
from levysig.calculus import SigModelParams, SigPayoff, StructuralError, payoff_lift
from levysig.levy import primary_process_triplet
from levysig.market import SimulationGrid, simulate_model_direct, simulate_primary
from levysig.paths import from_increments
from levysig.signature import marcus_signature
from levysig.tensor import WordCombination, pair_levels
from levysig.valuation import (
    DegenerateDenominatorError,
    HedgeEngine,
    fit_path_functional,
    hedge_pnl_mc,
    hedge_strategy,
    mc_price,
    price_sig_payoff,
)

WORKED_TRIPLET = primary_process_triplet([(-0.5, 2.0)], 2)
WORKED_PARAMS = SigModelParams(1.0, {(): 0.2}, {(): 0.1}, K=2)


def _left_levels(sig, k):
    return [x[k] for x in sig.levels]


# --------------------------------------------------------------------------
# analytic price


def test_price_constant_payoff():
    assert price_sig_payoff(SigPayoff({(): 3.25}), WORKED_PARAMS, WORKED_TRIPLET, 1.0) == pytest.approx(3.25)


def test_price_martingale_increment_is_zero():
    assert price_sig_payoff((1,), WORKED_PARAMS, WORKED_TRIPLET, 1.0) == pytest.approx(0.0, abs=1e-15)


def test_price_worked_example():
    assert price_sig_payoff((1, 1), WORKED_PARAMS, WORKED_TRIPLET, 1.0) == pytest.approx(0.0225, abs=1e-15)


@pytest.mark.parametrize("T", [0.5, 2.0])
def test_price_quadratic_variation_scales_with_horizon(T):
    m2 = 2.0 * 0.25
    expected = T * (0.2**2 + 0.1**2 * m2) / 2
    assert price_sig_payoff((1, 1), WORKED_PARAMS, WORKED_TRIPLET, T) == pytest.approx(expected, abs=1e-15)


def test_price_checks_bound_and_market():
    p = SigModelParams(1.0, {(1,): 0.1}, {}, K=2)
    with pytest.raises(StructuralError, match="N >= m\\(nd\\+1\\)"):
        price_sig_payoff((1, 1), p, WORKED_TRIPLET, 1.0)
    with pytest.raises(StructuralError):
        price_sig_payoff((1,), WORKED_PARAMS, primary_process_triplet([(-0.5, 2.0)], 3), 1.0)


def test_price_degree_in_symbolic_coefficients():
    a, b, c = sympy.symbols("a b c")
    tr = primary_process_triplet([(0.4, 1.0), (-0.7, 0.5)], 4)
    p = SigModelParams(1, {(): a, (-1,): b}, {(1,): c, (): sympy.Rational(1, 5)}, K=4)
    for m, payoff in [(1, (1,)), (2, (1, 1)), (2, (-1, 1)), (2, (1, -1))]:
        price = sympy.expand(price_sig_payoff(payoff, p, tr, 1.0))
        if price == 0:
            continue
        assert sympy.Poly(price, a, b, c).total_degree() <= m


def test_martingale_terminated_payoffs_price_to_constant():
    tr = primary_process_triplet([(0.4, 1.0), (-0.7, 0.5)], 4)
    p = SigModelParams(1.0, {(): 0.3, (-1,): 0.2}, {(): 0.1, (1,): 0.2}, K=4)
    h = SigPayoff({(): 0.7, (-1, 1): 1.3, (1, -1, 1): -0.4, (-1, -1, 1): 2.0})
    p6 = SigModelParams(1.0, {(): 0.3, (-1,): 0.2}, {(): 0.1, (1,): 0.2}, K=6)
    tr6 = primary_process_triplet([(0.4, 1.0), (-0.7, 0.5)], 6)
    assert price_sig_payoff(h, p6, tr6, 1.0) == pytest.approx(0.7, abs=1e-13)
    assert price_sig_payoff(SigPayoff({(-1, 1): 1.0}), p, tr, 1.3) == pytest.approx(0.0, abs=1e-14)


# --------------------------------------------------------------------------
# Monte Carlo price


def test_mc_constant_payoff_has_zero_error():
    mean, se = mc_price(SigPayoff({(): 1.5}), WORKED_PARAMS, WORKED_TRIPLET, 1.0, 500, 10, 0)
    assert mean == pytest.approx(1.5)
    assert se == 0.0


def test_mc_worked_example_within_three_se():
    mean, se = mc_price((1, 1), WORKED_PARAMS, WORKED_TRIPLET, 1.0, 20_000, 50, 42)
    assert abs(mean - 0.0225) <= 3 * se


def test_mc_is_deterministic_and_thread_independent():
    a = mc_price((1, 1), WORKED_PARAMS, WORKED_TRIPLET, 1.0, 3000, 20, 9, shard_size=500)
    b = mc_price((1, 1), WORKED_PARAMS, WORKED_TRIPLET, 1.0, 3000, 20, 9, shard_size=500)
    c = mc_price((1, 1), WORKED_PARAMS, WORKED_TRIPLET, 1.0, 3000, 20, 9, shard_size=500, threads=4)
    assert a == b == c


def _random_case(rng):
    K = 4
    n = int(rng.integers(0, 2))
    model_words = [()] + ([(-1,), (0,), (1,)] if n else [])
    ell_w = {w: float(rng.normal(scale=0.2)) for w in model_words if rng.uniform() < 0.8 or w == ()}
    ell_nu = {w: float(rng.normal(scale=0.2)) for w in model_words if rng.uniform() < 0.8 or w == ()}
    params = SigModelParams(1.0, ell_w, ell_nu, K=K, n=n, d=1)
    payoff_words = [w for m in (1, 2) for w in itertools.product((-1, 1), repeat=m)]
    chosen = rng.choice(len(payoff_words), size=3, replace=False)
    h = {payoff_words[i]: float(rng.normal()) for i in chosen}
    h[()] = float(rng.normal())
    atoms = [(float(rng.uniform(0.2, 0.8)), float(rng.uniform(0.3, 1.5))), (float(-rng.uniform(0.2, 0.8)), float(rng.uniform(0.3, 1.5)))]
    return SigPayoff(h), params, primary_process_triplet(atoms, K)


@pytest.mark.slow
def test_random_payoff_battery_against_monte_carlo():
    rng = np.random.default_rng(2024)
    hits = 0
    for i in range(20):
        payoff, params, tr = _random_case(rng)
        analytic = price_sig_payoff(payoff, params, tr, 1.0)
        mean, se = mc_price(payoff, params, tr, 1.0, 20_000, 100, 100 + i)
        hits += abs(analytic - mean) <= 3 * se
    assert hits >= 19


# --------------------------------------------------------------------------
# hedging


@pytest.fixture(scope="module")
def worked_sig():
    path = simulate_primary(WORKED_TRIPLET, SimulationGrid(1.0, 50, 2))
    return marcus_signature(path, 2)


def test_hedge_replicable_payoff(worked_sig):
    rep = hedge_strategy((1,), WORKED_PARAMS, WORKED_TRIPLET, 1.0, worked_sig)
    assert rep.v_star == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(rep.theta_path, 1.0, rtol=0, atol=1e-14)
    assert rep.residual_variance <= 1e-24
    assert rep.denominator_floor_hits == 0


def test_hedge_zero_payoff(worked_sig):
    rep = hedge_strategy(SigPayoff({}), WORKED_PARAMS, WORKED_TRIPLET, 1.0, worked_sig)
    assert rep.v_star == 0.0
    np.testing.assert_array_equal(rep.theta_path, 0.0)


def test_hedge_time_then_price_word_closed_form(worked_sig):
    rep = hedge_strategy((-1, 1), WORKED_PARAMS, WORKED_TRIPLET, 1.0, worked_sig)
    np.testing.assert_allclose(rep.theta_path, rep.times, rtol=0, atol=1e-10)


def test_hedge_closed_form_for_longer_martingale_word(rng):
    tr = primary_process_triplet([(0.5, 1.0), (-0.5, 1.0)], 6)
    p = SigModelParams(1.0, {}, {(): 0.4, (1,): 0.3}, K=6)
    primary = random_pure_jump_primary(rng, K=6, n_jumps=4, drift=0.0)
    sig = marcus_signature(primary, 6)
    rep = hedge_strategy((1, -1, 1), p, tr, primary.horizon, sig)
    prefix = payoff_lift((1, -1), p)
    # left-limit ⟨ε_{I'}, sig of (t, S)⟩ through the lift identity
    vals = np.asarray(pair_levels(prefix, sig.levels, sig.alphabet))
    jumps = np.r_[False, np.diff(sig.times) == 0]
    left = np.arange(len(sig)) - jumps.astype(int)
    np.testing.assert_allclose(rep.theta_path, vals[left], rtol=0, atol=1e-10)
    model = simulate_model_direct(p, primary, marcus_signature(primary, p.model_level))
    s_sig = marcus_signature(model, 2)
    direct = np.asarray(pair_levels(WordCombination.word((1, -1)), s_sig.levels, (-1, 1)))
    np.testing.assert_allclose(vals, direct, rtol=0, atol=1e-10)


def test_hedge_value_equals_price(worked_sig):
    tr = primary_process_triplet([(0.4, 1.0), (-0.7, 0.5)], 4)
    p = SigModelParams(1.0, {(): 0.3, (-1,): 0.2}, {(): 0.1, (1,): 0.2}, K=4)
    path = simulate_primary(tr, SimulationGrid(1.0, 20, 5))
    sig = marcus_signature(path, 4)
    for payoff in [(1, 1), (-1, 1), SigPayoff({(1,): 0.5, (1, -1): 2.0, (): 1.0})]:
        rep = hedge_strategy(payoff, p, tr, 1.0, sig)
        assert abs(rep.v_star - price_sig_payoff(payoff, p, tr, 1.0)) <= 1e-12


def test_hedge_degenerate_denominator():
    p = SigModelParams(1.0, {(1,): 1.0}, {}, K=2)
    path = from_increments((-1, 0, 1, 2), [(0.5, [0.5, 0.1, 0.0, 0.0], False), (0.5, [0.5, 0.2, 0.0, 0.0], False)])
    tr = primary_process_triplet([(0.5, 1.0)], 2)
    sig = marcus_signature(path, 2)
    with pytest.raises(DegenerateDenominatorError, match="index 0"):
        hedge_strategy((1,), p, tr, 1.0, sig)
    rep = hedge_strategy((1,), p, tr, 1.0, sig, on_degenerate="zero")
    assert rep.denominator_floor_hits >= 1
    assert rep.theta_path[0] == 0.0


def test_hedge_rejects_wrong_horizon(worked_sig):
    with pytest.raises(ValueError):
        hedge_strategy((1,), WORKED_PARAMS, WORKED_TRIPLET, 2.0, worked_sig)


def test_hedge_engine_vectorises_over_paths(worked_sig):
    eng = HedgeEngine((1, 1), WORKED_PARAMS, WORKED_TRIPLET, 1.0)
    rows = [3, 10, 40]
    batch = [x[rows] for x in worked_sig.levels]
    th, _ = eng.theta(worked_sig.times[rows], batch)
    for r, value in zip(rows, th):
        single, _ = eng.theta(worked_sig.times[r], _left_levels(worked_sig, r))
        assert value == pytest.approx(float(single), abs=1e-14)


def test_hedge_pnl_zero_payoff():
    assert hedge_pnl_mc(SigPayoff({}), WORKED_PARAMS, WORKED_TRIPLET, 1.0, 500, 10, 0) == (0.0, 0.0)


def test_hedge_pnl_replicable_payoff_refines():
    u, h = hedge_pnl_mc((1,), WORKED_PARAMS, WORKED_TRIPLET, 1.0, 4000, 200, 1)
    assert u > 0
    assert h <= 0.1 * u


def test_hedge_pnl_generic_payoff_reduces_variance():
    tr = primary_process_triplet([(0.4, 1.0), (-0.7, 0.5)], 4)
    p = SigModelParams(1.0, {(): 0.3, (-1,): 0.2}, {(): 0.1, (1,): 0.2}, K=4)
    for payoff in [(1, 1), SigPayoff({(1,): 0.5, (1, -1): 2.0})]:
        u, h = hedge_pnl_mc(payoff, p, tr, 1.0, 4000, 100, 3)
        assert h <= u


# --------------------------------------------------------------------------
# regression on signature features


@pytest.fixture(scope="module")
def model_paths():
    tr = primary_process_triplet([(0.5, 1.0), (-0.3, 2.0)], 2)
    p = SigModelParams(1.0, {(): 0.3}, {(): 0.4}, K=2)
    rng = np.random.default_rng(8)
    grid = SimulationGrid(1.0, 50)
    out = []
    for _ in range(300):
        primary = simulate_primary(tr, grid, rng=rng)
        out.append(simulate_model_direct(p, primary, marcus_signature(primary, 1)))
    return out


def test_fit_recovers_signature_word(model_paths):
    word = (1, -1, 1)
    y = [marcus_signature(p, 3).terminal()[word] for p in model_paths]
    f, resid = fit_path_functional(model_paths, y, 3)
    assert resid <= 1e-8


def test_fit_constant_target_is_intercept(model_paths):
    f, resid = fit_path_functional(model_paths, [2.5] * len(model_paths), 2)
    assert resid <= 1e-10
    assert f[()] == pytest.approx(2.5, rel=1e-6)
    assert all(abs(c) <= 1e-6 for w, c in f.items() if w != ())


def test_fit_running_maximum_improves_with_level(model_paths):
    y = [float(np.max(p.component(1))) for p in model_paths]
    res = [fit_path_functional(model_paths, y, L)[1] for L in (1, 2, 3)]
    assert res[0] > res[1] > res[2]


def test_fit_rejects_length_mismatch(model_paths):
    with pytest.raises(ValueError):
        fit_path_functional(model_paths[:3], [1.0, 2.0], 1)
