"""Pricing and mean-variance hedging of sig-payoffs, and signature regression."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .calculus import PayoffLifter, SigModelParams, SigPayoff, StructuralError
from .levy import ExpectedSignatureCache, LevyTriplet
from .market import BatchSimulator, SimulationGrid, jump_atoms_of, mc_moments
from .paths import CadlagSamplePath
from .signature import SignaturePath, marcus_signature
from .tensor import EMPTY, WordCombination, _flat_index, pair_levels, words_up_to

DENOMINATOR_FLOOR = 1e-12


class DegenerateDenominatorError(ArithmeticError):
    pass


def _as_payoff(payoff) -> SigPayoff:
    if isinstance(payoff, SigPayoff):
        return payoff
    if isinstance(payoff, WordCombination):
        return SigPayoff(dict(payoff))
    return SigPayoff({tuple(payoff): 1.0})


def _check_market(params: SigModelParams, triplet: LevyTriplet):
    K = triplet.dimension - 2
    jump_atoms_of(triplet)
    if K != params.K:
        raise StructuralError(f"model uses N={params.K} but the market triplet carries N={K}")


def _check_bound(params: SigModelParams, m: int):
    need = params.required_K(m)
    if params.K < need:
        raise StructuralError(
            f"N >= m(nd+1) violated: m={m}, n={params.n}, d={params.d} need N >= {need}, got N={params.K}"
        )


def lift(payoff, params: SigModelParams) -> WordCombination:
    """``Σ h^I U_I(ℓ)`` after validating the structural bound."""
    payoff = _as_payoff(payoff)
    _check_bound(params, payoff.m)
    return PayoffLifter(params).lift_payoff(payoff)


def price_sig_payoff(payoff, params: SigModelParams, triplet: LevyTriplet, T: float):
    """``Σ h^I E⟨U_I(ℓ), X_T⟩`` in closed form."""
    _check_market(params, triplet)
    U = lift(payoff, params)
    cache = ExpectedSignatureCache(triplet, max(U.max_length, 1))
    total = 0.0
    for w, c in U.items():
        total = total + c * float(cache.word_value(w, T))
    return total


def mc_price(
    payoff,
    params: SigModelParams,
    triplet: LevyTriplet,
    T: float,
    paths: int,
    steps: int,
    seed: int,
    threads: int = 1,
    shard_size: int = 2000,
    brownian: bool = True,
) -> tuple:
    """``(mean, standard error)`` of ``⟨payoff, sig of (t, S)⟩`` at ``T`` over simulated paths."""
    _check_market(params, triplet)
    payoff = _as_payoff(payoff)
    comb = payoff.combination()
    m = max(payoff.m, 1)
    sim = BatchSimulator(
        jump_atoms_of(triplet), params.K, SimulationGrid(T, steps), brownian=brownian, params=params, s_hat_level=m
    )

    def sample(P, rng):
        st = sim.run(P, rng)
        return np.asarray(pair_levels(comb, st.s_hat_levels(), (-1, 1)), dtype=float) * np.ones(P)

    mean, se, _ = mc_moments(sample, paths, seed, shard_size=shard_size, threads=threads)
    return float(mean[0]), float(se[0])


class HedgeEngine:
    """Vectorised mean-variance hedge ``θ*(t, X_{t-})`` for one payoff.

    ``θ* = (σ_W A_W + σ_ν A_ν) / (σ_W² + σ_ν² m₂)`` where ``σ_W = ⟨ℓ_W, X⟩``,
    ``σ_ν = ⟨ℓ_ν, X⟩``, ``m_k = Σ λ x^k`` and ``A_W``, ``A_ν`` collect, over
    splits ``J₁ J₂ J₃`` of the lifted payoff words, ``⟨J₁, X⟩ E⟨J₃⟩(T - t)``
    weighted by ``1{J₂ = (0)}`` and ``m_{S(J₂)+1}/|J₂|!`` (``J₂`` all jump
    letters) respectively.
    """

    def __init__(self, payoff, params: SigModelParams, triplet: LevyTriplet, T: float):
        _check_market(params, triplet)
        self.params = params
        self.T = T
        self.atoms = jump_atoms_of(triplet)
        self.alphabet = triplet.letters
        self.U = lift(payoff, params)
        self.level = max(self.U.max_length, params.n, 1)
        self.cache = ExpectedSignatureCache(triplet, self.level)
        self.m2 = self.moment(2)
        self.v_star = sum(float(c) * float(self.cache.word_value(w, T)) for w, c in self.U.items())
        coef_w: dict = {}
        coef_nu: dict = {}
        deg = self.level
        powers = self.cache._powers
        A = len(self.alphabet)
        index = {a: i for i, a in enumerate(self.alphabet)}

        def e_poly(J3):
            idx = _flat_index(J3, index, A)
            return np.array(
                [powers[k][len(J3)][idx] / math.factorial(k) if k <= len(J3) else 0.0 for k in range(deg + 1)]
            )

        for w, c in self.U.items():
            c = float(c)
            for a in range(len(w)):
                J1 = w[:a]
                for b in range(a + 1, len(w) + 1):
                    J2, J3 = w[a:b], w[b:]
                    if J2 == (0,):
                        coef_w[J1] = coef_w.get(J1, 0.0) + c * e_poly(J3)
                    elif min(J2) >= 1:
                        weight = self.moment(sum(J2) + 1) / math.factorial(len(J2))
                        coef_nu[J1] = coef_nu.get(J1, 0.0) + c * weight * e_poly(J3)
        self._w = self._pack(coef_w, deg)
        self._nu = self._pack(coef_nu, deg)

    def moment(self, k: int) -> float:
        return float(sum(lam * x**k for x, lam in self.atoms))

    def _pack(self, coefs: dict, deg: int):
        words = sorted(coefs, key=lambda w: (len(w), w))
        mat = np.array([coefs[w] for w in words]).reshape(len(words), deg + 1)
        return words, mat

    def _collect(self, packed, x_levels, tau):
        words, mat = packed
        if not words:
            return np.zeros(np.shape(tau))
        index = {a: i for i, a in enumerate(self.alphabet)}
        A = len(self.alphabet)
        X = np.stack([x_levels[len(w)][..., _flat_index(w, index, A)] for w in words], axis=-1)
        tpow = np.power.outer(np.asarray(tau, dtype=float), np.arange(mat.shape[1]))
        return np.sum(X * (tpow @ mat.T), axis=-1)

    def numerator_denominator(self, t, x_levels):
        p = self.params
        tau = self.T - np.asarray(t, dtype=float)
        shape = np.shape(tau)
        sw = np.asarray(pair_levels(p.ell_w_comb, x_levels, self.alphabet), dtype=float) * np.ones(shape)
        sn = np.asarray(pair_levels(p.ell_nu_comb, x_levels, self.alphabet), dtype=float) * np.ones(shape)
        num = sw * self._collect(self._w, x_levels, tau) + sn * self._collect(self._nu, x_levels, tau)
        den = sw**2 + sn**2 * self.m2
        return num, den

    def theta(self, t, x_levels, on_degenerate: str = "raise"):
        num, den = self.numerator_denominator(t, x_levels)
        bad = den < DENOMINATOR_FLOOR
        if np.any(bad):
            if on_degenerate == "raise":
                where = np.flatnonzero(np.atleast_1d(bad))[0]
                raise DegenerateDenominatorError(
                    f"hedge denominator below {DENOMINATOR_FLOOR} at index {where} (t={np.atleast_1d(t)[where] if np.ndim(t) else t})"
                )
            return np.where(bad, 0.0, num / np.where(bad, 1.0, den)), int(np.sum(bad))
        return num / den, 0


@dataclass(frozen=True)
class HedgeReport:
    v_star: float
    times: np.ndarray
    theta_path: np.ndarray  # θ at every node from the left-limit signature
    s_left: np.ndarray
    residual_variance: float  # squared terminal hedging error on this path
    denominator_floor_hits: int


def hedge_strategy(
    payoff,
    params: SigModelParams,
    triplet: LevyTriplet,
    T: float,
    sig: SignaturePath,
    on_degenerate: str = "raise",
) -> HedgeReport:
    """``(v*, θ*)`` along one primary signature path.

    ``theta_path[k]`` uses the left limit at node ``k``.  The realised error
    ``C - v* - Σ θ ΔS`` uses the left-point value of each piece, with ``C`` and
    ``S`` read off the signature.
    """
    eng = HedgeEngine(payoff, params, triplet, T)
    need = max(eng.level, params.model_level)
    if sig.level < need:
        raise StructuralError(f"signature level {sig.level} below the {need} needed for this payoff")
    if abs(sig.times[-1] - T) > 1e-12:
        raise ValueError(f"signature path ends at {sig.times[-1]}, expected T={T}")
    levels = list(sig.levels[: eng.level + 1])
    jumps = np.zeros(len(sig), dtype=bool)
    jumps[1:] = np.diff(sig.times) == 0
    left = np.arange(len(sig)) - jumps.astype(int)
    th_piece, hits = eng.theta(sig.times, levels, on_degenerate)
    theta_path = th_piece[left]
    from .market import evaluate_model_from_signature

    S = evaluate_model_from_signature(params, sig)
    gains = float(np.sum(th_piece[:-1] * np.diff(S)))
    C = float(pair_levels(eng.U, [x[-1] for x in levels], sig.alphabet))
    resid = (C - eng.v_star - gains) ** 2
    return HedgeReport(eng.v_star, np.asarray(sig.times), theta_path, S[left], resid, hits)


def hedge_pnl_mc(
    payoff,
    params: SigModelParams,
    triplet: LevyTriplet,
    T: float,
    paths: int,
    steps: int,
    seed: int,
    threads: int = 1,
    shard_size: int = 2000,
    brownian: bool = True,
) -> tuple:
    """``(E[(C - v*)²], E[(C - v* - Σ θ* ΔS)²])`` over simulated paths.

    ``C`` is the exact claim ``⟨U(ℓ), X_T⟩``; gains use left-point strategy
    values on every simulated piece.
    """
    eng = HedgeEngine(payoff, params, triplet, T)

    def theta(t, x_levels):
        return eng.theta(t, x_levels[: eng.level + 1])[0]

    sim = BatchSimulator(
        eng.atoms, params.K, SimulationGrid(T, steps), brownian=brownian,
        x_level=eng.level, params=params, theta=theta,
    )

    def sample(P, rng):
        st = sim.run(P, rng)
        C = np.asarray(pair_levels(eng.U, st.x_levels(), eng.alphabet), dtype=float) * np.ones(P)
        err0 = C - eng.v_star
        return np.column_stack([err0**2, (err0 - st.gains) ** 2])

    mean, _, _ = mc_moments(sample, paths, seed, shard_size=shard_size, threads=threads)
    return float(mean[0]), float(mean[1])


RIDGE_FLOOR = 1e-10


def signature_features(paths: Sequence[CadlagSamplePath], level: int) -> tuple:
    """Terminal signatures of the time-extended paths, one row per path, with their words."""
    rows, alphabet = [], None
    for p in paths:
        q = p.with_time()
        if alphabet is None:
            alphabet = q.letters
        elif q.letters != alphabet:
            raise ValueError("all paths must share the same letters")
        rows.append(marcus_signature(q, level).terminal().flat())
    words = list(words_up_to(alphabet, level))
    return np.array(rows), words, alphabet


def _independent_columns(Phi: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Greedy column selection in word order: keep a column unless it lies in the span of the kept ones."""
    keep = []
    basis = np.zeros((Phi.shape[0], 0))
    for j in range(Phi.shape[1]):
        c = Phi[:, j]
        norm = np.linalg.norm(c)
        if norm == 0.0:
            continue
        r = c - basis @ (basis.T @ c)
        r = r - basis @ (basis.T @ r)
        rn = np.linalg.norm(r)
        if rn > tol * norm:
            keep.append(j)
            basis = np.column_stack([basis, r / rn])
    return np.array(keep, dtype=int)


def fit_path_functional(
    paths: Sequence[CadlagSamplePath], targets: Sequence[float], level: int
) -> tuple:
    """Least-squares linear functional on terminal signatures; returns ``(functional, RMS residual)``.

    Rank-deficient designs (the pure-time words are constant when all paths
    share a horizon) keep the shortest independent words, set the rest to
    zero and solve with a ridge penalty of ``1e-10``.
    """
    Phi, words, _ = signature_features(paths, level)
    y = np.asarray(targets, dtype=float)
    if len(y) != len(Phi):
        raise ValueError(f"{len(y)} targets for {len(Phi)} paths")
    if len(y) < Phi.shape[1]:
        warnings.warn(f"{len(y)} samples for {Phi.shape[1]} signature features", stacklevel=2)
    keep = _independent_columns(Phi)
    coef = np.zeros(Phi.shape[1])
    if len(keep) < Phi.shape[1]:
        sub = Phi[:, keep]
        lam = math.sqrt(RIDGE_FLOOR)
        aug = np.vstack([sub, lam * np.eye(len(keep))])
        coef[keep] = np.linalg.lstsq(aug, np.concatenate([y, np.zeros(len(keep))]), rcond=None)[0]
    else:
        coef = np.linalg.lstsq(Phi, y, rcond=None)[0]
    resid = float(np.sqrt(np.mean((Phi @ coef - y) ** 2)))
    return WordCombination(dict(zip(words, coef.tolist()))), resid
