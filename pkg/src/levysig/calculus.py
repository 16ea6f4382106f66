"""Word calculus for Lévy-type signature models.

Letters follow the primary-process convention: ``-1`` is time, ``0`` the
Brownian motion, ``1`` the compensated jump sum and ``k >= 2`` the k-th power
jump sums.  Everything here is exact: rational α coefficients, sparse word
combinations with generic coefficients (floats, fractions or sympy symbols).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

from .tensor import EMPTY, WordCombination, format_word, letter_sum


class StructuralError(ValueError):
    """A model, payoff or transform would need letters or levels beyond the available ones."""


@lru_cache(maxsize=None)
def alpha_coefficient(r: int, k: int) -> Fraction:
    """Sum over compositions ``(j_1..j_k)`` of ``r`` of ``Π 1/(j_i + 1)!``."""
    if r < 1 or k < 1:
        raise ValueError(f"alpha_coefficient needs r, k >= 1, got ({r}, {k})")
    if k > r:
        return Fraction(0)
    if k == 1:
        return Fraction(1, math.factorial(r + 1))
    return sum(
        (Fraction(1, math.factorial(j + 1)) * alpha_coefficient(r - j, k - 1) for j in range(1, r - k + 2)),
        Fraction(0),
    )


@lru_cache(maxsize=None)
def alpha_sum(r: int) -> Fraction:
    """``Σ_k (-1)^k α(r, k)``; equals ``B_r / r!`` with ``B_1 = -1/2``."""
    return sum(((-1) ** k * alpha_coefficient(r, k) for k in range(1, r + 1)), Fraction(0))


def _check_letter(letter: int, K: int, bound: str):
    if letter > K:
        raise StructuralError(f"letter {letter} exceeds moment count K={K}; violates {bound}")


def tilde_transform(I: Sequence[int], j: int, K: int) -> WordCombination:
    """Word combination whose pairing with the signature is ``∫ ⟨ε_I, X_{s-}⟩ dX^j``.

    The Brownian correction uses the word with its last letter removed; for a
    jump letter ``j`` every all-positive suffix ``I₂`` of ``I`` contributes
    ``α(|I₂|) ε_{I₁} ε_{S(I₂) + j}``.
    """
    I = tuple(int(i) for i in I)
    if j < -1 or j > K:
        raise StructuralError(f"letter {j} outside -1..{K}")
    for i in I:
        if i < -1:
            raise ValueError(f"invalid letter {i}")
        _check_letter(i, K, "letters <= N")
    terms = {I + (j,): Fraction(1)}
    if I and I[-1] == 0 and j == 0:
        key = I[:-1] + (-1,)
        terms[key] = terms.get(key, 0) - Fraction(1, 2)
    if j > 0:
        for cut in range(len(I) - 1, -1, -1):
            tail = I[cut:]
            if tail[0] <= 0:
                break
            letter = letter_sum(tail) + j
            _check_letter(letter, K, "nd + j <= N")
            key = I[:cut] + (letter,)
            terms[key] = terms.get(key, 0) + alpha_sum(len(tail))
    return WordCombination(terms)


def tilde_combination(c: WordCombination, j: int, K: int) -> WordCombination:
    """Linear extension of :func:`tilde_transform`."""
    out = WordCombination()
    for w, coeff in c.items():
        out = out + tilde_transform(w, j, K) * coeff
    return out


def shuffle_power(c: WordCombination, k: int) -> WordCombination:
    out = WordCombination.unit()
    for _ in range(k):
        out = out.shuffle(c)
    return out


def multinomial_shuffle(c: WordCombination, k: int) -> WordCombination:
    """``Σ_{|α| = k} ℓ^α ε^{⧢α}``, i.e. ``c^{⧢k} / k!`` for ``c = Σ_h ℓ_h ε_{J^h}``."""
    return shuffle_power(c, k) * Fraction(1, math.factorial(k))


def _as_word(w) -> tuple:
    if isinstance(w, str):
        from .tensor import parse_word

        return parse_word(w)
    return tuple(int(i) for i in w)


@dataclass(frozen=True)
class SigModelParams:
    """Coefficients of ``dS = Σ ℓ_W^J ⟨ε_J, X_{t-}⟩ dW + Σ ℓ_ν^J ⟨ε_J, X_{t-}⟩ d(compensated jumps)``.

    ``n`` and ``d`` default to the largest word length and largest positive
    letter among the supplied words.
    """

    s0: float
    ell_w: Mapping = field(default_factory=dict)
    ell_nu: Mapping = field(default_factory=dict)
    K: int = 2
    n: int | None = None
    d: int | None = None
    level: int | None = None

    def __post_init__(self):
        ell_w = {_as_word(w): c for w, c in dict(self.ell_w).items()}
        ell_nu = {_as_word(w): c for w, c in dict(self.ell_nu).items()}
        words = list(ell_w) + list(ell_nu)
        n = max((len(w) for w in words), default=0) if self.n is None else self.n
        d = max((i for w in words for i in w), default=0) if self.d is None else self.d
        d = max(d, 0)
        for w in words:
            if len(w) > n:
                raise StructuralError(f"word {format_word(w)} longer than n={n}")
            if any(i < -1 or i > d for i in w):
                raise StructuralError(f"word {format_word(w)} uses letters outside -1..{d}")
        if self.K < 2:
            raise StructuralError(f"moment count K={self.K} must be >= 2")
        if n * d + 1 > self.K:
            raise StructuralError(f"n*d + 1 <= N violated: n={n}, d={d}, N={self.K}")
        object.__setattr__(self, "ell_w", ell_w)
        object.__setattr__(self, "ell_nu", ell_nu)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "d", d)

    @property
    def ell_w_comb(self) -> WordCombination:
        return WordCombination(self.ell_w)

    @property
    def ell_nu_comb(self) -> WordCombination:
        return WordCombination(self.ell_nu)

    @property
    def model_level(self) -> int:
        """Signature level needed to evaluate the price path: ``n + 1``."""
        return self.n + 1

    def payoff_level(self, m: int) -> int:
        """Upper bound on the word length of any lifted payoff word of length ``m``."""
        return m * (self.n + 1)

    def required_K(self, m: int) -> int:
        return m * (self.n * self.d + 1)


@dataclass(frozen=True)
class SigPayoff:
    """``Σ h^I ⟨ε_I, Ŝ_T⟩`` over words in the letters ``-1`` (time) and ``1`` (price)."""

    terms: Mapping

    def __post_init__(self):
        terms = {_as_word(w): float(c) for w, c in dict(self.terms).items()}
        for w in terms:
            if any(i not in (-1, 1) for i in w):
                raise StructuralError(f"payoff word {format_word(w)} uses letters outside {{-1, 1}}")
        object.__setattr__(self, "terms", terms)

    @property
    def m(self) -> int:
        return max((len(w) for w in self.terms), default=0)

    def combination(self) -> WordCombination:
        return WordCombination(self.terms)


def sig_model_representation(params: SigModelParams) -> WordCombination:
    """Word combination ``c`` with ``⟨c, X_t⟩ = S_t`` pathwise."""
    out = WordCombination.word(EMPTY, params.s0)
    for J, c in params.ell_w.items():
        out = out + tilde_transform(J, 0, params.K) * c
    for J, c in params.ell_nu.items():
        out = out + tilde_transform(J, 1, params.K) * c
    return out


class PayoffLifter:
    """Memoized payoff lift ``I ↦ U_I(ℓ)`` for one parameter set."""

    def __init__(self, params: SigModelParams):
        self.params = params
        self._cache: dict = {EMPTY: WordCombination.unit()}
        self._powers_w: dict = {}
        self._powers_nu: dict = {}

    def _mult_w(self, k: int) -> WordCombination:
        if k not in self._powers_w:
            self._powers_w[k] = multinomial_shuffle(self.params.ell_w_comb, k)
        return self._powers_w[k]

    def _mult_nu(self, k: int) -> WordCombination:
        if k not in self._powers_nu:
            self._powers_nu[k] = multinomial_shuffle(self.params.ell_nu_comb, k)
        return self._powers_nu[k]

    def lift(self, I: Sequence[int]) -> WordCombination:
        I = tuple(int(i) for i in I)
        if I in self._cache:
            return self._cache[I]
        if any(i not in (-1, 1) for i in I):
            raise StructuralError(f"payoff word {format_word(I)} uses letters outside {{-1, 1}}")
        p = self.params
        need = len(I) * (p.n * p.d + 1)
        if p.K < need:
            raise StructuralError(f"N >= |I|(nd+1) violated: |I|={len(I)}, n={p.n}, d={p.d}, N={p.K}")
        K = p.K
        prev = self.lift(I[:-1])
        if I[-1] == -1:
            out = tilde_combination(prev, -1, K)
        else:
            out = tilde_combination(prev.shuffle(self._mult_w(1)), 0, K)
            out = out + tilde_combination(prev.shuffle(self._mult_nu(1)), 1, K)
            if len(I) >= 2 and I[-2] == 1:
                out = out + tilde_combination(self.lift(I[:-2]).shuffle(self._mult_w(2)), -1, K)
            k = 1
            while k < len(I) and I[-k - 1] == 1:
                k += 1
                out = out + tilde_combination(self.lift(I[:-k]).shuffle(self._mult_nu(k)), k, K)
        self._cache[I] = out
        return out

    def lift_payoff(self, payoff: SigPayoff) -> WordCombination:
        out = WordCombination()
        for I, h in payoff.terms.items():
            out = out + self.lift(I) * h
        return out


def payoff_lift(I: Sequence[int], params: SigModelParams) -> WordCombination:
    """``U_I(ℓ)``: ``⟨ε_I, sig of (t, S)⟩ = ⟨U_I(ℓ), sig of X⟩`` pathwise."""
    return PayoffLifter(params).lift(I)
