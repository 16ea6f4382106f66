"""Finite-atomic Lévy triplets, the generator tensor Q and expected signatures."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .tensor import (
    AlgebraError,
    TensorElement,
    mul_levels,
    outer,
    tensor_exp,
    tensor_product,
)


@dataclass(frozen=True, eq=False)
class LevyTriplet:
    """Drift ``b``, covariance ``C`` and atoms ``F = Σ λ_i δ_{x_i}`` over ``letters``."""

    letters: tuple
    drift: np.ndarray
    covariance: np.ndarray
    atoms: tuple = ()  # ((x_i array, λ_i), ...)

    def __post_init__(self):
        letters = tuple(int(i) for i in self.letters)
        A = len(letters)
        b = np.asarray(self.drift, dtype=float).reshape(A)
        C = np.asarray(self.covariance, dtype=float).reshape(A, A)
        if not np.allclose(C, C.T, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        if A and np.min(np.linalg.eigvalsh(C)) < -1e-12:
            raise ValueError("covariance must be positive semidefinite")
        atoms = []
        for x, lam in self.atoms:
            x = np.asarray(x, dtype=float).reshape(A)
            if not np.any(x != 0):
                raise ValueError("Lévy measure may not charge the origin")
            if not lam > 0:
                raise ValueError(f"atom intensity must be positive, got {lam}")
            x.flags.writeable = False
            atoms.append((x, float(lam)))
        b.flags.writeable = False
        C.flags.writeable = False
        object.__setattr__(self, "letters", letters)
        object.__setattr__(self, "drift", b)
        object.__setattr__(self, "covariance", C)
        object.__setattr__(self, "atoms", tuple(atoms))

    @property
    def dimension(self) -> int:
        return len(self.letters)

    @property
    def total_intensity(self) -> float:
        return float(sum(lam for _, lam in self.atoms))

    def moment_tensor(self, k: int) -> np.ndarray:
        """Flattened ``Σ λ_i x_i^{⊗k}``."""
        A = self.dimension
        acc = np.zeros(A**k)
        for x, lam in self.atoms:
            p = np.ones(1)
            for _ in range(k):
                p = outer(p, x)
            acc += lam * p
        return acc


def build_generator_Q(triplet: LevyTriplet, level: int) -> TensorElement:
    """``Q = (0, b, ½(C + ∫x⊗x F), …, (1/k!) ∫x^{⊗k} F)`` truncated at ``level``."""
    A = triplet.dimension
    levels = [np.zeros(1)]
    for k in range(1, level + 1):
        if k == 1:
            levels.append(triplet.drift.copy())
        elif k == 2:
            levels.append(0.5 * (triplet.covariance.reshape(-1) + triplet.moment_tensor(2)))
        else:
            levels.append(triplet.moment_tensor(k) / math.factorial(k))
    return TensorElement(triplet.letters, tuple(levels))


def expected_signature(triplet: LevyTriplet, t: float, level: int) -> TensorElement:
    """``E[sig(0, t)] = exp(tQ)``."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    return tensor_exp(build_generator_Q(triplet, level) * t)


class ExpectedSignatureCache:
    """``exp(τQ)`` as a polynomial in ``τ`` with cached powers ``Q^{⊗k}``."""

    def __init__(self, triplet: LevyTriplet, level: int):
        self.triplet = triplet
        self.level = level
        Q = build_generator_Q(triplet, level)
        self.Q = Q
        powers = [TensorElement.unit(Q.alphabet, level).levels]
        for _ in range(level):
            powers.append(tuple(mul_levels(powers[-1], Q.levels, level)))
        self._powers = powers

    def levels_at(self, tau) -> list:
        """Levels of ``exp(τQ)``; ``tau`` may be an array, giving a leading batch axis."""
        tau = np.asarray(tau, dtype=float)
        out = []
        for n in range(self.level + 1):
            acc = np.zeros(tau.shape + (len(self.Q.alphabet) ** n,))
            for k in range(n + 1):
                # Q has no scalar part, so Q^k only reaches levels >= k
                acc = acc + (tau[..., None] ** k / math.factorial(k)) * self._powers[k][n]
            out.append(acc)
        return out

    def at(self, tau: float) -> TensorElement:
        if tau < 0:
            raise ValueError(f"t must be >= 0, got {tau}")
        return TensorElement(self.Q.alphabet, tuple(self.levels_at(tau)), group_like=False)

    def word_value(self, word: Sequence[int], tau):
        """``E⟨ε_word, sig(0, τ)⟩`` for scalar or array ``τ``."""
        word = tuple(word)
        n = len(word)
        if n > self.level:
            raise AlgebraError(f"word longer than level {self.level}")
        idx = self.Q.word_index(word)
        tau = np.asarray(tau, dtype=float)
        acc = np.zeros(tau.shape)
        for k in range(n + 1):
            acc = acc + tau**k / math.factorial(k) * self._powers[k][n][idx]
        return acc


def conditional_expected_signature(
    sig_at_s: TensorElement, triplet: LevyTriplet, horizon: float, word: Sequence[int]
) -> float:
    """``E[⟨ε_I, sig(0, s + t)⟩ | F_s] = Σ_{I₁I₂ = I} ⟨ε_{I₁}, sig_s⟩ E⟨ε_{I₂}, sig_t⟩``."""
    word = tuple(word)
    if len(word) > sig_at_s.level:
        raise AlgebraError(f"word of length {len(word)} exceeds level {sig_at_s.level}")
    e = expected_signature(triplet, horizon, sig_at_s.level)
    return float(sum(sig_at_s[word[:k]] * e[word[k:]] for k in range(len(word) + 1)))


def generator_apply(word: Sequence[int], point: TensorElement, Q: TensorElement) -> float:
    """``A⟨ε_J, ·⟩(y) = ⟨ε_J, Q ⊗ y⟩``."""
    word = tuple(word)
    if point.level != Q.level or point.alphabet != Q.alphabet:
        raise AlgebraError("point and Q must share alphabet and level")
    if len(word) > Q.level:
        raise AlgebraError(f"word of length {len(word)} exceeds level {Q.level}")
    return float(sum(Q[word[:k]] * point[word[k:]] for k in range(len(word) + 1)))


def generator_on_functional(coeffs: dict, Q: TensorElement) -> dict:
    """Dual action: the functional ``y ↦ Σ_w c_w ⟨ε_w, Q ⊗ y⟩`` as word coefficients on ``y``."""
    out: dict = {}
    for w, c in coeffs.items():
        w = tuple(w)
        for k in range(1, len(w) + 1):
            q = Q[w[:k]]
            if q != 0.0:
                out[w[k:]] = out.get(w[k:], 0.0) + c * q
    return out


def moment_formula(word: Sequence[int], Q: TensorElement, t: float) -> float:
    """``Σ_k t^k/k! (A^k ⟨ε_I, ·⟩)(unit)``, iterating the generator on functionals."""
    f = {tuple(word): 1.0}
    total = 0.0
    for k in range(Q.level + 1):
        total += t**k / math.factorial(k) * f.get((), 0.0)
        f = generator_on_functional(f, Q)
    return total


def primary_process_letters(K: int) -> tuple:
    return tuple(range(-1, K + 1))


def primary_process_triplet(jump_atoms: Sequence[tuple], K: int) -> LevyTriplet:
    """Triplet of ``X = (t, W, compensated jump sum, Σ ΔL², …, Σ ΔL^K)``."""
    if K < 2:
        raise ValueError(f"moment count K must be >= 2, got {K}")
    letters = primary_process_letters(K)
    A = len(letters)
    b = np.zeros(A)
    b[0] = 1.0
    for x, lam in jump_atoms:
        if x == 0:
            raise ValueError("jump atoms must be nonzero")
        for k in range(2, K + 1):
            b[k + 1] += lam * x**k
    C = np.zeros((A, A))
    C[1, 1] = 1.0
    atoms = [(np.array([0.0, 0.0] + [x**k for k in range(1, K + 1)]), lam) for x, lam in jump_atoms]
    return LevyTriplet(letters, b, C, tuple(atoms))


def jump_moment(jump_atoms: Sequence[tuple], k: int) -> float:
    """``∫ x^k F(dx)`` for the one-dimensional jump measure."""
    return float(sum(lam * x**k for x, lam in jump_atoms))
