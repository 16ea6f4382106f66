"""Marcus-lift signatures of piecewise-linear càdlàg paths and discrete Itô sums."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .paths import CadlagSamplePath, PathError
from .tensor import (
    AlgebraError,
    TensorElement,
    WordCombination,
    group_inverse,
    mul_exp,
    mul_exp_integral,
    pair_levels,
    tensor_product,
)


@dataclass(frozen=True)
class SignaturePath:
    """Running signature ``sig(0, t_k)`` at every node of a path.

    ``levels[n]`` has shape ``(M + 1, A**n)``; row ``k`` is the signature up to
    node ``k``.  At a jump time the first node of the pair holds the left limit.
    """

    alphabet: tuple
    times: np.ndarray
    levels: tuple

    @property
    def level(self) -> int:
        return len(self.levels) - 1

    def __len__(self) -> int:
        return len(self.times)

    def element(self, k: int) -> TensorElement:
        return TensorElement(self.alphabet, tuple(x[k] for x in self.levels), group_like=True)

    def elements(self) -> list:
        return [self.element(k) for k in range(len(self))]

    def terminal(self) -> TensorElement:
        return self.element(len(self) - 1)

    def node_at(self, t: float) -> int:
        """Index of the right-continuous node at time ``t`` (post-jump at a jump time)."""
        hits = np.nonzero(self.times == t)[0]
        if len(hits) == 0:
            raise PathError(f"time {t} is not a node time")
        return int(hits[-1])

    def at(self, t: float) -> TensorElement:
        return self.element(self.node_at(t))

    def evaluate(self, functional: WordCombination) -> np.ndarray:
        """``⟨functional, sig(0, t_k)⟩`` for every node ``k``."""
        return np.asarray(pair_levels(functional, self.levels, self.alphabet)) * np.ones(len(self))


def signature_levels(increments: np.ndarray, level: int) -> list:
    """Terminal signature levels for a batch of increment sequences.

    ``increments`` has shape ``(..., M, A)``; each row is either a linear piece
    or a jump, both contributing ``exp(increment)``.
    """
    inc = np.asarray(increments, dtype=float)
    batch = inc.shape[:-2]
    A = inc.shape[-1]
    levels = [np.ones(batch + (A**n,)) if n == 0 else np.zeros(batch + (A**n,)) for n in range(level + 1)]
    for k in range(inc.shape[-2]):
        levels = mul_exp(levels, inc[..., k, :])
    return levels


def marcus_signature(path: CadlagSamplePath, level: int) -> SignaturePath:
    """Signature of the minimal jump extension: ordered product of ``exp`` of every increment."""
    if level < 1:
        raise ValueError(f"signature level must be >= 1, got {level}")
    A = path.dimension
    inc = path.increments()
    running = [np.ones(1)] + [np.zeros(A**n) for n in range(1, level + 1)]
    rows = [[x] for x in running]
    for k in range(len(inc)):
        running = mul_exp(running, inc[k])
        for n in range(level + 1):
            rows[n].append(running[n])
    return SignaturePath(path.letters, path.times, tuple(np.array(r) for r in rows))


def signature_increment(sig: SignaturePath, s: float, t: float) -> TensorElement:
    """``sig(0, s)^{-1} ⊗ sig(0, t)``."""
    if s > t:
        raise ValueError(f"need s <= t, got s={s}, t={t}")
    a, b = sig.at(s), sig.at(t)
    return tensor_product(group_inverse(a), b)


def ito_iterated_sum(
    path: CadlagSamplePath,
    functional: WordCombination,
    j: int,
    sig: SignaturePath | None = None,
    ito_letters: Sequence[int] = (0,),
) -> float:
    """``∫ ⟨functional, sig(0, t-)⟩ dX^j`` over the stored grid.

    Jump cells use the left limit times the jump.  Continuous cells use the
    left-point value when ``j`` is one of ``ito_letters`` (Itô sum for the
    Brownian letter) and the exact integral along the linear piece otherwise.
    """
    if j not in path.letters:
        raise AlgebraError(f"letter {j} not in path alphabet {path.letters}")
    if sig is None:
        sig = marcus_signature(path, max(1, functional.max_length))
    if functional.max_length > sig.level:
        raise AlgebraError(f"functional has words longer than level {sig.level}")
    col = path.letters.index(j)
    inc = path.increments()
    left = np.asarray(pair_levels(functional, sig.levels, sig.alphabet)) * np.ones(len(sig))
    left = left[:-1]
    if j in ito_letters:
        return float(np.sum(left * inc[:, col]))
    total = 0.0
    for k in range(len(inc)):
        if path.jumps[k + 1]:
            total += left[k] * inc[k, col]
        else:
            lv = [x[k] for x in sig.levels]
            avg = mul_exp_integral(lv, inc[k], sig.level)
            total += float(pair_levels(functional, avg, sig.alphabet)) * inc[k, col]
    return float(total)
