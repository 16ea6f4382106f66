"""Truncated tensor algebra over a finite alphabet of integer letters.

Words are plain tuples of ints.  A :class:`TensorElement` stores one dense,
flattened block per level (level ``n`` holds ``A**n`` coefficients, row-major
in the letter order of its alphabet).  A :class:`WordCombination` is a sparse
linear functional ``word -> coefficient``; coefficients may be floats,
``Fraction`` or sympy expressions, since only ``+`` and ``*`` are used on them.

The low-level kernels (``mul_levels``, ``mul_exp``, ...) operate on lists of
arrays with arbitrary leading batch dimensions so the Monte Carlo code can
reuse them on stacks of signatures.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

Word = tuple

EMPTY: Word = ()


class AlgebraError(ValueError):
    """Raised on alphabet/level mismatch or a violated precondition."""


class WordParseError(ValueError):
    pass


# --------------------------------------------------------------------------
# words


def parse_word(text: str) -> Word:
    """Parse the dot syntax: ``"-1.0.1"`` -> ``(-1, 0, 1)``, ``"@"`` -> ``()``."""
    text = text.strip()
    if text == "@":
        return EMPTY
    if not text:
        raise WordParseError("empty word string (use '@' for the empty word)")
    letters = []
    for token in text.split("."):
        if not re.fullmatch(r"-?\d+", token.strip()):
            raise WordParseError(f"invalid letter token {token!r} in word {text!r}")
        letters.append(int(token))
    return tuple(letters)


def format_word(word: Sequence[int]) -> str:
    if len(word) == 0:
        return "@"
    return ".".join(str(int(i)) for i in word)


def letter_sum(word: Sequence[int]) -> int:
    return int(sum(word))


def words_up_to(alphabet: Sequence[int], level: int, min_length: int = 0) -> Iterator[Word]:
    """All words over ``alphabet`` by length, then lexicographically in alphabet order."""
    for n in range(min_length, level + 1):
        yield from itertools.product(alphabet, repeat=n)


@lru_cache(maxsize=None)
def _shuffle_words(a: Word, b: Word) -> tuple:
    if not a:
        return ((b, 1),)
    if not b:
        return ((a, 1),)
    out: dict = {}
    for w, c in _shuffle_words(a[:-1], b):
        key = w + (a[-1],)
        out[key] = out.get(key, 0) + c
    for w, c in _shuffle_words(a, b[:-1]):
        key = w + (b[-1],)
        out[key] = out.get(key, 0) + c
    return tuple(out.items())


def word_shuffle(a: Sequence[int], b: Sequence[int]) -> "WordCombination":
    """Shuffle product of two words, with multiplicities."""
    return WordCombination(dict(_shuffle_words(tuple(a), tuple(b))))


# --------------------------------------------------------------------------
# sparse linear functionals


def _is_zero(c) -> bool:
    try:
        return bool(c == 0)
    except TypeError:
        return False


class WordCombination(Mapping):
    """Sparse linear combination of words; behaves as an immutable mapping."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping | Iterable | None = None):
        merged: dict = {}
        if terms is not None:
            items = terms.items() if isinstance(terms, Mapping) else terms
            for w, c in items:
                w = tuple(int(i) for i in w)
                merged[w] = merged[w] + c if w in merged else c
        self._terms = {w: c for w, c in merged.items() if not _is_zero(c)}

    @classmethod
    def word(cls, word: Sequence[int], coeff=1) -> "WordCombination":
        return cls({tuple(word): coeff})

    @classmethod
    def unit(cls) -> "WordCombination":
        return cls({EMPTY: 1})

    # mapping protocol
    def __getitem__(self, word):
        return self._terms[tuple(word)]

    def __iter__(self):
        return iter(self._terms)

    def __len__(self):
        return len(self._terms)

    def get(self, word, default=0):
        return self._terms.get(tuple(word), default)

    def __eq__(self, other):
        if isinstance(other, WordCombination):
            return self._terms == other._terms
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    # linear structure
    def __add__(self, other: "WordCombination") -> "WordCombination":
        if not isinstance(other, WordCombination):
            return NotImplemented
        return WordCombination(itertools.chain(self._terms.items(), other._terms.items()))

    def __neg__(self) -> "WordCombination":
        return WordCombination({w: -c for w, c in self._terms.items()})

    def __sub__(self, other: "WordCombination") -> "WordCombination":
        return self + (-other)

    def __mul__(self, scalar) -> "WordCombination":
        if isinstance(scalar, WordCombination):
            return NotImplemented
        return WordCombination({w: c * scalar for w, c in self._terms.items()})

    __rmul__ = __mul__

    def map_coefficients(self, fn) -> "WordCombination":
        return WordCombination({w: fn(c) for w, c in self._terms.items()})

    # products
    def shuffle(self, other: "WordCombination") -> "WordCombination":
        out: dict = {}
        for u, cu in self._terms.items():
            for v, cv in other._terms.items():
                for w, m in _shuffle_words(u, v):
                    term = cu * cv * m
                    out[w] = out[w] + term if w in out else term
        return WordCombination(out)

    def concat(self, other: "WordCombination | Sequence[int]") -> "WordCombination":
        """Concatenation product ``self ⊗ other`` (``other`` may be a single word)."""
        if not isinstance(other, WordCombination):
            other = WordCombination.word(other)
        out: dict = {}
        for u, cu in self._terms.items():
            for v, cv in other._terms.items():
                w = u + v
                term = cu * cv
                out[w] = out[w] + term if w in out else term
        return WordCombination(out)

    # introspection
    @property
    def max_length(self) -> int:
        return max((len(w) for w in self._terms), default=0)

    @property
    def letters(self) -> set:
        return {i for w in self._terms for i in w}

    def sorted_items(self) -> list:
        return sorted(self._terms.items(), key=lambda kv: (len(kv[0]), kv[0]))

    def to_text(self) -> str:
        """``coeff*word + coeff*word ...`` in the dot-letter word syntax."""
        if not self._terms:
            return "0"
        return " + ".join(f"{_fmt_coeff(c)}*{format_word(w)}" for w, c in self.sorted_items())

    @classmethod
    def from_text(cls, text: str) -> "WordCombination":
        text = text.strip()
        if text == "0":
            return cls()
        terms = []
        for chunk in text.split(" + "):
            coeff, _, word = chunk.strip().rpartition("*")
            if not coeff:
                raise WordParseError(f"term {chunk!r} lacks 'coeff*word' form")
            terms.append((parse_word(word), float(coeff)))
        return cls(terms)

    def __repr__(self):
        return f"WordCombination({self.to_text()})"


def _fmt_coeff(c) -> str:
    if isinstance(c, (float, np.floating)):
        return repr(float(c))
    return str(c)


# --------------------------------------------------------------------------
# dense level kernels (leading batch dims allowed)


def outer(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Flattened outer product over the last axis, broadcasting leading axes."""
    out = x[..., :, None] * y[..., None, :]
    return out.reshape(out.shape[:-2] + (-1,))


def mul_levels(a: Sequence[np.ndarray], b: Sequence[np.ndarray], level: int) -> list:
    out = []
    for n in range(level + 1):
        acc = None
        for i in range(n + 1):
            term = outer(a[i], b[n - i])
            acc = term if acc is None else acc + term
        out.append(acc)
    return out


def exp_vector_levels(v: np.ndarray, level: int) -> list:
    """Levels of ``exp(v)`` for a level-one vector ``v`` (shape ``(..., A)``)."""
    levels = [np.ones(v.shape[:-1] + (1,))]
    for n in range(1, level + 1):
        levels.append(outer(levels[-1], v) / n)
    return levels


def mul_exp(levels: Sequence[np.ndarray], v: np.ndarray) -> list:
    """``x ⊗ exp(v)`` for a level-one vector ``v``, by Horner's scheme per level."""
    level = len(levels) - 1
    out = [levels[0]]
    for n in range(1, level + 1):
        acc = levels[0] * (1.0 / n)
        acc = outer(acc, v)
        for k in range(1, n):
            acc = outer(acc + levels[k], v) * (1.0 / (n - k))
        out.append(acc + levels[n])
    return out


def mul_exp_integral(levels: Sequence[np.ndarray], v: np.ndarray, level: int) -> list:
    """``x ⊗ Σ_k v^{⊗k}/(k+1)!`` truncated at ``level``.

    This is ``∫_0^1 x ⊗ exp(u v) du``: the exact average of the running
    signature along one linear piece.
    """
    out = []
    for n in range(level + 1):
        acc = None
        power = None
        for k in range(n + 1):
            power = np.ones(v.shape[:-1] + (1,)) if k == 0 else outer(power, v)
            term = outer(levels[n - k], power) / math.factorial(k + 1)
            acc = term if acc is None else acc + term
        out.append(acc)
    return out


# --------------------------------------------------------------------------
# dense elements


def default_alphabet(size: int) -> tuple:
    return tuple(range(1, size + 1))


@dataclass(frozen=True, eq=False)
class TensorElement:
    """Element of the truncated tensor algebra ``T^L`` over ``alphabet``."""

    alphabet: tuple
    levels: tuple
    group_like: bool = False
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        alphabet = tuple(int(i) for i in self.alphabet)
        if len(set(alphabet)) != len(alphabet) or not alphabet:
            raise AlgebraError(f"alphabet must be non-empty with distinct letters: {alphabet}")
        A = len(alphabet)
        levels = []
        for n, block in enumerate(self.levels):
            arr = np.array(block, dtype=float).reshape(-1)
            if arr.size != A**n:
                raise AlgebraError(f"level {n} has {arr.size} coefficients, expected {A**n}")
            if not np.all(np.isfinite(arr)):
                raise AlgebraError(f"non-finite coefficient at level {n}")
            arr.flags.writeable = False
            levels.append(arr)
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "levels", tuple(levels))
        object.__setattr__(self, "_index", {a: i for i, a in enumerate(alphabet)})

    # constructors
    @classmethod
    def zero(cls, alphabet: Sequence[int], level: int) -> "TensorElement":
        A = len(alphabet)
        return cls(tuple(alphabet), tuple(np.zeros(A**n) for n in range(level + 1)))

    @classmethod
    def unit(cls, alphabet: Sequence[int], level: int) -> "TensorElement":
        z = cls.zero(alphabet, level)
        return z.with_levels([np.ones(1)] + list(z.levels[1:]), group_like=True)

    @classmethod
    def from_vector(cls, alphabet: Sequence[int], level: int, v, scalar: float = 0.0) -> "TensorElement":
        z = cls.zero(alphabet, level)
        levels = list(z.levels)
        levels[0] = np.array([scalar], dtype=float)
        if level >= 1:
            levels[1] = np.asarray(v, dtype=float)
        return z.with_levels(levels)

    @classmethod
    def from_words(cls, alphabet: Sequence[int], level: int, terms: Mapping) -> "TensorElement":
        levels = [np.array(b) for b in cls.zero(alphabet, level).levels]
        index = {a: i for i, a in enumerate(alphabet)}
        for w, c in dict(terms).items():
            w = tuple(w)
            if len(w) > level:
                raise AlgebraError(f"word {format_word(w)} longer than level {level}")
            levels[len(w)][_flat_index(w, index, len(alphabet))] += float(c)
        return cls(tuple(alphabet), tuple(levels))

    def with_levels(self, levels, group_like: bool = False) -> "TensorElement":
        return TensorElement(self.alphabet, tuple(levels), group_like)

    # shape
    @property
    def size(self) -> int:
        return len(self.alphabet)

    @property
    def level(self) -> int:
        return len(self.levels) - 1

    @property
    def scalar(self) -> float:
        return float(self.levels[0][0])

    def word_index(self, word: Sequence[int]) -> int:
        return _flat_index(word, self._index, len(self.alphabet))

    def __getitem__(self, word) -> float:
        word = tuple(word)
        if len(word) > self.level:
            raise AlgebraError(f"word {format_word(word)} longer than level {self.level}")
        return float(self.levels[len(word)][self.word_index(word)])

    def to_dict(self) -> dict:
        return {w: self[w] for w in words_up_to(self.alphabet, self.level)}

    def flat(self) -> np.ndarray:
        return np.concatenate(self.levels)

    # arithmetic
    def _check(self, other: "TensorElement"):
        if self.alphabet != other.alphabet or self.level != other.level:
            raise AlgebraError(
                f"mismatch: alphabet {self.alphabet}/level {self.level} vs "
                f"alphabet {other.alphabet}/level {other.level}"
            )

    def __add__(self, other: "TensorElement") -> "TensorElement":
        self._check(other)
        return self.with_levels([a + b for a, b in zip(self.levels, other.levels)])

    def __sub__(self, other: "TensorElement") -> "TensorElement":
        self._check(other)
        return self.with_levels([a - b for a, b in zip(self.levels, other.levels)])

    def __mul__(self, scalar: float) -> "TensorElement":
        return self.with_levels([a * float(scalar) for a in self.levels])

    __rmul__ = __mul__

    def __matmul__(self, other: "TensorElement") -> "TensorElement":
        return tensor_product(self, other)

    def allclose(self, other: "TensorElement", atol: float = 1e-12, rtol: float = 0.0) -> bool:
        self._check(other)
        return all(np.allclose(a, b, atol=atol, rtol=rtol) for a, b in zip(self.levels, other.levels))

    def max_abs_diff(self, other: "TensorElement") -> float:
        self._check(other)
        return float(max(np.max(np.abs(a - b)) for a, b in zip(self.levels, other.levels)))


def _flat_index(word: Sequence[int], index: Mapping, A: int) -> int:
    k = 0
    for letter in word:
        try:
            k = k * A + index[letter]
        except KeyError:
            raise AlgebraError(f"letter {letter} not in alphabet {tuple(index)}") from None
    return k


# --------------------------------------------------------------------------
# operations


def tensor_product(a: TensorElement, b: TensorElement) -> TensorElement:
    a._check(b)
    return a.with_levels(mul_levels(a.levels, b.levels, a.level), group_like=a.group_like and b.group_like)


def _power_series(b: TensorElement, coeffs) -> list:
    """Σ_k coeffs[k] b^{⊗k} for k = 0..L (b must have zero scalar part)."""
    L = b.level
    acc = [np.zeros_like(x) for x in b.levels]
    acc[0] = acc[0] + coeffs[0]
    power = list(TensorElement.unit(b.alphabet, L).levels)
    for k in range(1, L + 1):
        power = mul_levels(power, b.levels, L)
        for n in range(L + 1):
            acc[n] = acc[n] + coeffs[k] * power[n]
    return acc


def tensor_exp(b: TensorElement) -> TensorElement:
    if abs(b.scalar) > 0.0:
        raise AlgebraError(f"tensor_exp needs scalar part 0, got {b.scalar}")
    coeffs = [1.0 / math.factorial(k) for k in range(b.level + 1)]
    return b.with_levels(_power_series(b, coeffs), group_like=True)


def tensor_log(a: TensorElement) -> TensorElement:
    if abs(a.scalar - 1.0) > 1e-12:
        raise AlgebraError(f"tensor_log needs scalar part 1, got {a.scalar}")
    b = a - TensorElement.unit(a.alphabet, a.level)
    coeffs = [0.0] + [(-1.0) ** (k + 1) / k for k in range(1, a.level + 1)]
    return a.with_levels(_power_series(b, coeffs))


def group_inverse(a: TensorElement) -> TensorElement:
    if abs(a.scalar - 1.0) > 1e-12:
        raise AlgebraError(f"group_inverse needs scalar part 1, got {a.scalar}")
    b = a - TensorElement.unit(a.alphabet, a.level)
    coeffs = [(-1.0) ** k for k in range(a.level + 1)]
    return a.with_levels(_power_series(b, coeffs), group_like=a.group_like)


def dilate(lam: float, a: TensorElement) -> TensorElement:
    return a.with_levels([x * lam**n for n, x in enumerate(a.levels)], group_like=a.group_like)


def homogeneous_norm(a: TensorElement) -> float:
    """Σ_n |a^(n)|^{1/n} with the Frobenius norm on each level block."""
    if abs(a.scalar - 1.0) > 1e-12:
        raise AlgebraError(f"homogeneous_norm is defined on group elements (scalar part 1), got {a.scalar}")
    return float(sum(np.linalg.norm(x) ** (1.0 / n) for n, x in enumerate(a.levels) if n >= 1))


def pair_levels(c: WordCombination, levels: Sequence[np.ndarray], alphabet: Sequence[int]):
    """Evaluate ``⟨c, x⟩`` on (possibly batched) level arrays."""
    index = {a: i for i, a in enumerate(alphabet)}
    A = len(alphabet)
    L = len(levels) - 1
    total = 0.0
    for w, coeff in c.items():
        if len(w) > L:
            raise AlgebraError(f"word {format_word(w)} longer than level {L}")
        total = total + float(coeff) * levels[len(w)][..., _flat_index(w, index, A)]
    return total


def eval_word_combination(c: WordCombination, a: TensorElement) -> float:
    return float(pair_levels(c, a.levels, a.alphabet))


def shuffle_defect(a: TensorElement, max_total: int | None = None) -> float:
    """Largest relative violation of ⟨I⟩⟨J⟩ = ⟨I⧢J⟩ over word pairs with |I|+|J| ≤ max_total.

    Relative to ``max(1, |⟨I⟩⟨J⟩|)``.
    """
    L = a.level if max_total is None else min(max_total, a.level)
    worst = 0.0
    words = list(words_up_to(a.alphabet, L - 1, min_length=1))
    for I in words:
        aI = a[I]
        for J in words:
            if len(I) + len(J) > L or J < I and len(J) == len(I):
                continue
            lhs = aI * a[J]
            rhs = eval_word_combination(word_shuffle(I, J), a)
            worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
    return worst
