"""Simulation of the primary process and of Lévy-type signature models.

Jump sizes come from a finite atomic measure on the real line; the primary
process over letters ``(-1, 0, 1, …, K)`` is

    (t, W_t, Σ ΔL - t Σ λ x, Σ ΔL², …, Σ ΔL^K).

Two simulators are provided: :func:`simulate_primary` builds one explicit
:class:`CadlagSamplePath`, and :class:`BatchSimulator` streams many paths
through the uniform grid at once, carrying only running signatures and
scalars.  :func:`mc_moments` shards batches over independent seeds.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .calculus import SigModelParams, StructuralError, sig_model_representation, tilde_combination
from .levy import LevyTriplet, primary_process_letters, primary_process_triplet
from .paths import CadlagSamplePath
from ._kernels import level_offsets, mul_exp_rows
from .signature import SignaturePath
from .tensor import EMPTY, WordCombination, letter_sum, mul_exp, mul_exp_integral, pair_levels


@dataclass(frozen=True)
class SimulationGrid:
    horizon: float
    steps: int
    seed: int = 0

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    def times(self) -> np.ndarray:
        t = np.arange(self.steps + 1) * self.dt
        t[-1] = self.horizon
        return t


def jump_atoms_of(triplet: LevyTriplet) -> list:
    """Recover the one-dimensional ``(x, λ)`` atoms from a primary-process triplet."""
    K = triplet.dimension - 2
    if K < 2 or triplet.letters != primary_process_letters(K):
        raise ValueError("expected a primary-process triplet over letters (-1, 0, 1, ..., K)")
    return [(float(x[2]), lam) for x, lam in triplet.atoms]


def _jump_vector(x: float, K: int) -> np.ndarray:
    return np.array([0.0, 0.0] + [x**k for k in range(1, K + 1)])


# --------------------------------------------------------------------------
# single paths


def simulate_primary(
    triplet: LevyTriplet,
    grid: SimulationGrid,
    rng: np.random.Generator | None = None,
    brownian: bool = True,
) -> CadlagSamplePath:
    """One exact sample of the primary process on the grid merged with its jump times."""
    rng = np.random.default_rng(grid.seed) if rng is None else rng
    atoms = jump_atoms_of(triplet)
    K = triplet.dimension - 2
    T = grid.horizon
    jt, jx = [], []
    for x, lam in atoms:
        n = rng.poisson(lam * T)
        jt.append(rng.uniform(0.0, T, size=n))
        jx.append(np.full(n, x))
    jt = np.concatenate(jt) if jt else np.zeros(0)
    jx = np.concatenate(jx) if jx else np.zeros(0)
    order = np.argsort(jt, kind="stable")
    jt, jx = jt[order], jx[order]
    grid_t = grid.times()
    # event list: (time, kind, x) with kind 0 = grid node, 1 = jump
    ev_t = np.concatenate([grid_t[1:], jt])
    ev_kind = np.concatenate([np.zeros(grid.steps, dtype=int), np.ones(len(jt), dtype=int)])
    ev_x = np.concatenate([np.zeros(grid.steps), jx])
    order = np.lexsort((ev_kind, ev_t))
    m1 = sum(lam * x for x, lam in atoms)
    times, values, jumps = [0.0], [np.zeros(K + 2)], [False]
    cur = np.zeros(K + 2)
    t_cur = 0.0
    for i in order:
        t, kind = ev_t[i], ev_kind[i]
        if t > t_cur:
            dt = t - t_cur
            dW = rng.normal(0.0, math.sqrt(dt)) if brownian else 0.0
            cur = cur.copy()
            cur[0] = t
            cur[1] += dW
            cur[2] -= dt * m1
            times.append(t)
            values.append(cur)
            jumps.append(False)
            t_cur = t
        if kind == 1:
            if t >= T:
                continue
            cur = cur + _jump_vector(ev_x[i], K)
            cur[0] = t
            times.append(t)
            values.append(cur)
            jumps.append(True)
    return CadlagSamplePath(primary_process_letters(K), np.array(times), np.array(values), np.array(jumps))


def coarsen(path: CadlagSamplePath, steps: int, factor: int) -> CadlagSamplePath:
    """Drop uniform-grid nodes whose index (on a ``steps`` grid) is not a multiple of ``factor``.

    Jump node pairs and the endpoints are kept, so the coarse path carries the
    same jumps and the same Brownian values at the kept nodes.
    """
    if steps % factor:
        raise ValueError(f"factor {factor} does not divide steps {steps}")
    T = path.horizon
    keep = np.zeros(path.n_nodes, dtype=bool)
    keep[0] = keep[-1] = True
    keep |= path.jumps
    keep[:-1] |= path.jumps[1:]
    pos = path.times * steps / T
    on_grid = np.abs(pos - np.round(pos)) < 1e-9
    keep |= on_grid & (np.round(pos).astype(int) % factor == 0)
    # a kept pre-jump node must not duplicate a kept grid node at the same time
    idx = np.nonzero(keep)[0]
    t = path.times[idx]
    jumps = path.jumps[idx].copy()
    dup = np.nonzero(np.diff(t) == 0)[0]
    drop = [i for i in dup if not jumps[i + 1]]
    idx = np.delete(idx, drop)
    return CadlagSamplePath(path.letters, path.times[idx], path.values[idx], path.jumps[idx])


def _check_model_alphabet(params: SigModelParams, letters: tuple):
    K = len(letters) - 2
    if letters != primary_process_letters(K):
        raise ValueError("model paths must live on the primary-process alphabet")
    if params.K != K:
        raise StructuralError(f"model uses N={params.K} but the path carries N={K}")


def simulate_model_direct(params: SigModelParams, primary: CadlagSamplePath, sig: SignaturePath) -> CadlagSamplePath:
    """Time-extended price path ``(t, S_t)`` by direct integration of the model dynamics.

    The ``dW`` integral is a left-point Itô sum; jumps use left-limit
    integrands; the compensator drift is integrated exactly along each
    linear piece.
    """
    _check_model_alphabet(params, primary.letters)
    n = params.n
    if sig.level < n:
        raise StructuralError(f"signature level {sig.level} below model word length n={n}")
    levels = list(sig.levels[: n + 1])
    sig_w = np.asarray(pair_levels(params.ell_w_comb, levels, sig.alphabet)) * np.ones(len(sig))
    sig_nu = np.asarray(pair_levels(params.ell_nu_comb, levels, sig.alphabet)) * np.ones(len(sig))
    inc = primary.increments()
    dS = sig_w[:-1] * inc[:, 1]
    for k in range(len(inc)):
        if primary.jumps[k + 1]:
            dS[k] += sig_nu[k] * inc[k, 2]
        elif inc[k, 2] != 0.0 and params.ell_nu:
            avg = mul_exp_integral([x[k] for x in levels], inc[k], n)
            dS[k] += float(pair_levels(params.ell_nu_comb, avg, sig.alphabet)) * inc[k, 2]
    S = params.s0 + np.concatenate([[0.0], np.cumsum(dS)])
    return CadlagSamplePath((-1, 1), primary.times, np.column_stack([primary.times, S]), primary.jumps)


def evaluate_model_from_signature(params: SigModelParams, sig: SignaturePath) -> np.ndarray:
    """``⟨sig-model representation, sig(0, t_k)⟩`` at every node."""
    need = params.model_level
    if sig.level < need:
        raise StructuralError(f"signature level {sig.level} below n + 1 = {need}")
    return sig.evaluate(sig_model_representation(params))


# --------------------------------------------------------------------------
# measure change


@dataclass(frozen=True)
class MeasureChangeSpec:
    """Density ``dP/dQ`` with Brownian drift ``f(t) = Σ f^I ⟨ε_I, X_{t-}⟩`` and jump tilt ``e^{g(x_i)}``.

    Words of ``f`` avoid letters 0 and 1 unless ``allow_jump_letter`` admits 1.
    Integrability of the density is the caller's responsibility.
    """

    f_coeffs: WordCombination = field(default_factory=WordCombination)
    g_values: tuple = ()
    allow_jump_letter: bool = False

    def __post_init__(self):
        f = self.f_coeffs if isinstance(self.f_coeffs, WordCombination) else WordCombination(self.f_coeffs)
        banned = {0} if self.allow_jump_letter else {0, 1}
        for w in f:
            if banned & set(w):
                raise StructuralError(
                    f"f word {w} uses a forbidden letter from {sorted(banned)}"
                )
        object.__setattr__(self, "f_coeffs", f)
        object.__setattr__(self, "g_values", tuple(float(g) for g in self.g_values))


@dataclass(frozen=True)
class MeasureChangeResult:
    triplet_P: LevyTriplet
    translated: dict  # word -> WordCombination over the P-primary signature
    drift: WordCombination  # P-drift of S as a functional of the P-primary signature
    f_translated: WordCombination
    kappa: float


class _Translator:
    def __init__(self, K: int, f_P: WordCombination | None, kappa: float):
        self.K = K
        self.f_P = f_P
        self.kappa = kappa
        self.cache = {EMPTY: WordCombination.unit()}

    def __call__(self, J: tuple) -> WordCombination:
        if J in self.cache:
            return self.cache[J]
        K = self.K
        j = J[-1]
        prev = self(J[:-1])
        out = tilde_combination(prev, j, K)
        if len(J) >= 2 and J[-2] == 0 and j == 0:
            out = out + self(J[:-2]).concat((-1,)) * Fraction(1, 2)
        for cut in range(len(J) - 2, -1, -1):
            tail = J[cut:]
            if min(tail) < 1:
                break
            s = letter_sum(tail)
            if s > K:
                raise StructuralError(f"letter {s} exceeds N={K} in jump term of word {J}")
            out = out + tilde_combination(self(J[:cut]), s, K) * Fraction(1, math.factorial(len(tail)))
        if j == 0 and self.f_P:
            out = out + tilde_combination(prev.shuffle(self.f_P), -1, K)
        if j == 1 and self.kappa != 0.0:
            out = out + tilde_combination(prev, -1, K) * self.kappa
        self.cache[J] = out
        return out


def measure_change_translate(
    params: SigModelParams, spec: MeasureChangeSpec, triplet_Q: LevyTriplet
) -> MeasureChangeResult:
    """Rewrite ``⟨ε_J, X⟩`` as ``⟨ε_J^P, Y⟩`` for the P-primary process ``Y``."""
    atoms = jump_atoms_of(triplet_Q)
    K = triplet_Q.dimension - 2
    if spec.g_values and len(spec.g_values) != len(atoms):
        raise ValueError(f"{len(spec.g_values)} g values for {len(atoms)} atoms")
    g = spec.g_values or (0.0,) * len(atoms)
    kappa = float(sum(lam * x * (math.exp(gi) - 1.0) for (x, lam), gi in zip(atoms, g)))
    triplet_P = primary_process_triplet([(x, lam * math.exp(gi)) for (x, lam), gi in zip(atoms, g)], K)
    plain = _Translator(K, None, kappa)
    f_P = WordCombination()
    for I, c in spec.f_coeffs.items():
        if any(i > K for i in I):
            raise StructuralError(f"f word {I} uses letters beyond N={K}")
        f_P = f_P + plain(I) * c
    tr = _Translator(K, f_P, kappa)
    translated = {}
    for J in list(params.ell_w) + list(params.ell_nu):
        translated[J] = tr(J)
    drift = WordCombination()
    for J, c in params.ell_w.items():
        drift = drift + translated[J].shuffle(f_P) * c
    for J, c in params.ell_nu.items():
        drift = drift + translated[J] * (c * kappa)
    return MeasureChangeResult(triplet_P, translated, drift, f_P, kappa)


def translate_word(J: Sequence[int], spec: MeasureChangeSpec, triplet_Q: LevyTriplet) -> WordCombination:
    """``ε_J^P`` for a single word."""
    atoms = jump_atoms_of(triplet_Q)
    K = triplet_Q.dimension - 2
    g = spec.g_values or (0.0,) * len(atoms)
    kappa = float(sum(lam * x * (math.exp(gi) - 1.0) for (x, lam), gi in zip(atoms, g)))
    plain = _Translator(K, None, kappa)
    f_P = WordCombination()
    for I, c in spec.f_coeffs.items():
        f_P = f_P + plain(I) * c
    return _Translator(K, f_P, kappa)(tuple(J))


def primary_under_P(path: CadlagSamplePath, spec: MeasureChangeSpec, triplet_Q: LevyTriplet, level: int) -> CadlagSamplePath:
    """The P-primary path ``Y`` built from a Q-sample of ``X``.

    ``Y⁰ = X⁰ - ∫ f ds`` and ``Y¹ = X¹ - κ t``; other components agree.  The
    ``f`` integral is exact at nodes and interpolated linearly between them,
    which is exact whenever ``f`` is constant between nodes.
    """
    from .signature import marcus_signature

    atoms = jump_atoms_of(triplet_Q)
    g = spec.g_values or (0.0,) * len(atoms)
    kappa = float(sum(lam * x * (math.exp(gi) - 1.0) for (x, lam), gi in zip(atoms, g)))
    values = path.values.copy()
    if spec.f_coeffs:
        sig = marcus_signature(path, max(level, spec.f_coeffs.max_length + 1))
        int_f = tilde_combination(spec.f_coeffs, -1, path.dimension - 2)
        values[:, 1] -= sig.evaluate(int_f)
    values[:, 2] -= kappa * path.times
    return CadlagSamplePath(path.letters, path.times, values, path.jumps)


# --------------------------------------------------------------------------
# batched Monte Carlo


@dataclass
class BatchState:
    """Per-path running quantities; signatures are flat ``(P, D)`` stacks."""

    x_flat: np.ndarray | None
    x_offsets: np.ndarray | None
    S: np.ndarray | None = None
    S_max: np.ndarray | None = None
    s_hat_flat: np.ndarray | None = None
    s_hat_offsets: np.ndarray | None = None
    gains: np.ndarray | None = None

    def x_levels(self, rows=slice(None)) -> list | None:
        if self.x_flat is None:
            return None
        o = self.x_offsets
        return [self.x_flat[rows, o[n] : o[n + 1]] for n in range(len(o) - 1)]

    def s_hat_levels(self, rows=slice(None)) -> list | None:
        if self.s_hat_flat is None:
            return None
        o = self.s_hat_offsets
        return [self.s_hat_flat[rows, o[n] : o[n + 1]] for n in range(len(o) - 1)]


class BatchSimulator:
    """Streams a batch of primary-process paths through the uniform grid.

    Within each grid cell, paths without jumps advance by one linear piece;
    paths with jumps split the cell at their jump times and are processed in
    rounds by jump order.  Brownian increments are drawn per piece.

    Args:
        jump_atoms: ``(x, λ)`` pairs of the jump measure.
        K: moment count of the primary process.
        grid: horizon and step count (the seed is ignored here).
        brownian: include the Brownian component.
        x_level: level of the running primary signature to keep (0 = none).
        params: model to integrate alongside (enables ``S``).
        s_hat_level: level of the running ``(t, S)`` signature (0 = none).
        theta: ``theta(t, x_levels) -> (P,)`` strategy evaluated at left points.
    """

    def __init__(
        self,
        jump_atoms: Sequence[tuple],
        K: int,
        grid: SimulationGrid,
        brownian: bool = True,
        x_level: int = 0,
        params: SigModelParams | None = None,
        s_hat_level: int = 0,
        theta: Callable | None = None,
    ):
        self.atoms = [(float(x), float(lam)) for x, lam in jump_atoms]
        self.K = K
        self.grid = grid
        self.brownian = brownian
        self.params = params
        if params is not None:
            if params.K != K:
                raise StructuralError(f"model uses N={params.K} but the market carries N={K}")
            x_level = max(x_level, params.n)
        if (s_hat_level or theta is not None) and params is None:
            raise ValueError("price-path quantities need model parameters")
        self.x_level = x_level
        self.s_hat_level = s_hat_level
        self.theta = theta
        self.A = K + 2
        self.m1 = sum(lam * x for x, lam in self.atoms)
        self.alphabet = primary_process_letters(K)
        self.x_offsets = level_offsets(self.A, x_level)
        self.s_offsets = level_offsets(2, s_hat_level)

    def _draw_jumps(self, P: int, rng: np.random.Generator):
        T = self.grid.horizon
        paths, times, sizes = [np.zeros(0, int)], [np.zeros(0)], [np.zeros(0)]
        for x, lam in self.atoms:
            counts = rng.poisson(lam * T, size=P)
            total = int(counts.sum())
            paths.append(np.repeat(np.arange(P), counts))
            times.append(rng.uniform(0.0, T, size=total))
            sizes.append(np.full(total, x))
        return np.concatenate(paths), np.concatenate(times), np.concatenate(sizes)

    def _sigma(self, comb: WordCombination, levels, P: int) -> np.ndarray:
        return np.asarray(pair_levels(comb, levels, self.alphabet), dtype=float) * np.ones(P)

    def _advance(self, st: BatchState, rows: np.ndarray, t_left, v: np.ndarray, is_jump: bool):
        """Advance paths ``rows`` by increments ``v`` (one row per path)."""
        p = self.params
        P = len(rows)
        if p is not None:
            n = p.n
            x_lv = st.x_levels(rows) if st.x_flat is not None else [np.ones((P, 1))]
            low = x_lv[: n + 1]
            if is_jump:
                dS = self._sigma(p.ell_nu_comb, low, P) * v[:, 2]
            else:
                dS = self._sigma(p.ell_w_comb, low, P) * v[:, 1]
                if p.ell_nu and self.m1 != 0.0:
                    avg = mul_exp_integral(low, v, n) if n > 0 else low
                    dS = dS + self._sigma(p.ell_nu_comb, avg, P) * v[:, 2]
            if self.theta is not None:
                st.gains[rows] += self.theta(t_left, x_lv) * dS
            st.S[rows] += dS
            st.S_max[rows] = np.maximum(st.S_max[rows], st.S[rows])
            if st.s_hat_flat is not None:
                mul_exp_rows(st.s_hat_flat, rows, np.column_stack([v[:, 0], dS]), 2, self.s_hat_level, self.s_offsets)
        if st.x_flat is not None:
            mul_exp_rows(st.x_flat, rows, v, self.A, self.x_level, self.x_offsets)

    def _piece(self, dt: np.ndarray, rng) -> np.ndarray:
        v = np.zeros((len(dt), self.A))
        v[:, 0] = dt
        if self.brownian:
            v[:, 1] = rng.standard_normal(len(dt)) * np.sqrt(dt)
        v[:, 2] = -dt * self.m1
        return v

    def _jump(self, x: np.ndarray) -> np.ndarray:
        v = np.zeros((len(x), self.A))
        p = np.ones(len(x))
        for k in range(1, self.K + 1):
            p = p * x
            v[:, k + 1] = p
        return v

    def run(self, P: int, rng: np.random.Generator) -> BatchState:
        st = BatchState(None, None)
        if self.x_level > 0:
            st.x_flat = np.zeros((P, self.x_offsets[-1]))
            st.x_flat[:, 0] = 1.0
            st.x_offsets = self.x_offsets
        if self.params is not None:
            st.S = np.full(P, float(self.params.s0))
            st.S_max = st.S.copy()
            if self.s_hat_level:
                st.s_hat_flat = np.zeros((P, self.s_offsets[-1]))
                st.s_hat_flat[:, 0] = 1.0
                st.s_hat_offsets = self.s_offsets
            if self.theta is not None:
                st.gains = np.zeros(P)
        steps, dt = self.grid.steps, self.grid.dt
        grid_t = self.grid.times()
        everyone = np.arange(P)
        jp, jt, jx = self._draw_jumps(P, rng)
        cell = np.minimum((jt / dt).astype(int), steps - 1)
        order = np.lexsort((jt, jp, cell))
        jp, jt, jx, cell = jp[order], jt[order], jx[order], cell[order]
        bounds = np.searchsorted(cell, np.arange(steps + 1))
        for c in range(steps):
            t0, t1 = grid_t[c], grid_t[c + 1]
            lo, hi = bounds[c], bounds[c + 1]
            t_left = np.full(P, t0)
            if lo == hi:
                self._advance(st, everyone, t_left, self._piece(np.full(P, t1 - t0), rng), False)
                continue
            cp, ct, cx = jp[lo:hi], jt[lo:hi], jx[lo:hi]
            first = np.ones(len(cp), dtype=bool)
            first[1:] = cp[1:] != cp[:-1]
            starts = np.nonzero(first)[0]
            rank = np.arange(len(cp)) - np.repeat(starts, np.diff(np.append(starts, len(cp))))
            # round 0: every path advances to its first event or the cell end
            end0 = np.full(P, t1)
            end0[cp[first]] = ct[first]
            self._advance(st, everyone, t_left, self._piece(end0 - t0, rng), False)
            r = 0
            while True:
                sel = np.nonzero(rank == r)[0]
                if len(sel) == 0:
                    break
                idx = cp[sel]
                self._advance(st, idx, ct[sel], self._jump(cx[sel]), True)
                nxt = np.full(len(idx), t1)
                follow = sel + 1
                has_next = follow < len(cp)
                has_next[has_next] = cp[follow[has_next]] == idx[has_next]
                nxt[has_next] = ct[follow[has_next]]
                self._advance(st, idx, ct[sel], self._piece(nxt - ct[sel], rng), False)
                r += 1
        return st


def _chan_merge(a, b):
    na, ma, Ma = a
    nb, mb, Mb = b
    n = na + nb
    if na == 0:
        return b
    delta = mb - ma
    mean = ma + delta * (nb / n)
    M2 = Ma + Mb + delta**2 * (na * nb / n)
    return n, mean, M2


def mc_moments(
    sample_fn: Callable[[int, np.random.Generator], np.ndarray],
    n_paths: int,
    seed: int,
    shard_size: int = 10_000,
    threads: int = 1,
) -> tuple:
    """Mean and standard error of ``sample_fn`` columns over ``n_paths`` samples.

    Shard ``i`` draws from ``SeedSequence(seed, spawn_key=(i,))`` and shards are
    merged in index order, so results do not depend on ``threads``.
    """
    if n_paths < 1:
        raise ValueError("need at least one path")
    sizes = [shard_size] * (n_paths // shard_size)
    if n_paths % shard_size:
        sizes.append(n_paths % shard_size)

    def shard(i):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        x = np.asarray(sample_fn(sizes[i], rng), dtype=float)
        x = x.reshape(sizes[i], -1)
        m = x.mean(axis=0)
        return len(x), m, ((x - m) ** 2).sum(axis=0)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(shard, range(len(sizes))))
    else:
        parts = [shard(i) for i in range(len(sizes))]
    acc = (0, 0.0, 0.0)
    for part in parts:
        acc = _chan_merge(acc, part)
    n, mean, M2 = acc
    var = M2 / (n - 1) if n > 1 else np.zeros_like(mean)
    return mean, np.sqrt(var / n), n
