"""Piecewise-linear càdlàg sample paths, p-variation and the Skorokhod J1 distance.

A jump at time ``τ`` is stored as two consecutive nodes with the same time,
the second one flagged in ``jumps``.  Between non-flagged consecutive nodes
the path is linear in time.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tensor import TensorElement, group_inverse, homogeneous_norm, tensor_product

MAX_PVAR_NODES = 10_000
MAX_J1_STATES = 900


class PathError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CadlagSamplePath:
    letters: tuple
    times: np.ndarray
    values: np.ndarray
    jumps: np.ndarray

    def __post_init__(self):
        letters = tuple(int(i) for i in self.letters)
        times = np.array(self.times, dtype=float).reshape(-1)
        values = np.array(self.values, dtype=float).reshape(len(times), -1)
        jumps = np.array(self.jumps, dtype=bool).reshape(-1)
        if values.shape[1] != len(letters):
            raise PathError(f"{values.shape[1]} value columns for {len(letters)} letters")
        if len(jumps) != len(times):
            raise PathError("jump flags and times differ in length")
        if len(times) < 1 or times[0] != 0.0:
            raise PathError("paths start at time 0")
        if jumps[0]:
            raise PathError("the first node cannot be a jump")
        if not np.all(np.isfinite(values)):
            raise PathError("non-finite path values")
        dt = np.diff(times)
        if np.any(dt < 0):
            raise PathError("node times must be non-decreasing")
        same = dt == 0
        if np.any(same != jumps[1:]):
            bad = int(np.argmax(same != jumps[1:])) + 1
            raise PathError(f"node {bad}: duplicate times must coincide exactly with jump flags")
        if np.any(same[1:] & same[:-1]):
            raise PathError("at most two nodes may share a time")
        if len(times) > 1 and jumps[-1]:
            raise PathError("a jump at the horizon is not representable")
        if -1 in letters:
            col = values[:, letters.index(-1)]
            if not np.array_equal(col, times):
                raise PathError("time component (letter -1) must equal clock time at every node")
        for arr in (times, values, jumps):
            arr.flags.writeable = False
        object.__setattr__(self, "letters", letters)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "jumps", jumps)

    @property
    def dimension(self) -> int:
        return len(self.letters)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def n_nodes(self) -> int:
        return len(self.times)

    def component(self, letter: int) -> np.ndarray:
        return self.values[:, self.letters.index(letter)]

    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)

    def jump_times(self) -> np.ndarray:
        return self.times[self.jumps]

    def value_at(self, t) -> np.ndarray:
        """Right-continuous values at time(s) ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        k = np.searchsorted(self.times, t, side="right") - 1
        return self._interp(k, t)

    def left_limit(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        k = np.searchsorted(self.times, t, side="left") - 1
        k = np.maximum(k, 0)
        return self._interp(k, t)

    def _interp(self, k: np.ndarray, t: np.ndarray) -> np.ndarray:
        k = np.clip(k, 0, len(self.times) - 1)
        nxt = np.minimum(k + 1, len(self.times) - 1)
        t0, t1 = self.times[k], self.times[nxt]
        span = np.where(t1 > t0, t1 - t0, 1.0)
        w = np.where((t1 > t0) & (nxt > k), np.clip((t - t0) / span, 0.0, 1.0), 0.0)
        return self.values[k] + w[:, None] * (self.values[nxt] - self.values[k])

    def with_time(self) -> "CadlagSamplePath":
        """Prepend a time channel (letter -1) unless one is present."""
        if -1 in self.letters:
            return self
        return CadlagSamplePath((-1,) + self.letters, self.times, np.column_stack([self.times, self.values]), self.jumps)

    def restrict(self, letters: Sequence[int]) -> "CadlagSamplePath":
        cols = [self.letters.index(i) for i in letters]
        return CadlagSamplePath(tuple(letters), self.times, self.values[:, cols], self.jumps)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "jump"] + [f"c{i}" for i in self.letters])
        for t, j, row in zip(self.times, self.jumps, self.values):
            w.writerow([repr(float(t)), int(j)] + [repr(float(x)) for x in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CadlagSamplePath":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise PathError("empty CSV")
        header = [h.strip() for h in rows[0]]
        if header[:2] != ["time", "jump"] or not all(h.startswith("c") for h in header[2:]):
            raise PathError(f"bad header {header}; expected time,jump,c-1,c0,...")
        letters = tuple(int(h[1:]) for h in header[2:])
        body = rows[1:]
        times = [float(r[0]) for r in body]
        jumps = []
        for r in body:
            if r[1] not in ("0", "1"):
                raise PathError(f"jump flag must be 0 or 1, got {r[1]!r}")
            jumps.append(r[1] == "1")
        values = [[float(x) for x in r[2:]] for r in body]
        return cls(letters, np.array(times), np.array(values).reshape(len(body), len(letters)), np.array(jumps))


def from_increments(
    letters: Sequence[int],
    steps: Sequence[tuple],
    start: Sequence[float] | None = None,
) -> CadlagSamplePath:
    """Build a path from ``(dt, increment, is_jump)`` triples (``dt`` ignored for jumps)."""
    letters = tuple(letters)
    x = np.zeros(len(letters)) if start is None else np.asarray(start, dtype=float)
    t = 0.0
    times, values, jumps = [0.0], [x.copy()], [False]
    for dt, inc, is_jump in steps:
        x = x + np.asarray(inc, dtype=float)
        if not is_jump:
            t = t + float(dt)
        times.append(t)
        values.append(x.copy())
        jumps.append(bool(is_jump))
    values = np.array(values)
    if -1 in letters:
        values[:, letters.index(-1)] = times
    return CadlagSamplePath(letters, np.array(times), values, np.array(jumps))


# --------------------------------------------------------------------------
# p-variation


def _pvar_dp(n: int, dist_row, p: float) -> float:
    best = np.zeros(n)
    for j in range(1, n):
        best[j] = np.max(best[:j] + dist_row(j) ** p)
    return float(best[-1])


def p_variation(path: CadlagSamplePath, p: float) -> float:
    """``(sup_D Σ |x_{t_{i+1}} - x_{t_i}|^p)^{1/p}`` over partitions through the nodes."""
    if p < 1:
        raise ValueError(f"p-variation needs p >= 1, got {p}")
    n = path.n_nodes
    if n < 2:
        raise PathError("p-variation needs at least two nodes")
    if n > MAX_PVAR_NODES:
        raise PathError(f"p-variation DP is O(M^2); paths are capped at {MAX_PVAR_NODES} nodes")
    x = path.values
    total = _pvar_dp(n, lambda j: np.linalg.norm(x[:j] - x[j], axis=1), p)
    return total ** (1.0 / p)


def rough_p_variation(sig_path: Sequence[TensorElement], p: float) -> float:
    """p-variation of a group-valued path under ``d(a, b) = ‖a^{-1} ⊗ b‖``."""
    if p < 1:
        raise ValueError(f"p-variation needs p >= 1, got {p}")
    elems = list(sig_path)
    if len(elems) < 2:
        raise PathError("p-variation needs at least two nodes")
    for e in elems:
        if not e.group_like:
            raise ValueError("rough_p_variation needs group-like elements")
        if e.level < math.floor(p):
            raise ValueError(f"level {e.level} is below floor(p) = {math.floor(p)}")
    inv = [group_inverse(e) for e in elems]
    n = len(elems)
    dist = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            dist[i, j] = homogeneous_norm(tensor_product(inv[i], elems[j]))
    total = _pvar_dp(n, lambda j: dist[:j, j], p)
    return total ** (1.0 / p)


# --------------------------------------------------------------------------
# Skorokhod J1


def _warp_segment_cost(a: CadlagSamplePath, b: CadlagSamplePath, s0, s1, u0, u1, last: bool) -> float:
    """sup |a(λ(s)) - b(s)| for s in [s0, s1] with λ linear from (s0->u0) to (s1->u1)."""
    slope = (u1 - u0) / (s1 - s0)
    # pair every point with its warped time, keeping node times exact on their own side
    bt = b.times[(b.times > s0) & (b.times < s1)]
    at = a.times[(a.times > u0) & (a.times < u1)]
    pts = np.concatenate([[s0, s1], bt, np.clip(s0 + (at - u0) / slope, s0, s1)])
    lam = np.concatenate([[u0, u1], np.clip(u0 + slope * (bt - s0), u0, u1), at])
    right = pts < s1 if not last else np.ones(len(pts), dtype=bool)
    worst = 0.0
    if np.any(right):
        d = a.value_at(lam[right]) - b.value_at(pts[right])
        worst = max(worst, float(np.max(np.linalg.norm(d, axis=1))))
    left = pts > s0
    if np.any(left):
        d = a.left_limit(lam[left]) - b.left_limit(pts[left])
        worst = max(worst, float(np.max(np.linalg.norm(d, axis=1))))
    return worst


def warp_cost(a: CadlagSamplePath, b: CadlagSamplePath, breakpoints: Sequence[tuple]) -> float:
    """``max(|λ|, sup_s |a(λ(s)) - b(s)|)`` for the piecewise-linear warp through ``(s, λ(s))`` pairs."""
    cost = max(abs(u - s) for s, u in breakpoints)
    for k in range(len(breakpoints) - 1):
        (s0, u0), (s1, u1) = breakpoints[k], breakpoints[k + 1]
        cost = max(cost, _warp_segment_cost(a, b, s0, s1, u0, u1, last=k == len(breakpoints) - 2))
    return cost


def _candidate_times(path: CadlagSamplePath, limit: int) -> np.ndarray:
    t = np.unique(path.times)
    if len(t) <= limit:
        return t
    return np.unique(np.concatenate([[0.0, path.horizon], path.jump_times()]))


def j1_distance(a: CadlagSamplePath, b: CadlagSamplePath, refine: bool = True) -> float:
    """Upper bound on the Skorokhod J1 distance ``σ∞(a, b)``.

    Warps are piecewise linear with breakpoints matching node times of ``b``
    to node times of ``a``; the best one is found by a bottleneck dynamic
    program over the monotone lattice of node pairs, then each breakpoint is
    nudged toward the diagonal by bisection.  Exact whenever an optimal warp
    runs through node pairs (e.g. piecewise-constant paths).
    """
    if a.dimension != b.dimension:
        raise PathError("paths must have the same dimension")
    if a.horizon != b.horizon:
        raise PathError(f"mismatched horizon: {a.horizon} vs {b.horizon}")
    limit = int(math.isqrt(MAX_J1_STATES))
    ta = _candidate_times(a, limit)
    tb = _candidate_times(b, limit)
    na, nb = len(ta), len(tb)
    INF = math.inf
    best = np.full((na, nb), INF)
    parent: dict = {}
    best[0, 0] = 0.0
    for i1 in range(1, na):
        for j1 in range(1, nb):
            last = i1 == na - 1 and j1 == nb - 1
            if (i1 == na - 1) != (j1 == nb - 1):
                continue
            cand = INF
            arg = None
            for i0 in range(i1):
                for j0 in range(j1):
                    prev = best[i0, j0]
                    if prev >= cand:
                        continue
                    c = max(prev, abs(ta[i1] - tb[j1]))
                    if c >= cand:
                        continue
                    c = max(c, _warp_segment_cost(a, b, tb[j0], tb[j1], ta[i0], ta[i1], last))
                    if c < cand:
                        cand, arg = c, (i0, j0)
            best[i1, j1] = cand
            parent[(i1, j1)] = arg
    # recover breakpoints
    node = (na - 1, nb - 1)
    chain = [node]
    while node != (0, 0):
        node = parent[node]
        chain.append(node)
    bps = [(float(tb[j]), float(ta[i])) for i, j in reversed(chain)]
    cost = float(best[-1, -1])
    if refine:
        cost = min(cost, _bisect_refine(a, b, bps, cost))
    return cost


def _bisect_refine(a, b, bps: list, cost: float) -> float:
    bps = list(bps)
    for k in range(1, len(bps) - 1):
        s, u = bps[k]
        lo_u, hi_u = bps[k - 1][1], bps[k + 1][1]
        theta = 1.0
        for _ in range(12):
            u_new = u + theta * (s - u)
            if lo_u < u_new < hi_u:
                trial = bps[:k] + [(s, u_new)] + bps[k + 1:]
                c = warp_cost(a, b, trial)
                if c < cost:
                    cost, bps = c, trial
                    break
            theta /= 2
    return cost


def warp_path(path: CadlagSamplePath, new_times: Sequence[float]) -> CadlagSamplePath:
    """Reparameterise node times: node k moves to ``new_times[k]``.

    With ``λ`` the piecewise-linear map sending ``new_times[k]`` to the
    original node time, the result is ``path ∘ λ``.  ``new_times`` must be
    non-decreasing, start at 0, end at the horizon, and repeat exactly at jumps.
    """
    new_times = np.asarray(new_times, dtype=float)
    values = path.values.copy()
    if -1 in path.letters:
        values[:, path.letters.index(-1)] = new_times
    return CadlagSamplePath(path.letters, new_times, values, path.jumps)
