"""Exact fat-shattering and partial VC dimensions on finite classes.

Rows are encoded as bitmasks (python ints). For a point with threshold
``r`` the functions clearing ``r + gamma/2`` form the mask ``up`` and those
clearing ``r - gamma/2`` from below form ``down``. A point set is shattered
when some choice of one ``(up, down)`` option per point leaves every one of
the ``2**d`` sign-pattern cells non-empty.

Only thresholds ``r = v - gamma/2`` for values ``v`` taken at the point
need to be tried: raising ``r`` up to the next such breakpoint never
shrinks ``up`` and only grows ``down``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .core import TAU, FunctionClass, PartialConceptClass, as_scale
from .errors import BudgetError, InputError, PropertyViolation

DEFAULT_CAP = 16
DEFAULT_CHECK_BUDGET = 500_000


@dataclass(frozen=True)
class ShatteringWitness:
    """Points, thresholds and one realizing row index per sign pattern.

    Pattern keys are bitstrings with character ``i`` equal to ``"1"`` when
    point ``i`` is labelled +1.
    """

    points: tuple
    thresholds: tuple
    realizers: dict = field(hash=False)
    gamma: float

    @property
    def size(self) -> int:
        return len(self.points)

    def verify(self, F: FunctionClass, tol: float = TAU) -> bool:
        cols = F.column_indices(self.points)
        half = self.gamma / 2
        for bits in itertools.product("01", repeat=len(cols)):
            key = "".join(bits)
            row = self.realizers.get(key)
            if row is None:
                return False
            v = F.values[row, cols]
            for b, x, r in zip(key, v, self.thresholds):
                if b == "1" and x < r + half - tol:
                    return False
                if b == "0" and x > r - half + tol:
                    return False
        return True

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "points": list(self.points),
            "thresholds": list(self.thresholds),
            "realizers": dict(sorted(self.realizers.items())),
        }


@dataclass(frozen=True)
class DimensionResult:
    """``d`` is exact when ``exact``; otherwise it is only a lower bound."""

    d: int
    witness: ShatteringWitness | None
    exact: bool = True

    def to_dict(self) -> dict:
        return {"d": self.d, "exact": self.exact,
                "witness": None if self.witness is None else self.witness.to_dict()}


@dataclass(frozen=True)
class CommonThreshold:
    r: float
    points: tuple
    witness: ShatteringWitness

    def to_dict(self) -> dict:
        return {"r": self.r, "points": list(self.points), "witness": self.witness.to_dict()}


# -- masks and options --------------------------------------------------------


def _mask(flags: np.ndarray) -> int:
    m = 0
    for i in np.flatnonzero(flags):
        m |= 1 << int(i)
    return m


def _lowest(mask: int) -> int:
    return (mask & -mask).bit_length() - 1


def _point_options(column: np.ndarray, gamma: float, fixed_r: float | None = None):
    """Feasible ``(up, down, r)`` triples for one point, duplicates removed."""
    half = gamma / 2
    rs = [fixed_r] if fixed_r is not None else [v - half for v in np.unique(column)]
    seen, out = set(), []
    for r in rs:
        up = _mask(column >= r + half - TAU)
        down = _mask(column <= r - half + TAU)
        if up and down and (up, down) not in seen:
            seen.add((up, down))
            out.append((up, down, float(r)))
    return out


def _search(options: Sequence[list], order: Sequence[int]):
    """Backtracking over per-point options; returns chosen option indices or None."""
    chosen = [0] * len(order)

    def rec(depth: int, cells: list[int]) -> bool:
        if depth == len(order):
            return True
        for k, (up, down, _) in enumerate(options[order[depth]]):
            lo = [c & down for c in cells]
            if not all(lo):
                continue
            hi = [c & up for c in cells]
            if not all(hi):
                continue
            chosen[depth] = k
            if rec(depth + 1, lo + hi):
                return True
        return False

    # -1 is the all-ones mask for any row count
    return list(chosen) if rec(0, [-1]) else None


def _witness_from(options, cols: Sequence[int], labels: Sequence[Hashable], gamma: float):
    order = sorted(range(len(cols)), key=lambda i: len(options[cols[i]]))
    picked = _search([options[c] for c in cols], order)
    if picked is None:
        return None
    choice = [None] * len(cols)
    for depth, i in enumerate(order):
        choice[i] = options[cols[i]][picked[depth]]
    realizers = {}
    for bits in itertools.product((0, 1), repeat=len(cols)):
        cell = -1
        for b, (up, down, _) in zip(bits, choice):
            cell &= up if b else down
        realizers["".join(map(str, bits))] = _lowest(cell)
    return ShatteringWitness(
        points=tuple(labels[c] for c in cols),
        thresholds=tuple(r for _, _, r in choice),
        realizers=realizers,
        gamma=gamma,
    )


def _max_shattered(options, labels, gamma, cap, budget):
    """Level-wise search; every subset of a shattered set is shattered.

    Levels are generated in lexicographic order of column indices, so the
    first witness at the top level is the lexicographically smallest set.
    """
    if cap < 1:
        raise InputError(f"search cap must be >= 1, got {cap}")
    level, best = [], None
    for c in range(len(options)):
        if options[c]:
            level.append((c,))
    if not level:
        return DimensionResult(0, None, True)
    best = _witness_from(options, level[0], labels, gamma)
    size, checks = 1, 0
    while True:
        members = set(level)
        if size == cap:
            more = any(
                all(sub in members for sub in itertools.combinations(cand, size))
                and _witness_from(options, cand, labels, gamma) is not None
                for cand in _join(level)
            )
            return DimensionResult(size, best, not more)
        nxt, top = [], None
        for cand in _join(level):
            if not all(sub in members for sub in itertools.combinations(cand, size)):
                continue
            checks += 1
            if checks > budget:
                return DimensionResult(size, best, False)
            w = _witness_from(options, cand, labels, gamma)
            if w is not None:
                nxt.append(cand)
                top = top or w
        if not nxt:
            return DimensionResult(size, best, True)
        level, best, size = nxt, top, size + 1


def _join(level):
    for i, a in enumerate(level):
        for b in level[i + 1:]:
            if a[:-1] != b[:-1]:
                break
            yield a + (b[-1],)


# -- public operations --------------------------------------------------------


def is_shattered(F: FunctionClass, points: Sequence[Hashable], gamma: float,
                 common_threshold: float | None = None, cap: int = DEFAULT_CAP) -> ShatteringWitness | None:
    gamma = as_scale(gamma)
    points = list(points)
    if len(points) > cap:
        raise BudgetError(f"{len(points)} points exceed the enumeration cap {cap}")
    cols = F.column_indices(points)
    if len(set(cols)) != len(cols):
        raise InputError("points must be distinct")
    if not cols:
        return ShatteringWitness((), (), {"": 0}, gamma)
    options = {c: _point_options(F.values[:, c], gamma, common_threshold) for c in set(cols)}
    local = [options[c] for c in cols]
    return _witness_from(local, list(range(len(cols))), points, gamma)


def fat_dim(F: FunctionClass, gamma: float, cap: int = DEFAULT_CAP,
            budget: int = DEFAULT_CHECK_BUDGET) -> DimensionResult:
    gamma = as_scale(gamma)
    options = [_point_options(F.values[:, c], gamma) for c in range(F.n_points)]
    return _max_shattered(options, F.domain_labels, gamma, cap, budget)


def common_threshold_dim(F: FunctionClass, gamma: float, cap: int = DEFAULT_CAP,
                         budget: int = DEFAULT_CHECK_BUDGET) -> tuple[float | None, DimensionResult]:
    """Largest set shattered with one threshold shared by all its points."""
    gamma = as_scale(gamma)
    best_r, best = None, DimensionResult(0, None, True)
    for r in np.unique(F.values - gamma / 2):
        options = [_point_options(F.values[:, c], gamma, float(r)) for c in range(F.n_points)]
        res = _max_shattered(options, F.domain_labels, gamma, cap, budget)
        if res.d > best.d or (res.d == best.d and not res.exact and best.exact):
            best_r, best = float(r), res
    return best_r, best


def partial_vc_dim(P: PartialConceptClass, cap: int = DEFAULT_CAP,
                   budget: int = DEFAULT_CHECK_BUDGET) -> DimensionResult:
    """Largest column set on which every sign pattern appears among rows defined there."""
    options = []
    for c in range(P.n_points):
        up, down = _mask(P.values[:, c] == 1), _mask(P.values[:, c] == -1)
        options.append([(up, down, 0.0)] if up and down else [])
    return _max_shattered(options, P.domain_labels, 1.0, cap, budget)


def common_threshold_shatter(F: FunctionClass, gamma_minus: float, gamma_prime: float, n: int,
                             cap: int = DEFAULT_CAP) -> CommonThreshold:
    """Pigeonhole a gamma'-shattered set's thresholds into bins of width (gamma' - gamma-)/2.

    Thresholds of a gamma'-shattered set lie in ``[lo + gamma'/2, hi - gamma'/2]``
    where ``[lo, hi]`` is the range of the class. The fullest bin ``[r, r + alpha]``
    gives points that are gamma--shattered at the common threshold ``r``.
    """
    gamma_minus = as_scale(gamma_minus, "gamma_minus")
    gamma_prime = as_scale(gamma_prime, "gamma_prime")
    if gamma_minus >= gamma_prime:
        raise InputError(f"need gamma_minus < gamma_prime, got {gamma_minus} >= {gamma_prime}")
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    found = fat_dim(F, gamma_prime, cap=cap)
    if found.d < n:
        raise BudgetError(f"largest {gamma_prime}-shattered set found has {found.d} < {n} points")
    w = found.witness
    alpha = (gamma_prime - gamma_minus) / 2
    start = float(F.values.min()) + gamma_prime / 2
    bins: dict[int, list[int]] = {}
    for i, r_i in enumerate(w.thresholds):
        bins.setdefault(int(math.floor((r_i - start) / alpha + TAU)), []).append(i)
    idx = max(sorted(bins), key=lambda b: len(bins[b]))
    members = bins[idx]
    if len(members) < n:
        raise BudgetError(f"fullest threshold bin has {len(members)} < {n} points")
    r = start + idx * alpha
    pts = tuple(w.points[i] for i in members)
    check = is_shattered(F, pts, gamma_minus, common_threshold=r, cap=cap)
    if check is None:
        raise PropertyViolation(f"binned points are not {gamma_minus}-shattered at r={r}")
    return CommonThreshold(r, pts, check)
