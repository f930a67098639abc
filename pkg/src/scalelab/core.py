"""Finite function classes and the structural operations on them.

A :class:`FunctionClass` is a real matrix whose rows are functions and
whose columns are domain points. Everything in the package works on this
representation; infinite classes only enter through finite grid
surrogates (``ball`` and ``crit2`` in :func:`canonical`).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

from .errors import InputError

#: Global absolute tolerance for real comparisons: ``v >= t`` means ``v >= t - TAU``.
TAU = 1e-9

#: Refuse to materialize classes with more rows than this.
MAX_ROWS = 1 << 21

UNDEFINED = 0


def as_scale(gamma, name: str = "gamma") -> float:
    try:
        g = float(gamma)
    except (TypeError, ValueError):
        raise InputError(f"{name} must be a real number, got {gamma!r}") from None
    if not math.isfinite(g) or g <= 0:
        raise InputError(f"{name} must be a finite positive real, got {gamma!r}")
    return g


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def _check_labels(labels: Sequence[Hashable], width: int) -> tuple:
    labels = tuple(labels)
    if len(labels) != width:
        raise InputError(f"{len(labels)} labels for {width} columns")
    if len(set(labels)) != len(labels):
        raise InputError("domain labels must be distinct")
    return labels


@dataclass(frozen=True, eq=False)
class FunctionClass:
    """Rows are functions, columns are points; every entry lies in ``[-R, R]``.

    Duplicate rows are kept so row indices stay stable; call :meth:`dedup`
    to drop them explicitly.
    """

    domain_labels: tuple
    values: np.ndarray
    bound_R: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise InputError(f"values must be a non-empty 2-d matrix, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InputError("values must be finite")
        R = as_scale(self.bound_R, "bound_R")
        if np.max(np.abs(v)) > R + TAU:
            raise InputError(f"entry of magnitude {np.max(np.abs(v))!r} exceeds bound R={R!r}")
        object.__setattr__(self, "values", _frozen(v))
        object.__setattr__(self, "bound_R", R)
        object.__setattr__(self, "domain_labels", _check_labels(self.domain_labels, v.shape[1]))

    @property
    def n_functions(self) -> int:
        return self.values.shape[0]

    @property
    def n_points(self) -> int:
        return self.values.shape[1]

    def __repr__(self):
        return f"FunctionClass({self.n_functions} functions x {self.n_points} points, R={self.bound_R})"

    def column_indices(self, points: Iterable[Hashable]) -> list[int]:
        index = {lab: i for i, lab in enumerate(self.domain_labels)}
        out = []
        for p in points:
            if p not in index:
                raise InputError(f"unknown point label {p!r}")
            out.append(index[p])
        return out

    def dedup(self) -> "FunctionClass":
        """Drop repeated rows, keeping first occurrences in their original order."""
        _, first = np.unique(self.values, axis=0, return_index=True)
        return FunctionClass(self.domain_labels, self.values[np.sort(first)], self.bound_R)

    def sup_discrepancy(self, weights: np.ndarray) -> tuple[float, np.ndarray]:
        """``max_f |<f, weights>|`` and the first maximizing row."""
        scores = np.abs(self.values @ np.asarray(weights, dtype=float))
        i = int(np.argmax(scores))
        return float(scores[i]), self.values[i]

    def to_dict(self) -> dict:
        return {"domain": list(self.domain_labels), "R": self.bound_R, "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "FunctionClass":
        try:
            return cls(tuple(d["domain"]), np.asarray(d["values"], dtype=float), d["R"])
        except KeyError as e:
            raise InputError(f"function class JSON is missing key {e}") from None


@dataclass(frozen=True, eq=False)
class PartialConceptClass:
    """Matrix over ``{+1, -1, undefined}``; undefined is stored as 0."""

    domain_labels: tuple
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise InputError(f"values must be a non-empty 2-d matrix, got shape {v.shape}")
        if not np.all(np.isin(v, (-1, 0, 1))):
            raise InputError("partial concept entries must be +1, -1 or undefined")
        object.__setattr__(self, "values", _frozen(v.astype(np.int8)))
        object.__setattr__(self, "domain_labels", _check_labels(self.domain_labels, v.shape[1]))

    @property
    def n_functions(self) -> int:
        return self.values.shape[0]

    @property
    def n_points(self) -> int:
        return self.values.shape[1]

    def to_dict(self) -> dict:
        rows = [[None if e == UNDEFINED else int(e) for e in row] for row in self.values]
        return {"domain": list(self.domain_labels), "values": rows}

    @classmethod
    def from_dict(cls, d: dict) -> "PartialConceptClass":
        rows = [[UNDEFINED if e is None else int(e) for e in row] for row in d["values"]]
        return cls(tuple(d["domain"]), np.asarray(rows))


@dataclass(frozen=True, eq=False)
class FullCube:
    """All ``{0, height}``-valued functions on a domain, kept implicit.

    Used where the explicit class would have ``2**n`` rows. Supports the
    same ``sup_discrepancy`` query as :class:`FunctionClass`.
    """

    domain_labels: tuple
    height: float

    def __post_init__(self):
        object.__setattr__(self, "domain_labels", tuple(self.domain_labels))
        object.__setattr__(self, "height", as_scale(self.height, "height"))

    @property
    def bound_R(self) -> float:
        return self.height

    @property
    def n_points(self) -> int:
        return len(self.domain_labels)

    def sup_discrepancy(self, weights: np.ndarray) -> tuple[float, np.ndarray]:
        w = np.asarray(weights, dtype=float)
        pos, neg = w[w > 0].sum(), -w[w < 0].sum()
        if pos >= neg:
            return float(self.height * pos), self.height * (w > 0)
        return float(self.height * neg), self.height * (w < 0)

    def materialize(self) -> FunctionClass:
        return canonical("cube", n=self.n_points, gamma=self.height, labels=self.domain_labels)


# -- structural operations ---------------------------------------------------


def restrict(F: FunctionClass, points: Sequence[Hashable]) -> FunctionClass:
    points = list(points)
    if not points:
        raise InputError("cannot restrict to an empty point set")
    cols = F.column_indices(points)
    return FunctionClass(tuple(points), F.values[:, cols], F.bound_R)


def dual(F: FunctionClass) -> FunctionClass:
    """Evaluation functionals as a class over the row indices of ``F``."""
    return FunctionClass(tuple(range(F.n_functions)), F.values.T, F.bound_R)


def aggregate(G: Callable, classes: Sequence[FunctionClass], bound_R: float | None = None) -> FunctionClass:
    """Pointwise aggregation over every tuple of rows, first class varying slowest.

    ``G`` receives one array per class (the row values at all points) and
    must return the aggregated row; numpy ufuncs such as ``np.maximum``
    work directly. ``bound_R`` defaults to the largest input bound.
    """
    if not classes:
        raise InputError("aggregate needs at least one class")
    labels = classes[0].domain_labels
    for c in classes[1:]:
        if c.domain_labels != labels:
            raise InputError("aggregated classes must share domain labels")
    count = math.prod(c.n_functions for c in classes)
    if count > MAX_ROWS:
        raise InputError(f"aggregate would produce {count} rows (limit {MAX_ROWS})")
    rows = [
        np.asarray(G(*(c.values[i] for c, i in zip(classes, idx))), dtype=float)
        for idx in itertools.product(*(range(c.n_functions) for c in classes))
    ]
    R = bound_R if bound_R is not None else max(c.bound_R for c in classes)
    return FunctionClass(labels, np.vstack(rows), R)


def discretize(F: FunctionClass, eps: float) -> FunctionClass:
    """``floor(v / eps) * eps`` entrywise, then dedup.

    The floor absorbs float noise (0.3 / 0.1 is 2.9999999999999996) and the
    product is rounded to 12 decimals so exact grid values stay fixed points.
    """
    eps = as_scale(eps, "eps")
    q = np.floor(F.values / eps + TAU)
    v = np.round(q * eps, 12)
    R = max(F.bound_R, float(np.max(np.abs(v))))
    return FunctionClass(F.domain_labels, v, R).dedup()


def to_partial(F: FunctionClass, gamma: float) -> PartialConceptClass:
    """+1 where ``f >= gamma/2``, -1 where ``f <= -gamma/2``, undefined in between."""
    gamma = as_scale(gamma)
    v = F.values
    out = np.zeros(v.shape, dtype=np.int8)
    out[v >= gamma / 2 - TAU] = 1
    out[v <= -gamma / 2 + TAU] = -1
    return PartialConceptClass(F.domain_labels, out)


def hat_embed(P: PartialConceptClass, gamma_star: float) -> FunctionClass:
    gamma_star = as_scale(gamma_star, "gamma_star")
    return FunctionClass(P.domain_labels, gamma_star * P.values.astype(float), gamma_star)


# -- canonical classes -------------------------------------------------------


def _grid(lo: float, hi: float, step: float) -> np.ndarray:
    count = int(math.floor((hi - lo) / step + TAU)) + 1
    return np.round(lo + step * np.arange(count), 12)


def crit2_ceiling(j: int, gamma_star: float, log_base: float = 2.0) -> float:
    """Per-point ceiling ``gamma* + 1/log j``, capped at ``1 + gamma*`` (where ``log j <= 1``)."""
    lg = math.log(j, log_base) if j > 1 else 0.0
    return gamma_star + 1.0 if lg <= 1.0 else gamma_star + 1.0 / lg


def canonical(name: str, n: int, gamma: float | None = None, step: float | None = None,
              log_base: float = 2.0, labels: Sequence[Hashable] | None = None,
              value: float = 0.0) -> FunctionClass:
    """Named example classes on the domain ``1..n``.

    ``cube``      all of ``{0, gamma}^n``
    ``singleton`` ``f_k(j) = +1`` iff ``j == k`` else ``-1``
    ``ball``      grid of step ``step`` over ``[-gamma/2, gamma/2]^n``
    ``crit2``     grid of step ``step`` over ``prod_j [0, crit2_ceiling(j, gamma)]``
    ``constant``  the single row ``value``

    ``ball`` and ``crit2`` are finite surrogates of infinite classes; the
    grid step is part of the surrogate and must be reported with results.
    """
    try:
        n = int(n)
    except (TypeError, ValueError):
        raise InputError(f"n must be an integer, got {n!r}") from None
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    labels = tuple(labels) if labels is not None else tuple(range(1, n + 1))
    name = name.lower()
    if name in ("ball", "crit2"):
        if step is None or not step > 0:
            raise InputError(f"{name} needs a positive grid step, got {step!r}")
        gamma = as_scale(gamma, "gamma_star")
        if name == "ball":
            axes = [_grid(-gamma / 2, gamma / 2, step)] * n
            R = gamma / 2
        else:
            axes = [_grid(0.0, crit2_ceiling(j, gamma, log_base), step) for j in range(1, n + 1)]
            R = gamma + 1.0
        count = math.prod(len(a) for a in axes)
        if count > MAX_ROWS:
            raise InputError(f"{name} grid has {count} rows (limit {MAX_ROWS}); use a coarser step")
        mesh = np.meshgrid(*axes, indexing="ij")
        values = np.stack([m.ravel() for m in mesh], axis=1)
        return FunctionClass(labels, values, R)
    if name == "cube":
        gamma = as_scale(gamma)
        if n > 21:
            raise InputError(f"cube on {n} points has 2**{n} rows; use FullCube instead")
        values = gamma * np.array(list(itertools.product((0.0, 1.0), repeat=n)))
        return FunctionClass(labels, values, gamma)
    if name == "singleton":
        return FunctionClass(labels, 2.0 * np.eye(n) - 1.0, 1.0)
    if name == "constant":
        return FunctionClass(labels, np.full((1, n), float(value)), max(abs(float(value)), 1.0))
    raise InputError(f"unknown canonical class {name!r}")
