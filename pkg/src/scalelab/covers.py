"""Empirical l-infinity covers: exact, greedy and the iterated box construction.

Exact covering reduces to a minimum clique cover: a set of rows can share a
center at scale ``gamma`` exactly when its coordinatewise spread is at most
``2 * gamma``, and then the coordinatewise midrange works as the center.
Three shortcuts avoid the search where the answer is certain:

* spread of the whole class at most ``2 * gamma``: one center;
* the distinct rows form a full Cartesian product of their columns' value
  sets: the cover number is the product of one-dimensional interval covers
  (the left endpoints of those intervals form a packing of the same size);
* a greedy cover whose size matches a greedy lower bound (rows pairwise too
  far apart to share a center).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

from . import _cliques
from .core import TAU, FunctionClass, PartialConceptClass, as_scale, restrict, to_partial
from .errors import InputError, PropertyViolation
from .shattering import fat_dim

DEFAULT_EXACT_CAP = 24
DEFAULT_DISAMBIGUATION_CAP = 12
#: Largest distinct-row count for which the pairwise graph is materialized.
GRAPH_LIMIT = 2048
METHODS = ("exact", "greedy", "iterated", "compression")


@dataclass(frozen=True, eq=False)
class Cover:
    """Centers at a declared scale plus the center index assigned to each row."""

    scale: float
    points: tuple
    centers: np.ndarray
    assignment: np.ndarray
    method: str
    info: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return int(self.centers.shape[0])

    def verify(self, F: FunctionClass, tol: float = TAU) -> bool:
        if F.n_functions != len(self.assignment):
            return False
        gap = np.max(np.abs(F.values - self.centers[self.assignment]), axis=1)
        return bool(np.all(gap <= self.scale + tol))

    def to_dict(self) -> dict:
        return {
            "scale": self.scale,
            "method": self.method,
            "size": self.size,
            "points": list(self.points),
            "centers": self.centers.tolist(),
            "assignment": self.assignment.tolist(),
            "info": dict(self.info),
        }


@dataclass(frozen=True)
class EntropyReport:
    gamma: float
    n: int
    cover_size: int
    entropy: float
    method: str

    CSV_FIELDS = ("gamma", "n", "cover_size", "entropy", "method")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.CSV_FIELDS}


@dataclass(frozen=True)
class PackingResult:
    size: int
    rows: tuple
    exact: bool

    def to_dict(self) -> dict:
        return {"size": self.size, "rows": list(self.rows), "exact": self.exact}


@dataclass(frozen=True)
class Disambiguation:
    """Total +-1 vectors and, for every partial row, the vector it agrees with."""

    vectors: np.ndarray
    assignment: np.ndarray
    exact: bool

    @property
    def size(self) -> int:
        return int(self.vectors.shape[0])


# -- helpers ------------------------------------------------------------------


def _restricted(F: FunctionClass, sample) -> FunctionClass:
    return F if sample is None else restrict(F, sample)


def _distinct(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distinct rows in order of first appearance, and each row's distinct index."""
    _, first, inverse = np.unique(values, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return values[first[order]], rank[np.ravel(inverse)]


def _linf_matrix(values: np.ndarray) -> np.ndarray:
    d = np.zeros((values.shape[0], values.shape[0]))
    for j in range(values.shape[1]):
        col = values[:, j]
        np.maximum(d, np.abs(col[:, None] - col[None, :]), out=d)
    return d


def _midrange(values: np.ndarray) -> np.ndarray:
    return (values.max(axis=0) + values.min(axis=0)) / 2


def _groups_to_cover(values, inverse, groups, gamma, labels, method, info) -> Cover:
    centers = np.vstack([_midrange(values[g]) for g in groups])
    label = np.empty(values.shape[0], dtype=np.int64)
    for c, g in enumerate(groups):
        label[g] = c
    cover = Cover(gamma, tuple(labels), centers, label[inverse], method, info)
    return cover


def _checked(cover: Cover, F: FunctionClass) -> Cover:
    if not cover.verify(F):
        raise PropertyViolation(f"{cover.method} cover fails at its declared scale {cover.scale}")
    return cover


def _greedy_groups(values: np.ndarray, gamma: float) -> list[list[int]]:
    """First-fit by running coordinatewise min/max, no pairwise matrix needed."""
    width = 2 * gamma + TAU
    groups, lo, hi = [], [], []
    for i, row in enumerate(values):
        for g in range(len(groups)):
            if np.all(np.maximum(hi[g], row) - np.minimum(lo[g], row) <= width):
                groups[g].append(i)
                lo[g] = np.minimum(lo[g], row)
                hi[g] = np.maximum(hi[g], row)
                break
        else:
            groups.append([i])
            lo.append(row.copy())
            hi.append(row.copy())
    return groups


def _interval_cover(axis_values: np.ndarray, gamma: float) -> np.ndarray:
    """Optimal 1-d cover: index of the interval each sorted distinct value falls in."""
    idx = np.empty(len(axis_values), dtype=np.int64)
    start, k = axis_values[0], 0
    for i, v in enumerate(axis_values):
        if v > start + 2 * gamma + TAU:
            start, k = v, k + 1
        idx[i] = k
    return idx


def _product_cover(values: np.ndarray, gamma: float):
    """Exact cover when the distinct rows are the full product of column value sets."""
    axes = [np.unique(values[:, j]) for j in range(values.shape[1])]
    if math.prod(len(a) for a in axes) != values.shape[0]:
        return None
    per_axis = [_interval_cover(a, gamma) for a in axes]
    counts = [int(p[-1]) + 1 for p in per_axis]
    # interval index of every entry, then mixed-radix center index per row
    code = np.zeros(values.shape[0], dtype=np.int64)
    center_axes = []
    for j, (a, p, c) in enumerate(zip(axes, per_axis, counts)):
        pos = np.searchsorted(a, values[:, j])
        code = code * c + p[pos]
        center_axes.append([(a[p == t].min() + a[p == t].max()) / 2 for t in range(c)])
    mesh = np.meshgrid(*center_axes, indexing="ij")
    centers = np.stack([m.ravel() for m in mesh], axis=1)
    return centers, code


# -- public operations --------------------------------------------------------


def is_cover(F, centers, gamma: float) -> bool:
    """True iff every row has some center within l-infinity distance ``gamma`` (+ tolerance)."""
    values = F.values if isinstance(F, FunctionClass) else np.asarray(F, dtype=float)
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.size == 0:
        raise InputError("need at least one center")
    if centers.shape[1] != values.shape[1]:
        raise InputError(f"centers have {centers.shape[1]} coordinates, class has {values.shape[1]} points")
    best = np.full(values.shape[0], np.inf)
    for c in centers:
        np.minimum(best, np.max(np.abs(values - c), axis=1), out=best)
    return bool(np.all(best <= gamma + TAU))


def greedy_cover(F: FunctionClass, sample, gamma: float) -> Cover:
    gamma = as_scale(gamma)
    G = _restricted(F, sample)
    values, inverse = _distinct(G.values)
    groups = _greedy_groups(values, gamma)
    return _checked(_groups_to_cover(values, inverse, groups, gamma, G.domain_labels, "greedy",
                                     {"distinct_rows": len(values)}), G)


def exact_cover_number(F: FunctionClass, sample, gamma: float, cap: int = DEFAULT_EXACT_CAP,
                       node_budget: int = 2_000_000, shortcuts: bool = True) -> Cover:
    """Minimum cover at scale ``gamma``; tagged ``greedy`` when exactness could not be certified.

    ``shortcuts=False`` skips the single-center and product routes so the
    clique search itself can be exercised.
    """
    gamma = as_scale(gamma)
    G = _restricted(F, sample)
    values, inverse = _distinct(G.values)
    labels = G.domain_labels
    info = {"distinct_rows": len(values)}

    spread = values.max(axis=0) - values.min(axis=0)
    if shortcuts and np.all(spread <= 2 * gamma + TAU):
        return _checked(_groups_to_cover(values, inverse, [list(range(len(values)))], gamma, labels,
                                         "exact", {**info, "route": "single"}), G)

    prod = _product_cover(values, gamma) if shortcuts else None
    if prod is not None:
        centers, code = prod
        return _checked(Cover(gamma, tuple(labels), centers, code[inverse], "exact",
                              {**info, "route": "product"}), G)

    if len(values) > GRAPH_LIMIT:
        groups = _greedy_groups(values, gamma)
        return _checked(_groups_to_cover(values, inverse, groups, gamma, labels, "greedy",
                                         {**info, "route": "greedy"}), G)

    adj = _cliques.adjacency(_linf_matrix(values) <= 2 * gamma + TAU)
    if len(values) <= cap:
        found = _cliques.min_clique_cover(adj, node_budget)
        method = "exact" if found.exact else "greedy"
        return _checked(_groups_to_cover(values, inverse, found.groups, gamma, labels, method,
                                         {**info, "route": "search", "nodes": found.nodes}), G)
    order = sorted(range(len(adj)), key=lambda v: (bin(adj[v]).count("1"), v))
    groups = _cliques.greedy_clique_cover(adj, order)
    lower = len(_cliques.greedy_independent_set(adj))
    method = "exact" if len(groups) == lower else "greedy"
    return _checked(_groups_to_cover(values, inverse, groups, gamma, labels, method,
                                     {**info, "route": "certified" if method == "exact" else "greedy",
                                      "lower_bound": lower}), G)


def packing_number(F: FunctionClass, sample, gamma: float, cap: int = DEFAULT_EXACT_CAP,
                   node_budget: int = 2_000_000) -> PackingResult:
    """Largest set of rows with pairwise l-infinity distance above ``gamma``.

    ``rows`` index the (first-occurrence) rows of the restricted class.
    Above ``cap`` distinct rows the result is exact only when a greedy
    packing meets a colouring bound; otherwise it is a flagged lower bound.
    """
    gamma = as_scale(gamma)
    G = _restricted(F, sample)
    _, first = np.unique(G.values, axis=0, return_index=True)
    first = np.sort(first)
    values = G.values[first]
    if len(values) > GRAPH_LIMIT:
        raise InputError(f"{len(values)} distinct rows exceed the packing graph limit {GRAPH_LIMIT}")
    adj = _cliques.adjacency(_linf_matrix(values) > gamma + TAU)
    if len(values) <= cap:
        rows, exact = _cliques.max_clique(adj, node_budget)
    else:
        # a clique in the far-apart graph is an independent set of its complement
        full = (1 << len(adj)) - 1
        comp = [full & ~a & ~(1 << v) for v, a in enumerate(adj)]
        rows = sorted(_cliques.greedy_independent_set(comp))
        exact = len(rows) == _cliques._greedy_colour_bound(full, adj)
    return PackingResult(len(rows), tuple(int(first[r]) for r in rows), exact)


def _compatible(a: np.ndarray, b: np.ndarray) -> bool:
    return not np.any(a * b < 0)


def _merge(rows: np.ndarray) -> np.ndarray:
    """Defined entries of pairwise compatible rows, undefined filled with +1."""
    v = np.ones(rows.shape[1], dtype=np.int8)
    v[np.any(rows < 0, axis=0)] = -1
    return v


def _greedy_disambiguation(rows: np.ndarray) -> list[list[int]]:
    """Seed-and-absorb: each round builds, from every uncovered seed, the
    coordinatewise majority completion over uncovered rows compatible with
    the seed, and keeps the completion absorbing the most uncovered rows."""
    uncovered = list(range(len(rows)))
    groups = []
    while uncovered:
        best = None
        for s in uncovered:
            pool = [i for i in uncovered if _compatible(rows[s], rows[i])]
            votes = rows[pool].astype(np.int64).sum(axis=0)
            v = np.where(rows[s] != 0, rows[s], np.where(votes < 0, -1, 1)).astype(np.int8)
            absorbed = [i for i in uncovered if _compatible(v, rows[i])]
            if best is None or len(absorbed) > len(best[1]):
                best = (v, absorbed)
        groups.append(best[1])
        taken = set(best[1])
        uncovered = [i for i in uncovered if i not in taken]
    return groups


def disambiguate(P: PartialConceptClass, exact_cap: int = DEFAULT_DISAMBIGUATION_CAP) -> Disambiguation:
    """Total +-1 vectors such that each partial row agrees with one of them where defined.

    Minimum size when there are at most ``exact_cap`` distinct rows, greedy otherwise.
    """
    _, first, inverse = np.unique(P.values, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    rows = P.values[first[order]]
    inverse = rank[np.ravel(inverse)]
    if len(rows) <= exact_cap:
        compat = np.array([[_compatible(a, b) for b in rows] for a in rows])
        found = _cliques.min_clique_cover(_cliques.adjacency(compat))
        groups, exact = found.groups, found.exact
    else:
        groups, exact = _greedy_disambiguation(rows), False
    vectors = np.vstack([_merge(rows[g]) for g in groups])
    label = np.empty(len(rows), dtype=np.int64)
    for c, g in enumerate(groups):
        label[g] = c
    assignment = label[inverse]
    for i, row in enumerate(P.values):
        if not _compatible(row, vectors[assignment[i]]):
            raise PropertyViolation(f"disambiguation disagrees with partial row {i}")
    return Disambiguation(vectors, assignment, exact)


def _log2_ceiling_box(n: int, d: int) -> float | None:
    """log2 of ``n ** (7 d log2 n)``; None where the bound is degenerate (n < 2)."""
    if n < 2:
        return None
    return 7.0 * d * math.log2(n) ** 2


def _log2_ceiling_iterated(n: int, d: int, R: float, eps: float) -> float | None:
    if n < 2:
        return None
    return max(0.0, 14.0 * d * math.log2(2 * R / eps) * math.log2(n) ** 2)


def box_cover_step(F: FunctionClass, r: float, gamma: float, d: int | None = None) -> Cover:
    """One halving step: a class inside ``[-r/2, r/2]`` gets a cover at ``(r + gamma)/4``.

    Centers are ``(r - gamma)/4`` times the vectors of a disambiguation of the
    sign pattern class of ``F`` at margin ``gamma``.
    """
    r = as_scale(r, "r")
    gamma = as_scale(gamma)
    if gamma >= r:
        raise InputError(f"need gamma < r, got gamma={gamma} r={r}")
    if np.max(np.abs(F.values)) > r / 2 + TAU:
        raise InputError(f"class entries leave [-{r / 2}, {r / 2}]")
    scale = (r + gamma) / 4
    if d is None:
        d = fat_dim(F, gamma).d
    labels = F.domain_labels
    spread = F.values.max(axis=0) - F.values.min(axis=0)
    if d == 0 or np.all(spread < gamma - TAU):
        centers = _midrange(F.values)[None, :]
        cover = Cover(scale, labels, centers, np.zeros(F.n_functions, dtype=np.int64), "iterated",
                      {"d": d, "route": "midrange"})
        return _checked(cover, F)
    dis = disambiguate(to_partial(F, gamma))
    centers = (r - gamma) / 4 * dis.vectors.astype(float)
    ceiling = _log2_ceiling_box(F.n_points, d)
    cover = _checked(Cover(scale, labels, centers, dis.assignment, "iterated",
                           {"d": d, "log2_ceiling": ceiling, "exact_disambiguation": dis.exact}), F)
    if ceiling is not None and math.log2(cover.size) > ceiling + TAU:
        raise PropertyViolation(f"box cover of size {cover.size} exceeds 2**{ceiling}")
    return cover


def iterated_cover(F: FunctionClass, sample, gamma: float, eps: float) -> Cover:
    """Cover at scale ``gamma/2 + eps`` by repeated box steps on every box's residual.

    Starts from the midrange of the whole class, whose radius is at most ``R``;
    each round maps the box radius ``rho`` to ``rho/2 + gamma/4``, so at most
    ``ceil(log2(2R/eps))`` rounds reach the target.
    """
    gamma = as_scale(gamma)
    eps = as_scale(eps, "eps")
    G = _restricted(F, sample)
    values, inverse = _distinct(G.values)
    labels = G.domain_labels
    target = gamma / 2 + eps
    d = fat_dim(G, gamma).d

    rho = float(np.max(values.max(axis=0) - values.min(axis=0)) / 2)
    boxes = [(_midrange(values), np.arange(len(values)))]
    rounds = 0
    while rho > target + TAU:
        nxt = []
        for center, rows in boxes:
            residual = np.clip(values[rows] - center, -rho, rho)
            step = box_cover_step(FunctionClass(labels, residual, max(rho, TAU)), 2 * rho, gamma, d=None)
            for c in range(step.size):
                members = rows[step.assignment == c]
                if len(members):
                    nxt.append((center + step.centers[c], members))
        boxes = nxt
        rho = rho / 2 + gamma / 4
        rounds += 1

    centers = np.vstack([c for c, _ in boxes])
    centers, merged = np.unique(centers, axis=0, return_inverse=True)
    merged = np.ravel(merged)
    label = np.empty(len(values), dtype=np.int64)
    for b, (_, rows) in enumerate(boxes):
        label[rows] = merged[b]
    ceiling = _log2_ceiling_iterated(G.n_points, d, G.bound_R, eps)
    cover = _checked(Cover(target, tuple(labels), centers, label[inverse], "iterated",
                           {"d": d, "rounds": rounds, "log2_ceiling": ceiling}), G)
    if ceiling is not None and math.log2(cover.size) > ceiling + TAU:
        raise PropertyViolation(f"iterated cover of size {cover.size} exceeds 2**{ceiling}")
    return cover


def compression_to_cover(F: FunctionClass, sample, gamma: float, eps: float, seed: int = 0,
                         schemes: dict | None = None) -> Cover:
    """Cover built from compression-scheme reconstructions of the discretized class.

    Each distinct row of ``discretize(F, eps)`` gets a (2 gamma + eps)-scheme;
    its reconstruction becomes a center, so every row of ``F`` lies within
    ``2 gamma + 2 eps`` of one. The size is checked against ``(2Rn/eps)**k``
    with ``k`` the largest number of labelled points a scheme stores.
    """
    from .core import discretize
    from .learning import build_compression

    gamma = as_scale(gamma)
    eps = as_scale(eps, "eps")
    G = _restricted(F, sample)
    G_eps = discretize(G, eps)
    points = list(G.domain_labels)
    keys = {tuple(row): i for i, row in enumerate(G_eps.values)}
    schemes = {} if schemes is None else schemes
    recon = []
    k = 0
    for i in range(G_eps.n_functions):
        if i not in schemes:
            schemes[i] = build_compression(G_eps, points, i, gamma, eps, seed)
        s = schemes[i]
        if tuple(s.points) != tuple(points):
            raise InputError("scheme was built on a different sample")
        recon.append(s.reconstruct(G_eps))
        k = max(k, s.k * s.m_star)
    centers, member = np.unique(np.vstack(recon), axis=0, return_inverse=True)
    member = np.ravel(member)
    q = np.round(np.floor(G.values / eps + TAU) * eps, 12)
    assignment = np.array([member[keys[tuple(row)]] for row in q], dtype=np.int64)
    base = 2 * G.bound_R * G.n_points / eps
    log2_ceiling = k * math.log2(base) if base > 1 else None
    cover = _checked(Cover(2 * gamma + 2 * eps, tuple(points), centers, assignment, "compression",
                           {"k": k, "log2_ceiling": log2_ceiling}), G)
    if log2_ceiling is not None and math.log2(cover.size) > log2_ceiling + TAU:
        raise PropertyViolation(f"compression cover of size {cover.size} exceeds 2**{log2_ceiling}")
    return cover


def entropy_profile(F: FunctionClass | Callable[[int], FunctionClass], gammas: Iterable[float],
                    ns: Iterable[int], method: str = "exact", eps: float | None = None,
                    cap: int = DEFAULT_EXACT_CAP) -> list[EntropyReport]:
    """Cover sizes and base-2 entropies over a grid of scales and sample sizes.

    ``F`` is either one class, restricted to its first ``n`` points for each
    ``n``, or a callable building the class for each ``n`` (a family such as
    ``lambda n: canonical("singleton", n)``). ``method`` is ``exact`` (falls
    back to a ``greedy`` tag past the cap), ``greedy`` or ``iterated`` (which
    needs ``eps`` and reports its declared scale's sizes at ``gamma``).
    """
    if method not in ("exact", "greedy", "iterated"):
        raise InputError(f"unknown entropy method {method!r}")
    if method == "iterated" and eps is None:
        raise InputError("the iterated method needs eps")
    out = []
    for n in ns:
        n = int(n)
        if callable(F) and not isinstance(F, FunctionClass):
            G = F(n)
        else:
            if not 1 <= n <= F.n_points:
                raise InputError(f"n={n} outside 1..{F.n_points}")
            G = restrict(F, F.domain_labels[:n])
        for gamma in gammas:
            if method == "exact":
                cover = exact_cover_number(G, None, gamma, cap=cap)
            elif method == "greedy":
                cover = greedy_cover(G, None, gamma)
            else:
                cover = iterated_cover(G, None, gamma, eps)
            out.append(EntropyReport(float(gamma), n, cover.size, math.log2(cover.size), cover.method))
    return out
