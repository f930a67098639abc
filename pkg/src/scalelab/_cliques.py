"""Branch-and-bound clique cover and maximum clique on bitmask graphs.

Graphs are lists of python-int adjacency masks, ``adj[v]`` holding the
neighbours of ``v`` (never ``v`` itself).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def adjacency(flags: np.ndarray) -> list[int]:
    n = flags.shape[0]
    out = []
    for v in range(n):
        m = 0
        for u in np.flatnonzero(flags[v]):
            if u != v:
                m |= 1 << int(u)
        out.append(m)
    return out


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def greedy_clique_cover(adj: list[int], order=None) -> list[list[int]]:
    """First-fit: each vertex joins the first group it is adjacent to entirely."""
    groups: list[list[int]] = []
    masks: list[int] = []
    for v in order if order is not None else range(len(adj)):
        for g, m in enumerate(masks):
            if m & ~adj[v] == 0:
                groups[g].append(v)
                masks[g] |= 1 << v
                break
        else:
            groups.append([v])
            masks.append(1 << v)
    return groups


def greedy_independent_set(adj: list[int]) -> list[int]:
    """Pairwise non-adjacent vertices, smallest degree first; lower-bounds any clique cover."""
    order = sorted(range(len(adj)), key=lambda v: (bin(adj[v]).count("1"), v))
    chosen, blocked = [], 0
    for v in order:
        if not blocked >> v & 1:
            chosen.append(v)
            blocked |= adj[v] | (1 << v)
    return chosen


@dataclass
class CoverSearch:
    groups: list[list[int]]
    exact: bool
    nodes: int


def min_clique_cover(adj: list[int], node_budget: int = 2_000_000) -> CoverSearch:
    """Minimum partition of the vertices into cliques.

    Vertices are placed in order of increasing degree (most constrained
    first); each is tried in every compatible open group and then in a new
    group while the group count stays below the incumbent.
    """
    n = len(adj)
    if n == 0:
        return CoverSearch([], True, 0)
    order = sorted(range(n), key=lambda v: (bin(adj[v]).count("1"), v))
    best = greedy_clique_cover(adj, order)
    lower = len(greedy_independent_set(adj))
    if len(best) == lower:
        return CoverSearch(best, True, 0)

    nodes = 0
    groups: list[list[int]] = []
    masks: list[int] = []
    exhausted = False

    def rec(i: int):
        nonlocal best, nodes, exhausted
        if exhausted or len(best) == lower:
            return
        nodes += 1
        if nodes > node_budget:
            exhausted = True
            return
        if i == n:
            if len(groups) < len(best):
                best = [list(g) for g in groups]
            return
        v = order[i]
        for g in range(len(groups)):
            if masks[g] & ~adj[v] == 0:
                groups[g].append(v)
                masks[g] |= 1 << v
                rec(i + 1)
                masks[g] &= ~(1 << v)
                groups[g].pop()
        if len(groups) + 1 < len(best):
            groups.append([v])
            masks.append(1 << v)
            rec(i + 1)
            masks.pop()
            groups.pop()

    rec(0)
    return CoverSearch(best, not exhausted, nodes)


def _greedy_colour_bound(cand: int, adj: list[int]) -> int:
    """Number of colour classes in a greedy colouring of ``cand``; bounds its clique number."""
    colours = 0
    rest = cand
    while rest:
        colours += 1
        avail = rest
        while avail:
            v = (avail & -avail).bit_length() - 1
            rest &= ~(1 << v)
            avail &= ~(1 << v) & ~adj[v]
    return colours


def max_clique(adj: list[int], node_budget: int = 2_000_000) -> tuple[list[int], bool]:
    """Largest clique; returns ``(vertices, exact)``."""
    n = len(adj)
    if n == 0:
        return [], True
    best: list[int] = []
    nodes = 0
    exhausted = False

    def rec(current: list[int], cand: int):
        nonlocal best, nodes, exhausted
        if exhausted:
            return
        nodes += 1
        if nodes > node_budget:
            exhausted = True
            return
        if not cand:
            if len(current) > len(best):
                best = list(current)
            return
        if len(current) + _greedy_colour_bound(cand, adj) <= len(best):
            return
        for v in list(_bits(cand)):
            if len(current) + bin(cand).count("1") <= len(best):
                return
            current.append(v)
            rec(current, cand & adj[v])
            current.pop()
            cand &= ~(1 << v)

    rec([], (1 << n) - 1)
    return sorted(best), not exhausted
