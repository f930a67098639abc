import itertools

import numpy as np
import pytest

from scalelab.core import FunctionClass

_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion and assert it."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def record(number: int, title: str, ok: bool, detail: str = ""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}" + (f" -- {detail}" if detail else "")
        lines.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)


def random_class(rng: np.random.Generator, rows: int, points: int, grid: float = 0.25,
                 R: float = 1.0) -> FunctionClass:
    """Random class with values on a grid inside [-R, R]."""
    steps = int(round(R / grid))
    values = rng.integers(-steps, steps + 1, size=(rows, points)) * grid
    return FunctionClass(tuple(range(points)), values, R)


def brute_force_fat_dim(F: FunctionClass, gamma: float) -> int:
    """Largest shattered set, trying every interval endpoint as a threshold."""
    half = gamma / 2
    cand = [sorted({v - half for v in F.values[:, c]} | {v + half for v in F.values[:, c]})
            for c in range(F.n_points)]
    best = 0
    for size in range(1, F.n_points + 1):
        found = False
        for S in itertools.combinations(range(F.n_points), size):
            for rs in itertools.product(*(cand[c] for c in S)):
                ok = True
                for bits in itertools.product((0, 1), repeat=size):
                    if not any(all((F.values[f, c] >= r + half - 1e-9) if b else (F.values[f, c] <= r - half + 1e-9)
                                   for c, r, b in zip(S, rs, bits)) for f in range(F.n_functions)):
                        ok = False
                        break
                if ok:
                    found = True
                    break
            if found:
                break
        if not found:
            break
        best = size
    return best


def exhaustive_cover_number(values: np.ndarray, gamma: float) -> int:
    """Fewest groups of coordinatewise spread <= 2 gamma, by trying every set partition."""
    rows = np.unique(values, axis=0)
    best = [len(rows)]

    def rec(i, groups):
        if len(groups) >= best[0]:
            return
        if i == len(rows):
            best[0] = len(groups)
            return
        for g in groups:
            g.append(i)
            block = rows[g]
            if np.all(block.max(axis=0) - block.min(axis=0) <= 2 * gamma + 1e-9):
                rec(i + 1, groups)
            g.pop()
        groups.append([i])
        rec(i + 1, groups)
        groups.pop()

    rec(0, [])
    return best[0]
