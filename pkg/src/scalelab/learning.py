"""The cover-based agnostic learner, uniform-convergence Monte Carlo, and
approximate sample compression built from a zero-sum game.

Losses are absolute errors ``|h(x) - y|`` throughout.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .core import TAU, FunctionClass, as_scale, restrict
from .covers import iterated_cover
from .errors import ConstructionError, InputError, RealizabilityError, SolverError
from .parallel import pmap
from .rng import stream

#: Dataset families larger than this are sampled instead of enumerated.
HYPOTHESIS_POOL = 2048
MAX_RETRIES = 64
MAX_SPARSE = 4096


@dataclass(frozen=True)
class LabeledSample:
    pairs: tuple

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((p, float(y)) for p, y in self.pairs))

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def points(self) -> list:
        return [p for p, _ in self.pairs]

    @property
    def labels(self) -> np.ndarray:
        return np.array([y for _, y in self.pairs], dtype=float)

    def check_bound(self, R: float) -> "LabeledSample":
        if any(abs(y) > R + TAU for _, y in self.pairs):
            raise InputError(f"label outside [-{R}, {R}]")
        return self

    def to_dict(self) -> list:
        return [[p, y] for p, y in self.pairs]


# -- consistency and the cover learner ----------------------------------------


def erm_consistent(F: FunctionClass, T: LabeledSample) -> int:
    """Smallest row index agreeing (within tolerance) with every label in ``T``."""
    if len(T) == 0:
        return 0
    cols = F.column_indices(T.points)
    ok = np.all(np.abs(F.values[:, cols] - T.labels) <= TAU, axis=1)
    hits = np.flatnonzero(ok)
    if hits.size == 0:
        raise RealizabilityError(f"no row agrees with the {len(T)} labelled points")
    return int(hits[0])


@dataclass(frozen=True)
class Prediction:
    value: float
    center: int
    cover_size: int
    method: str


class CoverCache:
    """Covers keyed by the set of sample points, shared across learner calls."""

    def __init__(self, F: FunctionClass, gamma: float, eps: float):
        self.F, self.gamma, self.eps = F, gamma, eps
        self._store: dict = {}

    def get(self, cols: tuple):
        if cols not in self._store:
            labels = [self.F.domain_labels[c] for c in cols]
            self._store[cols] = iterated_cover(self.F, labels, self.gamma, self.eps)
        return self._store[cols]


def erm_over_cover(S: LabeledSample, x_test: Hashable, F: FunctionClass, gamma: float, eps: float,
                   cache: CoverCache | None = None) -> Prediction:
    """Predict at ``x_test`` with the cover element fitting the first half of ``S`` best.

    The cover is the iterated cover at scale ``gamma/2 + eps`` of ``F``
    restricted to the distinct points of ``S`` and ``x_test``. Ties go to
    the lowest center index.
    """
    gamma = as_scale(gamma)
    eps = as_scale(eps, "eps")
    if len(S) % 2:
        raise InputError(f"sample size must be even, got {len(S)}")
    if cache is None:
        cache = CoverCache(F, gamma, eps)
    elif (cache.F is not F) or cache.gamma != gamma or cache.eps != eps:
        raise InputError("cover cache was built for a different class or scale")
    cols_all = F.column_indices(S.points + [x_test])
    cols = tuple(sorted(set(cols_all)))
    cover = cache.get(cols)
    where = {c: j for j, c in enumerate(cols)}
    half = len(S) // 2
    first = [where[c] for c in cols_all[:half]]
    y = S.labels[:half]
    loss = np.abs(cover.centers[:, first] - y).sum(axis=1) if half else np.zeros(cover.size)
    best = int(np.argmin(loss))
    return Prediction(float(cover.centers[best, where[cols_all[-1]]]), best, cover.size, cover.method)


def _as_probs(F: FunctionClass, q) -> np.ndarray:
    """Probability vector over ``F``'s domain from a distribution, a vector or None (uniform)."""
    if q is None:
        return np.full(F.n_points, 1.0 / F.n_points)
    if hasattr(q, "support"):
        p = np.zeros(F.n_points)
        for lab, w in zip(q.support, q.probs):
            p[F.column_indices([lab])[0]] += w
        return p
    p = np.asarray(q, dtype=float)
    if p.shape != (F.n_points,) or np.any(p < -TAU) or abs(p.sum() - 1) > 1e-9:
        raise InputError("q must be a probability vector over the domain")
    return np.clip(p, 0, None)


TRIAL_CHUNK = 20


@dataclass
class LearnerReport:
    gamma: float
    eps: float
    n: int
    rows: list = field(default_factory=list)

    CSV_FIELDS = ("trial", "n", "value")

    @property
    def mean_excess(self) -> float:
        return float(np.mean([r["value"] for r in self.rows]))

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "eps": self.eps, "n": self.n, "trials": len(self.rows),
                "mean_excess": self.mean_excess, "rows": self.rows}


def _learner_chunk(args) -> list[dict]:
    F, probs, gamma, eps, n, seed, trials = args
    cache = CoverCache(F, gamma, eps)
    support = np.flatnonzero(probs > 0)
    out = []
    for trial in trials:
        gen = stream(seed, "learn", trial)
        target = int(gen.integers(F.n_functions))
        f = F.values[target]
        idx = gen.choice(F.n_points, size=2 * n, p=probs)
        S = LabeledSample([(F.domain_labels[i], f[i]) for i in idx])
        risk = 0.0
        for x in support:
            pred = erm_over_cover(S, F.domain_labels[x], F, gamma, eps, cache)
            risk += probs[x] * abs(pred.value - f[x])
        best = float(np.min(np.abs(F.values[:, support] - f[support]) @ probs[support]))
        out.append({"trial": trial, "n": n, "value": risk - best, "risk": risk, "best": best,
                    "target": target})
    return out


def learner_experiment(F: FunctionClass, gamma: float, eps: float, n: int, trials: int, seed: int,
                       q=None, workers: int | None = 1) -> LearnerReport:
    """Excess risk of the cover learner in the realizable setting.

    Each trial picks a target row uniformly, draws ``2n`` points from ``q``
    labelled by it, and scores the learner's exact risk under ``q`` (one
    prediction per support point) against the best row's risk.
    """
    gamma = as_scale(gamma)
    eps = as_scale(eps, "eps")
    if n < 1 or trials < 1:
        raise InputError("n and trials must be >= 1")
    probs = _as_probs(F, q)
    chunks = [(F, probs, gamma, eps, n, seed, range(s, min(s + TRIAL_CHUNK, trials)))
              for s in range(0, trials, TRIAL_CHUNK)]
    rows = [r for part in pmap(_learner_chunk, chunks, workers) for r in part]
    return LearnerReport(gamma, eps, n, rows)


# -- uniform convergence -------------------------------------------------------


@dataclass
class DeviationReport:
    n: int
    trials: int
    deviations: list
    quantiles: dict

    CSV_FIELDS = ("trial", "n", "value")

    @property
    def rows(self) -> list[dict]:
        return [{"trial": t, "n": self.n, "value": v} for t, v in enumerate(self.deviations)]

    def to_dict(self) -> dict:
        return {"n": self.n, "trials": self.trials, "quantiles": self.quantiles,
                "deviations": self.deviations}


def _uc_chunk(args) -> list[float]:
    values, means, probs, n, seed, trials = args
    out = []
    for trial in trials:
        counts = stream(seed, "uc", trial).multinomial(n, probs)
        out.append(float(np.max(np.abs(values @ (counts / n) - means))))
    return out


def uc_deviation(F: FunctionClass, q, n: int, trials: int, seed: int,
                 workers: int | None = 1) -> DeviationReport:
    """Sup over rows of |true mean - empirical mean| for ``trials`` samples of size ``n``."""
    if n < 1 or trials < 1:
        raise InputError("n and trials must be >= 1")
    probs = _as_probs(F, q)
    means = F.values @ probs
    chunks = [(F.values, means, probs, n, seed, range(s, min(s + 200, trials)))
              for s in range(0, trials, 200)]
    dev = [max(0.0, v) for part in pmap(_uc_chunk, chunks, workers) for v in part]
    qs = {str(k): float(np.quantile(dev, k)) for k in (0.1, 0.5, 0.9)}
    return DeviationReport(n, trials, dev, qs)


# -- zero-sum games ----------------------------------------------------------------


@dataclass(frozen=True)
class GameSolution:
    """Mixed strategies with certified bounds ``lower <= value <= upper``."""

    p: np.ndarray
    q: np.ndarray
    upper: float
    lower: float
    iterations: int

    @property
    def gap(self) -> float:
        return self.upper - self.lower


def solve_zero_sum(A, tol: float, max_iter: int = 200_000, eta: float = 2.0,
                   check_every: int = 25) -> GameSolution:
    """Optimistic multiplicative weights for ``min_p max_q p^T A q``.

    The row player minimizes. Any row mixture certifies an upper bound
    ``max_x (p^T A)_x`` and any column mixture a lower bound, so the best
    averaged or last iterate seen so far is kept for each side and the run
    stops once the certified gap is at most ``tol``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.size == 0:
        raise InputError("payoff matrix must be non-empty and 2-d")
    if tol <= 0:
        raise InputError("tolerance must be positive")
    scale = float(np.max(np.abs(A)))
    if scale == 0.0:
        p = np.zeros(A.shape[0]); p[0] = 1.0
        q = np.full(A.shape[1], 1.0 / A.shape[1])
        return GameSolution(p, q, 0.0, 0.0, 0)
    M = A / scale
    rows, cols = M.shape
    lr, gc = np.zeros(rows), np.zeros(cols)
    last_l, last_g = np.zeros(rows), np.zeros(cols)
    p_sum, q_sum = np.zeros(rows), np.zeros(cols)
    best_p, best_up = None, np.inf
    best_q, best_lo = None, -np.inf
    for t in range(1, max_iter + 1):
        zp = -eta * (lr + last_l)
        p = np.exp(zp - zp.max()); p /= p.sum()
        zq = eta * (gc + last_g)
        q = np.exp(zq - zq.max()); q /= q.sum()
        last_l, last_g = M @ q, p @ M
        lr += last_l
        gc += last_g
        p_sum += p
        q_sum += q
        if t % check_every == 0 or t == max_iter:
            for cand in (p_sum / t, p):
                up = float(np.max(cand @ M))
                if up < best_up:
                    best_up, best_p = up, cand.copy()
            for cand in (q_sum / t, q):
                lo = float(np.min(M @ cand))
                if lo > best_lo:
                    best_lo, best_q = lo, cand.copy()
            if (best_up - best_lo) * scale <= tol:
                return GameSolution(best_p, best_q, best_up * scale, best_lo * scale, t)
    raise SolverError(f"duality gap {(best_up - best_lo) * scale:.3g} above {tol:.3g} after {max_iter} "
                      "iterations", best_gap=(best_up - best_lo) * scale)


@dataclass(frozen=True)
class MinimaxResult:
    hypotheses: tuple
    p: np.ndarray
    upper: float
    lower: float
    target: float

    @property
    def feasible(self) -> bool:
        """Whether the certified worst-case error is within the target."""
        return self.upper <= self.target + TAU

    def to_dict(self) -> dict:
        return {"hypotheses": list(self.hypotheses), "p": self.p.tolist(), "upper": self.upper,
                "lower": self.lower, "target": self.target}


def _target_vector(F: FunctionClass, f) -> np.ndarray:
    if isinstance(f, (int, np.integer)):
        if not 0 <= f < F.n_functions:
            raise InputError(f"row {f} outside 0..{F.n_functions - 1}")
        return F.values[int(f)]
    v = np.asarray(f, dtype=float)
    if v.shape != (F.n_points,):
        raise InputError("target must be a row index or a vector over the domain")
    return v


def minimax_distribution(F: FunctionClass, H: Sequence[int], X: Sequence[Hashable], f, gamma: float,
                         eps: float, tol: float | None = None, max_iter: int = 200_000) -> MinimaxResult:
    """Mixture over rows ``H`` minimizing the worst expected error ``|h(x) - f(x)|`` over ``X``.

    Solved to a certified duality gap of ``tol`` (default ``eps / 4``).
    ``feasible`` reports whether the worst case reaches ``gamma + eps/2``.
    """
    gamma = as_scale(gamma)
    eps = as_scale(eps, "eps")
    H = [int(h) for h in H]
    if not H:
        raise InputError("need at least one hypothesis")
    cols = F.column_indices(X)
    fv = _target_vector(F, f)
    A = np.abs(F.values[np.ix_(H, cols)] - fv[cols])
    sol = solve_zero_sum(A, eps / 4 if tol is None else tol, max_iter=max_iter)
    return MinimaxResult(tuple(H), sol.p, sol.upper, sol.lower, gamma + eps / 2)


# -- sample compression -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CompressionScheme:
    """``m_star`` labelled datasets of at most ``k`` points each.

    The reconstruction is the mean of the lowest-index consistent rows of
    the datasets, evaluated on ``points``.
    """

    points: tuple
    k: int
    m_star: int
    datasets: tuple
    gamma: float
    eps: float
    seed: int
    attempt: int
    target: np.ndarray

    def reconstruct(self, F: FunctionClass) -> np.ndarray:
        cols = F.column_indices(self.points)
        rows = [erm_consistent(F, T) for T in self.datasets]
        return F.values[np.ix_(rows, cols)].mean(axis=0)

    def error(self, F: FunctionClass) -> float:
        return float(np.max(np.abs(self.reconstruct(F) - self.target)))

    def verify(self, F: FunctionClass) -> bool:
        return self.error(F) <= 2 * self.gamma + self.eps + TAU

    def to_dict(self) -> dict:
        return {"points": list(self.points), "k": self.k, "m_star": self.m_star,
                "datasets": [T.to_dict() for T in self.datasets], "gamma": self.gamma, "eps": self.eps,
                "seed": self.seed, "attempt": self.attempt, "target": self.target.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "CompressionScheme":
        try:
            return cls(tuple(d["points"]), int(d["k"]), int(d["m_star"]),
                       tuple(LabeledSample([tuple(p) for p in T]) for T in d["datasets"]),
                       float(d["gamma"]), float(d["eps"]), int(d["seed"]), int(d["attempt"]),
                       np.asarray(d["target"], dtype=float))
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"malformed compression scheme: {e}") from None


def _dataset_pool(n: int, m: int, gen: np.random.Generator) -> list[tuple]:
    """All column subsets of size 1..m, or a random sample of size-m subsets if too many."""
    total = sum(math.comb(n, j) for j in range(1, m + 1))
    if total <= HYPOTHESIS_POOL:
        return [c for j in range(1, m + 1) for c in itertools.combinations(range(n), j)]
    return [tuple(sorted(gen.choice(n, size=m, replace=False))) for _ in range(HYPOTHESIS_POOL)]


def build_compression(F: FunctionClass, X: Sequence[Hashable], f, gamma: float, eps: float, seed: int,
                      max_retries: int = MAX_RETRIES) -> CompressionScheme:
    """A scheme whose reconstruction is within ``2 gamma + eps`` of ``f`` on every point of ``X``.

    Hypotheses are the consistent rows of labelled subsets of ``X`` of size
    up to ``m``; ``m`` doubles until the minimax mixture over them has
    worst-case expected error at most ``gamma + eps/2``. Then ``m_star``
    hypotheses are drawn from the mixture, doubling ``m_star`` until their
    mean passes the pointwise check. Failed attempts retry with a fresh
    stream; the scheme records the attempt that succeeded.
    """
    gamma = as_scale(gamma)
    eps = as_scale(eps, "eps")
    X = list(X)
    if not X:
        raise InputError("X must be non-empty")
    G = restrict(F, X)
    fv = _target_vector(F, f)[F.column_indices(X)]
    n = len(X)
    erm_consistent(G, LabeledSample(zip(X, fv)))
    bound = 2 * gamma + eps
    last_err = None
    for attempt in range(max_retries):
        gen = stream(seed, "compress", attempt)
        m = 1
        while True:
            pool = _dataset_pool(n, m, gen)
            hyps, sets = [], {}
            for c in pool:
                T = LabeledSample((X[i], fv[i]) for i in c)
                h = erm_consistent(G, T)
                if h not in sets:
                    sets[h] = T
                    hyps.append(h)
            try:
                mm = minimax_distribution(G, hyps, X, fv, gamma, eps)
            except SolverError as e:
                last_err = e
                mm = None
            if mm is not None and mm.feasible:
                break
            if m >= n:
                break
            m = min(2 * m, n)
        if mm is None or not mm.feasible:
            continue
        p = np.clip(mm.p, 0, None)
        p /= p.sum()
        m_star = 1
        while m_star <= MAX_SPARSE:
            pick = gen.choice(len(hyps), size=m_star, p=p)
            rho = G.values[[hyps[i] for i in pick]].mean(axis=0)
            if np.max(np.abs(rho - fv)) <= bound + TAU:
                scheme = CompressionScheme(tuple(X), m, m_star, tuple(sets[hyps[i]] for i in pick),
                                           gamma, eps, int(seed), attempt, fv.copy())
                if scheme.verify(G):
                    return scheme
            m_star *= 2
    detail = f"; last solver gap {last_err.best_gap:.3g}" if last_err is not None else ""
    raise ConstructionError(f"no verified scheme after {max_retries} attempts{detail}")
