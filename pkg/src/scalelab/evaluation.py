"""Integral probability metrics on finite domains, model selection between
two candidate distributions, and the mixture family on which every
selection rule errs with constant probability at small sample sizes.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

import numpy as np

from .core import TAU, FullCube, FunctionClass, as_scale, canonical
from .errors import InputError, PropertyViolation
from .parallel import pmap
from .rng import stream

#: Classes on more points than this are kept implicit as :class:`FullCube`.
MATERIALIZE_LIMIT = 16


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    support: tuple
    probs: np.ndarray

    def __post_init__(self):
        support = tuple(self.support)
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (len(support),) or not support:
            raise InputError("support and probs must be non-empty and of equal length")
        if len(set(support)) != len(support):
            raise InputError("support labels must be distinct")
        if np.any(~np.isfinite(p)) or np.any(p < -TAU):
            raise InputError("probabilities must be finite and non-negative")
        if abs(p.sum() - 1.0) > TAU:
            raise InputError(f"probabilities sum to {p.sum()!r}, not 1")
        p = np.clip(p, 0.0, None)
        p.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", p)

    def vector(self, labels: Sequence[Hashable]) -> np.ndarray:
        """Probabilities laid out over ``labels``; the support must lie inside them."""
        index = {lab: i for i, lab in enumerate(labels)}
        out = np.zeros(len(index))
        for lab, w in zip(self.support, self.probs):
            if lab not in index:
                raise InputError(f"support point {lab!r} is outside the domain")
            out[index[lab]] += w
        return out

    def to_dict(self) -> dict:
        return {"support": list(self.support), "probs": self.probs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DiscreteDistribution":
        try:
            return cls(tuple(d["support"]), np.asarray(d["probs"], dtype=float))
        except KeyError as e:
            raise InputError(f"distribution JSON is missing key {e}") from None

    @classmethod
    def uniform(cls, labels: Sequence[Hashable]) -> "DiscreteDistribution":
        labels = tuple(labels)
        return cls(labels, np.full(len(labels), 1.0 / len(labels)))

    @classmethod
    def empirical(cls, sample: Sequence[Hashable]) -> "DiscreteDistribution":
        if len(sample) == 0:
            raise InputError("empty sample")
        labels, counts = {}, []
        for x in sample:
            if x not in labels:
                labels[x] = len(counts)
                counts.append(0)
            counts[labels[x]] += 1
        c = np.asarray(counts, dtype=float)
        return cls(tuple(labels), c / c.sum())


Class = FunctionClass | FullCube


# -- distances ------------------------------------------------------------------


def ipm_distance(F: Class, p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """``max_f |E_p f - E_q f|`` over the rows of ``F``."""
    w = p.vector(F.domain_labels) - q.vector(F.domain_labels)
    return F.sup_discrepancy(w)[0]


def tv_distance(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    universe = list(dict.fromkeys(p.support + q.support))
    return float(0.5 * np.abs(p.vector(universe) - q.vector(universe)).sum())


def plug_in_score(F: Class, q: DiscreteDistribution, sample: Sequence[Hashable]) -> float:
    """Distance from ``q`` to the empirical distribution of ``sample``."""
    return ipm_distance(F, q, DiscreteDistribution.empirical(sample))


# -- selection rules --------------------------------------------------------------


def _sample_mean(F: Class, row: np.ndarray, sample: Sequence[Hashable]) -> float:
    cols = _columns(F, sample)
    return float(np.mean(row[cols]))


def _columns(F: Class, sample) -> np.ndarray:
    if len(sample) == 0:
        raise InputError("empty sample")
    index = {lab: i for i, lab in enumerate(F.domain_labels)}
    try:
        return np.fromiter((index[x] for x in sample), dtype=np.int64, count=len(sample))
    except KeyError as e:
        raise InputError(f"sample point {e} is outside the domain") from None


def scheffe_evaluate(F: Class, q1: DiscreteDistribution, q2: DiscreteDistribution,
                     sample: Sequence[Hashable]) -> int:
    """1 or 2: the candidate whose mean of the most separating row is closer to the sample's.

    The separating row is the first maximizer of ``|E_q1 f - E_q2 f|``; ties
    in closeness go to candidate 1.
    """
    v1, v2 = q1.vector(F.domain_labels), q2.vector(F.domain_labels)
    _, row = F.sup_discrepancy(v1 - v2)
    s = _sample_mean(F, row, sample)
    return 1 if abs(row @ v1 - s) <= abs(row @ v2 - s) else 2


def plug_in_argmin(F: Class, q1: DiscreteDistribution, q2: DiscreteDistribution,
                   sample: Sequence[Hashable]) -> int:
    """1 or 2: the candidate nearer (in the metric itself) to the empirical distribution."""
    emp = DiscreteDistribution.empirical(sample)
    return 1 if ipm_distance(F, q1, emp) <= ipm_distance(F, q2, emp) else 2


def random_choice(F: Class, q1: DiscreteDistribution, q2: DiscreteDistribution,
                  sample: Sequence[Hashable]) -> int:
    """A coin flip keyed by the sample contents, so repeated calls agree."""
    key = zlib.crc32(repr(list(sample)).encode("utf-8"))
    return 1 + int(stream(key, "coin").integers(2))


EVALUATORS: dict[str, Callable] = {
    "scheffe": scheffe_evaluate,
    "plugin": plug_in_argmin,
    "random": random_choice,
}


# -- block classes and the mixture family -----------------------------------------


def embed_shattered_blocks(gamma: float, n_blocks: int, block_size: int):
    """All ``{0, gamma}`` functions on ``n_blocks * block_size`` points, plus the
    uniform distribution on each block.

    Points are the integers ``0..``; block ``i`` holds points
    ``i*block_size .. (i+1)*block_size - 1``. The class is materialized up
    to ``MATERIALIZE_LIMIT`` points and kept implicit beyond.
    """
    gamma = as_scale(gamma)
    n_blocks, block_size = int(n_blocks), int(block_size)
    if n_blocks < 1 or block_size < 1:
        raise InputError("n_blocks and block_size must be >= 1")
    labels = tuple(range(n_blocks * block_size))
    if len(labels) <= MATERIALIZE_LIMIT:
        F = canonical("cube", len(labels), gamma=gamma, labels=labels)
    else:
        F = FullCube(labels, gamma)
    elements = [DiscreteDistribution.uniform(labels[i * block_size:(i + 1) * block_size])
                for i in range(n_blocks)]
    return F, elements


def mixture(elements: Sequence[DiscreteDistribution], weights) -> DiscreteDistribution:
    weights = np.asarray(weights, dtype=float)
    if len(weights) != len(elements):
        raise InputError("one weight per element is required")
    out: dict = {}
    for w, e in zip(weights, elements):
        for lab, p in zip(e.support, e.probs):
            out[lab] = out.get(lab, 0.0) + w * p
    return DiscreteDistribution(tuple(out), np.array(list(out.values())))


def _integral_k(beta: float) -> int:
    if not 0 < beta < 1:
        raise InputError(f"beta must lie in (0, 1), got {beta}")
    k = (1 + beta) / beta
    if abs(k - round(k)) > 1e-9:
        raise InputError(f"(1 + beta) / beta = {k!r} is not an integer")
    return int(round(k))


@dataclass(frozen=True, eq=False)
class MixtureInstance:
    """``2N x k`` disjoint elements, two candidates and the perturbed truths.

    Element ``(i, j)`` has flat index ``i * k + j``. Rows ``i < N`` are the
    left half, where candidate 1 is light and candidate 2 heavy; the right
    half is the mirror image. A truth ``p(b, l)`` starts from candidate
    ``b``, moves mass ``1/(kN)`` onto element ``(i, l[i])`` of each row
    where candidate ``b`` is light and empties element ``(i, l[i])`` of each
    row where it is heavy.
    """

    N: int
    beta: float
    k: int
    elements: tuple
    F: Class | None = None
    gamma: float | None = None
    _cols: tuple = field(default=(), repr=False)

    @property
    def n_elements(self) -> int:
        return 2 * self.N * self.k

    def candidate_weights(self, b: int) -> np.ndarray:
        lo = (1 - self.beta) / (2 * self.k * self.N)
        hi = (1 + self.beta) / (2 * self.k * self.N)
        left, right = (lo, hi) if b == 1 else (hi, lo)
        w = np.empty((2 * self.N, self.k))
        w[: self.N], w[self.N:] = left, right
        return w.ravel()

    def truth_weights(self, b: int, l: Sequence[int]) -> np.ndarray:
        l = np.asarray(l, dtype=np.int64)
        if b not in (1, 2):
            raise InputError(f"b must be 1 or 2, got {b}")
        if l.shape != (2 * self.N,) or np.any(l < 0) or np.any(l >= self.k):
            raise InputError(f"l must map the {2 * self.N} rows into 0..{self.k - 1}")
        w = self.candidate_weights(b).reshape(2 * self.N, self.k).copy()
        light = np.arange(self.N) if b == 1 else np.arange(self.N, 2 * self.N)
        heavy = np.arange(self.N, 2 * self.N) if b == 1 else np.arange(self.N)
        w[light, l[light]] = 1.0 / (self.k * self.N)
        w[heavy, l[heavy]] = 0.0
        return w.ravel()

    def candidate(self, b: int) -> DiscreteDistribution:
        return mixture(self.elements, self.candidate_weights(b))

    def truth(self, b: int, l: Sequence[int]) -> DiscreteDistribution:
        return mixture(self.elements, self.truth_weights(b, l))

    def sample(self, b: int, l: Sequence[int], m: int, gen: np.random.Generator) -> list:
        w = self.truth_weights(b, l)
        picks = gen.choice(self.n_elements, size=m, p=w / w.sum())
        out = []
        for e in picks:
            labels, probs = self._cols[e]
            out.append(labels[0] if len(labels) == 1 else labels[gen.choice(len(labels), p=probs)])
        return out

    def element_row(self, label: Hashable) -> int:
        """Grid row ``i`` of the element whose support holds ``label``."""
        for e, el in enumerate(self.elements):
            if label in el.support:
                return e // self.k
        raise InputError(f"{label!r} is in no element")

    def to_dict(self) -> dict:
        return {"N": self.N, "beta": self.beta, "k": self.k, "gamma": self.gamma,
                "elements": [e.to_dict() for e in self.elements]}


def build_lower_bound_instance(N: int, beta: float, elements: Sequence[DiscreteDistribution] | None = None,
                               F: Class | None = None, gamma: float = 1.0) -> MixtureInstance:
    """The mixture family for ``N`` row pairs and ratio parameter ``beta``.

    Without ``elements`` the instance uses point masses on fresh points and
    the full ``{0, gamma}`` class over them.
    """
    N = int(N)
    if N < 1:
        raise InputError(f"N must be >= 1, got {N}")
    k = _integral_k(float(beta))
    count = 2 * N * k
    if elements is None:
        F, elements = embed_shattered_blocks(gamma, count, 1)
    elements = tuple(elements)
    if len(elements) != count:
        raise InputError(f"need 2*N*k = {count} elements, got {len(elements)}")
    seen: set = set()
    for e in elements:
        if seen.intersection(e.support):
            raise InputError("element supports overlap")
        seen.update(e.support)
    if F is not None:
        for e in elements:
            e.vector(F.domain_labels)
        gamma = F.height if isinstance(F, FullCube) else float(np.max(F.values) - np.min(F.values))
    cols = tuple((e.support, e.probs) for e in elements)
    inst = MixtureInstance(N, float(beta), k, elements, F, gamma if F is not None else None, cols)
    for b in (1, 2):
        for w in (inst.candidate_weights(b), inst.truth_weights(b, np.zeros(2 * N, dtype=np.int64))):
            if abs(w.sum() - 1) > TAU or np.any(w < 0):
                raise PropertyViolation("mixture weights do not form a distribution")
    return inst


@dataclass(frozen=True)
class RatioCheck:
    a: float
    b: float
    ratio: float
    bound: float

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "ratio": self.ratio, "bound": self.bound}


def _normalized(inst: MixtureInstance, d_near: float, d_far: float) -> tuple[float, float]:
    k, beta = inst.k, inst.beta
    return 2 * k / (1 + beta) * d_near, 2 * k / (3 - beta) * d_far


def factor3_ratio_check(inst: MixtureInstance, l: Sequence[int], tau: float = 1e-9) -> RatioCheck:
    """Normalized distances from both candidates to ``p(1, l)`` and their ratio.

    Raises :class:`PropertyViolation` unless ``a <= gamma``, ``b >= gamma``
    and the ratio reaches ``(3 - beta)/(1 + beta)``, all up to ``tau``.
    """
    if inst.F is None:
        raise InputError("ratio check needs an instance with an embedded class")
    truth = inst.truth(1, l)
    d1 = ipm_distance(inst.F, inst.candidate(1), truth)
    d2 = ipm_distance(inst.F, inst.candidate(2), truth)
    a, b = _normalized(inst, d1, d2)
    bound = (3 - inst.beta) / (1 + inst.beta)
    ratio = d2 / d1 if d1 > 0 else math.inf
    if a > inst.gamma + tau:
        raise PropertyViolation(f"a = {a!r} exceeds gamma = {inst.gamma!r}")
    if b < inst.gamma - tau:
        raise PropertyViolation(f"b = {b!r} is below gamma = {inst.gamma!r}")
    if ratio < bound - tau:
        raise PropertyViolation(f"ratio {ratio!r} is below {bound!r}")
    return RatioCheck(a, b, ratio, bound)


@dataclass
class EvalExperimentReport:
    evaluator: str
    N: int
    beta: float
    m: int
    trials: int
    attribution: str
    rows: list = field(default_factory=list)

    CSV_FIELDS = ("trial", "b", "error", "a", "b_val", "ratio")

    @property
    def error_rate(self) -> float:
        return float(np.mean([r["error"] for r in self.rows]))

    @property
    def ci_half_width(self) -> float:
        p = self.error_rate
        return 1.96 * math.sqrt(p * (1 - p) / self.trials)

    @property
    def collision_rate(self) -> float:
        return float(np.mean([r["collision"] for r in self.rows]))

    def summary(self) -> dict:
        k = _integral_k(self.beta)
        return {
            "evaluator": self.evaluator, "N": self.N, "beta": self.beta, "m": self.m,
            "trials": self.trials, "attribution": self.attribution,
            "error_rate": self.error_rate, "ci_half_width": self.ci_half_width,
            "collision_rate": self.collision_rate,
            "tv_bound": self.m ** 2 / self.N,
            "proof_condition_met": self.N >= 3 * self.m ** 2,
            "statement_sample_bound": math.sqrt(2 * k * self.N * self.beta),
        }

    def to_dict(self) -> dict:
        return {**self.summary(), "rows": [{k: r[k] for k in self.CSV_FIELDS} for r in self.rows]}


def _eval_chunk(args) -> list[dict]:
    inst, name, m, seed, trials = args
    evaluator = EVALUATORS[name]
    q = {1: inst.candidate(1), 2: inst.candidate(2)}
    out = []
    for trial in trials:
        gen = stream(seed, "mixture", trial)
        b = 1 + int(gen.integers(2))
        l = gen.integers(inst.k, size=2 * inst.N)
        sample = inst.sample(b, l, m, gen)
        choice = evaluator(inst.F, q[1], q[2], sample)
        other = 3 - b
        if inst.F is not None:
            truth = inst.truth(b, l)
            d_near = ipm_distance(inst.F, q[b], truth)
            d_far = ipm_distance(inst.F, q[other], truth)
            wrong = other if d_far > d_near else (b if d_near > d_far else None)
        else:
            # closed forms in units of the class height
            d_near = (1 + inst.beta) / (2 * inst.k)
            d_far = (3 - inst.beta) / (2 * inst.k)
            wrong = other
        a, b_val = _normalized(inst, d_near, d_far)
        rows_hit = [inst.element_row(x) for x in sample]
        out.append({
            "trial": trial, "b": b, "error": int(wrong is not None and choice == wrong),
            "a": a, "b_val": b_val, "ratio": d_far / d_near if d_near > 0 else math.inf,
            "collision": int(len(set(rows_hit)) < len(rows_hit)),
        })
    return out


def error_probability_experiment(inst: MixtureInstance, evaluator: str, m: int, trials: int, seed: int,
                                 workers: int | None = 1, chunk: int = 50) -> EvalExperimentReport:
    """How often ``evaluator`` picks the farther candidate when the truth is a random ``p(b, l)``.

    ``evaluator`` names an entry of :data:`EVALUATORS`. Errors are scored
    with exact distances when the instance carries a class, otherwise by
    the family label ``b``.
    """
    if evaluator not in EVALUATORS:
        raise InputError(f"unknown evaluator {evaluator!r}; choose from {sorted(EVALUATORS)}")
    if m < 1 or trials < 1:
        raise InputError("m and trials must be >= 1")
    if inst.F is None and evaluator != "random":
        raise InputError(f"evaluator {evaluator!r} needs an instance with an embedded class")
    chunks = [(inst, evaluator, int(m), seed, range(s, min(s + chunk, trials))) for s in range(0, trials, chunk)]
    rows = [r for part in pmap(_eval_chunk, chunks, workers) for r in part]
    attribution = "exact" if inst.F is not None else "construction"
    return EvalExperimentReport(evaluator, inst.N, inst.beta, int(m), int(trials), attribution, rows)


def hoeffding_radius(width: float, m: int, delta: float = 0.01) -> float:
    """Deviation of an ``m``-sample mean of a ``[c, c + width]``-valued variable, w.p. ``1 - delta``."""
    return width * math.sqrt(math.log(2 / delta) / (2 * m))


@dataclass(frozen=True)
class GuaranteeReport:
    trials: int
    satisfied: int
    radius: float

    @property
    def frequency(self) -> float:
        return self.satisfied / self.trials

    def to_dict(self) -> dict:
        return {"trials": self.trials, "satisfied": self.satisfied, "radius": self.radius,
                "frequency": self.frequency}


def _guarantee_chunk(args) -> int:
    F, q1, q2, truth, m, seed, trials, radius = args
    d = {1: ipm_distance(F, q1, truth), 2: ipm_distance(F, q2, truth)}
    ok = 0
    for trial in trials:
        gen = stream(seed, "scheffe", trial)
        idx = gen.choice(len(truth.support), size=m, p=truth.probs)
        sample = [truth.support[i] for i in idx]
        pick = scheffe_evaluate(F, q1, q2, sample)
        ok += d[pick] <= 3 * d[3 - pick] + radius + TAU
    return ok


def scheffe_guarantee(F: Class, q1: DiscreteDistribution, q2: DiscreteDistribution,
                      truth: DiscreteDistribution, m: int, trials: int, seed: int, delta: float = 0.01,
                      workers: int | None = 1) -> GuaranteeReport:
    """Count trials where the Scheffé pick is within ``3 x other + radius`` of the truth."""
    if isinstance(F, FullCube):
        width = F.height
    else:
        width = float(np.max(F.values) - np.min(F.values))
    radius = hoeffding_radius(width, m, delta)
    chunks = [(F, q1, q2, truth, int(m), seed, range(s, min(s + 250, trials)), radius)
              for s in range(0, trials, 250)]
    ok = sum(pmap(_guarantee_chunk, chunks, workers))
    return GuaranteeReport(int(trials), int(ok), radius)
