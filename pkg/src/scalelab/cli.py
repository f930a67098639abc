"""``scalelab`` command-line interface.

Every subcommand writes one report (JSON by default, CSV where rows make
sense) that embeds the resolved configuration and the package version.
Exit status: 0 success, 2 input error, 3 budget or solver error,
4 failed verification. Failures print one ``scalelab: <reason>: <message>``
line on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Any, Callable

import numpy as np

from . import __version__
from .core import FunctionClass, canonical, restrict
from .covers import (Cover, EntropyReport, entropy_profile, exact_cover_number, is_cover,
                     iterated_cover)
from .errors import BudgetError, InputError, PropertyViolation, ScalelabError
from .evaluation import (EVALUATORS, DiscreteDistribution, build_lower_bound_instance,
                         error_probability_experiment, factor3_ratio_check, ipm_distance,
                         scheffe_evaluate, tv_distance)
from .io import csv_text, dumps, read_payload, write_text
from .learning import (CompressionScheme, build_compression, learner_experiment, uc_deviation)
from .parallel import default_workers
from .rng import stream
from .shattering import common_threshold_shatter, fat_dim, is_shattered

SEED_ENV = "SCALELAB_SEED"
#: Argument names left out of the embedded config: they never change results.
NOT_CONFIG = {"workers", "out", "handler"}


class Report:
    """A result plus, optionally, CSV rows and an extra JSON sidecar for CSV mode."""

    def __init__(self, result: Any, fields=None, rows=None, sidecar=None, ok: bool = True,
                 failure: str = ""):
        self.result, self.fields, self.rows = result, fields, rows
        self.sidecar, self.ok, self.failure = sidecar, ok, failure


# -- argument helpers -----------------------------------------------------------


def _token(text: str):
    """A point label: JSON scalars (numbers, quoted strings) as such, anything else verbatim."""
    try:
        v = json.loads(text)
    except json.JSONDecodeError:
        return text
    return v if isinstance(v, (int, float, str)) and not isinstance(v, bool) else text


def _labels(text: str) -> list:
    return [_token(t.strip()) for t in text.split(",") if t.strip()]


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InputError(f"expected comma-separated integers, got {text!r}") from None


def _add_class_args(p: argparse.ArgumentParser, family: bool = False) -> None:
    g = p.add_argument_group("function class")
    g.add_argument("--class", dest="class_path", help="function class JSON {domain, R, values}")
    g.add_argument("--canonical", choices=["cube", "singleton", "ball", "crit2", "constant"],
                   help="build a named class instead of reading one")
    if not family:
        g.add_argument("--n", type=int, help="domain size of the canonical class")
    g.add_argument("--height", type=float, help="cube height, or gamma-star for ball/crit2")
    g.add_argument("--step", type=float, help="grid step for ball/crit2")
    g.add_argument("--log-base", type=float, default=2.0, help="log base of the crit2 ceilings")
    g.add_argument("--value", type=float, default=0.0, help="value of the constant class")


def _canonical_of(args, n: int) -> FunctionClass:
    return canonical(args.canonical, n, gamma=args.height, step=args.step, log_base=args.log_base,
                     value=args.value)


def _load_class(args) -> FunctionClass:
    if bool(args.class_path) == bool(args.canonical):
        raise InputError("give exactly one of --class and --canonical")
    if args.class_path:
        return FunctionClass.from_dict(read_payload(args.class_path))
    if getattr(args, "n", None) is None:
        raise InputError("--canonical needs --n")
    return _canonical_of(args, args.n)


def _load_dist(path: str) -> DiscreteDistribution:
    return DiscreteDistribution.from_dict(read_payload(path))


def _sample_of(args) -> list | None:
    return _labels(args.sample) if getattr(args, "sample", None) else None


# -- handlers ---------------------------------------------------------------------


def cmd_fat_dim(args) -> Report:
    return Report(fat_dim(_load_class(args), args.gamma, cap=args.cap))


def cmd_shatter_check(args) -> Report:
    F = _load_class(args)
    w = is_shattered(F, _labels(args.points), args.gamma, common_threshold=args.threshold, cap=args.cap)
    return Report({"shattered": w is not None, "witness": w})


def cmd_common_threshold(args) -> Report:
    F = _load_class(args)
    return Report(common_threshold_shatter(F, args.gamma_minus, args.gamma_prime, args.points_needed,
                                           cap=args.cap))


def cmd_cover_exact(args) -> Report:
    return Report(exact_cover_number(_load_class(args), _sample_of(args), args.gamma, cap=args.cap))


def cmd_cover_iterated(args) -> Report:
    return Report(iterated_cover(_load_class(args), _sample_of(args), args.gamma, args.eps))


def cmd_cover_verify(args) -> Report:
    F = _load_class(args)
    d = read_payload(args.cover)
    try:
        points, centers = d["points"], np.asarray(d["centers"], dtype=float)
        scale = float(d["scale"]) if args.gamma is None else args.gamma
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"malformed cover JSON: {e}") from None
    ok = is_cover(restrict(F, points), centers, scale)
    return Report({"valid": ok, "scale": scale, "size": int(centers.shape[0])}, ok=ok,
                  failure=f"centers do not cover the class at scale {scale}")


def cmd_entropy_profile(args) -> Report:
    if args.canonical:
        source: Any = lambda n: _canonical_of(args, n)
        if args.class_path:
            raise InputError("give exactly one of --class and --canonical")
    elif args.class_path:
        source = FunctionClass.from_dict(read_payload(args.class_path))
    else:
        raise InputError("give exactly one of --class and --canonical")
    reports = entropy_profile(source, _floats(args.gammas), _ints(args.ns), method=args.method,
                              eps=args.eps, cap=args.cap)
    return Report(reports, EntropyReport.CSV_FIELDS, [r.to_dict() for r in reports])


def cmd_learn_run(args) -> Report:
    F = _load_class(args)
    q = _load_dist(args.q) if args.q else None
    rep = learner_experiment(F, args.gamma, args.eps, args.n_sample, args.trials, args.seed, q=q,
                             workers=args.workers)
    summary = {"mean_excess": rep.mean_excess, "trials": len(rep.rows), "n": rep.n}
    return Report(rep, rep.CSV_FIELDS, rep.rows, sidecar=summary)


def cmd_uc_run(args) -> Report:
    F = _load_class(args)
    q = _load_dist(args.q) if args.q else None
    reps = [uc_deviation(F, q, n, args.trials, args.seed, workers=args.workers) for n in _ints(args.ns)]
    rows = [r for rep in reps for r in rep.rows]
    summary = [{"n": r.n, "quantiles": r.quantiles} for r in reps]
    return Report(reps, ("trial", "n", "value"), rows, sidecar=summary)


def cmd_compress_build(args) -> Report:
    F = _load_class(args)
    X = _sample_of(args) or list(F.domain_labels)
    return Report(build_compression(F, X, args.row, args.gamma, args.eps, args.seed))


def cmd_compress_verify(args) -> Report:
    F = _load_class(args)
    scheme = CompressionScheme.from_dict(read_payload(args.scheme))
    err = scheme.error(F)
    bound = 2 * scheme.gamma + scheme.eps
    ok = scheme.verify(F)
    return Report({"valid": ok, "max_error": err, "bound": bound}, ok=ok,
                  failure=f"reconstruction error {err} exceeds {bound}")


def cmd_ipm(args) -> Report:
    return Report({"distance": ipm_distance(_load_class(args), _load_dist(args.p), _load_dist(args.q))})


def cmd_tv(args) -> Report:
    return Report({"distance": tv_distance(_load_dist(args.p), _load_dist(args.q))})


def cmd_eval_scheffe(args) -> Report:
    F = _load_class(args)
    if args.sample_file:
        sample = read_payload(args.sample_file)
    elif args.sample:
        sample = _labels(args.sample)
    else:
        raise InputError("give --sample or --sample-file")
    return Report({"choice": scheffe_evaluate(F, _load_dist(args.q1), _load_dist(args.q2), sample)})


def cmd_eval_lb(args) -> Report:
    inst = build_lower_bound_instance(args.N, args.beta, gamma=args.gamma)
    rep = error_probability_experiment(inst, args.evaluator, args.m, args.trials, args.seed,
                                       workers=args.workers)
    summary = rep.summary()
    return Report(rep, rep.CSV_FIELDS, rep.to_dict()["rows"], sidecar=summary)


def cmd_ratio_check(args) -> Report:
    inst = build_lower_bound_instance(args.N, args.beta, gamma=args.gamma)
    if args.l:
        ls = [_ints(args.l)]
    else:
        gen = stream(args.seed, "ratio-check")
        ls = [gen.integers(inst.k, size=2 * inst.N).tolist() for _ in range(args.count)]
    checks = []
    for l in ls:
        checks.append({"l": list(l), **factor3_ratio_check(inst, l, tau=args.tau).to_dict()})
    return Report({"k": inst.k, "gamma": inst.gamma, "checks": checks},
                  ("a", "b", "ratio", "bound"), checks)


def cmd_canonical_gen(args) -> Report:
    if args.n is None or not args.canonical:
        raise InputError("canonical-gen needs --canonical and --n")
    return Report(_canonical_of(args, args.n))


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--out", help="report path (default: stdout)")
    common.add_argument("--workers", type=int, default=None,
                        help="worker processes (default: all cores); never changes results")
    common.add_argument("--seed", type=int, default=0, help=f"base seed; ${SEED_ENV} overrides it")

    parser = argparse.ArgumentParser(prog="scalelab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"scalelab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name: str, handler: Callable, help: str, family: bool = False, klass: bool = True):
        p = sub.add_parser(name, parents=[common], help=help, description=help)
        if klass:
            _add_class_args(p, family=family)
        p.set_defaults(handler=handler)
        return p

    p = add("fat-dim", cmd_fat_dim, "fat-shattering dimension with a witness")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--cap", type=int, default=16)

    p = add("shatter-check", cmd_shatter_check, "test whether given points are shattered")
    p.add_argument("--points", required=True, help="comma-separated point labels")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--threshold", type=float, help="force one shared threshold")
    p.add_argument("--cap", type=int, default=16)

    p = add("common-threshold", cmd_common_threshold, "points shattered at a single shared threshold")
    p.add_argument("--gamma-minus", type=float, required=True)
    p.add_argument("--gamma-prime", type=float, required=True)
    p.add_argument("--points-needed", type=int, required=True)
    p.add_argument("--cap", type=int, default=16)

    p = add("cover-exact", cmd_cover_exact, "minimum l-infinity cover")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--sample", help="comma-separated points (default: whole domain)")
    p.add_argument("--cap", type=int, default=24)

    p = add("cover-iterated", cmd_cover_iterated, "constructive cover at scale gamma/2 + eps")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--sample", help="comma-separated points (default: whole domain)")

    p = add("cover-verify", cmd_cover_verify, "check a cover JSON against a class")
    p.add_argument("--cover", required=True)
    p.add_argument("--gamma", type=float, help="scale to check (default: the cover's own)")

    p = add("entropy-profile", cmd_entropy_profile, "cover sizes and entropies over scales and sizes",
            family=True)
    p.add_argument("--gammas", required=True)
    p.add_argument("--ns", required=True)
    p.add_argument("--method", choices=["exact", "greedy", "iterated"], default="exact")
    p.add_argument("--eps", type=float)
    p.add_argument("--cap", type=int, default=24)

    p = add("learn-run", cmd_learn_run, "excess risk of the cover learner")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--n-sample", type=int, required=True, help="half the sample size")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--q", help="distribution JSON over the domain (default: uniform)")

    p = add("uc-run", cmd_uc_run, "uniform-convergence deviations")
    p.add_argument("--ns", required=True)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--q", help="distribution JSON over the domain (default: uniform)")

    p = add("compress-build", cmd_compress_build, "build a verified compression scheme")
    p.add_argument("--row", type=int, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--sample", help="comma-separated points (default: whole domain)")

    p = add("compress-verify", cmd_compress_verify, "re-check a compression scheme")
    p.add_argument("--scheme", required=True)

    p = add("ipm", cmd_ipm, "integral probability metric between two distributions")
    p.add_argument("--p", required=True)
    p.add_argument("--q", required=True)

    p = add("tv", cmd_tv, "total variation distance", klass=False)
    p.add_argument("--p", required=True)
    p.add_argument("--q", required=True)

    p = add("eval-scheffe", cmd_eval_scheffe, "pick the better of two candidates from a sample")
    p.add_argument("--q1", required=True)
    p.add_argument("--q2", required=True)
    p.add_argument("--sample", help="comma-separated sample points")
    p.add_argument("--sample-file", help="JSON list of sample points")

    for name, handler, help in (("eval-lb", cmd_eval_lb, "error rate on the mixture family"),
                                ("ratio-check", cmd_ratio_check, "distance ratio on the mixture family")):
        p = add(name, handler, help, klass=False)
        p.add_argument("--N", type=int, required=True)
        p.add_argument("--beta", type=float, required=True)
        p.add_argument("--gamma", type=float, default=1.0, help="height of the embedded class")
    lb = sub.choices["eval-lb"]
    lb.add_argument("--m", type=int, required=True)
    lb.add_argument("--trials", type=int, default=2000)
    lb.add_argument("--evaluator", choices=sorted(EVALUATORS), default="scheffe")
    rc = sub.choices["ratio-check"]
    rc.add_argument("--l", help="comma-separated index function (default: random draws)")
    rc.add_argument("--count", type=int, default=50)
    rc.add_argument("--tau", type=float, default=1e-9)

    add("canonical-gen", cmd_canonical_gen, "write a canonical class as JSON")
    return parser


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in NOT_CONFIG}


def _render(report: Report, args, config: dict) -> tuple[str, str | None]:
    if args.format == "csv":
        if report.fields is None:
            raise InputError(f"{args.command} has no CSV form; use --format json")
        header = f"# scalelab {__version__} config=" + json.dumps(config, sort_keys=True, separators=(",", ":"))
        text = csv_text(header, report.fields, report.rows)
        side = None
        if report.sidecar is not None:
            side = dumps({"scalelab_version": __version__, "config": config, "summary": report.sidecar})
        return text, side
    return dumps({"scalelab_version": __version__, "config": config, "result": report.result}), None


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        env = os.environ.get(SEED_ENV)
        if env is not None and env.strip():
            try:
                args.seed = int(env)
            except ValueError:
                raise InputError(f"{SEED_ENV} must be an integer, got {env!r}") from None
        if args.workers is None:
            args.workers = default_workers()
        if args.workers < 1:
            raise InputError("--workers must be >= 1")
        config = _config(args)
        report = args.handler(args)
        text, side = _render(report, args, config)
        write_text(text, args.out)
        if side is not None and args.out:
            write_text(side, (args.out + ".summary.json") if args.out else None)
        if not report.ok:
            raise PropertyViolation(report.failure)
        return 0
    except PropertyViolation as e:
        return _fail(e, 4)
    except BudgetError as e:
        return _fail(e, 3)
    except (InputError, ValueError) as e:
        return _fail(e, 2, "input_error")
    except ScalelabError as e:
        return _fail(e, 3)


def _fail(e: Exception, code: int, reason: str | None = None) -> int:
    reason = getattr(e, "reason", None) or reason or "error"
    msg = " ".join(str(e).split())
    sys.stderr.write(f"scalelab: {reason}: {msg}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
