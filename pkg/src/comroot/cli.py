"""Command-line entry point: ``comroot {solve,multiroot,experiment}``.

Exit status: 0 on convergence, 2 when the sample budget ran out before the
sigma tolerance was met, 1 on any error (usage errors included).
"""

from __future__ import annotations

import argparse
import json
import logging
import secrets
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .density import DensityParams, default_k
from .errors import ExpressionError, RootFinderError
from .expr import parse, to_field
from .field import get_builtin
from .geometry import parse_domain
from .harness import (ConvergenceTrace, SolverConfig, eta_floor, fit_rate, run_experiment,
                      solve, write_trace_csv)
from .multiroot import MultiRootConfig, find_all

log = logging.getLogger("comroot")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    mode: str
    function: str
    field: object
    domain: object
    problem: Optional[object]
    sampler: str
    k: int
    eta: float
    update_every: int
    window: int
    tol: float
    sigma_floor: Optional[float]
    budget: int
    seed: int
    seed_was_given: bool
    workers: int
    max_roots: int
    exclusion_radius: Optional[float]
    residual_accept: float
    trace: Optional[Path]
    report: Optional[Path]
    seeds: int = 10
    model: Optional[str] = None
    etas: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def density(self):
        return DensityParams(self.k, self.eta)

    def solver_config(self):
        return SolverConfig(sampler=self.sampler, k=self.k, eta=self.eta, budget=self.budget,
                            update_every=self.update_every, window=self.window, tol=self.tol,
                            sigma_floor=self.sigma_floor, workers=self.workers)

    def multiroot_config(self):
        return MultiRootConfig(max_roots=self.max_roots, exclusion_radius=self.exclusion_radius,
                               residual_accept=self.residual_accept, budget=self.budget,
                               update_every=self.update_every, window=self.window, tol=self.tol)


def _common_options():
    p = _Parser(add_help=False)
    g = p.add_argument_group("problem")
    g.add_argument("--function", required=True,
                   help="builtin:<name> (e.g. builtin:abs_1d) or expr:<text> (e.g. 'expr:abs(x1-0.6)')")
    g.add_argument("--domain", help='box as "lo,hi;lo,hi;..." (default: the builtin\'s box)')
    g = p.add_argument_group("density")
    g.add_argument("--k", type=int, help="density exponent (default: smallest divergent k, at least n)")
    g.add_argument("--eta", type=float, default=1e-8, help="regulariser eta (default 1e-8)")
    g = p.add_argument_group("sampling")
    g.add_argument("--sampler", choices=("uniform", "adaptive"), default="adaptive")
    g.add_argument("--update-every", type=int, default=5,
                   help="samples between proposal updates (default 5)")
    g.add_argument("--window", type=int,
                   help="estimates averaged for sigma (default 10*n; 40*n for multiroot)")
    g.add_argument("--seed", type=int, help="RNG seed (default: drawn from entropy and echoed)")
    g.add_argument("--max-samples", type=int, default=10**5, help="sample budget (default 100000)")
    g.add_argument("--tol", type=float, default=1e-9, help="stop when max sigma < tol (default 1e-9)")
    g.add_argument("--sigma-floor", type=float, help="lower bound on sigma (default 1e-12 x box width)")
    g.add_argument("--workers", type=int, default=1, help="parallel sampling streams (default 1)")
    g = p.add_argument_group("multi-root search")
    g.add_argument("--multiroot", action="store_true", help="same as the multiroot subcommand")
    g.add_argument("--max-roots", type=int, default=8, help="(default 8)")
    g.add_argument("--exclusion-radius", type=float,
                   help="ball removed around each root (default 0.05 x box diagonal)")
    g.add_argument("--residual-accept", type=float, default=1e-6,
                   help="accept a root when |f| <= this (default 1e-6)")
    g = p.add_argument_group("output")
    g.add_argument("--trace", type=Path, help="trace CSV path (experiment: directory)")
    g.add_argument("--report", type=Path, help="also write the report to this file")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser():
    common = _common_options()
    flags = sorted({s for a in common._actions for s in a.option_strings if s.startswith("--")})
    parser = _Parser(
        prog="comroot",
        description="Global root finding by the centre of mass of a singular density.",
        epilog="options shared by all subcommands: " + " ".join(flags)
        + "\nexperiment only: --seeds --model --etas",
        formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"comroot {__version__}")
    sub = parser.add_subparsers(dest="mode", required=True, parser_class=_Parser)
    sub.add_parser("solve", parents=[common], help="locate a single root")
    sub.add_parser("multiroot", parents=[common], help="find several roots by exclusion")
    exp = sub.add_parser("experiment", parents=[common],
                         help="convergence experiment over seeds on a builtin problem")
    exp.add_argument("--seeds", type=int, default=10, help="number of seeds, starting at --seed (default 10)")
    exp.add_argument("--model", choices=("power", "exponential"),
                     help="rate model (default: power for uniform, exponential for adaptive)")
    exp.add_argument("--etas", help="comma-separated eta values for an eta-floor scan")
    return parser


def _resolve_function(text, domain_text):
    kind, _, body = text.partition(":")
    if kind == "builtin":
        try:
            problem = get_builtin(body)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
        domain = problem.domain
        if domain_text:
            domain = _parse_domain(domain_text)
            if domain.dim != problem.dim:
                raise UsageError(f"{body} is {problem.dim}-D but the domain is {domain.dim}-D")
        return problem.field, domain, problem, []
    if kind == "expr":
        if not domain_text:
            raise UsageError("--domain is required for expr: functions")
        domain = _parse_domain(domain_text)
        try:
            e = parse(body, domain.dim)
        except ExpressionError as exc:
            raise UsageError(f"bad expression: {exc}") from None
        unused = sorted(set(range(1, domain.dim + 1)) - set(e.variables()))
        warnings = [f"expression does not use x{j}" for j in unused]
        return to_field(e), domain, None, warnings
    raise UsageError(f"--function must start with builtin: or expr:, got {text!r}")


def _parse_domain(text):
    try:
        return parse_domain(text)
    except ValueError as exc:
        raise UsageError(f"bad --domain: {exc}") from None


def parse_args(argv):
    args = build_parser().parse_args(argv)
    mode = "multiroot" if args.mode == "solve" and args.multiroot else args.mode
    fld, domain, problem, warnings = _resolve_function(args.function, args.domain)
    n = domain.dim

    def check(ok, message):
        if not ok:
            raise UsageError(message)

    check(args.k is None or args.k >= 1, "--k must be >= 1")
    check(args.eta >= 0, "--eta must be >= 0")
    check(args.eta > 0 or args.sampler == "uniform", "--eta 0 needs --sampler uniform")
    check(args.update_every >= 1, "--update-every must be >= 1")
    check(args.window is None or args.window >= 1, "--window must be >= 1")
    check(args.max_samples >= 1, "--max-samples must be >= 1")
    check(args.tol > 0, "--tol must be > 0")
    check(args.sigma_floor is None or args.sigma_floor > 0, "--sigma-floor must be > 0")
    check(args.workers >= 1, "--workers must be >= 1")
    check(args.max_roots >= 1, "--max-roots must be >= 1")
    check(args.exclusion_radius is None or args.exclusion_radius > 0, "--exclusion-radius must be > 0")
    check(args.residual_accept > 0, "--residual-accept must be > 0")
    check(args.seed is None or 0 <= args.seed < 2**64, "--seed must be an unsigned 64-bit integer")
    if mode == "experiment":
        check(problem is not None, "experiment needs a builtin function with known roots")
        check(args.seeds >= 1, "--seeds must be >= 1")
    if mode == "multiroot":
        check(args.sampler == "adaptive", "multiroot search uses the adaptive sampler")

    order = problem.order if problem is not None else 1
    window = args.window or (40 * n if mode == "multiroot" else 10 * n)
    etas = []
    if getattr(args, "etas", None):
        try:
            etas = [float(v) for v in args.etas.split(",")]
        except ValueError:
            raise UsageError(f"bad --etas: {args.etas!r}") from None
        check(all(e > 0 for e in etas) and len(set(etas)) == len(etas),
              "--etas must be positive and distinct")
    seed_given = args.seed is not None
    return RunConfig(
        mode=mode, function=args.function, field=fld, domain=domain, problem=problem,
        sampler=args.sampler, k=args.k if args.k is not None else default_k(n, order),
        eta=args.eta, update_every=args.update_every, window=window, tol=args.tol,
        sigma_floor=args.sigma_floor, budget=args.max_samples,
        seed=args.seed if seed_given else secrets.randbits(63), seed_was_given=seed_given,
        workers=args.workers, max_roots=args.max_roots, exclusion_radius=args.exclusion_radius,
        residual_accept=args.residual_accept, trace=args.trace, report=args.report,
        seeds=getattr(args, "seeds", 10), model=getattr(args, "model", None), etas=etas,
        warnings=warnings,
    )


def _vec(v):
    return "[" + ",".join("%.17g" % x for x in np.atleast_1d(v)) + "]"


def report_line(root, residual, samples, sigma, seed):
    return (f"root={_vec(root)} residual={residual:.17g} samples={samples} "
            f"sigma={_vec(sigma)} seed={seed}")


def _emit(lines, cfg):
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if cfg.report:
        cfg.report.write_text(text)


def _run_solve(cfg):
    result = solve(cfg.field, cfg.domain, cfg.solver_config(), cfg.seed,
                   cfg.problem.order if cfg.problem else 1)
    if cfg.trace:
        write_trace_csv(ConvergenceTrace.from_rows(result.rows, cfg.problem), cfg.trace)
    residual = abs(cfg.field.eval(result.estimate))
    _emit([report_line(result.estimate, residual, result.samples, result.sigma, cfg.seed)], cfg)
    return 0 if result.converged else 2


def _run_multiroot(cfg):
    res = find_all(cfg.field, cfg.domain, cfg.density, cfg.multiroot_config(), cfg.seed)
    if cfg.trace:
        rows, offset = [], 0
        for rnd in res.rounds:
            rows += [r._replace(samples=r.samples + offset) for r in rnd.rows]
            offset += rnd.samples
        write_trace_csv(ConvergenceTrace.from_rows(rows, cfg.problem), cfg.trace)
    lines = [report_line(r.location, r.residual, r.samples_used, r.final_sigma, cfg.seed)
             for r in res.roots]
    lines.append(f"roots={len(res.roots)} stop={res.stop_reason} seed={cfg.seed}")
    _emit(lines, cfg)
    return 0 if all(r.converged for r in res.roots) else 2


def _run_experiment(cfg):
    problem = cfg.problem
    scfg = cfg.solver_config()
    seeds = list(range(cfg.seed, cfg.seed + cfg.seeds))
    traces = run_experiment(problem, scfg, seeds)
    if cfg.trace:
        cfg.trace.mkdir(parents=True, exist_ok=True)
        for t in traces:
            if t.failure is None:
                write_trace_csv(t, cfg.trace / f"trace_seed{t.seed}.csv")
    model = cfg.model or ("power" if cfg.sampler == "uniform" else "exponential")
    fit = fit_rate(traces, model)
    finals = [t.final_error for t in traces if t.failure is None]
    summary = json.loads(fit.to_json())
    summary.update(problem=problem.name, sampler=cfg.sampler, seeds=seeds,
                   median_final_error=float(np.median(finals)),
                   failed_seeds=[t.seed for t in traces if t.failure is not None])
    lines = [json.dumps(summary, sort_keys=True)]
    if cfg.etas:
        for eta, err in eta_floor(problem, cfg.etas, scfg, seeds):
            lines.append(json.dumps({"eta": eta, "floor_error": err}))
    _emit(lines, cfg)
    return 0


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(build_parser().format_usage(), file=sys.stderr, end="")
        return 1
    except SystemExit as exc:  # --help / --version
        return exc.code or 0
    logging.basicConfig(level=logging.INFO if "-v" in argv or "--verbose" in argv else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    for w in cfg.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if not cfg.seed_was_given:
        print(f"seed={cfg.seed}", file=sys.stderr)
    try:
        if cfg.mode == "solve":
            return _run_solve(cfg)
        if cfg.mode == "multiroot":
            return _run_multiroot(cfg)
        return _run_experiment(cfg)
    except RootFinderError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
