"""Convergence experiments: traces over seeds, rate fits, eta floors, CSV I/O."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, replace
from typing import Optional

import numpy as np

from .density import DensityParams, default_k
from .errors import InsufficientData, RootFinderError
from .samplers import AdaptiveConfig, adaptive_run, uniform_run

log = logging.getLogger(__name__)

PLATEAU_FACTOR = 3.0
MIN_CHECKPOINTS = 10


@dataclass(frozen=True)
class SolverConfig:
    sampler: str = "adaptive"  # or "uniform"
    k: Optional[int] = None  # None: default_k for the problem
    eta: float = 1e-8
    budget: int = 10**4
    update_every: int = 5
    window: Optional[int] = None
    tol: float = 1e-9
    sigma_floor: Optional[float] = None
    weighting: str = "kernel"
    workers: int = 1

    def __post_init__(self):
        if self.sampler not in ("adaptive", "uniform"):
            raise ValueError(f"unknown sampler {self.sampler!r}")

    def density(self, dim, order=1):
        return DensityParams(self.k if self.k is not None else default_k(dim, order), self.eta)


def solve(field, domain, cfg, seed, order=1):
    """Run one solver according to ``cfg``; returns a RunResult."""
    p = cfg.density(domain.dim, order)
    if cfg.sampler == "uniform":
        return uniform_run(field, domain, p, cfg.budget, rng=seed, workers=cfg.workers,
                           window=cfg.window, tol=cfg.tol)
    acfg = AdaptiveConfig(cfg.update_every, cfg.window, cfg.tol, cfg.sigma_floor, cfg.weighting)
    return adaptive_run(field, domain, p, budget=cfg.budget, rng=seed, config=acfg,
                        workers=cfg.workers)


@dataclass
class ConvergenceTrace:
    """Checkpoint rows ``(samples, estimate, sigma, error)`` of one run."""

    samples: np.ndarray
    estimates: np.ndarray
    sigmas: np.ndarray
    errors: Optional[np.ndarray] = None
    seed: Optional[int] = None
    failure: Optional[str] = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.int64)
        self.estimates = self._as_rows(self.estimates)
        self.sigmas = self._as_rows(self.sigmas)
        if self.errors is not None:
            self.errors = np.asarray(self.errors, dtype=float)
        if np.any(np.diff(self.samples) <= 0):
            raise ValueError("samples must be strictly increasing")

    def _as_rows(self, values):
        values = np.asarray(values, dtype=float)
        if values.ndim == 2 and values.shape[0] == len(self.samples):
            return values
        return values.reshape(len(self.samples), -1)

    def __len__(self):
        return len(self.samples)

    @property
    def dim(self):
        return self.estimates.shape[1]

    @property
    def final_error(self):
        if self.errors is None or not len(self.errors):
            return None
        return float(self.errors[-1])

    @classmethod
    def from_rows(cls, rows, problem=None, seed=None):
        samples = [r.samples for r in rows]
        est = np.array([r.estimate for r in rows], dtype=float)
        sig = np.array([r.sigma for r in rows], dtype=float)
        errors = None
        if problem is not None and problem.known_roots:
            errors = np.array([problem.root_error(e) for e in est])
        return cls(samples, est, sig, errors, seed)

    @classmethod
    def failed(cls, seed, message, dim):
        return cls(np.zeros(0), np.zeros((0, dim)), np.zeros((0, dim)), None, seed, message)


def run_experiment(problem, solver_config, seeds):
    """One trace per seed; a seed that errors yields an empty trace with ``failure`` set."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("at least one seed is required")
    traces = []
    for seed in seeds:
        try:
            result = solve(problem.field, problem.domain, solver_config, seed, problem.order)
        except RootFinderError as exc:
            log.warning("seed %s failed: %s", seed, exc)
            traces.append(ConvergenceTrace.failed(seed, str(exc), problem.dim))
            continue
        traces.append(ConvergenceTrace.from_rows(result.rows, problem, seed))
    return traces


def median_trace(traces):
    """Median error over seeds on a common sample grid.

    Shorter traces (runs that stopped on tolerance) are held at their last
    error, since their estimate no longer changes.
    """
    traces = [t for t in traces if t.failure is None and t.errors is not None and len(t)]
    if not traces:
        raise InsufficientData("no traces with known errors")
    grid = np.unique(np.concatenate([t.samples for t in traces]))
    table = np.empty((len(traces), grid.size))
    for i, t in enumerate(traces):
        idx = np.searchsorted(t.samples, grid, side="right") - 1
        # before a trace's first checkpoint, use that first value
        table[i] = t.errors[np.clip(idx, 0, len(t) - 1)]
    return grid, np.median(table, axis=0)


def plateau_onset(errors, factor=PLATEAU_FACTOR):
    """Index of the first checkpoint after which errors stay within ``factor`` of the final one."""
    errors = np.asarray(errors, dtype=float)
    final = errors[-1]
    inside = (errors <= factor * final) & (errors >= final / factor)
    outside = np.flatnonzero(~inside)
    return 0 if outside.size == 0 else int(outside[-1] + 1)


@dataclass(frozen=True)
class RateFit:
    model: str
    slope: float
    intercept: float
    r_squared: float
    fit_range: tuple

    def to_json(self):
        d = asdict(self)
        d["fit_range"] = list(self.fit_range)
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        d["fit_range"] = tuple(d["fit_range"])
        return cls(**d)


def _least_squares(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), float(min(max(r2, 0.0), 1.0))


def fit_rate(traces, model="power", trim_plateau=None):
    """Fit the median error: ``power`` is log(err) vs log(N), ``exponential`` is log(err) vs N.

    With ``trim_plateau`` (default: on for the exponential model) rows from
    the plateau onset on are dropped before fitting.
    """
    if model not in ("power", "exponential"):
        raise ValueError(f"unknown model {model!r}")
    if trim_plateau is None:
        trim_plateau = model == "exponential"
    grid, med = median_trace(traces)
    keep = med > 0
    grid, med = grid[keep], med[keep]
    if trim_plateau and grid.size:
        stop = plateau_onset(med)
        grid, med = grid[:stop], med[:stop]
    if grid.size < MIN_CHECKPOINTS:
        raise InsufficientData(f"{grid.size} usable checkpoints, need {MIN_CHECKPOINTS}")
    x = np.log(grid) if model == "power" else grid.astype(float)
    slope, intercept, r2 = _least_squares(x, np.log(med))
    return RateFit(model, slope, intercept, r2, (int(grid[0]), int(grid[-1])))


def eta_floor(problem, etas, solver_config, seeds=range(10)):
    """Median final error over ``seeds`` for each eta."""
    etas = [float(e) for e in etas]
    if any(not e > 0 for e in etas):
        raise ValueError("etas must be positive")
    if len(set(etas)) != len(etas):
        raise ValueError("etas must be distinct")
    out = []
    for eta in etas:
        traces = run_experiment(problem, replace(solver_config, eta=eta), seeds)
        finals = [t.final_error for t in traces if t.failure is None]
        if not finals:
            raise InsufficientData(f"every seed failed at eta={eta}")
        out.append((eta, float(np.median(finals))))
    return out


# -- CSV ---------------------------------------------------------------------

def _fmt(v):
    return "%.17g" % v


def trace_header(dim):
    return (["samples"] + [f"estimate_{j + 1}" for j in range(dim)]
            + [f"sigma_{j + 1}" for j in range(dim)] + ["error"])


def write_trace_csv(trace, dest):
    """Write ``trace`` to a path or text stream; floats keep 17 significant digits."""
    if isinstance(dest, (str, bytes)) or hasattr(dest, "__fspath__"):
        with open(dest, "w", newline="") as fh:
            return write_trace_csv(trace, fh)
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(trace_header(trace.dim))
    for i in range(len(trace)):
        err = "" if trace.errors is None or math.isnan(trace.errors[i]) else _fmt(trace.errors[i])
        writer.writerow([str(int(trace.samples[i]))]
                        + [_fmt(v) for v in trace.estimates[i]]
                        + [_fmt(v) for v in trace.sigmas[i]] + [err])


def read_trace_csv(src):
    if isinstance(src, (str, bytes)) or hasattr(src, "__fspath__"):
        with open(src, newline="") as fh:
            return read_trace_csv(fh)
    reader = csv.reader(src)
    header = next(reader)
    dim = (len(header) - 2) // 2
    if header != trace_header(dim):
        raise ValueError(f"unexpected trace header: {header}")
    samples, est, sig, err = [], [], [], []
    for row in reader:
        samples.append(int(row[0]))
        est.append([float(v) for v in row[1:1 + dim]])
        sig.append([float(v) for v in row[1 + dim:1 + 2 * dim]])
        err.append(float(row[-1]) if row[-1] else math.nan)
    errors = None if all(math.isnan(e) for e in err) else np.array(err)
    return ConvergenceTrace(samples, np.array(est).reshape(-1, dim),
                            np.array(sig).reshape(-1, dim), errors)


def trace_to_csv_text(trace):
    buf = io.StringIO()
    write_trace_csv(trace, buf)
    return buf.getvalue()
