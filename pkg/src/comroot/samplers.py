"""Sampling strategies and the uniform / adaptive solver loops.

Both loops feed a single RatioAccumulator with ``log g(x) - log P(x)`` for
every drawn point and record one trace row per checkpoint.  With
``workers > 1`` every batch is split across per-worker RNG streams, each
worker fills its own accumulator, and the partial accumulators are merged
in worker order, so results depend only on ``(seed, workers)``.
"""

from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .density import DensityParams, log_g
from .errors import ExclusionSaturated
from .estimator import RatioAccumulator

MAX_CONSECUTIVE_REJECTIONS = 10**6
SQRT_PI = math.sqrt(math.pi)


def make_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def worker_rngs(seed, workers=1):
    """Independent generators for each worker; one worker uses ``seed`` directly."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if workers == 1:
        return [make_rng(seed)]
    if isinstance(seed, np.random.Generator):
        return seed.spawn(workers)
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(workers)]


class _RejectionCounter:
    def __init__(self, limit=MAX_CONSECUTIVE_REJECTIONS):
        self.limit = limit
        self.run = 0

    def update(self, accepted):
        if accepted.size == 0:
            return
        hits = np.flatnonzero(accepted)
        if hits.size == 0:
            self.run += accepted.size
        else:
            self.run = accepted.size - 1 - hits[-1]
        if self.run >= self.limit:
            raise ExclusionSaturated(
                f"{self.run} consecutive rejections; the sampling region is (nearly) empty")


# -- uniform ------------------------------------------------------------------

class UniformStrategy:
    """Uniform points on the box minus exclusions, with unnormalised density 1."""

    def __init__(self, domain, rng_seed=None):
        self.domain = domain
        self.rng = make_rng(rng_seed)
        self._counter = _RejectionCounter()

    def draw(self, m):
        """Return ``m`` accepted points and their log-densities (all zero)."""
        d = self.domain
        if not d.exclusions:
            pts = d.lower + self.rng.random((m, d.dim)) * d.width
            return pts, np.zeros(m)
        out = []
        need = m
        while need > 0:
            cand = d.lower + self.rng.random((max(2 * need, 256), d.dim)) * d.width
            ok = d.outside_exclusions(cand)
            self._counter.update(ok)
            take = cand[ok][:need]
            out.append(take)
            need -= take.shape[0]
        return np.concatenate(out), np.zeros(m)

    def next(self):
        pts, logp = self.draw(1)
        return pts[0], float(logp[0])

    __next__ = next

    def __iter__(self):
        return self


def uniform_next(s):
    return s.next()


# -- adaptive Gaussian --------------------------------------------------------

@dataclass
class AdaptiveState:
    """Proposal parameters of the adaptive sampler.

    ``history`` keeps the last ``window + 1`` per-batch estimates; sigma is
    the mean absolute successive difference over them.
    """

    mean: np.ndarray
    sigma: np.ndarray
    sigma_floor: np.ndarray
    window: int
    update_every: int = 5
    history: deque = field(default=None)

    def __post_init__(self):
        self.mean = np.array(self.mean, dtype=float)
        self.sigma_floor = np.array(self.sigma_floor, dtype=float)
        self.sigma = np.maximum(np.array(self.sigma, dtype=float), self.sigma_floor)
        if self.window < 1 or self.update_every < 1:
            raise ValueError("window and update_every must be positive")
        if np.any(self.sigma_floor <= 0):
            raise ValueError("sigma_floor must be positive")
        self.history = deque(self.history or (), maxlen=self.window + 1)

    @property
    def warmed_up(self):
        return len(self.history) > self.window


def initial_state(domain, update_every=5, window=None, sigma_floor=None):
    """Flat proposal centred on the box: sigma = 10 x box width."""
    width = domain.width
    scale = np.where(width > 0, width, 1.0)
    if window is None:
        window = 10 * domain.dim
    if sigma_floor is None:
        sigma_floor = 1e-12 * scale
    return AdaptiveState(
        mean=domain.center,
        sigma=10.0 * scale,
        sigma_floor=np.broadcast_to(np.asarray(sigma_floor, dtype=float), width.shape),
        window=int(window),
        update_every=int(update_every),
    )


def gaussian_log_kernel(points, mean, sigma, active=None):
    """``-sum_j ((x_j - mean_j) / sigma_j)^2``: the unnormalised proposal."""
    z = (np.asarray(points) - mean) / sigma
    if active is not None:
        z = z[..., active]
    return -np.sum(z * z, axis=-1)


def gaussian_log_density(points, mean, sigma, active=None):
    """Normalised log-density of the product Gaussian ``exp(-(x-m)^2/s^2) / (s sqrt(pi))``."""
    sig = sigma if active is None else sigma[active]
    return gaussian_log_kernel(points, mean, sigma, active) - np.sum(np.log(sig * SQRT_PI))


def _phi(t):
    return 0.5 * math.erfc(-t / math.sqrt(2.0))


def _truncated_normal(rng, mu, sd, lo, hi, m, counter):
    """``m`` draws of N(mu, sd^2) restricted to [lo, hi] by rejection."""
    mass = _phi((hi - mu) / sd) - _phi((lo - mu) / sd)
    out = np.empty(m)
    got = 0
    while got < m:
        need = m - got
        size = int(min(max(1.5 * need / max(mass, 1e-6) + 4, 8), 1e6))
        cand = mu + sd * rng.standard_normal(size)
        ok = (cand >= lo) & (cand <= hi)
        counter.update(ok)
        take = cand[ok][:need]
        out[got:got + take.size] = take
        got += take.size
    return out


def gaussian_draw(st, domain, rng, m):
    """Draw ``m`` points from the current proposal, restricted to ``domain``.

    Returns the points and their normalised (untruncated) log-densities.
    Degenerate box dimensions are pinned to their single value.
    """
    active = domain.width > 0
    sd = st.sigma / math.sqrt(2.0)
    counter = _RejectionCounter()  # per-coordinate truncation
    excluded = _RejectionCounter()  # whole points inside exclusion balls
    out = []
    need = m
    batch = m
    while need > 0:
        pts = np.empty((batch, domain.dim))
        for j in range(domain.dim):
            if active[j]:
                pts[:, j] = _truncated_normal(rng, st.mean[j], sd[j],
                                              domain.lower[j], domain.upper[j], batch, counter)
            else:
                pts[:, j] = domain.lower[j]
        if domain.exclusions:
            ok = domain.outside_exclusions(pts)
            excluded.update(ok)
            pts = pts[ok][:need]
            # oversample more aggressively while exclusions eat the draws
            batch = min(max(2 * batch, need), 10**5)
        out.append(pts)
        need -= pts.shape[0]
    pts = np.concatenate(out)
    return pts, gaussian_log_density(pts, st.mean, st.sigma, active)


def gaussian_next(st, domain, rng):
    pts, logp = gaussian_draw(st, domain, rng, 1)
    return pts[0], float(logp[0])


def window_sigma(history, floor):
    """Mean absolute successive difference of the estimates in ``history``."""
    h = np.asarray(list(history), dtype=float)
    if h.shape[0] < 2:
        raise ValueError("need at least two estimates")
    return np.maximum(np.mean(np.abs(np.diff(h, axis=0)), axis=0), floor)


def update_sigma(st, mean=None):
    """Recompute sigma from the history and recentre the proposal.

    Uses however many pairs are available (up to ``window``).  The proposal
    is recentred on ``mean`` if given, else on the newest history entry.
    """
    st.sigma = window_sigma(st.history, st.sigma_floor)
    st.mean = np.array(st.history[-1] if mean is None else mean, dtype=float)
    return st


# -- solver loops ---------------------------------------------------------------

class TraceRow(NamedTuple):
    samples: int
    estimate: np.ndarray
    sigma: np.ndarray


@dataclass
class RunResult:
    rows: list
    estimate: np.ndarray
    sigma: np.ndarray
    samples: int
    converged: bool
    accumulator: RatioAccumulator


@dataclass(frozen=True)
class AdaptiveConfig:
    """Knobs of the adaptive loop.

    ``weighting="kernel"`` divides g by the unnormalised Gaussian kernel;
    ``"normalized"`` divides by the normalised density instead, which gives
    wide early stages far more weight than sharp late ones.
    """

    update_every: int = 5
    window: Optional[int] = None
    tol: float = 1e-9
    sigma_floor: Optional[float] = None
    weighting: str = "kernel"

    def __post_init__(self):
        if self.weighting not in ("kernel", "normalized"):
            raise ValueError(f"unknown weighting {self.weighting!r}")


class _BatchRunner:
    """Draws a batch split over workers and returns the merged accumulator."""

    def __init__(self, field, p, rngs):
        self.field = field
        self.p = p
        self.rngs = rngs
        self.pool = ThreadPoolExecutor(len(rngs)) if len(rngs) > 1 else None

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()

    def _part(self, draw, rng, m):
        acc = RatioAccumulator(self.field.arity)
        if m > 0:
            pts, log_q = draw(rng, m)
            lw = log_g(self.field.eval_many(pts), self.p) - log_q
            acc.consume_batch(pts, lw)
        return acc

    def run(self, draw, m):
        sizes = [len(part) for part in np.array_split(np.arange(m), len(self.rngs))]
        if self.pool is None:
            parts = [self._part(draw, self.rngs[0], m)]
        else:
            parts = list(self.pool.map(lambda a: self._part(draw, *a), zip(self.rngs, sizes)))
        batch = parts[0]
        for part in parts[1:]:
            batch.merge(part)
        return batch


def adaptive_run(field, domain, p, state=None, budget=10**4, rng=None, config=None, workers=1):
    """Adaptive Gaussian importance sampling.

    Every ``update_every`` samples the proposal is recentred on the running
    estimate and its width set from the recent per-batch estimates.  The
    proposal stays flat until ``window + 1`` batch estimates exist.  Stops
    at ``budget`` samples or once ``max(sigma) < tol``.
    """
    config = config or AdaptiveConfig()
    if state is None:
        state = initial_state(domain, config.update_every, config.window, config.sigma_floor)
    if budget < state.update_every:
        raise ValueError(f"budget {budget} < update_every {state.update_every}")
    if p.eta <= 0:
        raise ValueError("adaptive sampling needs eta > 0")
    active = domain.width > 0

    def draw(r, m):
        pts, log_density = gaussian_draw(state, domain, r, m)
        if config.weighting == "kernel":
            return pts, gaussian_log_kernel(pts, state.mean, state.sigma, active)
        return pts, log_density

    acc = RatioAccumulator(domain.dim)
    runner = _BatchRunner(field, p, worker_rngs(rng, workers))
    rows = []
    samples = 0
    converged = False
    try:
        while samples < budget:
            m = min(state.update_every, budget - samples)
            batch = runner.run(draw, m)
            acc.merge(batch)
            samples += m
            est = acc.estimate()
            state.history.append(est if batch.empty else batch.estimate())
            if state.warmed_up:
                update_sigma(state, mean=est)
            else:
                state.mean = est
            rows.append(TraceRow(samples, est, state.sigma.copy()))
            if state.warmed_up and np.max(state.sigma) < config.tol:
                converged = True
                break
    finally:
        runner.close()
    return RunResult(rows, acc.estimate(), state.sigma.copy(), samples, converged, acc)


def uniform_run(field, domain, p, budget, rng=None, workers=1, checkpoint_every=None,
                window=None, tol=1e-9):
    """Uniform sampling with checkpoints every ``ceil(budget / 200)`` samples.

    The reported sigma is the windowed successive-difference spread of the
    checkpoint estimates, a fluctuation proxy comparable to the adaptive one.
    """
    if budget < 1:
        raise ValueError("budget must be positive")
    step = checkpoint_every or math.ceil(budget / 200)
    window = window or 10 * domain.dim
    floor = 1e-12 * np.where(domain.width > 0, domain.width, 1.0)
    strategies = {}

    def draw(r, m):
        s = strategies.setdefault(id(r), UniformStrategy(domain, r))
        return s.draw(m)

    acc = RatioAccumulator(domain.dim)
    runner = _BatchRunner(field, p, worker_rngs(rng, workers))
    history = deque(maxlen=window + 1)
    sigma = 10.0 * np.where(domain.width > 0, domain.width, 1.0)
    rows = []
    samples = 0
    converged = False
    try:
        while samples < budget:
            m = min(step, budget - samples)
            acc.merge(runner.run(draw, m))
            samples += m
            est = acc.estimate()
            history.append(est)
            if len(history) >= 2:
                sigma = window_sigma(history, floor)
            rows.append(TraceRow(samples, est, sigma.copy()))
            if len(history) > window and np.max(sigma) < tol:
                converged = True
                break
    finally:
        runner.close()
    return RunResult(rows, acc.estimate(), sigma.copy(), samples, converged, acc)
