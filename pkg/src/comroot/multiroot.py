"""Sequential discovery of several roots by carving out found ones."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ExclusionSaturated
from .samplers import AdaptiveConfig, adaptive_run, make_rng

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RootRecord:
    location: np.ndarray
    residual: float
    samples_used: int
    final_sigma: np.ndarray
    converged: bool = True


@dataclass(frozen=True)
class MultiRootConfig:
    max_roots: int = 8
    exclusion_radius: Optional[float] = None  # default: 0.05 x box diagonal
    residual_accept: float = 1e-6
    budget: int = 10**5  # per round
    update_every: int = 5
    window: Optional[int] = None  # default: 40 * n
    tol: float = 1e-9
    weighting: str = "kernel"

    def __post_init__(self):
        if self.max_roots < 1:
            raise ValueError("max_roots must be >= 1")
        if self.exclusion_radius is not None and not self.exclusion_radius > 0:
            raise ValueError("exclusion_radius must be positive")
        if not self.residual_accept > 0:
            raise ValueError("residual_accept must be positive")

    def radius_for(self, domain):
        if self.exclusion_radius is not None:
            return self.exclusion_radius
        return 0.05 * domain.diagonal

    def adaptive_config(self, domain):
        return AdaptiveConfig(update_every=self.update_every,
                              window=self.window or 40 * domain.dim,
                              tol=self.tol, weighting=self.weighting)


@dataclass
class RoundOutcome:
    """What happened in one search round (accepted or not)."""

    location: Optional[np.ndarray]
    residual: Optional[float]
    samples: int
    converged: bool
    accepted: bool
    reason: str
    rows: list = field(default_factory=list)


@dataclass
class MultiRootResult:
    roots: list
    rounds: list
    stop_reason: str
    domain: object


def find_all(field, domain, p, cfg=None, rng=None):
    """Run adaptive rounds, excluding a ball around each accepted root.

    A round's result is accepted when ``|f| <= residual_accept`` and it is
    not inside an existing exclusion ball.  The search stops at the first
    rejected round or after ``max_roots`` accepted ones.
    """
    cfg = cfg or MultiRootConfig()
    rng = make_rng(rng)
    radius = cfg.radius_for(domain)
    acfg = cfg.adaptive_config(domain)
    roots, rounds = [], []
    current = domain
    stop_reason = "max_roots"
    while len(roots) < cfg.max_roots:
        try:
            run = adaptive_run(field, current, p, budget=cfg.budget, rng=rng, config=acfg)
        except ExclusionSaturated as exc:
            rounds.append(RoundOutcome(None, None, 0, False, False, f"saturated: {exc}"))
            stop_reason = "exclusion_saturated"
            break
        x = run.estimate
        residual = abs(field.eval(x))
        budget_note = "" if run.converged else " (budget exhausted before tolerance)"
        if current.excluded_by(x) is not None:
            rounds.append(RoundOutcome(x, residual, run.samples, run.converged, False,
                                       "inside existing exclusion" + budget_note, run.rows))
            stop_reason = "no_new_basin"
            break
        if residual > cfg.residual_accept:
            rounds.append(RoundOutcome(x, residual, run.samples, run.converged, False,
                                       f"residual {residual:.3g} > accept" + budget_note, run.rows))
            stop_reason = "residual"
            break
        rounds.append(RoundOutcome(x, residual, run.samples, run.converged, True,
                                   "accepted" + budget_note, run.rows))
        roots.append(RootRecord(x, residual, run.samples, run.sigma, run.converged))
        log.info("root %d at %s (|f|=%.3g, %d samples)", len(roots), x, residual, run.samples)
        current = current.with_exclusion(x, radius)
    return MultiRootResult(roots, rounds, stop_reason, current)
