"""Streaming ratio estimator for the centre of mass of a weighted sample stream.

Numerator ``sum_i w_i x_i`` and denominator ``sum_i w_i`` are updated with the
same point and the same weight.  Weights arrive as logarithms; both sums are
stored relative to ``exp(log_scale)``, the largest weight seen so far, so
weights like ``1e80`` never overflow.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import ArityMismatch, EmptyEstimator


class WeightedSample(NamedTuple):
    x: np.ndarray
    log_weight: float


class RatioAccumulator:
    def __init__(self, n):
        self.n = int(n)
        self.count = 0
        self.log_scale = -np.inf
        self.scaled_denominator = 0.0
        self.scaled_numerator = np.zeros(self.n)
        self.saturated_at = None
        # bounding box of consumed points, tracked for the convexity clamp
        self._lo = np.full(self.n, np.inf)
        self._hi = np.full(self.n, -np.inf)

    def __repr__(self):
        return (f"RatioAccumulator(n={self.n}, count={self.count}, "
                f"log_scale={self.log_scale:.6g}, saturated={self.saturated_at is not None})")

    def copy(self):
        other = RatioAccumulator(self.n)
        other.count = self.count
        other.log_scale = self.log_scale
        other.scaled_denominator = self.scaled_denominator
        other.scaled_numerator = self.scaled_numerator.copy()
        other.saturated_at = None if self.saturated_at is None else self.saturated_at.copy()
        other._lo, other._hi = self._lo.copy(), self._hi.copy()
        return other

    def _rescale(self, new_scale):
        if new_scale > self.log_scale:
            factor = np.exp(self.log_scale - new_scale)
            self.scaled_denominator *= factor
            self.scaled_numerator *= factor
            self.log_scale = new_scale

    def consume(self, x, log_weight=None):
        """Add one sample; accepts ``(x, log_weight)`` or a WeightedSample."""
        if log_weight is None:
            x, log_weight = x
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ArityMismatch(f"sample has shape {x.shape}, accumulator is {self.n}-D")
        return self.consume_batch(x[None, :], np.array([log_weight], dtype=float))

    def consume_batch(self, points, log_weights):
        points = np.asarray(points, dtype=float)
        log_weights = np.asarray(log_weights, dtype=float).ravel()
        if points.ndim != 2 or points.shape[1] != self.n:
            raise ArityMismatch(f"points have shape {points.shape}, accumulator is {self.n}-D")
        if points.shape[0] != log_weights.size:
            raise ValueError("points and log_weights differ in length")
        if np.any(np.isnan(log_weights)):
            raise ValueError("log-weights must not be NaN")
        self.count += log_weights.size
        if self.saturated_at is None:
            hits = np.flatnonzero(log_weights == np.inf)
            if hits.size:
                self.saturated_at = points[hits[0]].copy()
        finite = np.isfinite(log_weights)
        if not np.any(finite):
            return self
        pts, lw = points[finite], log_weights[finite]
        self._lo = np.minimum(self._lo, pts.min(axis=0))
        self._hi = np.maximum(self._hi, pts.max(axis=0))
        self._rescale(lw.max())
        w = np.exp(lw - self.log_scale)
        self.scaled_denominator += w.sum()
        self.scaled_numerator += w @ pts
        return self

    def merge(self, other):
        """Fold another accumulator (built from a disjoint stream) into this one."""
        if other.n != self.n:
            raise ArityMismatch("cannot merge accumulators of different dimension")
        self.count += other.count
        if self.saturated_at is None and other.saturated_at is not None:
            self.saturated_at = other.saturated_at.copy()
        if other.scaled_denominator > 0:
            self._lo = np.minimum(self._lo, other._lo)
            self._hi = np.maximum(self._hi, other._hi)
            self._rescale(other.log_scale)
            factor = np.exp(other.log_scale - self.log_scale)
            self.scaled_denominator += factor * other.scaled_denominator
            self.scaled_numerator += factor * other.scaled_numerator
        return self

    @property
    def empty(self):
        return self.saturated_at is None and not self.scaled_denominator > 0

    def estimate(self):
        if self.saturated_at is not None:
            return self.saturated_at.copy()
        if self.count == 0 or not self.scaled_denominator > 0:
            raise EmptyEstimator("no sample with finite weight has been consumed")
        est = self.scaled_numerator / self.scaled_denominator
        # a weighted mean cannot leave the hull; clip the last-ulp overshoot
        return np.clip(est, self._lo, self._hi)


def consume(acc, s):
    return acc.consume(s)


def estimate(acc):
    return acc.estimate()


def merge_all(accumulators):
    accumulators = list(accumulators)
    if not accumulators:
        raise ValueError("nothing to merge")
    out = accumulators[0].copy()
    for acc in accumulators[1:]:
        out.merge(acc)
    return out
