"""Integration domains: axis-aligned boxes with optional excluded balls."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArityMismatch


@dataclass(frozen=True)
class ExclusionBall:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.array(self.center, dtype=float).ravel())
        if not self.radius > 0:
            raise ValueError(f"exclusion radius must be positive, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))


@dataclass(frozen=True)
class Domain:
    """Closed box ``[lower, upper]`` minus a set of open balls.

    Excluded balls are removed from sampling and from the density; the
    volume is always the plain box volume.
    """

    lower: np.ndarray
    upper: np.ndarray
    exclusions: tuple = field(default_factory=tuple)

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float).ravel()
        hi = np.array(self.upper, dtype=float).ravel()
        if lo.shape != hi.shape or lo.size == 0:
            raise ValueError("lower and upper must be non-empty vectors of equal length")
        if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
            raise ValueError("box bounds must be finite")
        if np.any(lo > hi):
            raise ValueError(f"lower bound exceeds upper bound: {lo} > {hi}")
        for ball in self.exclusions:
            if ball.center.size != lo.size:
                raise ArityMismatch(
                    f"exclusion centre has length {ball.center.size}, domain is {lo.size}-D")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "exclusions", tuple(self.exclusions))

    @classmethod
    def unit_cube(cls, n):
        return cls(np.zeros(n), np.ones(n))

    @property
    def dim(self):
        return self.lower.size

    @property
    def width(self):
        return self.upper - self.lower

    @property
    def center(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def diagonal(self):
        return float(np.linalg.norm(self.width))

    def volume(self):
        return float(np.prod(self.width))

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ArityMismatch(f"point has length {x.shape[-1]}, domain is {self.dim}-D")
        return x

    def in_box(self, points):
        points = self._check(points)
        return np.all((points >= self.lower) & (points <= self.upper), axis=-1)

    def outside_exclusions(self, points):
        points = self._check(points)
        ok = np.ones(points.shape[:-1], dtype=bool)
        for ball in self.exclusions:
            d2 = np.sum((points - ball.center) ** 2, axis=-1)
            ok &= d2 >= ball.radius**2
        return ok

    def contains_many(self, points):
        """Vectorised `contains` over the rows of ``points``."""
        return self.in_box(points) & self.outside_exclusions(points)

    def contains(self, x):
        x = self._check(x)
        if x.ndim != 1:
            raise ArityMismatch("contains expects a single point")
        return bool(self.contains_many(x))

    def excluded_by(self, x):
        """Return the first exclusion ball containing ``x``, or None."""
        x = self._check(x)
        for ball in self.exclusions:
            if np.sum((x - ball.center) ** 2) < ball.radius**2:
                return ball
        return None

    def with_exclusion(self, center, radius):
        return Domain(self.lower, self.upper,
                      self.exclusions + (ExclusionBall(center, radius),))

    def translated(self, offset):
        offset = np.asarray(offset, dtype=float)
        balls = tuple(ExclusionBall(b.center + offset, b.radius) for b in self.exclusions)
        return Domain(self.lower + offset, self.upper + offset, balls)

    def __eq__(self, other):
        if not isinstance(other, Domain):
            return NotImplemented
        return (np.array_equal(self.lower, other.lower)
                and np.array_equal(self.upper, other.upper)
                and len(self.exclusions) == len(other.exclusions)
                and all(np.array_equal(a.center, b.center) and a.radius == b.radius
                        for a, b in zip(self.exclusions, other.exclusions)))

    __hash__ = None


def volume(domain):
    return domain.volume()


def contains(domain, x):
    return domain.contains(x)


def parse_domain(text):
    """Parse ``"lo,hi;lo,hi;..."`` into a box Domain."""
    lower, upper = [], []
    parts = [p for p in text.strip().split(";")]
    if not parts or not text.strip():
        raise ValueError("empty domain string")
    for i, part in enumerate(parts):
        bounds = part.split(",")
        if len(bounds) != 2:
            raise ValueError(f"domain component {i + 1} must be 'lo,hi', got {part!r}")
        try:
            lo, hi = float(bounds[0]), float(bounds[1])
        except ValueError:
            raise ValueError(f"domain component {i + 1} is not numeric: {part!r}") from None
        if lo > hi:
            raise ValueError(f"domain component {i + 1}: lower bound {lo} > upper bound {hi}")
        lower.append(lo)
        upper.append(hi)
    return Domain(lower, upper)
