"""Scalar fields on R^n and the built-in catalogue of test problems."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ArityMismatch, NonFiniteValue
from .geometry import Domain


@dataclass(frozen=True)
class ScalarField:
    """A real function of ``arity`` variables.

    ``func`` is vectorised: it maps an ``(m, arity)`` array of points to an
    ``(m,)`` array of values.
    """

    arity: int
    func: Callable[[np.ndarray], np.ndarray]
    name: str = "f"

    def __post_init__(self):
        if int(self.arity) < 1:
            raise ValueError("arity must be a positive integer")

    def eval_many(self, points):
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != self.arity:
            raise ArityMismatch(
                f"{self.name}: expected points of shape (m, {self.arity}), got {points.shape}")
        with np.errstate(all="ignore"):
            values = np.asarray(self.func(points), dtype=float)
        values = np.broadcast_to(values, (points.shape[0],))
        if not np.all(np.isfinite(values)):
            bad = points[~np.isfinite(values)][0]
            raise NonFiniteValue(f"{self.name} is not finite at {bad.tolist()}")
        return values

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.size != self.arity:
            raise ArityMismatch(f"{self.name}: expected a point of length {self.arity}, got shape {x.shape}")
        return float(self.eval_many(x[None, :])[0])

    __call__ = eval


def eval(field, x):  # noqa: A001 - mirrors the operation name
    return field.eval(x)


@dataclass(frozen=True)
class TestProblem:
    """A field with known roots.

    ``multiplicity`` holds the local order of vanishing of ``f`` at each root
    (``|f| ~ |x - r|^order``); it only feeds the default density exponent.
    """

    __test__ = False  # not a pytest class

    name: str
    field: ScalarField
    domain: Domain
    known_roots: tuple
    multiplicity: tuple

    @property
    def dim(self):
        return self.field.arity

    @property
    def order(self):
        """Largest order of vanishing among the roots (the worst case for k)."""
        return max(self.multiplicity) if self.multiplicity else 1.0

    def root_error(self, x):
        """Distance from ``x`` to the nearest known root, or None without roots."""
        if not self.known_roots:
            return None
        x = np.asarray(x, dtype=float)
        return float(min(np.linalg.norm(x - r) for r in self.known_roots))


def _abs_1d(X):
    return np.abs(X[:, 0] - 0.6)


def _osc_1d(X):
    x = X[:, 0]
    return np.abs(x - 0.6) * (2.0 + np.sin(40.0 * x))


def _kink_1d(X):
    return np.sqrt(np.abs(X[:, 0] - 0.6))


def _two_roots_1d(X):
    x = X[:, 0]
    return np.abs(x - 0.3) * np.abs(x - 0.8)


def _sphere(X):
    return np.sqrt(np.sum((X - 0.6) ** 2, axis=1))


def _one_root(name, func, n, root, order):
    return TestProblem(
        name=name,
        field=ScalarField(n, func, name),
        domain=Domain.unit_cube(n),
        known_roots=(np.full(n, root),),
        multiplicity=(order,),
    )


def builtin_catalog():
    problems = [
        _one_root("abs_1d", _abs_1d, 1, 0.6, 1),
        _one_root("osc_1d", _osc_1d, 1, 0.6, 1),
        _one_root("kink_1d", _kink_1d, 1, 0.6, 0.5),
    ]
    for n in (1, 2, 3, 5):
        problems.append(_one_root(f"sphere_{n}d", _sphere, n, 0.6, 1))
    problems.append(TestProblem(
        name="two_roots_1d",
        field=ScalarField(1, _two_roots_1d, "two_roots_1d"),
        domain=Domain.unit_cube(1),
        known_roots=(np.array([0.3]), np.array([0.8])),
        multiplicity=(1, 1),
    ))
    return problems


def get_builtin(name):
    for problem in builtin_catalog():
        if problem.name == name:
            return problem
    names = ", ".join(p.name for p in builtin_catalog())
    raise KeyError(f"unknown builtin {name!r}; available: {names}")
