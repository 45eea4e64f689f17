"""The singular density g = 1 / (f^2 + eta^2)^k, carried in log form."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DensityParams:
    k: int
    eta: float = 1e-8

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        if not (self.eta >= 0 and math.isfinite(self.eta)):
            raise ValueError(f"eta must be a finite non-negative real, got {self.eta}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "eta", float(self.eta))


def log_g(f_val, p):
    """Return ``-k * ln(f^2 + eta^2)``; ``+inf`` only when ``f == 0`` and ``eta == 0``.

    Accepts a scalar or an array of field values.  The sum inside the log is
    formed with logaddexp so tiny ``f`` does not underflow to an exact hit.
    """
    f_val = np.asarray(f_val, dtype=float)
    with np.errstate(divide="ignore"):
        log_f2 = 2.0 * np.log(np.abs(f_val))
    if p.eta == 0.0:
        out = -p.k * log_f2
    else:
        out = -p.k * np.logaddexp(log_f2, 2.0 * math.log(p.eta))
    return float(out) if out.ndim == 0 else out


def default_k(n, multiplicity=1):
    """Smallest exponent making both centre-of-mass integrals diverge.

    ``multiplicity`` is the order of vanishing of f at the root and may be
    fractional (``sqrt|x|`` has order 1/2).  Never less than ``n``.
    """
    if n < 1 or not multiplicity > 0:
        raise ValueError("n must be >= 1 and multiplicity > 0")
    return max(int(n), math.ceil((n + multiplicity) / (2 * multiplicity)))
