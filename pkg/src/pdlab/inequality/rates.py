"""Polynomial rate functions ``beta(r) = c (1 + r**-p)`` and their exponents."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..errors import DomainError


@dataclass(frozen=True)
class RateFunction:
    c: float
    p: float

    def __post_init__(self):
        if not (self.c > 0 and self.p > 0):
            raise DomainError("rate constant and exponent must be positive")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise DomainError("r must be positive")
        out = self.c * (1.0 + r ** -self.p)
        return float(out) if out.ndim == 0 else out


def _check(theta, d):
    if not theta > -0.5:
        raise DomainError("theta must exceed -1/2")
    if int(d) != d or d < 1:
        raise DomainError("d must be an integer >= 1")


def _as_number(theta, value):
    # exact rational arithmetic when theta is a Fraction
    return value if isinstance(theta, Fraction) else float(value)


def rate_exponent_localization(theta, d: int):
    """``(2 theta + d) d + (theta + d/2 - 1) + 3/7``."""
    _check(theta, d)
    t = Fraction(theta) if isinstance(theta, Fraction) else theta
    half = Fraction(1, 2) if isinstance(t, Fraction) else 0.5
    val = (2 * t + d) * d + (t + d * half - 1) + (Fraction(3, 7) if isinstance(t, Fraction) else 3 / 7)
    return _as_number(theta, val)


def rate_exponent_perturbation(theta, d: int):
    """``((theta + d/2)(2d + 1) - 1) / 2``."""
    _check(theta, d)
    t = Fraction(theta) if isinstance(theta, Fraction) else theta
    half = Fraction(1, 2) if isinstance(t, Fraction) else 0.5
    val = half * ((t + d * half) * (2 * d + 1) - 1)
    return _as_number(theta, val)


def rate_exponent_proof(theta, d: int):
    """``(2 theta + d) d + theta + d/2 - 1``: the exponent carried through the
    localisation argument without the ``3/7`` from the cut-off step. Reported
    next to :func:`rate_exponent_perturbation`, which is smaller."""
    _check(theta, d)
    t = Fraction(theta) if isinstance(theta, Fraction) else theta
    half = Fraction(1, 2) if isinstance(t, Fraction) else 0.5
    return _as_number(theta, (2 * t + d) * d + t + d * half - 1)
