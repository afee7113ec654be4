"""Expected squared logistic weights under a shifted unit normal.

``rho(a)`` is E[w_a(Y)^2] with Y ~ N(a, 1) and w_a(y) = 1 / (1 + exp(2 a y)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .numerics import QuadratureConfig, fixed_gauss_expectation, gauss_expectation

__all__ = [
    "LogisticWeight",
    "rho",
    "rho_shifted",
    "rho_prime",
    "rho_shifted_prime",
    "rho_shifted_many",
]


@dataclass(frozen=True)
class LogisticWeight:
    """w(y) = 1 / (1 + exp(2 * slope * y)), evaluated without overflow."""

    slope: float

    def __post_init__(self):
        _check_slope(self.slope)

    def __call__(self, y):
        return expit(-2.0 * self.slope * np.asarray(y, dtype=float))

    def complement(self, y):
        """1 - w(y), which is also w(-y)."""
        return expit(2.0 * self.slope * np.asarray(y, dtype=float))

    def derivative(self, y):
        w = self(y)
        return -2.0 * self.slope * w * (1.0 - w)

    def second_derivative(self, y):
        w = self(y)
        return 4.0 * self.slope**2 * w * (1.0 - w) * (1.0 - 2.0 * w)


def _check_slope(a):
    if not (isinstance(a, (int, float, np.floating)) and math.isfinite(a) and a >= 0):
        raise ValueError(f"slope must be finite and >= 0, got {a!r}")


def _check_center(c):
    if not math.isfinite(c):
        raise ValueError(f"center must be finite, got {c!r}")


def rho_shifted(slope: float, center: float, cfg: QuadratureConfig | None = None) -> float:
    """E[w_slope(Y)^2] for Y ~ N(center, 1)."""
    _check_slope(slope)
    _check_center(center)
    if slope == 0:
        return 0.25
    w = LogisticWeight(float(slope))
    return gauss_expectation(lambda y: np.square(w(y)), center, cfg)


def rho(a: float, cfg: QuadratureConfig | None = None) -> float:
    """rho(a) = E[w_a(Y)^2] with Y ~ N(a, 1); lies in (0, 1/4]."""
    return rho_shifted(a, a, cfg)


def rho_prime(a: float, cfg: QuadratureConfig | None = None) -> float:
    """Derivative of :func:`rho`, from differentiating under the integral.

    d/da of w_a(y)^2 contributes -4 y e^{2ay} / (e^{2ay} + 1)^3, and moving
    the density contributes w_a(y)^2 (y - a).
    """
    _check_slope(a)
    a = float(a)

    def integrand(y):
        w = expit(-2.0 * a * y)
        d = expit(2.0 * a * y)
        return -4.0 * y * d * w * w + w * w * (y - a)

    return gauss_expectation(integrand, a, cfg)


def rho_shifted_prime(slope: float, center: float, cfg: QuadratureConfig | None = None) -> float:
    """Derivative of :func:`rho_shifted` with respect to ``center``."""
    _check_slope(slope)
    _check_center(center)
    w = LogisticWeight(float(slope))
    return gauss_expectation(lambda y: np.square(w(y)) * (y - center), center, cfg)


def rho_shifted_many(slope: float, centers) -> np.ndarray:
    """Vectorized :func:`rho_shifted` over an array of centers (fixed rule)."""
    _check_slope(slope)
    return fixed_gauss_expectation(lambda y: expit(-2.0 * slope * y) ** 2, centers)
