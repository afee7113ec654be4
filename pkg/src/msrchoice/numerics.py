"""Numerical primitives: Gaussian expectations, bounded scalar maximization,
sign-change detection.

Every expectation in the package is taken against a unit-variance normal
density; callers standardize their integrands before calling
:func:`gauss_expectation`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "QuadratureConfig",
    "OptimizerConfig",
    "NumericsError",
    "IntegrationError",
    "ToleranceNotMetError",
    "InvalidBracketError",
    "EvaluationError",
    "ScalarMax",
    "SignChange",
    "PLUS_TO_MINUS",
    "MINUS_TO_PLUS",
    "gauss_expectation",
    "fixed_gauss_expectation",
    "maximize_scalar",
    "sign_changes",
    "normal_pdf",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_GL_LO = np.polynomial.legendre.leggauss(15)
_GL_HI = np.polynomial.legendre.leggauss(31)
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

PLUS_TO_MINUS = "plus-to-minus"
MINUS_TO_PLUS = "minus-to-plus"


class NumericsError(ArithmeticError):
    """Base class for numerical failures raised by this package."""


class IntegrationError(NumericsError):
    def __init__(self, message: str, abscissa: float):
        super().__init__(f"{message} (at y={abscissa!r})")
        self.abscissa = abscissa


class ToleranceNotMetError(NumericsError):
    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(f"{message}: estimate={estimate!r}, error~{error:.3g}")
        self.estimate = estimate
        self.error = error


class InvalidBracketError(NumericsError, ValueError):
    pass


class EvaluationError(NumericsError):
    def __init__(self, message: str, abscissa: float):
        super().__init__(f"{message} (at x={abscissa!r})")
        self.abscissa = abscissa


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    truncation_radius: float = 12.0
    max_subdivisions: int = 60

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if not self.truncation_radius >= 6:
            raise ValueError("truncation_radius must be at least 6")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be positive")


@dataclass(frozen=True)
class OptimizerConfig:
    x_tol: float = 1e-10
    grid_points: int = 2001
    max_iter: int = 200

    def __post_init__(self):
        if not self.x_tol > 0:
            raise ValueError("x_tol must be positive")
        if self.grid_points < 3:
            raise ValueError("grid_points must be at least 3")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


DEFAULT_QUADRATURE = QuadratureConfig()
DEFAULT_OPTIMIZER = OptimizerConfig()


def normal_pdf(x):
    return np.exp(-0.5 * np.square(x)) / _SQRT_2PI


def _eval_integrand(f, y):
    vals = np.asarray(f(y), dtype=float)
    if vals.shape != y.shape:
        vals = np.broadcast_to(vals, y.shape)
    if not np.all(np.isfinite(vals)):
        bad = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise IntegrationError("integrand is not finite", float(y[bad]))
    return vals


def _panel(f, mean, a, b):
    half, mid = 0.5 * (b - a), 0.5 * (b + a)
    est = []
    for nodes, weights in (_GL_LO, _GL_HI):
        y = mid + half * nodes
        est.append(half * np.dot(weights, _eval_integrand(f, y) * normal_pdf(y - mean)))
    return est[1], abs(est[1] - est[0])


def gauss_expectation(
    f: Callable[[np.ndarray], np.ndarray],
    mean: float,
    cfg: QuadratureConfig | None = None,
    breakpoints: Sequence[float] = (),
) -> float:
    """Return E[f(Y)] for Y ~ N(mean, 1).

    ``f`` is called with numpy arrays of abscissae. The real line is cut to
    ``mean +/- cfg.truncation_radius`` and integrated with adaptive
    Gauss-Legendre panels (15 vs 31 nodes); the panel with the largest error
    estimate is bisected until the total error falls under
    ``abs_tol + rel_tol * |result|``. ``breakpoints`` are abscissae where
    ``f`` jumps or bends sharply; panels are split there up front.
    """
    cfg = cfg or DEFAULT_QUADRATURE
    mean = float(mean)
    if not math.isfinite(mean):
        raise ValueError(f"mean must be finite, got {mean!r}")
    lo, hi = mean - cfg.truncation_radius, mean + cfg.truncation_radius
    cuts = sorted({mean, *(float(b) for b in breakpoints if lo < b < hi)})
    edges = [lo, *cuts, hi]
    panels = []
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            panels.append((a, b, *_panel(f, mean, a, b)))

    splits = 0
    while True:
        total = math.fsum(p[2] for p in panels)
        error = math.fsum(p[3] for p in panels)
        if error <= cfg.abs_tol + cfg.rel_tol * abs(total):
            return total
        if splits >= cfg.max_subdivisions:
            raise ToleranceNotMetError("subdivision budget exhausted", total, error)
        worst = max(range(len(panels)), key=lambda i: panels[i][3])
        a, b, _, _ = panels.pop(worst)
        m = 0.5 * (a + b)
        panels.append((a, m, *_panel(f, mean, a, m)))
        panels.append((m, b, *_panel(f, mean, m, b)))
        splits += 1


def fixed_gauss_expectation(f, means, radius: float = 12.0, panels: int = 96, order: int = 16):
    """Vectorized E[f(Y)] for Y ~ N(m, 1), one value per entry of ``means``.

    Uses a fixed composite Gauss-Legendre rule in the standardized variable
    ``z = y - m``. ``f`` receives a 2-D array of shape ``(means.size, nodes)``;
    the result has the shape of ``means``.
    Intended for grid scans over smooth integrands; accuracy is checked
    against :func:`gauss_expectation` in the test suite.
    """
    means = np.asarray(means, dtype=float)
    shape = means.shape
    means = means.ravel()
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(-radius, radius, panels + 1)
    half = 0.5 * np.diff(edges)
    z = ((edges[:-1] + edges[1:]) / 2)[:, None] + half[:, None] * nodes[None, :]
    w = (half[:, None] * weights[None, :]).ravel() * normal_pdf(z.ravel())
    y = means[:, None] + z.ravel()[None, :]
    vals = np.asarray(f(y), dtype=float)
    return (vals @ w).reshape(shape)


class ScalarMax(NamedTuple):
    argmax: float
    max_value: float
    ties: int = 1


def _checked(g, x):
    v = float(g(x))
    if not math.isfinite(v):
        raise EvaluationError("objective is not finite", x)
    return v


def maximize_scalar(
    g: Callable[[float], float],
    lo: float,
    hi: float,
    cfg: OptimizerConfig | None = None,
) -> ScalarMax:
    """Maximize ``g`` on ``[lo, hi]`` by grid scan plus golden-section polish.

    The grid maximizer picks the bracketing cell; on exact ties (within
    1e-12) the smallest abscissa wins. The polished point replaces the grid
    point only when it is strictly better. ``ties`` counts grid points within
    1e-12 of the maximum that are not adjacent to the winner, so callers can
    flag multiple maxima.
    """
    cfg = cfg or DEFAULT_OPTIMIZER
    lo, hi = float(lo), float(hi)
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise InvalidBracketError(f"need finite lo < hi, got [{lo}, {hi}]")
    xs = np.linspace(lo, hi, cfg.grid_points)
    vals = np.array([_checked(g, float(x)) for x in xs])
    vmax = vals.max()
    close = np.flatnonzero(vals >= vmax - 1e-12)
    i = int(close[0])
    ties = 1 + int(np.count_nonzero(np.diff(close) > 1))

    best_x, best_v = float(xs[i]), float(vals[i])
    a = float(xs[max(i - 1, 0)])
    b = float(xs[min(i + 1, cfg.grid_points - 1)])
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    gc, gd = _checked(g, c), _checked(g, d)
    for _ in range(cfg.max_iter):
        if b - a <= cfg.x_tol:
            break
        if gc >= gd:
            b, d, gd = d, c, gc
            c = b - _INV_PHI * (b - a)
            gc = _checked(g, c)
        else:
            a, c, gc = c, d, gd
            d = a + _INV_PHI * (b - a)
            gd = _checked(g, d)
    x_ref, v_ref = (c, gc) if gc >= gd else (d, gd)
    if v_ref > best_v:
        best_x, best_v = x_ref, v_ref
    return ScalarMax(best_x, best_v, ties)


class SignChange(NamedTuple):
    left: int
    right: int
    direction: str


def sign_changes(values: Sequence[float], zero_tol: float = 0.0) -> list[SignChange]:
    """Strict sign transitions in an ordered sequence.

    Entries with ``|v| <= zero_tol`` count as zero and are skipped, so a run
    of zeros between a positive and a negative entry yields one transition,
    reported between the last nonzero entry before the run and the first
    after it.
    """
    vals = np.asarray(values, dtype=float)
    if vals.size < 2:
        raise ValueError("need at least two values")
    signs = np.where(np.abs(vals) <= zero_tol, 0, np.sign(vals)).astype(int)
    out = []
    prev_idx, prev_sign = None, 0
    for idx, s in enumerate(signs):
        if s == 0:
            continue
        if prev_sign and s != prev_sign:
            direction = PLUS_TO_MINUS if prev_sign > 0 else MINUS_TO_PLUS
            out.append(SignChange(prev_idx, idx, direction))
        prev_idx, prev_sign = idx, s
    return out
