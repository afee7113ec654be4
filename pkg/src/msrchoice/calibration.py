"""Calibration of the logistic coefficient of the minimax rule.

Two scalar problems are solved here:

* the universal constant ``tau_star`` maximizing ``tau^2 rho(tau)`` on
  ``[0, inf)``, and
* the problem-specific ``a_star`` maximizing ``(a + k/sigma)^2 rho(a)`` on
  ``[0, tau_star]``.
"""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import asdict, dataclass
from functools import lru_cache

from scipy.optimize import brentq

from .numerics import OptimizerConfig, maximize_scalar
from .rho import rho, rho_prime

__all__ = [
    "ProblemSpec",
    "CalibrationResult",
    "solve_tau_star",
    "tau_star",
    "solve_a_star",
    "foc_residual",
    "hardest_objective",
    "TAU_SEARCH_UPPER",
]

TAU_SEARCH_UPPER = 6.0
_SOC_STEP = 1e-4


@dataclass(frozen=True)
class ProblemSpec:
    """Known environment: identified-set half-width ``k`` and sampling sd ``sigma``.

    The identified set for the target effect is ``[theta_e - k, theta_e + k]``
    and the estimate of ``theta_e`` has standard deviation ``sigma``.
    """

    k: float
    sigma: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.k) and self.k >= 0):
            raise ValueError(f"k must be finite and >= 0, got {self.k!r}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be finite and > 0, got {self.sigma!r}")

    def ratio(self) -> float:
        return self.k / self.sigma


@dataclass(frozen=True)
class CalibrationResult:
    tau_star: float
    a_star: float
    worst_case_msr: float
    foc_residual: float
    soc_value: float
    grid_points_used: int
    k: float
    sigma: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationResult":
        return cls(**d)


@lru_cache(maxsize=None)
def _rho(a: float) -> float:
    return rho(a)


def _tau_objective(t: float) -> float:
    return t * t * _rho(t)


_tau_lock = threading.Lock()
_tau_cache: dict[OptimizerConfig, tuple[float, float]] = {}


def solve_tau_star(cfg: OptimizerConfig | None = None) -> tuple[float, float]:
    """Return ``(tau_star, tau_star**2 * rho(tau_star))``.

    The search runs on ``[0, 6]``; the objective at 6 is checked to be below
    10% of the maximum, otherwise the truncation is rejected.
    """
    cfg = cfg or OptimizerConfig()
    with _tau_lock:
        if cfg in _tau_cache:
            return _tau_cache[cfg]
        res = maximize_scalar(_tau_objective, 0.0, TAU_SEARCH_UPPER, cfg)
        tail = _tau_objective(TAU_SEARCH_UPPER)
        if not tail < 0.1 * res.max_value:
            raise ArithmeticError(
                f"objective at {TAU_SEARCH_UPPER} is {tail:.3g}, not negligible "
                f"against the maximum {res.max_value:.3g}"
            )
        _tau_cache[cfg] = (res.argmax, res.max_value)
        return _tau_cache[cfg]


def clear_caches() -> None:
    """Forget memoized rho values and tau* solutions (for cold-start timing)."""
    with _tau_lock:
        _tau_cache.clear()
        _rho.cache_clear()


def tau_star() -> float:
    return solve_tau_star()[0]


def hardest_objective(a: float, spec: ProblemSpec) -> float:
    """``(a + k/sigma)^2 rho(a)``: worst-case MSR of the subproblem at ``a``, over sigma^2."""
    return (a + spec.ratio()) ** 2 * _rho(a)


def foc_residual(a: float, spec: ProblemSpec) -> float:
    """``2 rho(a) + (a + k/sigma) rho'(a)``; zero at an interior ``a_star``."""
    if not (math.isfinite(a) and 0 <= a <= tau_star() + 1e-9):
        raise ValueError(f"a must lie in [0, tau_star], got {a!r}")
    return 2.0 * _rho(a) + (a + spec.ratio()) * rho_prime(a)


def _soc(a: float, spec: ProblemSpec) -> float:
    h = _SOC_STEP
    rho2 = (rho_prime(a + h) - rho_prime(max(a - h, 0.0))) / (a + h - max(a - h, 0.0))
    return 3.0 * rho_prime(a) + (a + spec.ratio()) * rho2


def solve_a_star(spec: ProblemSpec, cfg: OptimizerConfig | None = None) -> CalibrationResult:
    """Solve for ``a_star`` in ``argmax_{0 <= a <= tau_star} (a + k/sigma)^2 rho(a)``.

    For ``k > 0`` the grid/golden-section maximizer is polished by solving the
    first-order condition with Brent's method inside the final bracket, when
    it changes sign there. ``k == 0`` returns ``tau_star`` directly.
    """
    if not isinstance(spec, ProblemSpec):
        raise TypeError("spec must be a ProblemSpec")
    cfg = cfg or OptimizerConfig()
    ts, _ = solve_tau_star()
    if spec.k == 0:
        a = ts
    else:
        res = maximize_scalar(lambda x: hardest_objective(x, spec), 0.0, ts, cfg)
        if res.ties > 1:
            warnings.warn(
                f"objective has {res.ties} separated grid maxima for k/sigma={spec.ratio()}",
                RuntimeWarning,
                stacklevel=2,
            )
        a = res.argmax
        step = ts / (cfg.grid_points - 1)
        lo, hi = max(a - step, 0.0), min(a + step, ts)
        f_lo, f_hi = foc_residual(lo, spec), foc_residual(hi, spec)
        if f_lo > 0 > f_hi:
            a = brentq(foc_residual, lo, hi, args=(spec,), xtol=1e-14, rtol=1e-15)
    return CalibrationResult(
        tau_star=ts,
        a_star=a,
        worst_case_msr=spec.sigma**2 * hardest_objective(a, spec),
        foc_residual=foc_residual(a, spec),
        soc_value=_soc(a, spec),
        grid_points_used=cfg.grid_points,
        k=spec.k,
        sigma=spec.sigma,
    )
