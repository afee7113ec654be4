"""Treatment rules: maps from the observed estimate to a treated fraction."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, fields
from typing import ClassVar

import numpy as np
from scipy.special import expit, ndtr

from .calibration import ProblemSpec, solve_a_star, tau_star

__all__ = [
    "TreatmentRule",
    "LogisticRule",
    "MsrOptimal",
    "PointIdLogistic",
    "CustomLogistic",
    "MeanRegretStep",
    "MeanRegretGaussian",
    "ConstantHalf",
    "SubproblemSpec",
    "MEAN_REGRET_THRESHOLD",
    "evaluate",
    "msr_optimal_rule",
    "point_id_rule",
    "mean_regret_rule",
    "subproblem_rule",
    "rule_from_dict",
    "rule_from_json",
]

# k / sigma at or below which the empirical success rule is mean-regret minimax
MEAN_REGRET_THRESHOLD = math.sqrt(math.pi / 2.0)


def _as_obs(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("observation must be finite")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


class TreatmentRule:
    """Base class. Subclasses are frozen dataclasses tagged by ``variant``.

    ``rule(x)`` returns the treated fraction at observation ``x`` (welfare
    units, scalar or array); ``rule.complement(x)`` returns ``1 - rule(x)``
    computed without cancellation.
    """

    variant: ClassVar[str]
    # observations where the rule jumps or is steepest; quadrature splits here
    breakpoints: ClassVar[tuple[float, ...]] = (0.0,)
    continuous: ClassVar[bool] = True

    def _value(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _complement(self, x: np.ndarray) -> np.ndarray:
        return 1.0 - self._value(x)

    def __call__(self, x):
        arr = _as_obs(x)
        return _out(self._value(arr), x)

    def complement(self, x):
        arr = _as_obs(x)
        return _out(self._complement(arr), x)

    def to_dict(self) -> dict:
        return {"variant": self.variant, **asdict(self)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


class LogisticRule(TreatmentRule):
    """Rules of the form ``expit(2 * obs_slope * x)``."""

    @property
    def obs_slope(self) -> float:
        raise NotImplementedError

    def t_slope(self, sigma: float) -> float:
        """Coefficient on the t-statistic ``x / sigma`` for a given sampling sd."""
        return self.obs_slope * sigma

    def _value(self, x):
        return expit(2.0 * self.obs_slope * x)

    def _complement(self, x):
        return expit(-2.0 * self.obs_slope * x)


def _positive(name, v):
    if not (math.isfinite(v) and v > 0):
        raise ValueError(f"{name} must be finite and > 0, got {v!r}")


@dataclass(frozen=True)
class MsrOptimal(LogisticRule):
    """Minimax mean-square-regret rule ``expit(2 a* theta_hat / sigma)``."""

    a_coeff: float
    sigma: float
    variant: ClassVar[str] = "MsrOptimal"

    def __post_init__(self):
        _positive("a_coeff", self.a_coeff)
        _positive("sigma", self.sigma)

    @property
    def obs_slope(self):
        return self.a_coeff / self.sigma


@dataclass(frozen=True)
class PointIdLogistic(LogisticRule):
    """The point-identified (k = 0) rule ``expit(2 tau* theta_hat / sigma)``."""

    tau_star: float
    sigma: float
    variant: ClassVar[str] = "PointIdLogistic"

    def __post_init__(self):
        _positive("tau_star", self.tau_star)
        _positive("sigma", self.sigma)

    @property
    def obs_slope(self):
        return self.tau_star / self.sigma


@dataclass(frozen=True)
class CustomLogistic(LogisticRule):
    """``expit(2 * slope_over_sigma * x)``; a negative slope treats on negative evidence."""

    slope_over_sigma: float
    variant: ClassVar[str] = "CustomLogistic"

    def __post_init__(self):
        if not math.isfinite(self.slope_over_sigma):
            raise ValueError("slope_over_sigma must be finite")

    @property
    def obs_slope(self):
        return self.slope_over_sigma


@dataclass(frozen=True)
class MeanRegretStep(TreatmentRule):
    """Empirical success rule ``1{x >= 0}``; the observation 0 is treated."""

    variant: ClassVar[str] = "MeanRegretStep"
    continuous: ClassVar[bool] = False

    def _value(self, x):
        return np.where(x >= 0, 1.0, 0.0)

    def _complement(self, x):
        return np.where(x >= 0, 0.0, 1.0)


@dataclass(frozen=True)
class MeanRegretGaussian(TreatmentRule):
    """Fractional mean-regret rule ``Phi(x / scale)``."""

    scale: float
    variant: ClassVar[str] = "MeanRegretGaussian"

    def __post_init__(self):
        _positive("scale", self.scale)

    def _value(self, x):
        return ndtr(x / self.scale)

    def _complement(self, x):
        return ndtr(-x / self.scale)


@dataclass(frozen=True)
class ConstantHalf(TreatmentRule):
    """Ignore the data and treat half the population."""

    variant: ClassVar[str] = "ConstantHalf"
    breakpoints: ClassVar[tuple[float, ...]] = ()

    def _value(self, x):
        return np.full_like(x, 0.5, dtype=float)

    def _complement(self, x):
        return np.full_like(x, 0.5, dtype=float)


_VARIANTS = {
    cls.variant: cls
    for cls in (MsrOptimal, PointIdLogistic, CustomLogistic, MeanRegretStep, MeanRegretGaussian, ConstantHalf)
}


def rule_from_dict(d: dict) -> TreatmentRule:
    d = dict(d)
    try:
        cls = _VARIANTS[d.pop("variant")]
    except KeyError as e:
        raise ValueError(f"unknown or missing rule variant: {e}") from None
    names = {f.name for f in fields(cls)}
    if set(d) != names:
        raise ValueError(f"{cls.variant} expects parameters {sorted(names)}, got {sorted(d)}")
    return cls(**{k: float(v) for k, v in d.items()})


def rule_from_json(s: str) -> TreatmentRule:
    return rule_from_dict(json.loads(s))


def evaluate(rule: TreatmentRule, observation):
    """Treated fraction prescribed by ``rule`` at ``observation``."""
    return rule(observation)


def point_id_rule(sigma: float) -> PointIdLogistic:
    return PointIdLogistic(tau_star(), sigma)


def msr_optimal_rule(spec: ProblemSpec) -> MsrOptimal:
    return MsrOptimal(solve_a_star(spec).a_star, spec.sigma)


def mean_regret_rule(spec: ProblemSpec) -> TreatmentRule:
    """Minimax mean-regret rule: the step rule up to ``k = sqrt(pi/2) sigma``, Phi beyond."""
    threshold = MEAN_REGRET_THRESHOLD * spec.sigma
    if spec.k <= threshold:
        return MeanRegretStep()
    # (k - t)(k + t) rather than k^2 - t^2 keeps the scale positive right above t
    scale = math.sqrt(2.0 / math.pi * (spec.k - threshold) * (spec.k + threshold))
    return MeanRegretGaussian(scale)


@dataclass(frozen=True)
class SubproblemSpec:
    """The segment ``{s (a_e, a_t) : s in [-1, 1]}`` of the parameter space."""

    a_e: float
    a_t: float

    def __post_init__(self):
        if not (math.isfinite(self.a_e) and self.a_e >= 0):
            raise ValueError(f"a_e must be finite and >= 0, got {self.a_e!r}")
        if not math.isfinite(self.a_t):
            raise ValueError(f"a_t must be finite, got {self.a_t!r}")

    def validate(self, spec: ProblemSpec) -> None:
        if abs(self.a_t - self.a_e) > spec.k * (1 + 1e-12) + 1e-15:
            raise ValueError(f"(a_e, a_t)=({self.a_e}, {self.a_t}) is outside the parameter space for k={spec.k}")

    def point(self, s: float) -> tuple[float, float]:
        return s * self.a_e, s * self.a_t


def subproblem_rule(sub: SubproblemSpec, spec: ProblemSpec) -> TreatmentRule:
    """Minimax rule for the one-dimensional subproblem along ``sub``.

    The coefficient on the signed t-statistic ``sign(a_t) x / sigma`` is
    ``min(a_e / sigma, tau*)``. With ``a_e = 0`` the data carry no
    information and the rule is the constant 1/2.
    """
    sub.validate(spec)
    if sub.a_t == 0:
        warnings.warn("a_t = 0: every rule is minimax on this segment", RuntimeWarning, stacklevel=2)
        return ConstantHalf()
    if sub.a_e == 0:
        return ConstantHalf()
    coeff = min(sub.a_e / spec.sigma, tau_star())
    return CustomLogistic(math.copysign(coeff, sub.a_t) / spec.sigma)
