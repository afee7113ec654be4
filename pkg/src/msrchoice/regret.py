"""Regret functionals of treatment rules and worst-case searches over the
parameter space ``{(theta_e, theta_t): |theta_t - theta_e| <= k}``."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit, ndtr, owens_t

from .calibration import ProblemSpec, tau_star
from .numerics import (
    OptimizerConfig,
    QuadratureConfig,
    fixed_gauss_expectation,
    gauss_expectation,
    maximize_scalar,
)
from .rho import rho, rho_shifted, rho_shifted_many
from .rules import (
    ConstantHalf,
    LogisticRule,
    MeanRegretGaussian,
    MeanRegretStep,
    SubproblemSpec,
    TreatmentRule,
    subproblem_rule,
)

__all__ = [
    "StatePoint",
    "RiskReport",
    "WorstCaseResult",
    "DivergingWorstCaseError",
    "mean_square_regret",
    "mean_regret",
    "regret_moments",
    "msr_on_grid",
    "regret_distribution",
    "worst_case_msr",
    "bayes_msr_two_point",
    "subproblem_worst_case",
    "subproblem_worst_case_grid",
    "regret_surface",
    "SURFACE_HEADER",
]

SURFACE_HEADER = ("theta_e", "theta_t", "msr", "mean_regret")


class DivergingWorstCaseError(ArithmeticError):
    """The risk keeps growing as the search region expands."""

    def __init__(self, message: str, bound: float, incumbent: float):
        super().__init__(f"{message} (bound={bound:.6g}, incumbent={incumbent:.6g})")
        self.bound = bound
        self.incumbent = incumbent


@dataclass(frozen=True)
class StatePoint:
    theta_e: float
    theta_t: float

    def __post_init__(self):
        if not (math.isfinite(self.theta_e) and math.isfinite(self.theta_t)):
            raise ValueError("state coordinates must be finite")

    def __neg__(self) -> StatePoint:
        return StatePoint(-self.theta_e, -self.theta_t)

    def in_space(self, spec: ProblemSpec, tol: float = 1e-12) -> bool:
        return abs(self.theta_t - self.theta_e) <= spec.k + tol * max(1.0, spec.k)


@dataclass(frozen=True)
class RiskReport:
    mean_regret: float
    mean_square_regret: float
    regret_variance: float
    method: str
    mc_draws: int | None = None
    mc_std_error: float | None = None
    mean_regret_std_error: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> RiskReport:
        return cls(**d)


@dataclass(frozen=True)
class WorstCaseResult:
    value: float
    argmax: StatePoint
    search_grid: dict = field(default_factory=dict)
    refined: bool = False
    method: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["argmax"] = asdict(self.argmax)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> WorstCaseResult:
        d = dict(d)
        d["argmax"] = StatePoint(**d["argmax"])
        return cls(**d)


def _check_sigma(sigma):
    if not (math.isfinite(sigma) and sigma > 0):
        raise ValueError(f"sigma must be finite and > 0, got {sigma!r}")


def _expectation(rule: TreatmentRule, state: StatePoint, sigma: float, power: int, cfg) -> float:
    """E[(1{theta_t >= 0} - rule(X))**power] for X ~ N(theta_e, sigma^2)."""
    gap = rule.complement if state.theta_t >= 0 else rule
    sign = 1.0 if state.theta_t >= 0 else -1.0
    breaks = [b / sigma for b in rule.breakpoints]
    return gauss_expectation(
        lambda y: (sign * gap(sigma * y)) ** power, state.theta_e / sigma, cfg, breakpoints=breaks
    )


def mean_square_regret(
    rule: TreatmentRule, state: StatePoint, sigma: float, cfg: QuadratureConfig | None = None
) -> float:
    """theta_t^2 E[(1{theta_t >= 0} - rule(theta_hat))^2], theta_hat ~ N(theta_e, sigma^2)."""
    _check_sigma(sigma)
    if state.theta_t == 0:
        return 0.0
    return state.theta_t**2 * _expectation(rule, state, sigma, 2, cfg)


def mean_regret(rule: TreatmentRule, state: StatePoint, sigma: float, cfg: QuadratureConfig | None = None) -> float:
    """theta_t E[1{theta_t >= 0} - rule(theta_hat)]; never negative."""
    _check_sigma(sigma)
    if state.theta_t == 0:
        return 0.0
    return state.theta_t * _expectation(rule, state, sigma, 1, cfg)


def _bvn_equal(h, r):
    """P(Z1 <= h, Z2 <= h) for standard normals with correlation r in [0, 1)."""
    return ndtr(h) - 2.0 * owens_t(h, math.sqrt((1.0 - r) / (1.0 + r)))


def regret_moments(rule: TreatmentRule, theta_e, sigma: float):
    """Vectorized sampling moments of a rule at each ``theta_e``.

    Returns ``(E[(1 - d)^2], E[d^2], E[1 - d], E[d])`` with ``d = rule(X)``,
    ``X ~ N(theta_e, sigma^2)``. Closed forms are used for the step,
    Gaussian-CDF and constant rules; logistic rules go through a fixed
    composite Gauss-Legendre rule.
    """
    _check_sigma(sigma)
    m = np.atleast_1d(np.asarray(theta_e, dtype=float)) / sigma
    if isinstance(rule, ConstantHalf):
        q, h = np.full_like(m, 0.25), np.full_like(m, 0.5)
        return q, q.copy(), h, h.copy()
    if isinstance(rule, MeanRegretStep):
        p_treat, p_not = ndtr(m), ndtr(-m)
        return p_not, p_treat, p_not.copy(), p_treat.copy()
    if isinstance(rule, MeanRegretGaussian):
        v = math.hypot(rule.scale, sigma)
        h = m * sigma / v
        r = sigma**2 / v**2
        return _bvn_equal(-h, r), _bvn_equal(h, r), ndtr(-h), ndtr(h)
    if isinstance(rule, LogisticRule):
        c = rule.t_slope(sigma)
        comp2 = fixed_gauss_expectation(lambda y: expit(-2.0 * c * y) ** 2, m)
        val2 = fixed_gauss_expectation(lambda y: expit(2.0 * c * y) ** 2, m)
        comp1 = fixed_gauss_expectation(lambda y: expit(-2.0 * c * y), m)
        return comp2, val2, comp1, 1.0 - comp1
    # generic fallback: smooth rules only
    comp2 = fixed_gauss_expectation(lambda y: rule.complement(sigma * y) ** 2, m)
    val2 = fixed_gauss_expectation(lambda y: rule(sigma * y) ** 2, m)
    comp1 = fixed_gauss_expectation(lambda y: rule.complement(sigma * y), m)
    return comp2, val2, comp1, 1.0 - comp1


def msr_on_grid(rule: TreatmentRule, theta_e, offsets, sigma: float) -> np.ndarray:
    """MSR on the grid ``theta_t = theta_e[i] + offsets[j]``; shape (len(theta_e), len(offsets))."""
    theta_e = np.atleast_1d(np.asarray(theta_e, dtype=float))
    offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
    comp2, val2, _, _ = regret_moments(rule, theta_e, sigma)
    tt = theta_e[:, None] + offsets[None, :]
    return tt**2 * np.where(tt >= 0, comp2[:, None], val2[:, None])


class _Moments:
    """Chan et al. pairwise merge of count / mean / centered sum of squares."""

    def __init__(self):
        self.n, self.mean, self.m2 = 0, 0.0, 0.0

    def add(self, x: np.ndarray):
        nb = x.size
        mb = float(np.mean(x))
        m2b = float(np.sum((x - mb) ** 2))
        n = self.n + nb
        delta = mb - self.mean
        self.mean += delta * nb / n
        self.m2 += m2b + delta**2 * self.n * nb / n
        self.n = n

    def variance(self, ddof: int = 0) -> float:
        return self.m2 / (self.n - ddof)


def regret_distribution(
    rule: TreatmentRule,
    state: StatePoint,
    sigma: float,
    draws: int,
    seed: int,
    chunk: int = 1_000_000,
) -> RiskReport:
    """Monte Carlo regret moments from ``draws`` simulated estimates.

    Uses a Philox (counter-based) stream so a seed fixes the result.
    ``mc_std_error`` is the standard error of the MSR estimate; both
    standard errors are ``None`` when ``draws == 1``.
    """
    _check_sigma(sigma)
    if int(draws) != draws or draws < 1:
        raise ValueError(f"draws must be a positive integer, got {draws!r}")
    rng = np.random.Generator(np.random.Philox(seed))
    regret, sq = _Moments(), _Moments()
    indicator = 1.0 if state.theta_t >= 0 else 0.0
    left = int(draws)
    while left:
        n = min(chunk, left)
        x = state.theta_e + sigma * rng.standard_normal(n)
        r = state.theta_t * (indicator - np.asarray(rule(x), dtype=float))
        regret.add(r)
        sq.add(r * r)
        left -= n
    se = se_mean = None
    if draws > 1:
        se = math.sqrt(sq.variance(1) / draws)
        se_mean = math.sqrt(regret.variance(1) / draws)
    return RiskReport(
        mean_regret=regret.mean,
        mean_square_regret=sq.mean,
        regret_variance=regret.variance(0),
        method="monte-carlo",
        mc_draws=int(draws),
        mc_std_error=se,
        mean_regret_std_error=se_mean,
    )


def bayes_msr_two_point(
    rule: TreatmentRule, spec: ProblemSpec, support_point: StatePoint, cfg: QuadratureConfig | None = None
) -> float:
    """Bayes MSR under the prior putting mass 1/2 on each of ``+/- support_point``."""
    if not support_point.in_space(spec):
        raise ValueError(f"{support_point} is outside the parameter space for k={spec.k}")
    return 0.5 * mean_square_regret(rule, support_point, spec.sigma, cfg) + 0.5 * mean_square_regret(
        rule, -support_point, spec.sigma, cfg
    )


def subproblem_worst_case(sub: SubproblemSpec, spec: ProblemSpec) -> float:
    """Closed-form worst-case MSR of the subproblem's minimax rule along ``sub``."""
    sub.validate(spec)
    ts = tau_star()
    ratio = sub.a_e / spec.sigma
    if ratio >= ts:
        return (sub.a_t * spec.sigma / sub.a_e) ** 2 * ts**2 * rho(ts)
    return sub.a_t**2 * rho(ratio)


def subproblem_worst_case_grid(sub: SubproblemSpec, spec: ProblemSpec, points: int = 2001) -> tuple[float, float]:
    """Direct sup over ``s in [-1, 1]`` of the subproblem rule's MSR; returns ``(value, s)``."""
    rule = subproblem_rule(sub, spec)
    s = np.linspace(-1.0, 1.0, points)
    theta_e, theta_t = s * sub.a_e, s * sub.a_t
    comp2, val2, _, _ = regret_moments(rule, theta_e, spec.sigma)
    risk = theta_t**2 * np.where(theta_t >= 0, comp2, val2)
    i = int(np.argmax(risk))
    return float(risk[i]), float(s[i])


def _incumbent(values, xs):
    i = int(np.argmax(values))
    return i, float(values[i]), float(xs[i])


def _worst_case_reduced(rule: LogisticRule, spec: ProblemSpec, quiet_steps: int = 3) -> WorstCaseResult:
    """Worst case of a symmetric nondecreasing logistic rule via the 1-D profile.

    For ``theta_t >= 0`` the risk grows in ``theta_t``, so the sup sits on
    ``theta_t = theta_e + k``; in t-statistic units the profile is
    ``sigma^2 (x + k/sigma)^2 rho_shifted(c, x)`` on ``x >= -k/sigma``.
    """
    sigma, r = spec.sigma, spec.ratio()
    c = rule.t_slope(sigma)

    def profile(x):
        x = np.asarray(x, dtype=float)
        return sigma**2 * (x + r) ** 2 * rho_shifted_many(c, x)

    limit = 1e3 * max(sigma, spec.k) / sigma
    upper = max(4.0, 2.0 * tau_star() + r)
    xs = np.linspace(-r, upper, 4001)
    vals = profile(xs)
    quiet = 0
    while quiet < quiet_steps:
        if upper > limit:
            raise DivergingWorstCaseError("profile still growing", upper * sigma, float(vals.max()))
        new_x = np.linspace(upper, 2.0 * upper, 2001)[1:]
        new_v = profile(new_x)
        quiet = quiet + 1 if new_v.max() < 1e-6 * vals.max() else 0
        xs, vals = np.concatenate([xs, new_x]), np.concatenate([vals, new_v])
        upper *= 2.0
    i, _, x0 = _incumbent(vals, xs)
    lo, hi = float(xs[max(i - 1, 0)]), float(xs[min(i + 1, xs.size - 1)])

    def exact(x):
        return sigma**2 * (x + r) ** 2 * rho_shifted(c, x)

    best = maximize_scalar(exact, lo, hi, OptimizerConfig(grid_points=11, x_tol=1e-10))
    x = best.argmax
    return WorstCaseResult(
        value=best.max_value,
        argmax=StatePoint(sigma * x, sigma * x + spec.k),
        search_grid={"t_lower": -r, "t_upper": upper, "points": int(xs.size)},
        refined=True,
        method="reduced",
    )


def _worst_case_grid2d(
    rule: TreatmentRule,
    spec: ProblemSpec,
    spacing: float | None = None,
    offset_points: int = 41,
    zoom_rounds: int = 5,
) -> WorstCaseResult:
    """Worst case by a 2-D grid over ``theta_e in [-B, B]``, ``theta_t - theta_e in [-k, k]``.

    ``B`` doubles until the risk on the outermost ``theta_e`` columns drops
    below 1e-6 of the incumbent; the grid maximizer is then refined by
    repeatedly zooming a local grid around it.
    """
    sigma, k = spec.sigma, spec.k
    scale = max(sigma, k)
    spacing = spacing or sigma / 25.0
    limit = 1e3 * scale
    offsets = np.linspace(-k, k, offset_points) if k > 0 else np.zeros(1)

    bound = 4.0 * scale
    while True:
        n = int(math.ceil(2 * bound / spacing)) + 1
        theta_e = np.linspace(-bound, bound, n)
        risk = msr_on_grid(rule, theta_e, offsets, sigma)
        incumbent = float(risk.max())
        edge = float(max(risk[0].max(), risk[-1].max()))
        if edge < 1e-6 * incumbent:
            break
        if bound * 2 > limit:
            raise DivergingWorstCaseError("risk at the search boundary is not negligible", bound, incumbent)
        bound *= 2.0

    flat = int(np.argmax(risk))
    i, j = divmod(flat, offsets.size)
    te, off = float(theta_e[i]), float(offsets[j])
    h_e = theta_e[1] - theta_e[0]
    h_o = offsets[1] - offsets[0] if offsets.size > 1 else 0.0
    for _ in range(zoom_rounds):
        local_e = np.linspace(te - 2 * h_e, te + 2 * h_e, 41)
        local_o = np.clip(np.linspace(off - 2 * h_o, off + 2 * h_o, 41), -k, k) if h_o else np.array([off])
        local = msr_on_grid(rule, local_e, local_o, sigma)
        li, lj = divmod(int(np.argmax(local)), local_o.size)
        te, off = float(local_e[li]), float(local_o[lj])
        h_e, h_o = h_e / 10.0, h_o / 10.0

    state = StatePoint(te, te + off)
    return WorstCaseResult(
        value=mean_square_regret(rule, state, sigma),
        argmax=state,
        search_grid={
            "theta_e_bound": bound,
            "theta_e_spacing": float(spacing),
            "offset_points": int(offsets.size),
            "zoom_rounds": zoom_rounds,
        },
        refined=True,
        method="grid2d",
    )


def worst_case_msr(rule: TreatmentRule, spec: ProblemSpec, method: str = "auto") -> WorstCaseResult:
    """sup over the parameter space of the rule's mean square regret.

    ``method``: ``"reduced"`` (1-D profile; nondecreasing logistic rules
    only), ``"grid2d"`` (full 2-D search, any rule) or ``"auto"``.
    Raises :class:`DivergingWorstCaseError` when the risk is unbounded,
    e.g. for the constant rule.
    """
    reducible = isinstance(rule, LogisticRule) and rule.obs_slope > 0
    if method == "auto":
        method = "reduced" if reducible else "grid2d"
    if method == "reduced":
        if not reducible:
            raise ValueError(f"{rule.variant} does not admit the 1-D reduction")
        return _worst_case_reduced(rule, spec)
    if method == "grid2d":
        return _worst_case_grid2d(rule, spec)
    raise ValueError(f"unknown method {method!r}")


def regret_surface(rule: TreatmentRule, spec: ProblemSpec, grid_min: float, grid_max: float, grid_points: int):
    """Rows ``(theta_e, theta_t, msr, mean_regret)`` on a square grid clipped to the parameter space."""
    if not grid_min < grid_max or grid_points < 2:
        raise ValueError("need grid_min < grid_max and grid_points >= 2")
    axis = np.linspace(grid_min, grid_max, grid_points)
    comp2, val2, comp1, val1 = regret_moments(rule, axis, spec.sigma)
    rows = []
    for i, te in enumerate(axis):
        for tt in axis:
            if abs(tt - te) > spec.k * (1 + 1e-12):
                continue
            pos = tt >= 0
            msr = tt**2 * (comp2[i] if pos else val2[i])
            mr = tt * (comp1[i] if pos else -val1[i])
            rows.append((float(te), float(tt), float(msr), float(mr)))
    return rows
