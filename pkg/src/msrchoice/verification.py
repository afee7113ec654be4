"""Grid-based falsification checks of the structural claims behind the rule.

Each check returns a :class:`CheckOutcome` whose ``details`` record the grid
and tolerances used, so a report is self-describing. Nothing here is random
except :func:`check_lemma4_symmetry`, which draws from a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

from .calibration import ProblemSpec, solve_a_star, tau_star
from .numerics import (
    PLUS_TO_MINUS,
    QuadratureConfig,
    fixed_gauss_expectation,
    sign_changes,
)
from .regret import (
    DivergingWorstCaseError,
    StatePoint,
    bayes_msr_two_point,
    mean_square_regret,
    worst_case_msr,
)
from .rho import rho, rho_prime, rho_shifted, rho_shifted_many, rho_shifted_prime
from .rules import (
    ConstantHalf,
    CustomLogistic,
    MeanRegretGaussian,
    MeanRegretStep,
    MsrOptimal,
    PointIdLogistic,
    mean_regret_rule,
)

__all__ = [
    "CheckOutcome",
    "check_lemma1_bounded",
    "check_lemma9",
    "check_lemma3",
    "check_lemma4_symmetry",
    "check_lemma5_global_max",
    "check_lemma7_sign_change",
    "check_theorem1",
    "check_uninformative_subproblem",
    "run_suite",
    "format_table",
]

_TIGHT = QuadratureConfig(abs_tol=1e-14, rel_tol=1e-14, max_subdivisions=400)


@dataclass(frozen=True)
class CheckOutcome:
    name: str
    passed: bool
    worst_violation: float
    tolerance: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> CheckOutcome:
        return cls(**d)


def _outcome(name, violation, tolerance, **details):
    violation = float(violation)
    return CheckOutcome(name, bool(violation <= tolerance), violation, float(tolerance), details)


def _check_c(c):
    ts = tau_star()
    if not (math.isfinite(c) and 0 < c < ts):
        raise ValueError(f"c must lie in (0, tau_star={ts:.6f}), got {c!r}")


def check_lemma1_bounded(c: float, points: int = 401) -> CheckOutcome:
    """``tau^2 rho_shifted(c, tau)`` is nondecreasing on ``[0, c]`` and peaks at ``c``."""
    _check_c(c)
    taus = np.linspace(0.0, c, points)
    g = np.array([t * t * rho_shifted(c, t, _TIGHT) for t in taus])
    drop = max(0.0, -float(np.diff(g).min()))
    peak_gap = abs(float(g.max()) - c * c * rho(c, _TIGHT))
    argmax_gap = c - float(taus[int(np.argmax(g))])
    return _outcome(
        f"lemma1_bounded(c={c:.6g})",
        max(drop, peak_gap, argmax_gap),
        1e-8,
        c=c,
        grid=[0.0, c, points],
        largest_decrease=drop,
        peak_gap=peak_gap,
    )


def _g_star(slope, center):
    return center * center * rho_shifted(slope, center, _TIGHT)


def check_lemma9(c: float) -> CheckOutcome:
    """Both strict inequalities comparing slope ``c`` with slope ``tau*``.

    (i)  g_c(tau*) > g_tau*(tau*);  (ii) g_c(c) < g_tau*(c), where
    ``g_s(b) = b^2 rho_shifted(s, b)``. Passes when both margins are positive.
    """
    _check_c(c)
    ts = tau_star()
    m1 = _g_star(c, ts) - _g_star(ts, ts)
    m2 = _g_star(ts, c) - _g_star(c, c)
    return _outcome(f"lemma9(c={c:.6g})", -min(m1, m2), 0.0, c=c, margin_i=m1, margin_ii=m2)


def check_lemma3(spec: ProblemSpec) -> CheckOutcome:
    """Interior ``a_star``, vanishing first-order condition, negative second-order term."""
    cal = solve_a_star(spec)
    interior = 0.0 < cal.a_star < cal.tau_star
    violation = max(abs(cal.foc_residual) - 1e-6, cal.soc_value, -math.inf if interior else math.inf)
    return _outcome(
        f"lemma3(k={spec.k:.6g}, sigma={spec.sigma:.6g})",
        violation,
        0.0,
        a_star=cal.a_star,
        tau_star=cal.tau_star,
        foc_residual=cal.foc_residual,
        foc_tolerance=1e-6,
        soc_value=cal.soc_value,
    )


def check_lemma4_symmetry(spec: ProblemSpec, samples: int = 1000, seed: int = 20230901) -> CheckOutcome:
    """The optimal rule's MSR is invariant under ``theta -> -theta``."""
    rule = _optimal_rule(spec)
    rng = np.random.default_rng(seed)
    span = 3.0 * (spec.sigma + spec.k)
    te = rng.uniform(-span, span, samples)
    tt = te + rng.uniform(-spec.k, spec.k, samples)
    worst = 0.0
    for e, t in zip(te, tt):
        s = StatePoint(float(e), float(t))
        worst = max(worst, abs(mean_square_regret(rule, s, spec.sigma) - mean_square_regret(rule, -s, spec.sigma)))
    return _outcome(
        f"lemma4_symmetry(k={spec.k:.6g}, sigma={spec.sigma:.6g})",
        worst,
        1e-10,
        samples=samples,
        seed=seed,
        theta_e_range=[-span, span],
    )


def _optimal_rule(spec):
    cal = solve_a_star(spec)
    if spec.k == 0:
        return PointIdLogistic(cal.tau_star, spec.sigma)
    return MsrOptimal(cal.a_star, spec.sigma)


def _profile_upper(a, r, quiet_steps=3):
    """Right end of the profile grid: doubled until 3 consecutive blocks are negligible."""
    upper = max(4.0, 2.0 * a + r)
    peak = float(((np.linspace(-r, upper, 2001) + r) ** 2 * rho_shifted_many(a, np.linspace(-r, upper, 2001))).max())
    quiet = 0
    while quiet < quiet_steps:
        block = np.linspace(upper, 2 * upper, 1001)
        vals = (block + r) ** 2 * rho_shifted_many(a, block)
        peak = max(peak, float(vals.max()))
        quiet = quiet + 1 if vals.max() < 1e-6 * peak else 0
        upper *= 2
    return upper


def _profile_grid(a, r, upper, points):
    """Dense grid near the peak, coarser tail out to ``upper``."""
    core_end = min(upper, a + 10.0)
    core = np.linspace(-r, core_end, points)
    if core_end >= upper:
        return core
    return np.concatenate([core, np.linspace(core_end, upper, 2001)[1:]])


def check_lemma5_global_max(spec: ProblemSpec, points: int = 8001, h: float = 1e-4) -> CheckOutcome:
    """``a_star`` globally maximizes ``(x + k/sigma)^2 rho_shifted(a_star, x)`` on ``x >= -k/sigma``.

    Also checks stationarity by a centered difference at ``a_star`` and that
    ``rho'`` and the center-derivative of ``rho_shifted`` coincide there.
    """
    cal = solve_a_star(spec)
    a, r = cal.a_star, spec.ratio()
    upper = _profile_upper(a, r)
    xs = _profile_grid(a, r, upper, points)
    prof = (xs + r) ** 2 * rho_shifted_many(a, xs)

    def g(x):
        return (x + r) ** 2 * rho_shifted(a, x, _TIGHT)

    peak = g(a)
    excess = max(0.0, float(prof.max()) - peak)
    slope = (g(a + h) - g(a - h)) / (2 * h)
    deriv_gap = abs(rho_prime(a, _TIGHT) - rho_shifted_prime(a, a, _TIGHT))
    violation = max(excess - 1e-8, abs(slope) - 1e-6, deriv_gap - 1e-7)
    return _outcome(
        f"lemma5_global_max(k={spec.k:.6g}, sigma={spec.sigma:.6g})",
        violation,
        0.0,
        a_star=a,
        grid=[-r, upper, int(xs.size)],
        excess_over_peak=excess,
        centered_difference=slope,
        step=h,
        derivative_gap=deriv_gap,
        tolerances={"excess": 1e-8, "stationarity": 1e-6, "derivative_gap": 1e-7},
    )


def _w_tilde(y, a, r):
    d = expit(2 * a * y)
    return 1.0 + np.exp(-2 * a * y) - 3 * d * (2 * a) ** 2 + (2 * a) ** 2 - 2 * a * (r + y)


def _bold_w(y, a, r):
    d = expit(2 * a * y)
    w = expit(-2 * a * y)
    return w * w * (1.0 + (2 * a) ** 2 * d * (1 - 3 * d) - 2 * a * d * (r + y))


def check_lemma7_sign_change(spec: ProblemSpec, y_points: int = 4001, t_points: int = 4001) -> CheckOutcome:
    """Single + to - crossings of the weight functions behind the profile derivative.

    (a) ``w~(y)`` is strictly decreasing with one + to - crossing;
    (b) ``G(x) = 2 E[W(Y)]``, ``Y ~ N(x, 1)``, has one + to - crossing, at ``a_star``.
    ``G`` is cross-checked against ``2 rho* + (x + k/sigma) rho*'``.
    """
    cal = solve_a_star(spec)
    a, r = cal.a_star, spec.ratio()
    y_half = min(20.0, 300.0 / (2 * a))
    ys = np.linspace(-y_half, y_half, y_points)
    wt = _w_tilde(ys, a, r)
    increases = int(np.count_nonzero(np.diff(wt) >= 0))
    w_changes = sign_changes(wt, 0.0)
    ok_a = increases == 0 and len(w_changes) == 1 and w_changes[0].direction == PLUS_TO_MINUS
    t_star = float(ys[w_changes[0].left]) if w_changes else math.nan

    upper = _profile_upper(a, r)
    xs = _profile_grid(a, r, upper, t_points)
    big_g = 2.0 * fixed_gauss_expectation(lambda y: _bold_w(y, a, r), xs)
    g_changes = sign_changes(big_g, 1e-12)
    located = (
        len(g_changes) == 1
        and g_changes[0].direction == PLUS_TO_MINUS
        and xs[max(g_changes[0].left - 1, 0)] <= a <= xs[min(g_changes[0].right + 1, xs.size - 1)]
    )
    probe = [-r / 2, a / 2, a, 2 * a + 1]
    ident_gap = float(max(
        abs(
            2 * fixed_gauss_expectation(lambda y: _bold_w(y, a, r), [x])[0]
            - (2 * rho_shifted(a, x, _TIGHT) + (x + r) * rho_shifted_prime(a, x, _TIGHT))
        )
        for x in probe
    ))
    violation = max(-math.inf if ok_a else math.inf, -math.inf if located else math.inf, ident_gap - 1e-8)
    return _outcome(
        f"lemma7_sign_change(k={spec.k:.6g}, sigma={spec.sigma:.6g})",
        violation,
        0.0,
        a_star=a,
        w_tilde_grid=[-y_half, y_half, y_points],
        w_tilde_increases=increases,
        w_tilde_crossings=len(w_changes),
        w_tilde_zero_near=t_star,
        profile_grid=[-r, upper, int(xs.size)],
        profile_crossings=[(float(xs[c.left]), float(xs[c.right]), c.direction) for c in g_changes],
        identity_gap=ident_gap,
        tolerances={"identity": 1e-8, "zero": 1e-12},
    )


def challenger_rules(spec: ProblemSpec) -> list:
    """Alternative rules the optimal rule must beat in worst-case MSR."""
    cal = solve_a_star(spec)
    base = cal.a_star / spec.sigma
    rules = [CustomLogistic(base * f) for f in (0.25, 0.5, 0.8, 1.25, 1.5, 2.0, 3.0)]
    rules += [
        PointIdLogistic(cal.tau_star, spec.sigma),
        MeanRegretStep(),
        mean_regret_rule(spec),
        MeanRegretGaussian(spec.sigma),
        ConstantHalf(),
    ]
    # below the mean-regret threshold its minimax rule is the step rule already listed
    return list(dict.fromkeys(rules))


def _worst_value(rule, spec, method="auto"):
    try:
        return worst_case_msr(rule, spec, method).value
    except DivergingWorstCaseError:
        return math.inf


def check_theorem1(spec: ProblemSpec) -> CheckOutcome:
    """Worst case over the full space equals the hardest-segment value, which
    equals the two-point Bayes risk, and no challenger does better."""
    if spec.k == 0:
        raise ValueError("the partial-identification check needs k > 0")
    cal = solve_a_star(spec)
    rule = MsrOptimal(cal.a_star, spec.sigma)
    hardest = cal.worst_case_msr
    full = worst_case_msr(rule, spec, "grid2d")
    reduced = worst_case_msr(rule, spec, "reduced")
    bayes = bayes_msr_two_point(rule, spec, StatePoint(cal.a_star * spec.sigma, cal.a_star * spec.sigma + spec.k))
    rel_full = abs(full.value - hardest) / hardest
    rel_reduced = abs(reduced.value - hardest) / hardest
    challengers = {}
    shortfall = -math.inf
    for ch in challenger_rules(spec):
        v = _worst_value(ch, spec)
        # None marks an unbounded worst case so the details stay JSON-safe
        challengers[ch.to_json()] = v if math.isfinite(v) else None
        shortfall = max(shortfall, full.value - v - 1e-8)
    violation = max(rel_full - 1e-4, rel_reduced - 1e-4, abs(bayes - hardest) - 1e-8, shortfall)
    return _outcome(
        f"theorem1(k={spec.k:.6g}, sigma={spec.sigma:.6g})",
        violation,
        0.0,
        hardest_value=hardest,
        full_search_value=full.value,
        full_search_argmax=[full.argmax.theta_e, full.argmax.theta_t],
        reduced_value=reduced.value,
        two_point_bayes=bayes,
        challenger_worst_cases=challengers,
        tolerances={"relative": 1e-4, "bayes": 1e-8, "challenger": 1e-8},
    )


def check_uninformative_subproblem(a_t: float, mu_points: int = 101, v_points: int = 51) -> CheckOutcome:
    """With uninformative data the worst-case MSR ``a_t^2 [max((1-mu)^2, mu^2) + V]``
    over rule summaries (mean ``mu``, variance ``V``) is minimized at ``(1/2, 0)``."""
    if not (math.isfinite(a_t) and a_t != 0):
        raise ValueError("a_t must be finite and nonzero")
    mu = np.linspace(0.0, 1.0, mu_points)
    var = np.linspace(0.0, 0.25, v_points)
    obj = a_t**2 * (np.maximum((1 - mu) ** 2, mu**2)[:, None] + var[None, :])
    i, j = divmod(int(np.argmin(obj)), var.size)
    best = float(obj[i, j])
    violation = max(abs(mu[i] - 0.5), var[j], abs(best - a_t**2 / 4))
    return _outcome(
        f"uninformative_subproblem(a_t={a_t:.6g})",
        violation,
        1e-12,
        minimizer=[float(mu[i]), float(var[j])],
        minimum=best,
        grid={"mu": [0.0, 1.0, mu_points], "V": [0.0, 0.25, v_points]},
    )


def run_suite(spec_list, include_sandwich: bool = True) -> list[CheckOutcome]:
    """Run every check; spec-free checks use ``c = a_star`` of each spec plus fixed values."""
    ts = tau_star()
    out = []
    cs = [0.5, 1.0, ts - 1e-3]
    for spec in spec_list:
        if spec.k > 0:
            cs.append(solve_a_star(spec).a_star)
    for c in cs:
        out.append(check_lemma1_bounded(c))
    for c in (0.1, 0.6, ts - 1e-4, *cs[3:]):
        out.append(check_lemma9(c))
    for a_t in (1.0, 2.0, -1.0):
        out.append(check_uninformative_subproblem(a_t))
    for spec in spec_list:
        out.append(check_lemma4_symmetry(spec))
        if spec.k > 0:
            out.append(check_lemma3(spec))
            out.append(check_lemma5_global_max(spec))
            out.append(check_lemma7_sign_change(spec))
            if include_sandwich:
                out.append(check_theorem1(spec))
    return out


def format_table(outcomes) -> str:
    width = max(len(o.name) for o in outcomes) if outcomes else 10
    lines = [f"{'check':<{width}}  {'result':<6}  {'violation':>12}  {'tolerance':>10}"]
    for o in outcomes:
        lines.append(
            f"{o.name:<{width}}  {'PASS' if o.passed else 'FAIL':<6}  {o.worst_violation:>12.4g}  {o.tolerance:>10.3g}"
        )
    return "\n".join(lines)
