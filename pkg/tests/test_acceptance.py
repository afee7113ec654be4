"""Acceptance criteria, one test each, at the stated tolerances.

Every test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line before asserting.
"""

import math
import time

import numpy as np
import pytest
from scipy.special import expit

from msrchoice.calibration import ProblemSpec, clear_caches, foc_residual, solve_a_star, solve_tau_star
from msrchoice.cli import DEFAULT_K_LIST, _k_list, figure1_table
from msrchoice.regret import MeanRegretGaussian, MeanRegretStep, worst_case_msr
from msrchoice.rho import rho, rho_prime
from msrchoice.rules import MEAN_REGRET_THRESHOLD, mean_regret_rule, msr_optimal_rule, point_id_rule
from msrchoice.verification import check_theorem1, format_table, run_suite


@pytest.fixture
def report(capsys):
    def emit(number, title, passed, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number} {'PASS' if passed else 'FAIL'}: {title} | {detail}")
        assert passed, detail

    return emit


def test_calibration_constants(report):
    clear_caches()
    t0 = time.perf_counter()
    ts, value = solve_tau_star()
    elapsed = time.perf_counter() - t0
    ok = 1.22 <= ts <= 1.24 and 0.115 <= value <= 0.125 and elapsed < 1.0
    report(1, "calibration constants", ok, f"tau*={ts:.10f} value={value:.10f} time={elapsed:.3f}s")


def test_first_order_residuals(report):
    t0 = time.perf_counter()
    worst = 0.0
    for ratio in np.logspace(-2, 2, 50):
        spec = ProblemSpec(float(ratio))
        res = solve_a_star(spec)
        worst = max(worst, abs(foc_residual(res.a_star, spec)))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-6 and elapsed < 30.0
    report(2, "FOC residuals", ok, f"max|FOC|={worst:.3e} time={elapsed:.2f}s")


def test_monotone_a_star(report):
    ks = np.round(np.arange(1, 1001) * 0.01, 10)
    a_k = np.array([solve_a_star(ProblemSpec(float(k), 1.0)).a_star for k in ks])
    sigmas = np.round(np.arange(10, 1001) * 0.01, 10)
    a_s = np.array([solve_a_star(ProblemSpec(1.0, float(s))).a_star for s in sigmas])
    dk = -np.diff(a_k)
    ds = np.diff(a_s)
    ok = dk.min() > 1e-8 and ds.min() > 1e-8
    report(
        3,
        "a* monotone in k and sigma",
        ok,
        f"k grid {len(ks)} pts min drop={dk.min():.3e}; sigma grid {len(sigmas)} pts min rise={ds.min():.3e}",
    )


def test_optimal_rule_sandwich(report):
    t0 = time.perf_counter()
    lines, ok = [], True
    for ratio in (0.25, 1.0, 4.0):
        out = check_theorem1(ProblemSpec(ratio))
        d = out.details
        n_challengers = len(d["challenger_worst_cases"])
        ok &= out.passed and n_challengers >= 10
        rel = abs(d["full_search_value"] - d["hardest_value"]) / d["hardest_value"]
        beaten = [v for v in d["challenger_worst_cases"].values() if v is not None]
        margin = min(beaten) - d["full_search_value"]
        lines.append(
            f"k/sigma={ratio}: hardest={d['hardest_value']:.10f} rel(full)={rel:.1e} "
            f"|bayes-hardest|={abs(d['two_point_bayes'] - d['hardest_value']):.1e} "
            f"challengers={n_challengers} min margin={margin:.3e}"
        )
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300.0
    report(4, "worst-case sandwich", ok, "; ".join(lines) + f"; time={elapsed:.1f}s")


def test_point_identified_reduction(report):
    ts, peak_value = solve_tau_star()
    worst_rule, worst_value = 0.0, 0.0
    for sigma in (0.5, 1.0, 2.0):
        spec = ProblemSpec(0.0, sigma)
        cal = solve_a_star(spec)
        emitted = point_id_rule(sigma)
        obs = np.linspace(-5 * sigma, 5 * sigma, 100)
        worst_rule = max(worst_rule, float(np.max(np.abs(emitted(obs) - expit(2 * ts * obs / sigma)))))
        full = worst_case_msr(emitted, spec).value
        # reference is the computed (tau*)^2 rho(tau*); 0.12 is its two-digit rounding
        worst_value = max(worst_value, abs(full - peak_value * sigma**2) / (peak_value * sigma**2))
        assert cal.a_star == ts
    ok = worst_rule < 1e-6 and worst_value < 1e-3 and round(peak_value, 2) == 0.12
    report(
        5,
        "point-identified reduction",
        ok,
        f"max|rule diff|={worst_rule:.1e} max rel(worst case vs tau*^2 rho(tau*) sigma^2)={worst_value:.1e} "
        f"(literal 0.12 differs by {abs(peak_value - 0.12) / 0.12:.2e} rel)",
    )


def test_mean_regret_switch(report):
    worst_scale, switch_ok = 0.0, True
    for sigma in (0.3, 1.0, 2.5):
        t = MEAN_REGRET_THRESHOLD * sigma
        switch_ok &= isinstance(mean_regret_rule(ProblemSpec(t, sigma)), MeanRegretStep)
        switch_ok &= isinstance(mean_regret_rule(ProblemSpec(math.nextafter(t, 0), sigma)), MeanRegretStep)
        switch_ok &= isinstance(mean_regret_rule(ProblemSpec(math.nextafter(t, math.inf), sigma)), MeanRegretGaussian)
        for k in t * np.array([1.001, 1.1, 1.5, 3.0, 10.0]):
            rule = mean_regret_rule(ProblemSpec(float(k), sigma))
            expected = math.sqrt(2 * k * k / math.pi - sigma**2)
            worst_scale = max(worst_scale, abs(rule.scale - expected))
    ok = switch_ok and worst_scale < 1e-12
    report(6, "mean-regret switch", ok, f"switch at sqrt(pi/2) sigma: {switch_ok}; max|scale diff|={worst_scale:.1e}")


def test_oracle_agreement(report):
    rng = np.random.Generator(np.random.Philox(20231016))
    draws, chunk = 10_000_000, 1_000_000
    z_scores = []
    for a in (0.25, 0.5, 1.0, 1.23, 2.0):
        total = total_sq = 0.0
        for _ in range(draws // chunk):
            v = expit(-2.0 * a * rng.normal(a, 1.0, chunk)) ** 2
            total += v.sum()
            total_sq += (v * v).sum()
        mean = total / draws
        se = math.sqrt((total_sq / draws - mean * mean) / (draws - 1))
        z_scores.append(abs(rho(a) - mean) / se)
    h = 1e-5
    fd_gap = 0.0
    for a in np.linspace(0.0, 3.0, 61):
        # rho is even in a, which gives the left point at a = 0
        fd = (rho(a + h) - rho(abs(a - h))) / (2 * h)
        fd_gap = max(fd_gap, abs(rho_prime(a) - fd))
    ok = max(z_scores) < 3.0 and fd_gap < 1e-7
    report(
        7,
        "oracle agreement",
        ok,
        "MC |z|=" + ",".join(f"{z:.2f}" for z in z_scores) + f"; max|rho'-FD|={fd_gap:.1e}",
    )


def test_verification_suite(report):
    t0 = time.perf_counter()
    specs = [ProblemSpec(r) for r in (0.1, 1.0, 10.0)]
    outcomes = run_suite(specs, include_sandwich=False)
    elapsed = time.perf_counter() - t0
    wanted = ("lemma1_bounded", "lemma9", "lemma4_symmetry", "lemma5_global_max", "lemma7", "uninformative_subproblem")
    present = {w: any(o.name.startswith(w) for o in outcomes) for w in wanted}
    failed = [o.name for o in outcomes if not o.passed]
    ok = not failed and all(present.values()) and elapsed < 300.0
    report(
        8,
        "verification check suite",
        ok,
        f"{len(outcomes)} checks, failed={failed or 'none'}, time={elapsed:.1f}s\n{format_table(outcomes)}",
    )


def test_rule_comparison_table(report):
    z = np.linspace(-4.0, 4.0, 401)
    problems = []
    for k in _k_list(DEFAULT_K_LIST):
        rows = np.array(figure1_table(k, z))
        msr, mr = rows[:, 1], rows[:, 2]
        off = z != 0
        mirror = lambda col: col[::-1]
        if np.any(np.diff(msr) < 0) or np.any(np.diff(mr) < 0):
            problems.append(f"k={k}: not monotone")
        if np.max(np.abs(msr + mirror(msr) - 1)[off]) > 1e-12 or np.max(np.abs(mr + mirror(mr) - 1)[off]) > 1e-12:
            problems.append(f"k={k}: not symmetric")
        if not np.all((msr > 0) & (msr < 1)):
            problems.append(f"k={k}: msr rule not fractional")
        binary = bool(np.all((mr == 0) | (mr == 1)))
        if binary != (k <= MEAN_REGRET_THRESHOLD):
            problems.append(f"k={k}: step column binary={binary}")
        if math.isinf(k) and not (np.all(msr == 0.5) and np.all(mr == 0.5)):
            problems.append("k=inf: columns differ from 0.5")
    report(9, "rule comparison table", not problems, f"k list {DEFAULT_K_LIST}; problems={problems or 'none'}")
