"""Solver contracts: exact block updates, duality, convergence, monotonicity."""

import math

import numpy as np
import pytest

from tiltbridge.margins import Margin, barvinok, clone
from tiltbridge.measures import make_measure, mean_inverse
from tiltbridge.sinkhorn import (
    MaxIterationsError,
    Potentials,
    SolverConfig,
    TiltOutOfDomainError,
    col_update,
    dual_objective,
    entropy_of_table,
    linf_monotonicity_check,
    rate_diagnostics,
    row_update,
    solve,
)


def random_margin(rng, m, n, lo, hi):
    r = rng.uniform(lo, hi, m) * n
    c = rng.uniform(lo, hi, n) * m
    c *= r.sum() / c.sum()
    return Margin(r, c)


def random_real_margin(rng, m, n, scale=2.0):
    r = rng.uniform(-scale, scale, m) * n
    c = rng.uniform(-scale, scale, n) * m
    c += (r.sum() - c.sum()) / n
    return Margin(r, c)


# ---------------------------------------------------------------------------
# dual objective
# ---------------------------------------------------------------------------


def test_dual_objective_1x1_gaussian():
    g = make_measure("gaussian")
    a = 1.7
    marg = Margin(np.array([a]), np.array([a]))
    pots = Potentials(np.array([a / 2]), np.array([a / 2]))
    assert dual_objective(g, marg, pots) == pytest.approx(a * a / 2)


@pytest.mark.parametrize("name", ["gaussian", "poisson", "laplace", "uniform3"])
def test_dual_objective_zero_potentials(name):
    measure = make_measure(name)
    rng = np.random.default_rng(1)
    marg = Margin(rng.uniform(0.5, 1.0, 3) * 4, rng.uniform(0.5, 1.0, 4) * 3)
    pots = Potentials(np.zeros(3), np.zeros(4))
    expected = -3 * 4 * float(measure.cumulant(0.0))
    assert dual_objective(measure, marg, pots) == pytest.approx(expected)


def test_dual_objective_shift_invariance():
    g = make_measure("gaussian")
    rng = np.random.default_rng(7)
    marg = random_real_margin(rng, 3, 4)
    alpha = rng.normal(size=3)
    beta = rng.normal(size=4)
    v0 = dual_objective(g, marg, Potentials(alpha, beta))
    v1 = dual_objective(g, marg, Potentials(alpha + 0.37, beta - 0.37))
    assert abs(v1 - v0) <= 1e-9 * max(1.0, abs(v0))


def test_dual_objective_domain_error():
    c = make_measure("counting")
    marg = Margin(np.array([1.0]), np.array([1.0]))
    with pytest.raises(TiltOutOfDomainError):
        dual_objective(c, marg, Potentials(np.array([0.5]), np.array([0.0])))


# ---------------------------------------------------------------------------
# coordinate updates
# ---------------------------------------------------------------------------


def test_row_update_poisson_closed_form():
    p = make_measure("poisson")
    rng = np.random.default_rng(2)
    alpha = rng.normal(size=5)
    marg = Margin(np.full(5, 3.0), np.full(3, 5.0))
    for j in range(3):
        got = row_update(p, marg, alpha, j)
        expected = math.log(marg.c[j] / np.exp(alpha).sum())
        assert got == pytest.approx(expected, abs=1e-10)


def test_row_update_gaussian_linear():
    g = make_measure("gaussian")
    marg = Margin(np.full(4, 1.0), np.array([2.0, 2.0]))
    got = row_update(g, marg, np.zeros(4), 0)
    assert got == pytest.approx(0.5, abs=1e-12)


def test_row_update_counting_example():
    c = make_measure("counting")
    marg = Margin(np.array([1.0]), np.array([1.0]))
    got = row_update(c, marg, np.zeros(1), 0)
    assert got == pytest.approx(-math.log(2.0), abs=1e-12)


def test_col_update_symmetry():
    p = make_measure("poisson")
    rng = np.random.default_rng(3)
    beta = rng.normal(size=4)
    marg = Margin(np.full(3, 4.0), np.full(4, 3.0))
    got = col_update(p, marg, beta, 1)
    assert got == pytest.approx(math.log(4.0 / np.exp(beta).sum()), abs=1e-10)


# ---------------------------------------------------------------------------
# solve: exactly solvable families
# ---------------------------------------------------------------------------


def test_solve_gaussian_closed_form():
    g = make_measure("gaussian")
    rng = np.random.default_rng(4)
    for _ in range(5):
        marg = random_real_margin(rng, 6, 9)
        _, table, report = solve(g, marg)
        N = marg.total
        closed = marg.r[:, None] / marg.n + marg.c[None, :] / marg.m - N / (marg.m * marg.n)
        assert np.abs(table.table - closed).max() < 1e-8
        assert report.iterations <= 2


def test_solve_poisson_fisher_yates():
    p = make_measure("poisson")
    rng = np.random.default_rng(5)
    for _ in range(5):
        marg = random_margin(rng, 7, 5, 0.3, 2.5)
        _, table, _ = solve(p, marg)
        closed = np.outer(marg.r, marg.c) / marg.total
        assert np.abs(table.table - closed).max() < 1e-8


@pytest.mark.parametrize("name,a", [("counting", 0.8), ("gaussian", -0.4), ("lebesgue", 1.5), ("uniform3", 1.0)])
def test_solve_constant_margin_symmetry(name, a):
    measure = make_measure(name)
    n = 5
    marg = Margin(np.full(n, a * n), np.full(n, a * n))
    pots, table, _ = solve(measure, marg)
    tilt = pots.tilt_matrix()
    expected = float(mean_inverse(measure, a))
    assert np.abs(tilt - expected).max() < 1e-9
    assert np.abs(table.table - a).max() < 1e-10


def test_solve_tracks_dual_monotone_and_residual():
    c = make_measure("counting")
    rng = np.random.default_rng(6)
    marg = random_margin(rng, 8, 8, 0.5, 2.0)
    _, _, report = solve(c, marg)
    duals = np.asarray(report.dual_values)
    assert np.all(np.diff(duals) >= -1e-9 * (1.0 + np.abs(duals[:-1])))
    assert report.residuals[-1] <= 1e-8 * max(1.0, marg.total)


@pytest.mark.parametrize("name", ["gaussian", "poisson", "binomial:3", "counting", "negbinom:2", "lebesgue", "gamma:1.0,2.0", "laplace", "uniform3"])
def test_strong_duality_all_measures(name):
    from tiltbridge.measures import parse_measure_spec

    measure = parse_measure_spec(name)
    rng = np.random.default_rng(hash(name) % 2**32)
    lo, hi = measure.support_lo, measure.support_hi
    a = max(lo, -1.5) + 0.4 * (min(hi, 3.0) - max(lo, -1.5))
    b = max(lo, -1.5) + 0.7 * (min(hi, 3.0) - max(lo, -1.5))
    r = np.linspace(a, b, 4) * 5
    c = np.linspace(a, b, 5) * 4
    c *= r.sum() / c.sum() if measure.support_lo >= 0 else 1.0
    if measure.support_lo < 0:
        c += (r.sum() - c.sum()) / 5
    marg = Margin(r, c)
    pots, table, _ = solve(measure, marg)
    g = dual_objective(measure, marg, pots)
    H = entropy_of_table(measure, table.table)
    assert abs(g - H) <= 1e-6 * (1.0 + abs(g))


def test_solve_shift_start_invariance():
    c = make_measure("counting")
    rng = np.random.default_rng(8)
    marg = random_margin(rng, 5, 6, 0.6, 1.8)
    tilts = []
    for delta in (-1.0, 0.0, 2.0):
        pots, _, _ = solve(c, marg, SolverConfig(alpha0=np.full(5, delta)))
        tilts.append(pots.tilt_matrix())
    assert np.abs(tilts[0] - tilts[1]).max() < 1e-8
    assert np.abs(tilts[2] - tilts[1]).max() < 1e-8


def test_solve_clone_consistency():
    c = make_measure("counting")
    base = Margin(np.array([2.0, 1.0]), np.array([1.5, 1.5]))
    pots0, _, _ = solve(c, base)
    tilt0 = pots0.tilt_matrix()
    for k in (2, 3):
        pots_k, _, _ = solve(c, clone(base, k))
        expected = np.kron(tilt0, np.ones((k, k)))
        assert np.abs(pots_k.tilt_matrix() - expected).max() < 1e-6


def test_gradient_matches_finite_difference():
    c = make_measure("counting")
    rng = np.random.default_rng(9)
    marg = random_margin(rng, 4, 5, 0.5, 1.5)
    alpha = rng.uniform(-0.6, -0.2, 4)
    beta = rng.uniform(-0.6, -0.2, 5)
    h = 1e-6
    for i in range(4):
        e = np.zeros(4)
        e[i] = h
        up = dual_objective(c, marg, Potentials(alpha + e, beta))
        dn = dual_objective(c, marg, Potentials(alpha - e, beta))
        fd = (up - dn) / (2 * h)
        grad = marg.r[i] - float(np.asarray(c.mean(alpha[i] + beta)).sum())
        assert abs(fd - grad) < 1e-5 * max(1.0, abs(grad))


def test_standardization_flag():
    p = make_measure("poisson")
    marg = Margin(np.array([2.0, 4.0]), np.array([3.0, 3.0]))
    pots, _, _ = solve(p, marg)
    assert pots.standardized
    assert abs(pots.alpha.sum()) <= 1e-9 * marg.m


# ---------------------------------------------------------------------------
# convergence-rate diagnostics
# ---------------------------------------------------------------------------


def test_gaussian_one_step_convergence():
    g = make_measure("gaussian")
    rng = np.random.default_rng(10)
    marg = random_real_margin(rng, 6, 6)
    _, _, report = solve(g, marg, SolverConfig(tol=1e-13))
    # dual gap after the first full sweep is already at optimum
    gaps = report.dual_values[-1] - np.asarray(report.dual_values)
    assert gaps[0] <= 1e-10 * (1.0 + abs(report.dual_values[-1]))


def test_constant_margin_exact_after_first_sweep():
    c = make_measure("counting")
    marg = Margin(np.full(4, 4.0), np.full(4, 4.0))
    _, _, report = solve(c, marg)
    assert report.iterations == 1
    assert report.residuals[0] <= 1e-10


def test_rate_diagnostics_counting():
    c = make_measure("counting")
    rng = np.random.default_rng(11)
    marg = random_margin(rng, 20, 20, 0.5, 2.0)
    _, _, report = solve(c, marg, SolverConfig(tol=1e-13 * marg.total, max_iters=400))
    ref = report.dual_values[-1] + 1e-15 * abs(report.dual_values[-1])
    est = rate_diagnostics(report, ref, measure=c)
    assert est.ratio < 1.0
    assert est.r_squared >= 0.98
    assert est.theory_ratio is not None and est.within_theory


def test_rate_diagnostics_too_few():
    g = make_measure("gaussian")
    marg = Margin(np.array([1.0, -1.0]), np.array([0.5, -0.5]))
    _, _, report = solve(g, marg)
    from tiltbridge.sinkhorn import TooFewIterationsError

    with pytest.raises(TooFewIterationsError):
        rate_diagnostics(report, report.dual_values[-1])


# ---------------------------------------------------------------------------
# sup-norm monotone approach to the optimum
# ---------------------------------------------------------------------------


def test_linf_monotonicity_gaussian_random():
    g = make_measure("gaussian")
    rng = np.random.default_rng(12)
    marg = random_real_margin(rng, 3, 3, scale=1.0)
    verdict = linf_monotonicity_check(g, marg, trials=5, rng=rng, iters=12)
    assert verdict.monotone


def test_linf_monotonicity_from_optimum():
    g = make_measure("gaussian")
    rng = np.random.default_rng(13)
    marg = random_real_margin(rng, 4, 4, scale=1.0)
    pots, _, _ = solve(g, marg)
    cfg = SolverConfig(alpha0=pots.alpha.copy(), max_iters=4, tol=-1.0)
    try:
        solve(g, marg, cfg)
    except MaxIterationsError as exc:
        rep = exc.report
    ref = pots.tilt_matrix()
    for a, b in zip(rep.alphas, rep.betas):
        assert np.abs(a[:, None] + b[None, :] - ref).max() < 1e-9


def test_linf_monotonicity_counting_barvinok():
    c = make_measure("counting")
    marg = barvinok(10, 1.0, 2.0, 0.0)
    verdict = linf_monotonicity_check(c, marg, trials=3, rng=np.random.default_rng(14), scale=0.3, iters=15)
    assert verdict.monotone


# ---------------------------------------------------------------------------
# failure paths
# ---------------------------------------------------------------------------


def test_infeasible_screen_raises():
    from tiltbridge.sinkhorn import InfeasibleMarginError

    bern = make_measure("binomial", (1,))
    with pytest.raises(InfeasibleMarginError):
        solve(bern, Margin(np.array([2.0, 2.0]), np.array([3.0, 1.0])))


def test_screen_passed_but_infeasible_hits_max_iters():
    # averages are interior but no table in (0,1)^{2x2} matches: x11 >= 1.8
    bern = make_measure("binomial", (1,))
    marg = Margin(np.array([1.9, 0.1]), np.array([1.9, 0.1]))
    with pytest.raises(MaxIterationsError) as exc_info:
        solve(bern, marg, SolverConfig(max_iters=60))
    assert exc_info.value.report.approaching_boundary
