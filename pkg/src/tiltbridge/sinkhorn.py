"""Generalized Sinkhorn solver for maximum-likelihood tilt potentials.

Given a base measure and a feasible margin (r, c), the solver maximizes the
concave dual objective

    g(alpha, beta) = <r, alpha> + <c, beta> - SUM_ij K(alpha_i + beta_j)

by alternating exact block maximizations: each column update solves the
strictly increasing one-dimensional equation

    SUM_i K'(alpha_i + beta_j) = c_j

for beta_j (and symmetrically for alpha_i).  At the optimum the mean table
``K'(alpha (+) beta)`` satisfies the margin exactly; that matrix is the
typical table, the minimizer of summed relative entropy over the
transportation polytope, and the two optima coincide (strong duality).

Potentials are only identified up to shifting a constant from alpha to beta;
after every full sweep the iterate is re-standardized so sum(alpha) = 0,
which leaves the tilt matrix ``alpha (+) beta`` and the dual value unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .margins import FeasibilityVerdict, Margin, validate
from .measures import BaseMeasure, TiltBridgeError, mean_inverse, realized_delta, relative_entropy, tameness_band
from .util import fit_log_decay

# Tables with any mean entry outside this band are flagged as approaching the
# support boundary (trend reporting for non-tame margins, not an abort).
BOUNDARY_FLAG_DELTA = 1e-6


class TiltOutOfDomainError(TiltBridgeError, ValueError):
    pass


class InfeasibleMarginError(TiltBridgeError, ValueError):
    pass


class BoundaryEscapeError(TiltBridgeError, ArithmeticError):
    """A coordinate root ran into the tilt-domain boundary (likely non-tame)."""

    def __init__(self, msg, coordinates=None):
        super().__init__(msg)
        self.coordinates = coordinates


class MaxIterationsError(TiltBridgeError, ArithmeticError):
    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


class TooFewIterationsError(TiltBridgeError, ValueError):
    pass


@dataclass(frozen=True)
class Potentials:
    """Dual pair (alpha, beta); standardized means sum(alpha) = 0."""

    alpha: np.ndarray
    beta: np.ndarray
    standardized: bool = False

    def tilt_matrix(self) -> np.ndarray:
        return self.alpha[:, None] + self.beta[None, :]

    def standardize(self) -> "Potentials":
        shift = float(self.alpha.mean())
        return Potentials(self.alpha - shift, self.beta + shift, standardized=True)

    def linf_norm(self) -> float:
        return float(max(np.abs(self.alpha).max(), np.abs(self.beta).max()))


@dataclass(frozen=True)
class TypicalTable:
    """Mean table of the fitted tilted model, with residuals vs the target."""

    table: np.ndarray
    row_residual: float
    col_residual: float
    min_entry: float
    max_entry: float


@dataclass
class SinkhornReport:
    """Per-iteration diagnostics of a solve."""

    iterations: int = 0
    dual_values: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    potential_gaps: list = field(default_factory=list)
    converged: bool = False
    rate_estimate: float | None = None
    approaching_boundary: bool = False
    table_min: float = math.nan
    table_max: float = math.nan
    # Post-hoc check of the warm-start condition for the non-asymptotic
    # convergence guarantee: it needs the optimum's tilts to sit at least
    # 2*||alpha_0 - alpha*||_inf inside the tilt domain, which involves the
    # unknown optimum and so can only be reported after the fact.
    warmstart_condition_post_hoc: bool | None = None
    alphas: list = field(default_factory=list)
    betas: list = field(default_factory=list)


@dataclass(frozen=True)
class SolverConfig:
    alpha0: np.ndarray | None = None
    max_iters: int = 2000
    tol: float | None = None  # L1 margin residual; default 1e-8 * max(1, |N|)
    root_rtol: float = 1e-13
    track_potentials: bool = True


@dataclass(frozen=True)
class RateEstimate:
    ratio: float
    r_squared: float
    points: int
    theory_ratio: float | None = None
    within_theory: bool | None = None


def dual_objective(measure: BaseMeasure, margin: Margin, potentials: Potentials) -> float:
    """Dual (log-likelihood) value g(alpha, beta); shift-invariant."""
    tilt = potentials.tilt_matrix()
    if not measure.contains_tilt(tilt):
        raise TiltOutOfDomainError("some alpha_i + beta_j falls outside the tilt domain")
    return float(
        margin.r @ potentials.alpha + margin.c @ potentials.beta - measure.cumulant(tilt).sum()
    )


def margin_residual(measure: BaseMeasure, margin: Margin, alpha, beta) -> float:
    z = measure.mean(alpha[:, None] + beta[None, :])
    return float(np.abs(z.sum(axis=1) - margin.r).sum() + np.abs(z.sum(axis=0) - margin.c).sum())


# ---------------------------------------------------------------------------
# vectorized coordinate root solves
# ---------------------------------------------------------------------------


def _domain_interval(measure: BaseMeasure, fixed: np.ndarray):
    """Open interval of x keeping fixed_i + x inside the tilt domain for all i."""
    lo = measure.tilt_lo - fixed.min() if math.isfinite(measure.tilt_lo) else -np.inf
    hi = measure.tilt_hi - fixed.max() if math.isfinite(measure.tilt_hi) else np.inf
    return lo, hi


def _coordinate_roots(measure, fixed, targets, x0, rtol, max_expand=200):
    """Solve sum_i K'(fixed_i + x_j) = targets_j for every j at once.

    The map is strictly increasing in x_j, so each root is bracketed by
    geometric expansion from the warm start and then located by Newton steps
    safeguarded with bisection.  Roots pinned against the tilt-domain
    boundary raise BoundaryEscapeError.
    """
    fixed = np.asarray(fixed, dtype=float)
    targets = np.asarray(targets, dtype=float)
    dom_lo, dom_hi = _domain_interval(measure, fixed)
    width = dom_hi - dom_lo if (math.isfinite(dom_lo) and math.isfinite(dom_hi)) else 1.0
    guard = 1e-12 * max(width, 1.0)
    glo = dom_lo + guard if math.isfinite(dom_lo) else -1e18
    ghi = dom_hi - guard if math.isfinite(dom_hi) else 1e18

    def f(x):
        return measure.mean(fixed[:, None] + x[None, :]).sum(axis=0) - targets

    def fprime(x):
        return measure.variance(fixed[:, None] + x[None, :]).sum(axis=0)

    x0 = np.clip(np.asarray(x0, dtype=float), glo, ghi)
    lo = x0.copy()
    hi = x0.copy()
    flo = f(lo)
    fhi = flo.copy()
    step = np.maximum(1.0, np.abs(x0)) * 0.5
    for _ in range(max_expand):
        need_lo = flo > 0.0
        need_hi = fhi < 0.0
        if not (need_lo.any() or need_hi.any()):
            break
        if need_lo.any():
            lo = np.where(need_lo, np.maximum(lo - step, glo), lo)
            flo = np.where(need_lo, f(lo), flo)
        if need_hi.any():
            hi = np.where(need_hi, np.minimum(hi + step, ghi), hi)
            fhi = np.where(need_hi, f(hi), fhi)
        step = step * 2.0
        pinned = ((flo > 0.0) & (lo <= glo)) | ((fhi < 0.0) & (hi >= ghi))
        if pinned.any():
            raise BoundaryEscapeError(
                "coordinate root escapes the tilt domain (margin likely not tame)",
                coordinates=np.flatnonzero(pinned),
            )
    else:
        raise BoundaryEscapeError("bracket expansion failed", coordinates=None)

    ftol = rtol * np.maximum(1.0, np.abs(targets))
    x = np.clip(x0, lo, hi)
    for _ in range(100):
        fx = f(x)
        hi = np.where(fx > 0.0, x, hi)
        lo = np.where(fx <= 0.0, x, lo)
        if np.all(np.abs(fx) <= ftol):
            break
        newton = x - fx / fprime(x)
        inside = (newton > lo) & (newton < hi) & np.isfinite(newton)
        x = np.where(inside, newton, 0.5 * (lo + hi))
    # two polish steps tighten toward machine precision without leaving the bracket
    for _ in range(2):
        newton = x - f(x) / fprime(x)
        inside = (newton > glo) & (newton < ghi) & np.isfinite(newton)
        x = np.where(inside, newton, x)
    return x


def row_update(measure: BaseMeasure, margin: Margin, alpha_prev, j: int, tol: float = 1e-13) -> float:
    """Exact block update for one column potential beta_j given alpha."""
    alpha_prev = np.asarray(alpha_prev, dtype=float)
    target = float(margin.c[j])
    mean_avg = target / margin.m
    if not measure.contains_mean(mean_avg):
        raise InfeasibleMarginError(f"column average {mean_avg!r} outside the mean range")
    x0 = np.array([float(mean_inverse(measure, mean_avg)) - alpha_prev.mean()])
    return float(_coordinate_roots(measure, alpha_prev, np.array([target]), x0, tol)[0])


def col_update(measure: BaseMeasure, margin: Margin, beta_prev, i: int, tol: float = 1e-13) -> float:
    """Exact block update for one row potential alpha_i given beta."""
    beta_prev = np.asarray(beta_prev, dtype=float)
    target = float(margin.r[i])
    mean_avg = target / margin.n
    if not measure.contains_mean(mean_avg):
        raise InfeasibleMarginError(f"row average {mean_avg!r} outside the mean range")
    x0 = np.array([float(mean_inverse(measure, mean_avg)) - beta_prev.mean()])
    return float(_coordinate_roots(measure, beta_prev, np.array([target]), x0, tol)[0])


# ---------------------------------------------------------------------------
# main solve loop
# ---------------------------------------------------------------------------


def _tilt_gap_fro(da: np.ndarray, db: np.ndarray) -> float:
    """Frobenius norm of (da (+) db) without materializing the matrix."""
    m, n = da.size, db.size
    sq = n * float(da @ da) + m * float(db @ db) + 2.0 * float(da.sum()) * float(db.sum())
    return math.sqrt(max(sq, 0.0))


def solve(measure: BaseMeasure, margin: Margin, cfg: SolverConfig | None = None):
    """Run the alternating scheme; returns (Potentials, TypicalTable, SinkhornReport).

    Stops when the L1 margin residual of the mean table drops below the
    configured tolerance (primal certificate of the optimality equations;
    the dual optimum itself is unknown a priori).  Raises
    MaxIterationsError with the partial report otherwise.
    """
    cfg = cfg or SolverConfig()
    verdict: FeasibilityVerdict = validate(margin, measure)
    if not verdict:
        raise InfeasibleMarginError(verdict.reason or "margin failed the feasibility screen")

    m, n = margin.m, margin.n
    tol = cfg.tol if cfg.tol is not None else 1e-8 * max(1.0, abs(margin.total))
    alpha = np.zeros(m) if cfg.alpha0 is None else np.asarray(cfg.alpha0, dtype=float).copy()
    if alpha.shape != (m,):
        raise ValueError(f"alpha0 must have shape ({m},)")
    alpha0 = alpha.copy()

    # warm start from the decoupled guess: the tilt matching each column average
    beta = np.asarray(mean_inverse(measure, _clip_means(measure, margin.c / m)), dtype=float) - alpha.mean()

    report = SinkhornReport()
    converged = False
    for it in range(1, cfg.max_iters + 1):
        beta = _coordinate_roots(measure, alpha, margin.c, beta, cfg.root_rtol)
        alpha_guess = np.asarray(mean_inverse(measure, _clip_means(measure, margin.r / n)), dtype=float) - beta.mean() if it == 1 else alpha
        alpha = _coordinate_roots(measure, beta, margin.r, alpha_guess, cfg.root_rtol)
        shift = float(alpha.mean())
        alpha -= shift
        beta += shift

        pots = Potentials(alpha, beta, standardized=True)
        report.dual_values.append(dual_objective(measure, margin, pots))
        res = margin_residual(measure, margin, alpha, beta)
        report.residuals.append(res)
        if cfg.track_potentials:
            report.alphas.append(alpha.copy())
            report.betas.append(beta.copy())
        report.iterations = it
        if res <= tol:
            converged = True
            break

    report.converged = converged
    if cfg.track_potentials and report.alphas:
        aK, bK = report.alphas[-1], report.betas[-1]
        report.potential_gaps = [
            _tilt_gap_fro(a - aK, b - bK) for a, b in zip(report.alphas, report.betas)
        ]

    tilt = alpha[:, None] + beta[None, :]
    z = np.asarray(measure.mean(tilt), dtype=float)
    report.table_min = float(z.min())
    report.table_max = float(z.max())
    band = tameness_band(measure, BOUNDARY_FLAG_DELTA)
    report.approaching_boundary = bool(z.min() < band.lo or z.max() > band.hi)

    d0 = float(np.abs(alpha0 - alpha).max())
    report.warmstart_condition_post_hoc = bool(
        (tilt.min() - 2.0 * d0 > measure.tilt_lo) and (tilt.max() + 2.0 * d0 < measure.tilt_hi)
    )

    if len(report.dual_values) >= 4 and converged:
        try:
            est = rate_diagnostics(report, reference_dual=_corrected_reference(report, alpha, beta))
            report.rate_estimate = est.ratio
        except TooFewIterationsError:
            report.rate_estimate = None

    if not converged:
        raise MaxIterationsError(
            f"no convergence after {cfg.max_iters} iterations "
            f"(residual {report.residuals[-1]:.3e}, tol {tol:.3e})",
            report=report,
        )

    pots = Potentials(alpha, beta, standardized=True)
    table = TypicalTable(
        table=z,
        row_residual=float(np.abs(z.sum(axis=1) - margin.r).sum()),
        col_residual=float(np.abs(z.sum(axis=0) - margin.c).sum()),
        min_entry=float(z.min()),
        max_entry=float(z.max()),
    )
    return pots, table, report


def _clip_means(measure: BaseMeasure, x):
    """Pull mean targets strictly inside the attainable range for warm starts."""
    x = np.asarray(x, dtype=float)
    lo, hi = measure.support_lo, measure.support_hi
    span = (hi - lo) if (math.isfinite(lo) and math.isfinite(hi)) else 1.0
    eps = 1e-9 * max(span, 1.0)
    lo_c = lo + eps if math.isfinite(lo) else -np.inf
    hi_c = hi - eps if math.isfinite(hi) else np.inf
    return np.clip(x, lo_c, hi_c)


def _corrected_reference(report: SinkhornReport, alpha, beta) -> float:
    """Final dual value plus a residual-based allowance for the optimality gap.

    The true optimum is unknown; by concavity the gap at the final iterate is
    at most the potentials' sup-norm times the remaining L1 margin residual.
    """
    linf = float(max(np.abs(alpha).max(), np.abs(beta).max(), 1.0))
    return report.dual_values[-1] + linf * report.residuals[-1]


def rate_diagnostics(
    report: SinkhornReport,
    reference_dual: float,
    measure: BaseMeasure | None = None,
    tail: int = 10,
    slack: float = 0.05,
) -> RateEstimate:
    """Fit a geometric decay to the dual gap along the last iterations.

    The gap at iteration k is reference_dual - dual_k.  Only the trailing
    window with gaps above the numerical floor enters the fit.  When a
    measure is supplied, the fitted ratio is compared against
    ``1 - (inf K'' / sup K'')^2`` over the realized tilt band widened by
    halving the realized tameness margin.
    """
    duals = np.asarray(report.dual_values, dtype=float)
    gaps = reference_dual - duals
    floor = 1e-14 * max(1.0, abs(reference_dual))
    usable = np.flatnonzero(gaps > floor)
    if usable.size < 3:
        raise TooFewIterationsError("not enough iterations with a resolvable dual gap")
    idx = usable[-tail:]
    ratio, r2, _ = fit_log_decay(idx.astype(float), gaps[idx])

    theory = None
    within = None
    if measure is not None and math.isfinite(report.table_min):
        delta = realized_delta(measure, report.table_min, report.table_max)
        band = tameness_band(measure, delta / 2.0)
        t_lo = float(mean_inverse(measure, band.lo))
        t_hi = float(mean_inverse(measure, band.hi))
        grid = np.linspace(t_lo, t_hi, 512)
        var = np.asarray(measure.variance(grid), dtype=float)
        s1, s2 = float(var.min()), float(var.max())
        theory = 1.0 - (s1 / s2) ** 2
        within = bool(ratio <= theory + slack)
    return RateEstimate(ratio=ratio, r_squared=r2, points=int(idx.size), theory_ratio=theory, within_theory=within)


@dataclass(frozen=True)
class MonotonicityVerdict:
    monotone: bool
    histories: tuple


def linf_monotonicity_check(
    measure: BaseMeasure,
    margin: Margin,
    trials: int = 5,
    rng: np.random.Generator | None = None,
    scale: float = 1.0,
    iters: int = 30,
) -> MonotonicityVerdict:
    """Replay the iteration from random starts; sup-distance of the tilt
    matrix to the solved reference must never increase between iterations."""
    rng = rng or np.random.default_rng(0)
    pots_ref, _, _ = solve(measure, margin)
    ref = pots_ref.tilt_matrix()

    histories = []
    monotone = True
    for _ in range(trials):
        alpha0 = scale * rng.uniform(-1.0, 1.0, size=margin.m)
        # tol=-1 forces the configured number of iterations so the trace is full
        cfg = SolverConfig(alpha0=alpha0, max_iters=iters, tol=-1.0, track_potentials=True)
        try:
            solve(measure, margin, cfg)
            raise AssertionError("unreachable: negative tolerance cannot be met")
        except MaxIterationsError as exc:
            rep = exc.report
        dists = [
            float(np.abs((a[:, None] + b[None, :]) - ref).max())
            for a, b in zip(rep.alphas, rep.betas)
        ]
        histories.append(dists)
        diffs = np.diff(dists)
        if np.any(diffs > 1e-9 * (1.0 + np.abs(dists[0]))):
            monotone = False
    return MonotonicityVerdict(monotone=monotone, histories=tuple(histories))


def entropy_of_table(measure: BaseMeasure, table: np.ndarray) -> float:
    """Summed relative entropy H(Z) of a mean table (primal objective)."""
    return float(np.sum(relative_entropy(measure, table)))
