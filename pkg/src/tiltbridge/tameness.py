"""Phase-diagram predicates for tame margins and empirical blow-up probes.

A family of margins whose rescaled row/column sums all lie in [s, t] is
uniformly tame when the solved mean tables stay inside a fixed band away
from the support boundary, no matter the dimensions.  Two analytic
classifiers cover the known regimes:

* bounded support:  (s + t - 2A)^2 < 4 (B - A)(s - A)  implies tame, the
  reversed strict inequality implies not tame;
* ``variance_increasing_logconvex`` families (necessarily B = inf):
  phi(A) < 3 phi(s) - 2 phi(t)  and  2 phi(t) - phi(s) < phi(B)  implies
  tame, where phi is the tilt-for-mean map; when phi(A) = -inf, the reverse
  of the second inequality implies not tame.

Equality cases are reported as "boundary" within an absolute band of 1e-9.
The two-value probe margins (a vanishing fraction of rows at t*n, the rest
at s*n) exhibit a sharp transition: the solved corner entry stays bounded in
the tame regime and grows linearly in n beyond it, which blowup_sweep
measures empirically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .margins import Margin, barvinok
from .measures import BaseMeasure, DomainError, mean_inverse
from .sinkhorn import SolverConfig, TiltBridgeError, solve

BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class PhaseVerdict:
    region: str  # "tame" | "non_tame" | "boundary" | "inconclusive"
    criterion_used: str
    witness: float | None = None


def classify_bounded(measure: BaseMeasure, s: float, t: float) -> PhaseVerdict:
    """Quadratic phase criterion for measures with bounded support."""
    lo, hi = measure.support_lo, measure.support_hi
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise DomainError("classify_bounded needs a bounded-support measure")
    if not (lo <= s <= t <= hi) or not (lo < s < hi) or not (lo < t < hi):
        raise DomainError("need support_lo < s <= t < support_hi")
    lhs = (s + t - 2.0 * lo) ** 2
    rhs = 4.0 * (hi - lo) * (s - lo)
    gap = rhs - lhs
    if abs(gap) <= BOUNDARY_TOL:
        return PhaseVerdict("boundary", "bounded_quadratic", witness=gap)
    region = "tame" if gap > 0 else "non_tame"
    return PhaseVerdict(region, "bounded_quadratic", witness=gap)


def classify_logconvex(measure: BaseMeasure, s: float, t: float) -> PhaseVerdict:
    """Tilt-space phase criterion for increasing log-convex variance families."""
    if not measure.variance_increasing_logconvex:
        raise DomainError(f"{measure.name} lacks the increasing/log-convex variance property")
    if not (measure.support_lo < s <= t < measure.support_hi):
        raise DomainError("need support_lo < s <= t < support_hi")
    phi_s = float(mean_inverse(measure, s))
    phi_t = float(mean_inverse(measure, t))
    phi_a, phi_b = measure.tilt_lo, measure.tilt_hi
    first_ok = phi_a < 3.0 * phi_s - 2.0 * phi_t
    gap = phi_b - (2.0 * phi_t - phi_s)
    if math.isfinite(gap) and abs(gap) <= BOUNDARY_TOL:
        return PhaseVerdict("boundary", "logconvex_tilt", witness=gap)
    if gap > 0 and first_ok:
        return PhaseVerdict("tame", "logconvex_tilt", witness=gap)
    if gap < 0 and phi_a == -math.inf:
        return PhaseVerdict("non_tame", "logconvex_tilt", witness=gap)
    return PhaseVerdict("inconclusive", "logconvex_tilt", witness=gap)


def critical_ratio(measure: BaseMeasure, s: float) -> float:
    """Largest t/s below which [s, t] margins are uniformly tame.

    Closed forms: ``1 + sqrt(1 + r/s)`` for the counting family and its
    r-fold convolutions, 2 for the gamma/Lebesgue family, infinity for
    Poisson and Gaussian.  Other families solve ``2 phi(t) - phi(s) =
    phi(B)`` for t numerically.
    """
    if not measure.contains_mean(s):
        raise DomainError(f"s={s!r} outside the mean range")
    if measure.name == "counting":
        return 1.0 + math.sqrt(1.0 + 1.0 / s)
    if measure.name == "negbinom":
        return 1.0 + math.sqrt(1.0 + measure.params[0] / s)
    if measure.name in ("lebesgue", "gamma"):
        return 2.0
    if measure.name in ("poisson", "gaussian"):
        return math.inf
    phi_b = measure.tilt_hi
    if not math.isfinite(phi_b):
        return math.inf
    phi_s = float(mean_inverse(measure, s))

    def crossing(t):
        return 2.0 * float(mean_inverse(measure, t)) - phi_s - phi_b

    lo = s
    hi = s
    span = measure.support_hi - s if math.isfinite(measure.support_hi) else math.inf
    step = min(max(s, 1.0), span / 4.0 if math.isfinite(span) else max(s, 1.0))
    for _ in range(200):
        hi = min(hi + step, measure.support_hi - 1e-12 * max(1.0, abs(measure.support_hi)))
        if crossing(hi) > 0:
            break
        step *= 2.0
    else:
        raise DomainError(f"no tameness threshold found for {measure.name} at s={s!r}")
    if crossing(lo) > 0:
        raise DomainError(f"already beyond the threshold at t=s for {measure.name}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if crossing(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi) / s


@dataclass(frozen=True)
class ErdosGallaiReport:
    satisfied: bool
    min_value: float
    argmin_size: int
    bounds_ok: bool | None  # c1 <= r_i/n <= c2 check when c2 supplied
    per_size: np.ndarray


def erdos_gallai_deep(
    margin: Margin,
    support_top: float,
    c1: float,
    c3: float,
    c2: float | None = None,
) -> ErdosGallaiReport:
    """Deep-interior degree condition for symmetric margins.

    For each admissible prefix size k >= c1^2 * n of the descending-sorted
    margin, evaluates

        B k^2 + SUM_{i not in I} min(B k, r_i) - SUM_{i in I} r_i - c3 k^2

    and reports whether the minimum over k is nonnegative.  Prefixes attain
    the minimum over all subsets of each size: swapping a larger r_i into I
    lowers the subtracted sum by at least as much as it can raise the
    complement term (see subset_objective for the exhaustive oracle).
    """
    if margin.m != margin.n or np.abs(margin.r - margin.c).max() > 1e-9 * max(1.0, abs(margin.total)):
        raise DomainError("erdos_gallai_deep needs a symmetric margin (r == c)")
    if not (0.0 < c1 < 1.0):
        raise DomainError("need 0 < c1 < 1")
    n = margin.m
    r = np.sort(margin.r)[::-1]
    bounds_ok = None
    if c2 is not None:
        scaled = margin.r / n
        bounds_ok = bool(np.all(scaled >= c1) and np.all(scaled <= c2))

    k_min = max(1, int(math.ceil(c1 * c1 * n)))
    prefix = np.concatenate([[0.0], np.cumsum(r)])
    values = []
    for k in range(k_min, n + 1):
        inside = prefix[k]
        outside = np.minimum(support_top * k, r[k:]).sum()
        values.append(support_top * k * k + outside - inside - c3 * k * k)
    values = np.asarray(values)
    j = int(values.argmin())
    return ErdosGallaiReport(
        satisfied=bool(values.min() >= 0.0),
        min_value=float(values.min()),
        argmin_size=k_min + j,
        bounds_ok=bounds_ok,
        per_size=values,
    )


def subset_objective(margin: Margin, support_top: float, c3: float, subset) -> float:
    """Objective of one explicit subset; exhaustive oracle for small n."""
    r = margin.r
    idx = np.zeros(margin.m, dtype=bool)
    idx[list(subset)] = True
    k = int(idx.sum())
    return float(
        support_top * k * k
        + np.minimum(support_top * k, r[~idx]).sum()
        - r[idx].sum()
        - c3 * k * k
    )


def exhaustive_subset_minimum(margin: Margin, support_top: float, c1: float, c3: float) -> float:
    """Brute-force minimum over all admissible subsets (n <= ~15)."""
    n = margin.m
    k_min = max(1, int(math.ceil(c1 * c1 * n)))
    best = math.inf
    for k in range(k_min, n + 1):
        for subset in combinations(range(n), k):
            best = min(best, subset_objective(margin, support_top, c3, subset))
    return best


@dataclass(frozen=True)
class BlowupTrend:
    sizes: tuple
    corner_entries: tuple
    max_entries: tuple
    slope: float
    growth_ratio: float
    verdict: str  # "bounded" | "diverging"
    boundary_proximity: float | None  # min distance of max entry to a finite top
    error: str | None = None


def blowup_sweep(
    measure: BaseMeasure,
    s: float,
    t: float,
    rho: float,
    n_list,
    tol_scale: float = 1e-8,
    max_iters: int = 20000,
) -> BlowupTrend:
    """Solve the two-value probe margins over increasing n and fit the trend.

    Diverging means the corner entry grows with slope above 0.01*s per unit
    n (unbounded support), or the largest entry comes within 1e-3 of a
    finite support top.  The slope is the secant over the two largest sizes:
    in the bounded regime the corner converges with an O(1/n) transient that
    would contaminate a full-window fit, while linear growth keeps every
    trailing secant at its asymptotic rate.  Warm starts reuse the previous
    size's two block potentials, which keeps supercritical runs cheap.
    """
    sizes, corners, maxima = [], [], []
    warm_blocks = None
    error = None
    for n in n_list:
        margin = barvinok(n, s, t, rho)
        k = int(math.floor(n**rho))
        alpha0 = None
        if warm_blocks is not None:
            alpha0 = np.concatenate([np.full(k, warm_blocks[0]), np.full(n - k, warm_blocks[1])])
        cfg = SolverConfig(
            alpha0=alpha0,
            max_iters=max_iters,
            tol=tol_scale * max(1.0, margin.total),
            track_potentials=False,
        )
        try:
            pots, table, _ = solve(measure, margin, cfg)
        except TiltBridgeError as exc:
            error = f"n={n}: {exc}"
            break
        sizes.append(n)
        corners.append(float(table.table[0, 0]))
        maxima.append(float(table.max_entry))
        warm_blocks = (float(pots.alpha[0]), float(pots.alpha[-1]))

    if len(sizes) < 1:
        raise TiltBridgeError(f"blow-up sweep produced no data: {error}")
    if len(sizes) >= 2:
        slope = (corners[-1] - corners[-2]) / (sizes[-1] - sizes[-2])
        growth = corners[-1] / corners[0] if corners[0] != 0 else math.inf
    else:
        slope, growth = 0.0, 1.0

    proximity = None
    if math.isfinite(measure.support_hi):
        proximity = float(measure.support_hi - max(maxima))
        diverging = proximity <= 1e-3
    else:
        diverging = slope > 0.01 * s
    return BlowupTrend(
        sizes=tuple(sizes),
        corner_entries=tuple(corners),
        max_entries=tuple(maxima),
        slope=slope,
        growth_ratio=float(growth),
        verdict="diverging" if diverging else "bounded",
        boundary_proximity=proximity,
        error=error,
    )
