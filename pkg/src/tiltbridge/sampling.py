"""Sampling and exact conditional-law oracles for margin-conditioned tables.

Two table laws are compared throughout: the fitted independent-entry tilted
model Y (entries drawn from the tilted law at tilt alpha_i + beta_j), and
the conditioned model X (the base product measure restricted to tables with
the exact margin).  For small integer instances X is computed exactly by
depth-first enumeration of the transportation polytope's lattice points;
for nonnegative-integer weights equal to 1/x! per entry the conditional law
has the classical hypergeometric closed form, which serves as an
independent oracle.  Cut-norm concentration of Y around the solved mean
table is measured with an exact corner-enumeration of the cut norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .margins import Margin, clone
from .measures import BaseMeasure, TiltBridgeError
from .sinkhorn import Potentials, SolverConfig, TiltOutOfDomainError, solve

# Depth-first enumeration stays exact and fast below these instance sizes.
ENUM_MAX_CELLS = 20
ENUM_MAX_TOTAL = 30

REJECTION_MIN_ACCEPT = 1e-6


class InstanceTooLargeError(TiltBridgeError, ValueError):
    pass


class RejectionStarvedError(TiltBridgeError, ArithmeticError):
    pass


@dataclass(frozen=True)
class TableEnsemble:
    samples: np.ndarray  # (count, m, n)
    origin: str  # "tilted" | "exact_conditional" | "fisher_yates"
    acceptance_rate: float | None = None


@dataclass(frozen=True)
class EmpiricalLaw:
    """Finite law: support values (tables or scalars) with probabilities."""

    support: tuple
    probabilities: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if np.any(p < -1e-15):
            raise ValueError("negative probability")
        if abs(float(p.sum()) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)

    def mean_table(self) -> np.ndarray:
        out = np.zeros_like(np.asarray(self.support[0], dtype=float))
        for tbl, p in zip(self.support, self.probabilities):
            out += p * np.asarray(tbl, dtype=float)
        return out


def total_variation(a: EmpiricalLaw, b: EmpiricalLaw) -> float:
    """TV distance between two finite laws, matching support by value."""
    probs: dict = {}
    for tbl, p in zip(a.support, a.probabilities):
        key = _freeze(tbl)
        probs[key] = probs.get(key, 0.0) + float(p)
    for tbl, p in zip(b.support, b.probabilities):
        key = _freeze(tbl)
        probs[key] = probs.get(key, 0.0) - float(p)
    return 0.5 * sum(abs(v) for v in probs.values())


def _freeze(tbl):
    arr = np.asarray(tbl)
    if arr.ndim == 0:
        return float(arr)
    return tuple(map(tuple, np.atleast_2d(arr).tolist()))


# ---------------------------------------------------------------------------
# tilted-model sampling
# ---------------------------------------------------------------------------


def sample_model(
    measure: BaseMeasure, potentials: Potentials, count: int, rng: np.random.Generator
) -> TableEnsemble:
    """Independent-entry draws from the tilted model at the given potentials."""
    tilt = potentials.tilt_matrix()
    if not measure.contains_tilt(tilt):
        raise TiltOutOfDomainError("potentials leave the tilt domain")
    m, n = tilt.shape
    samples = measure.sample(tilt, rng, size=(count, m, n))
    return TableEnsemble(samples=np.asarray(samples, dtype=float), origin="tilted")


# ---------------------------------------------------------------------------
# exact conditional laws on small integer instances
# ---------------------------------------------------------------------------


def counting_log_weight(v: int) -> float:
    return 0.0


def poisson_log_weight(v: int) -> float:
    return -math.lgamma(v + 1.0)


def measure_log_weight(measure: BaseMeasure):
    """Per-entry log weight from a discrete base measure's atom masses."""
    if not measure.is_discrete or measure.log_atom_mass is None:
        raise TiltBridgeError(f"{measure.name} has no discrete atom masses")
    return lambda v: float(measure.log_atom_mass(float(v)))


def _check_enumerable(margin: Margin):
    r, c = margin.as_integer()
    if np.any(r < 0) or np.any(c < 0):
        raise InstanceTooLargeError("enumeration needs nonnegative integer margins")
    if r.size * c.size > ENUM_MAX_CELLS or r.sum() > ENUM_MAX_TOTAL:
        raise InstanceTooLargeError(
            f"instance {r.size}x{c.size} with total {int(r.sum())} exceeds the "
            f"enumeration bounds ({ENUM_MAX_CELLS} cells, total {ENUM_MAX_TOTAL})"
        )
    if r.sum() != c.sum():
        raise InstanceTooLargeError("margin totals differ")
    return r, c


def enumerate_conditional(margin: Margin, entry_cap: int | None, weight_log) -> EmpiricalLaw:
    """Exact conditional table law by depth-first lattice enumeration.

    Walks cells row-major, pruning by remaining row and column budgets (and
    the entry cap); each completed table gets weight prod_ij p(x_ij), then
    the collection is normalized.
    """
    r, c = _check_enumerable(margin)
    m, n = r.size, c.size
    cap = math.inf if entry_cap is None else int(entry_cap)
    tables: list = []
    logws: list = []
    grid = np.zeros((m, n), dtype=int)
    c_rem = c.astype(int).copy()

    def rec(i: int, j: int, r_left: int, logw: float):
        if i == m:
            if np.all(c_rem == 0):
                tables.append(grid.copy())
                logws.append(logw)
            return
        if j == n - 1:
            v = r_left
            if v <= min(c_rem[j], cap):
                grid[i, j] = v
                c_rem[j] -= v
                rec(i + 1, 0, int(r[i + 1]) if i + 1 < m else 0, logw + weight_log(v))
                c_rem[j] += v
                grid[i, j] = 0
            return
        # remaining columns must be able to absorb what is left of this row
        room = int(np.minimum(c_rem[j + 1 :], cap if cap < math.inf else c_rem[j + 1 :]).sum())
        v_lo = max(0, r_left - room)
        v_hi = min(r_left, int(c_rem[j]), cap if cap < math.inf else r_left)
        for v in range(v_lo, int(v_hi) + 1):
            grid[i, j] = v
            c_rem[j] -= v
            rec(i, j + 1, r_left - v, logw + weight_log(v))
            c_rem[j] += v
            grid[i, j] = 0

    rec(0, 0, int(r[0]) if m else 0, 0.0)
    if not tables:
        raise TiltBridgeError("no integer table satisfies the margin")
    logws = np.asarray(logws)
    w = np.exp(logws - logws.max())
    return EmpiricalLaw(tuple(tables), w / w.sum())


def fisher_yates_exact(margin: Margin) -> EmpiricalLaw:
    """Exact hypergeometric law over tables with the given integer margin.

    P(x) = prod_i r_i!  prod_j c_j! / (N!  prod_ij x_ij!); coincides with the
    conditional law of independent unit-mean Poisson entries given margins.
    """
    r, c = _check_enumerable(margin)
    base = enumerate_conditional(margin, None, counting_log_weight)
    log_const = (
        sum(math.lgamma(v + 1.0) for v in r)
        + sum(math.lgamma(v + 1.0) for v in c)
        - math.lgamma(float(r.sum()) + 1.0)
    )
    logps = [
        log_const - sum(math.lgamma(v + 1.0) for v in np.asarray(tbl).ravel())
        for tbl in base.support
    ]
    p = np.exp(np.asarray(logps))
    if abs(float(p.sum()) - 1.0) > 1e-10:
        raise TiltBridgeError(f"hypergeometric masses sum to {p.sum()!r}")
    return EmpiricalLaw(base.support, p / p.sum())


def entry_marginal(law: EmpiricalLaw, i: int, j: int) -> EmpiricalLaw:
    """Marginal law of entry (i, j) under a finite table law."""
    acc: dict = {}
    for tbl, p in zip(law.support, law.probabilities):
        v = float(np.asarray(tbl)[i, j])
        acc[v] = acc.get(v, 0.0) + float(p)
    vals = sorted(acc)
    return EmpiricalLaw(tuple(vals), np.array([acc[v] for v in vals]))


# ---------------------------------------------------------------------------
# weighted-count dynamic program: entry marginals beyond full enumeration
# ---------------------------------------------------------------------------


def exact_entry_marginal(
    margin: Margin, weight_log, i: int = 0, j: int = 0, entry_cap: int | None = None
) -> EmpiricalLaw:
    """Exact marginal of one entry via a row-by-row weighted-count recursion.

    Column budgets are sorted inside the memo key (per-entry weights depend
    only on the value, so the count is symmetric under column permutation),
    which keeps the state space small for margins beyond full enumeration
    range.
    """
    r0, c0 = margin.as_integer()
    if np.any(r0 < 0) or np.any(c0 < 0) or r0.sum() != c0.sum():
        raise InstanceTooLargeError("need consistent nonnegative integer margins")
    cap = int(min(r0.max(initial=0), c0.max(initial=0))) if entry_cap is None else int(entry_cap)
    # rotate the requested entry into the corner
    r = [int(r0[i])] + [int(v) for k, v in enumerate(r0) if k != i]
    c = [int(c0[j])] + [int(v) for k, v in enumerate(c0) if k != j]
    wcache = [float(weight_log(v)) for v in range(cap + 1)]
    memo: dict = {}

    def row_fill(left: int, budgets: tuple, cont) -> float:
        """Sum of weight(composition) * cont(budgets - composition) over all
        compositions of `left` into len(budgets) capped parts."""
        if not budgets:
            return cont(()) if left == 0 else 0.0
        head, tail = budgets[0], budgets[1:]
        room = sum(min(v, cap) for v in tail)
        total = 0.0
        for v in range(max(0, left - room), min(left, head, cap) + 1):
            total += math.exp(wcache[v]) * row_fill(
                left - v, tail, lambda rem, v=v: cont((head - v,) + rem)
            )
        return total

    def rows_weight(ri: int, budgets: tuple) -> float:
        """Total weight of all fillings of rows r[ri:] against the budgets."""
        if ri == len(r):
            return 1.0 if all(v == 0 for v in budgets) else 0.0
        key = (ri, tuple(sorted(budgets)))
        if key not in memo:
            memo[key] = row_fill(r[ri], key[1], lambda rem: rows_weight(ri + 1, rem))
        return memo[key]

    weights: dict = {}
    for v in range(min(r[0], c[0], cap) + 1):
        rest = row_fill(
            r[0] - v, tuple(c[1:]), lambda rem, v=v: rows_weight(1, (c[0] - v,) + rem)
        )
        total_v = math.exp(wcache[v]) * rest
        if total_v > 0.0:
            weights[float(v)] = total_v
    if not weights:
        raise TiltBridgeError("no integer table satisfies the margin")
    vals = sorted(weights)
    p = np.array([weights[v] for v in vals])
    return EmpiricalLaw(tuple(vals), p / p.sum())


# ---------------------------------------------------------------------------
# rejection sampling of the conditional law
# ---------------------------------------------------------------------------


def rejection_sample_conditional(
    measure: BaseMeasure,
    margin: Margin,
    potentials: Potentials,
    count: int,
    rng: np.random.Generator,
    rho: float | None = None,
    batch: int = 20000,
    max_batches: int = 500,
) -> TableEnsemble:
    """Conditional samples by rejection from the tilted proposal.

    Discrete measures accept on exact margin match (rho=0); continuous
    measures accept within L1 slack rho on both margins (exact conditioning
    has probability zero there).  Raises RejectionStarvedError when the
    acceptance rate drops below 1e-6.
    """
    if rho is None:
        rho = 0.0 if measure.is_discrete else _default_rho(measure, potentials, margin)
    tilt = potentials.tilt_matrix()
    m, n = tilt.shape
    accepted: list = []
    drawn = 0
    for _ in range(max_batches):
        ys = np.asarray(measure.sample(tilt, rng, size=(batch, m, n)), dtype=float)
        drawn += batch
        dr = np.abs(ys.sum(axis=2) - margin.r).sum(axis=1)
        dc = np.abs(ys.sum(axis=1) - margin.c).sum(axis=1)
        tol = 1e-9 if measure.is_discrete else rho
        ok = (dr <= max(tol, rho)) & (dc <= max(tol, rho))
        if ok.any():
            accepted.append(ys[ok])
        got = sum(a.shape[0] for a in accepted)
        if got >= count:
            break
        if drawn >= batch * 50 and got / drawn < REJECTION_MIN_ACCEPT:
            raise RejectionStarvedError(
                f"acceptance rate {got / drawn:.2e} below {REJECTION_MIN_ACCEPT}"
            )
    if not accepted or sum(a.shape[0] for a in accepted) < count:
        raise RejectionStarvedError("could not collect the requested conditional samples")
    samples = np.concatenate(accepted, axis=0)[:count]
    return TableEnsemble(samples=samples, origin="exact_conditional", acceptance_rate=samples.shape[0] / drawn)


def _default_rho(measure: BaseMeasure, potentials: Potentials, margin: Margin) -> float:
    from .measures import realized_delta

    z = np.asarray(measure.mean(potentials.tilt_matrix()), dtype=float)
    delta = realized_delta(measure, float(z.min()), float(z.max()))
    lplus = _smoothness_bound(measure, delta)
    m, n = z.shape
    return math.sqrt(8.0 * lplus * m * n * (m + n))


def _smoothness_bound(measure: BaseMeasure, delta: float) -> float:
    """Largest tilted variance over the half-delta widened tameness band."""
    from .measures import mean_inverse, tameness_band

    band = tameness_band(measure, delta / 2.0)
    t_lo = float(mean_inverse(measure, band.lo))
    t_hi = float(mean_inverse(measure, band.hi))
    grid = np.linspace(t_lo, t_hi, 512)
    return float(np.asarray(measure.variance(grid)).max())


# ---------------------------------------------------------------------------
# mixture-law comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MixtureReport:
    tv_distance: float
    block_cells: int
    method: str  # "exact" | "rejection"


def tilted_mixture_pmf(measure: BaseMeasure, potentials: Potentials, rows, cols, values):
    """Average tilted pmf over the block rows x cols, at the given values."""
    tilt = potentials.tilt_matrix()
    total = np.zeros(len(values))
    for i in rows:
        for j in cols:
            total += measure.tilted_pmf(float(tilt[i, j]), values)
    return total / (len(rows) * len(cols))


def mixture_tv_experiment(
    measure: BaseMeasure,
    margin: Margin,
    rows,
    cols,
    samples: int = 4000,
    rng: np.random.Generator | None = None,
    bins: int = 64,
) -> MixtureReport:
    """TV distance between the conditional block mixture and the tilted one.

    Discrete small instances are computed exactly (enumeration when the
    instance is small enough, otherwise the entry-marginal recursion);
    larger or continuous instances fall back to rejection sampling, with
    continuous laws compared on equal-probability bins of the tilted
    mixture.
    """
    rng = rng or np.random.default_rng(0)
    rows = list(rows)
    cols = list(cols)
    pots, _, _ = solve(measure, margin)

    if measure.is_discrete:
        try:
            weight = measure_log_weight(measure)
            support, cond = _discrete_block_mixture(margin, weight, rows, cols)
            method = "exact"
        except InstanceTooLargeError:
            ens = rejection_sample_conditional(measure, margin, pots, samples, rng)
            block = ens.samples[:, rows][:, :, cols].ravel()
            support = np.unique(block)
            cond = np.array([(block == v).mean() for v in support])
            method = "rejection"
        ref_support = measure.tilted_support(float(pots.tilt_matrix()[rows[0], cols[0]]))
        values = np.union1d(support, ref_support)
        mix = tilted_mixture_pmf(measure, pots, rows, cols, values)
        cond_full = np.zeros_like(mix)
        for v, p in zip(support, cond):
            cond_full[np.searchsorted(values, v)] += p
        tv = 0.5 * float(np.abs(cond_full - mix).sum()) + 0.5 * max(0.0, 1.0 - float(mix.sum()))
    else:
        ens = rejection_sample_conditional(measure, margin, pots, samples, rng)
        block = ens.samples[:, rows][:, :, cols].ravel()
        tilt = pots.tilt_matrix()
        ref = np.concatenate(
            [
                np.asarray(measure.sample(float(tilt[i, j]), rng, size=50_000 // (len(rows) * len(cols)) + 1))
                for i in rows
                for j in cols
            ]
        )
        edges = np.quantile(ref, np.linspace(0.0, 1.0, bins + 1))
        edges[0], edges[-1] = -np.inf, np.inf
        p_cond, _ = np.histogram(block, bins=edges)
        p_ref, _ = np.histogram(ref, bins=edges)
        tv = 0.5 * float(
            np.abs(p_cond / p_cond.sum() - p_ref / p_ref.sum()).sum()
        )
        method = "rejection"
    return MixtureReport(tv_distance=tv, block_cells=len(rows) * len(cols), method=method)


def _discrete_block_mixture(margin: Margin, weight_log, rows, cols):
    """Exact conditional mixture over a block, by enumeration or recursion."""
    try:
        law = enumerate_conditional(margin, None, weight_log)
        acc: dict = {}
        for i in rows:
            for j in cols:
                marg = entry_marginal(law, i, j)
                for v, p in zip(marg.support, marg.probabilities):
                    acc[v] = acc.get(v, 0.0) + float(p) / (len(rows) * len(cols))
    except InstanceTooLargeError:
        acc = {}
        for i in rows:
            for j in cols:
                marg = exact_entry_marginal(margin, weight_log, i, j)
                for v, p in zip(marg.support, marg.probabilities):
                    acc[v] = acc.get(v, 0.0) + float(p) / (len(rows) * len(cols))
    vals = np.array(sorted(acc))
    return vals, np.array([acc[v] for v in vals])


# ---------------------------------------------------------------------------
# margin fluctuation of the tilted model
# ---------------------------------------------------------------------------


def margin_fluctuation(
    measure: BaseMeasure,
    potentials: Potentials,
    margin: Margin,
    samples: int,
    rng: np.random.Generator,
) -> dict:
    """Empirical law of the tilted model's L1 margin deviations.

    Reports the coverage of the concentration radius
    rho* = sqrt(8 L+ m n (m + n)), with L+ the largest tilted variance over
    the realized tameness band widened by delta/2.
    """
    from .measures import realized_delta

    ens = sample_model(measure, potentials, samples, rng)
    dr = np.abs(ens.samples.sum(axis=2) - margin.r).sum(axis=1)
    dc = np.abs(ens.samples.sum(axis=1) - margin.c).sum(axis=1)
    z = np.asarray(measure.mean(potentials.tilt_matrix()), dtype=float)
    delta = realized_delta(measure, float(z.min()), float(z.max()))
    lplus = _smoothness_bound(measure, delta)
    m, n = z.shape
    rho_star = math.sqrt(8.0 * lplus * m * n * (m + n))
    coverage = float(np.mean((dr <= rho_star) & (dc <= rho_star)))
    return {
        "row_l1": dr,
        "col_l1": dc,
        "rho_star": rho_star,
        "coverage": coverage,
        "smoothness_bound": lplus,
        "delta": delta,
    }


# ---------------------------------------------------------------------------
# cut norm
# ---------------------------------------------------------------------------

CUT_EXACT_LIMIT = 20  # exact when min(m, n) fits a 2^k corner enumeration


@dataclass(frozen=True)
class CutNorm:
    value: float
    exact: bool


def cut_norm_exact(matrix: np.ndarray) -> CutNorm:
    """Cut norm of the step kernel of a matrix.

    Equals max over 0/1 vectors x, y of |x' A y| / (m n); for a fixed x the
    optimal y picks one sign's entries of x' A, so only the smaller side is
    enumerated.  Above the enumeration limit a greedy alternating ascent is
    returned and flagged as a lower bound.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2:
        raise ValueError("need a 2-d matrix")
    m, n = a.shape
    if min(m, n) > CUT_EXACT_LIMIT:
        return CutNorm(_cut_norm_greedy(a), exact=False)
    if m > n:
        a = a.T
        m, n = a.shape
    best = 0.0
    k = m
    chunk = 1 << min(k, 16)
    for start in range(0, 1 << k, chunk):
        idx = np.arange(start, min(start + chunk, 1 << k), dtype=np.uint64)
        bits = (idx[:, None] >> np.arange(k, dtype=np.uint64)[None, :]) & 1
        rows = bits.astype(float) @ a  # (chunk, n)
        pos = np.clip(rows, 0.0, None).sum(axis=1)
        neg = np.clip(-rows, 0.0, None).sum(axis=1)
        best = max(best, float(pos.max()), float(neg.max()))
    return CutNorm(best / (a.shape[0] * a.shape[1]), exact=True)


def _cut_norm_greedy(a: np.ndarray, restarts: int = 8) -> float:
    m, n = a.shape
    rng = np.random.default_rng(12345)
    best = 0.0
    for sign in (1.0, -1.0):
        b = sign * a
        for _ in range(restarts):
            y = (rng.random(n) < 0.5).astype(float)
            for _ in range(64):
                x = (b @ y > 0).astype(float)
                y_new = (b.T @ x > 0).astype(float)
                if np.array_equal(y_new, y):
                    break
                y = y_new
            best = max(best, float(x @ b @ y))
    return best / (m * n)


@dataclass(frozen=True)
class CutTrendPoint:
    k: int
    m: int
    n: int
    mean: float
    std: float
    sem: float
    exact: bool


def cut_concentration_experiment(
    measure: BaseMeasure,
    base_margin: Margin,
    clone_ks,
    samples: int,
    rng: np.random.Generator,
) -> list[CutTrendPoint]:
    """Mean cut-norm distance of tilted samples to the solved mean table,
    along a cloning sequence of the base margin."""
    out = []
    for k in clone_ks:
        marg = clone(base_margin, k)
        pots, table, _ = solve(measure, marg)
        ens = sample_model(measure, pots, samples, rng)
        vals = np.array([cut_norm_exact(y - table.table).value for y in ens.samples])
        exact = bool(min(marg.m, marg.n) <= CUT_EXACT_LIMIT)
        out.append(
            CutTrendPoint(
                k=int(k),
                m=marg.m,
                n=marg.n,
                mean=float(vals.mean()),
                std=float(vals.std(ddof=1)) if vals.size > 1 else 0.0,
                sem=float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0,
                exact=exact,
            )
        )
    return out
