"""Margin construction, validation, transformations, and distances.

A margin is a pair of prescribed row sums ``r`` (length m) and column sums
``c`` (length n) with a common total ``N``.  Margins are stored as dense
float vectors for every base measure; integer-only code paths re-validate
integrality where they need it.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .measures import BaseMeasure, TiltBridgeError

# File-format round-off below this relative size is repaired silently by
# rescaling c; anything larger is reported by validate() instead.
TOTAL_MISMATCH_TOL = 1e-9

INTEGRALITY_TOL = 1e-9


class DimensionMismatchError(TiltBridgeError, ValueError):
    pass


@dataclass(frozen=True)
class Margin:
    """Row-sum and column-sum targets with dimension and total metadata."""

    r: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        r = np.atleast_1d(np.asarray(self.r, dtype=float))
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        if r.ndim != 1 or c.ndim != 1 or r.size < 1 or c.size < 1:
            raise DimensionMismatchError("margins must be non-empty vectors")
        mismatch = abs(float(r.sum() - c.sum()))
        if 0.0 < mismatch <= TOTAL_MISMATCH_TOL * max(1.0, abs(float(r.sum()))):
            if c.sum() != 0.0:
                c = c * (r.sum() / c.sum())
        r.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "c", c)

    @property
    def m(self) -> int:
        return self.r.size

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def total(self) -> float:
        return float(self.r.sum())

    def totals_consistent(self) -> bool:
        return abs(float(self.r.sum() - self.c.sum())) <= TOTAL_MISMATCH_TOL * max(
            1.0, abs(float(self.r.sum()))
        )

    def as_integer(self):
        """(r, c) as int arrays; raises if any entry is off-lattice."""
        r, c = self.r, self.c
        ri, ci = np.rint(r), np.rint(c)
        if np.abs(r - ri).max() > INTEGRALITY_TOL or np.abs(c - ci).max() > INTEGRALITY_TOL:
            raise DimensionMismatchError("margin is not integer-valued")
        return ri.astype(int), ci.astype(int)


@dataclass(frozen=True)
class StepMargin:
    """Piecewise-constant margin embedding on (0, 1].

    ``r_bar`` holds the value of the rescaled row margin on each of the m
    cells ((i-1)/m, i/m]; likewise ``c_bar`` on n cells.
    """

    r_bar: np.ndarray
    c_bar: np.ndarray

    def r_at(self, t):
        idx = np.clip(np.ceil(np.asarray(t) * self.r_bar.size).astype(int) - 1, 0, self.r_bar.size - 1)
        return self.r_bar[idx]

    def c_at(self, t):
        idx = np.clip(np.ceil(np.asarray(t) * self.c_bar.size).astype(int) - 1, 0, self.c_bar.size - 1)
        return self.c_bar[idx]


@dataclass(frozen=True)
class FeasibilityVerdict:
    status: str  # "screen_passed" | "infeasible"
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.status == "screen_passed"


def validate(margin: Margin, measure: BaseMeasure) -> FeasibilityVerdict:
    """Necessary feasibility screen for solving under the given measure.

    Rejects total-sum mismatch and rescaled margin averages outside the
    attainable mean range.  Passing the screen does not certify a solution
    exists; that is certified downstream by solver convergence.
    """
    if not margin.totals_consistent():
        return FeasibilityVerdict(
            "infeasible",
            f"row total {margin.r.sum():.12g} != column total {margin.c.sum():.12g}",
        )
    lo, hi = measure.support_lo, measure.support_hi
    r_avg = margin.r / margin.n
    c_avg = margin.c / margin.m
    if np.any(r_avg <= lo) or np.any(r_avg >= hi):
        return FeasibilityVerdict("infeasible", "a row average falls outside the mean range")
    if np.any(c_avg <= lo) or np.any(c_avg >= hi):
        return FeasibilityVerdict("infeasible", "a column average falls outside the mean range")
    return FeasibilityVerdict("screen_passed")


def clone(m0: Margin, k: int) -> Margin:
    """k-fold cloning: each margin value is scaled by k and repeated k times.

    The clone of an a x b margin is the ka x kb margin ``k*r0 (x) ones(k)``
    (Kronecker product), so cloning preserves the step-margin embedding
    exactly and the solved potentials of the clone are the k-fold expansion
    of the original's.
    """
    if k < 1 or k != int(k):
        raise ValueError("k must be a positive integer")
    k = int(k)
    return Margin(np.repeat(k * m0.r, k), np.repeat(k * m0.c, k))


def barvinok(n: int, s: float, t: float, rho: float) -> Margin:
    """Symmetric two-value probe margin: floor(n^rho) rows at t*n, rest at s*n."""
    if not (0 < s <= t):
        raise ValueError("need 0 < s <= t")
    if not (0 <= rho < 1):
        raise ValueError("need rho in [0, 1)")
    if n < 2:
        raise ValueError("need n >= 2")
    k = int(math.floor(n**rho))
    if k < 1:
        raise ValueError("floor(n^rho) must be >= 1")
    r = np.concatenate([np.full(k, t * n), np.full(n - k, s * n)])
    return Margin(r, r.copy())


def l1_margin_distance(a: Margin, b: Margin) -> float:
    """Sum of L1 distances between the row vectors and the column vectors."""
    if a.m != b.m or a.n != b.n:
        raise DimensionMismatchError(f"margin shapes differ: {a.m}x{a.n} vs {b.m}x{b.n}")
    return float(np.abs(a.r - b.r).sum() + np.abs(a.c - b.c).sum())


def to_step_margin(margin: Margin) -> StepMargin:
    r_bar = margin.r / margin.n
    c_bar = margin.c / margin.m
    r_bar.setflags(write=False)
    c_bar.setflags(write=False)
    return StepMargin(r_bar, c_bar)


def _refine(values: np.ndarray, factor: int) -> np.ndarray:
    return np.repeat(values, factor)


def step_l1_distance(a: StepMargin, b: StepMargin) -> float:
    """L1 distance between step margins after refinement to a common grid."""
    out = 0.0
    for va, vb in ((a.r_bar, b.r_bar), (a.c_bar, b.c_bar)):
        g = math.lcm(va.size, vb.size)
        fa, fb = _refine(va, g // va.size), _refine(vb, g // vb.size)
        out += float(np.abs(fa - fb).sum() / g)
    return out


# ---------------------------------------------------------------------------
# file formats: JSON {"r": [...], "c": [...]} or CSV with lines "r,..." "c,..."
# ---------------------------------------------------------------------------


def save_margin(margin: Margin, path: str) -> None:
    if str(path).endswith(".csv"):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["r"] + [repr(float(v)) for v in margin.r])
            writer.writerow(["c"] + [repr(float(v)) for v in margin.c])
    else:
        with open(path, "w") as fh:
            json.dump({"r": margin.r.tolist(), "c": margin.c.tolist()}, fh)
            fh.write("\n")


def load_margin(path: str) -> Margin:
    if str(path).endswith(".csv"):
        rows = {}
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row:
                    continue
                rows[row[0].strip()] = [float(v) for v in row[1:]]
        if "r" not in rows or "c" not in rows:
            raise ValueError(f"{path}: expected 'r' and 'c' lines")
        return Margin(np.array(rows["r"]), np.array(rows["c"]))
    with open(path) as fh:
        data = json.load(fh)
    return Margin(np.asarray(data["r"], dtype=float), np.asarray(data["c"], dtype=float))
