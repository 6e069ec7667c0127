"""Small shared numerics: KS statistics, log-decay fits, worker helpers."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_THREADS_ENV = "TILTBRIDGE_THREADS"


def default_threads() -> int:
    """Worker count from the environment, else 1 (fully deterministic path)."""
    raw = os.environ.get(_THREADS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def parallel_map(fn, items, max_workers=None):
    """Order-preserving map, threaded when max_workers > 1.

    Results are reduced in input order regardless of completion order, so
    output is independent of scheduling.
    """
    items = list(items)
    if max_workers is None:
        max_workers = default_threads()
    if max_workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(fn, items))


def spawn_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for (seed, stream), stable across runs."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))


def ks_statistic(sample, cdf) -> float:
    """Two-sided Kolmogorov-Smirnov distance sup_x |ECDF(x) - F(x)|.

    Both step functions only move at sample points (and F's atoms sit at
    sample points whenever the law is discrete and the sample is from it),
    so the supremum is attained at a sample value approached from the left
    or the right; both limits are compared, which keeps the statistic exact
    for discrete laws instead of inflating it by the largest atom mass.
    """
    x = np.asarray(sample, dtype=float)
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    uniq, counts = np.unique(x, return_counts=True)
    ecdf_right = np.cumsum(counts) / n
    ecdf_left = ecdf_right - counts / n
    f_right = np.asarray(cdf(uniq), dtype=float)
    f_left = np.asarray(cdf(np.nextafter(uniq, -np.inf)), dtype=float)
    d = np.maximum(np.abs(ecdf_right - f_right), np.abs(ecdf_left - f_left))
    return float(d.max())


def ks_critical_value(n: int, level: float) -> float:
    """Asymptotic two-sided KS critical value at the given significance level."""
    return float(np.sqrt(-0.5 * np.log(level / 2.0)) / np.sqrt(n))


def fit_log_decay(ks, values):
    """Least-squares line through (k, log values): returns (ratio, r2, slope).

    `values` must be positive; ratio = exp(slope) is the fitted geometric
    decay factor per step.
    """
    ks = np.asarray(ks, dtype=float)
    y = np.log(np.asarray(values, dtype=float))
    if ks.size < 2:
        raise ValueError("need at least two points to fit a decay rate")
    slope, intercept = np.polyfit(ks, y, 1)
    pred = slope * ks + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(np.exp(slope)), r2, float(slope)
