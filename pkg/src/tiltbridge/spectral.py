"""Singular-value spectra of centered table models and their predicted limits.

The centered, rescaled model ``(Y - Z) / sqrt(nu)`` (``nu`` is the
normalization, by default ``(m + n) s* / 2`` with ``s*`` the largest entry
variance; ``s* n`` in the square case, where the two coincide) has an
empirical singular value distribution whose large-size limit depends only on
the entrywise variance profile.  The limit's Stieltjes transform ``tau``
solves the discrete Dyson fixed point

    -1 / tau_i = z - SUM_j S_ij / (1 + SUM_k S_kj tau_k),

with ``S`` the normalized variance profile.  For constant profiles this
reduces to the scalar Marchenko-Pastur equation and, in singular-value
coordinates, the quarter-circle law.  Densities are recovered from
``Im <tau> / pi`` slightly above the real axis; the solver works in
eigenvalue coordinates (squared singular values) and the density routine
carries the square-root transform bookkeeping in its metadata.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .measures import TiltBridgeError
from .util import parallel_map


class SpectralError(TiltBridgeError, ValueError):
    pass


@dataclass(frozen=True)
class ESDResult:
    singular_values: np.ndarray  # ascending
    scaling: float  # s* used
    normalization: float  # divisor nu: values are svals(M) / sqrt(nu)
    convention: str  # "symmetric" ((m+n)s*/2) or "square" (s*n)
    shape: tuple
    histogram_bins: np.ndarray
    histogram_density: np.ndarray


@dataclass(frozen=True)
class DysonSolution:
    tau: np.ndarray  # complex, length m
    z: complex
    residual: float
    density_estimate: float  # Im <tau> / pi, eigenvalue coordinates
    iterations: int
    residual_history: tuple = ()


def esd(
    matrix: np.ndarray,
    center: np.ndarray,
    s_star: float,
    convention: str = "symmetric",
    bins: int = 50,
) -> ESDResult:
    """Empirical singular values of the centered, rescaled matrix."""
    a = np.asarray(matrix, dtype=float)
    c = np.asarray(center, dtype=float)
    if a.shape != c.shape or a.ndim != 2:
        raise SpectralError(f"shape mismatch: {a.shape} vs {c.shape}")
    if s_star <= 0:
        raise SpectralError("s_star must be positive")
    m, n = a.shape
    if convention == "symmetric":
        nu = 0.5 * (m + n) * s_star
    elif convention == "square":
        nu = n * s_star
    else:
        raise SpectralError(f"unknown normalization convention {convention!r}")
    vals = np.linalg.svd((a - c) / math.sqrt(nu), compute_uv=False)
    vals = np.sort(vals)
    hi = max(float(vals.max()), 1e-12) if vals.size else 1.0
    density, edges = np.histogram(vals, bins=bins, range=(0.0, hi), density=True)
    return ESDResult(
        singular_values=vals,
        scaling=float(s_star),
        normalization=float(nu),
        convention=convention,
        shape=(m, n),
        histogram_bins=edges,
        histogram_density=density,
    )


# ---------------------------------------------------------------------------
# reference laws
# ---------------------------------------------------------------------------


def quarter_circle_density(x):
    x = np.asarray(x, dtype=float)
    return np.where((x >= 0) & (x <= 2.0), np.sqrt(np.clip(4.0 - x * x, 0.0, None)) / math.pi, 0.0)


def quarter_circle_cdf(x):
    x = np.asarray(x, dtype=float)
    xc = np.clip(x, 0.0, 2.0)
    val = (xc * np.sqrt(4.0 - xc * xc) + 4.0 * np.arcsin(xc / 2.0)) / (2.0 * math.pi)
    return np.where(x < 0, 0.0, np.where(x > 2.0, 1.0, val))


def quarter_circle_quantile(u):
    """Inverse CDF by bisection; used for self-testing the comparator."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    lo = np.zeros_like(u)
    hi = np.full_like(u, 2.0)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = quarter_circle_cdf(mid) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def quarter_circle_distance(result: ESDResult) -> float:
    """KS distance of a square-case ESD to the quarter-circle law."""
    m, n = result.shape
    if m != n:
        raise SpectralError("quarter-circle comparison needs a square matrix")
    return _ks_to_cdf(result.singular_values, quarter_circle_cdf)


def _ks_to_cdf(sorted_vals: np.ndarray, cdf) -> float:
    x = np.sort(np.asarray(sorted_vals, dtype=float))
    k = x.size
    if k == 0:
        raise SpectralError("empty spectrum")
    f = cdf(x)
    up = np.arange(1, k + 1) / k - f
    dn = f - np.arange(0, k) / k
    return float(max(up.max(), dn.max(), 0.0))


def mp_edges(kappa: float):
    return (1.0 - math.sqrt(kappa)) ** 2, (1.0 + math.sqrt(kappa)) ** 2


def mp_density(x, kappa: float):
    """Marchenko-Pastur density (absolutely continuous part) at ratio kappa."""
    lo, hi = mp_edges(kappa)
    x = np.asarray(x, dtype=float)
    inside = (x > max(lo, 0.0)) & (x < hi) & (x > 0)
    out = np.zeros_like(x)
    xv = np.where(inside, x, 1.0)
    out = np.where(
        inside, np.sqrt(np.clip((hi - xv) * (xv - lo), 0.0, None)) / (2.0 * math.pi * kappa * xv), 0.0
    )
    return out


def mp_cdf(x, kappa: float, grid_points: int = 4001):
    """MP distribution function, including the (1 - 1/kappa) atom at zero
    when kappa > 1.  The continuous part is integrated in sqrt-coordinates,
    which absorbs the 1/sqrt(x) hard-edge singularity at kappa = 1."""
    lo, hi = mp_edges(kappa)
    atom = max(0.0, 1.0 - 1.0 / kappa)
    u = np.linspace(math.sqrt(max(lo, 0.0)), math.sqrt(hi), grid_points)
    integrand = mp_density(u * u, kappa) * 2.0 * u
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(u))])
    total = cum[-1]
    scale = (1.0 - atom) / total if total > 0 else 0.0
    x = np.asarray(x, dtype=float)
    interp = np.interp(np.sqrt(np.clip(x, 0.0, None)), u, cum * scale, left=0.0, right=(1.0 - atom))
    return np.where(x < 0, 0.0, atom + interp)


def mp_distance(eigenvalues, kappa: float) -> float:
    """KS distance of nonnegative eigenvalues to the MP(kappa) law."""
    vals = np.asarray(eigenvalues, dtype=float)
    if vals.size == 0:
        raise SpectralError("empty spectrum")
    if vals.min() < -1e-8:
        raise SpectralError(f"negative eigenvalue {vals.min()!r}")
    vals = np.clip(vals, 0.0, None)
    if kappa <= 0:
        raise SpectralError("kappa must be positive")
    return _ks_to_cdf(vals, lambda x: mp_cdf(x, kappa))


def mp_stieltjes(z: complex, kappa: float = 1.0) -> complex:
    """Stieltjes transform of MP(kappa) (unit variance), upper-half-plane branch."""
    a = kappa * z
    b = z + kappa - 1.0
    disc = cmath.sqrt(b * b - 4.0 * a)
    for root in ((-b + disc) / (2.0 * a), (-b - disc) / (2.0 * a)):
        if root.imag > 0:
            return root
    raise SpectralError(f"no Herglotz root at z={z!r}")


# ---------------------------------------------------------------------------
# discrete Dyson fixed point
# ---------------------------------------------------------------------------


def dyson_solve(
    S: np.ndarray,
    normalization: float,
    z: complex,
    tol: float = 1e-12,
    max_iters: int = 100_000,
    damping: float = 0.5,
    tau0: np.ndarray | None = None,
    track_residuals: bool = False,
) -> DysonSolution:
    """Damped fixed-point solve of the discrete Dyson equation.

    ``S`` is the raw entrywise variance profile; it is divided by
    ``normalization`` internally.  The imaginary part of the iterate is
    projected back to the closed upper half plane every step (the solution
    is Herglotz), and the damping halves whenever the residual rises, which
    settles the oscillation the undamped map develops near the spectral
    edge.
    """
    s = np.asarray(S, dtype=float) / float(normalization)
    if np.any(s <= 0) or not np.all(np.isfinite(s)):
        raise SpectralError("variance profile must be positive and finite")
    if z.imag <= 0.0:
        raise SpectralError("need Im z > 0 (the solution is a Herglotz function)")
    m, n = s.shape
    tau = (np.full(m, -1.0 / z, dtype=complex) if tau0 is None else np.asarray(tau0, dtype=complex).copy())

    def step(t):
        u = 1.0 + s.T @ t  # length n
        return -1.0 / (z - s @ (1.0 / u))

    gamma = damping
    res_prev = math.inf
    history: list = []
    it = 0
    for it in range(1, max_iters + 1):
        nxt = step(tau)
        res = float(np.abs(nxt - tau).max())
        if track_residuals:
            history.append(res)
        tau = (1.0 - gamma) * tau + gamma * nxt
        tau = tau.real + 1j * np.maximum(tau.imag, 0.0)
        if res <= tol:
            break
        if res > res_prev * 1.0000001:
            gamma = max(gamma * 0.5, 1.0 / 64.0)
        res_prev = res
    residual = float(np.abs(step(tau) - tau).max())
    if residual > 100 * tol:
        raise SpectralError(f"Dyson iteration stalled: residual {residual:.3e} at z={z!r}")
    return DysonSolution(
        tau=tau,
        z=z,
        residual=residual,
        density_estimate=float(np.mean(tau.imag)) / math.pi,
        iterations=it,
        residual_history=tuple(history),
    )


@dataclass(frozen=True)
class DensityCurve:
    grid: np.ndarray  # singular-value coordinates
    density: np.ndarray  # limiting singular-value density on the grid
    metadata: dict = field(default_factory=dict)

    def mass(self) -> float:
        return float(np.trapezoid(self.density, self.grid))


def dyson_density(
    S: np.ndarray,
    normalization: float,
    grid,
    eta: float = 0.02,
    tol: float = 1e-11,
    max_iters: int = 400_000,
) -> DensityCurve:
    """Limiting singular-value density along a grid.

    The fixed point lives in eigenvalue coordinates (squared singular
    values); evaluating it at z = (x + i eta)^2 gives the symmetrized
    resolvent w -> w <tau(w^2)> whose imaginary part at w = x + i eta is the
    singular-value density smoothed at scale eta *in singular-value
    coordinates*:

        q_sv(x) = (2 / pi) Im[ (x + i eta) <tau((x + i eta)^2)> ].

    A fixed offset in eigenvalue coordinates would instead wash out the
    hard-edge mass near x = 0.  Consecutive grid points warm-start from the
    previous solution.
    """
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= 0):
        raise SpectralError("grid must be strictly positive (singular-value coordinates)")
    if not (0.009 <= eta <= 0.2):
        raise SpectralError("eta outside the supported smoothing range")
    dens = np.zeros_like(grid)
    tau_warm = None
    failures = []
    for idx, x in enumerate(grid):
        w = complex(x, eta)
        try:
            sol = dyson_solve(S, normalization, w * w, tol=tol, max_iters=max_iters, tau0=tau_warm)
            tau_warm = sol.tau
            dens[idx] = 2.0 / math.pi * float((w * np.mean(sol.tau)).imag)
        except SpectralError as exc:
            failures.append((float(x), str(exc)))
            dens[idx] = math.nan
    return DensityCurve(
        grid=grid,
        density=dens,
        metadata={
            "coordinates": "singular_value",
            "transform": "q_sv(x) = (2/pi) Im[(x+i eta) <tau((x+i eta)^2)>]",
            "eta": float(eta),
            "normalization": float(normalization),
            "failures": failures,
        },
    )


def esd_samples(matrices, centers, s_star, convention="symmetric", max_workers=None):
    """ESDs of a batch of matrices, order-preserving and parallelizable."""
    items = list(zip(matrices, centers))
    return parallel_map(lambda mc: esd(mc[0], mc[1], s_star, convention), items, max_workers)
