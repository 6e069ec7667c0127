"""Exponential-family base measures for tilted random-table models.

A base measure ``mu`` is a sigma-finite measure on the reals whose cumulant
(log-partition) function

    K(theta) = log INT exp(theta * x) dmu(x)

is finite on an open interval ``(tilt_lo, tilt_hi)``.  Tilting by theta gives
the probability law with density ``exp(theta*x - K(theta))`` against ``mu``;
its mean is ``K'(theta)`` and its variance ``K''(theta) > 0``, so the mean map
``K'`` is strictly increasing from the tilt domain onto the open interval
``(support_lo, support_hi)`` of attainable means.  Its inverse maps a target
mean back to the tilt that realizes it.

This module ships nine concrete families with closed-form cumulants (the
three-point family inverts the mean map numerically):

=============  =======================  ====================  ==============
name           base measure             tilted law            mean range
=============  =======================  ====================  ==============
gaussian       standard normal          Normal(theta, 1)      (-inf, inf)
poisson        1/k! on k >= 0           Poisson(e^theta)      (0, inf)
binomial:B     C(B,k) 2^-B              Binomial(B, logit)    (0, B)
counting       unit mass on Z >= 0      Geometric(1-e^theta)  (0, inf)
negbinom:r     C(r+k-1,k)               NegBinomial(r, .)     (0, inf)
lebesgue       Lebesgue on (0, inf)     Exponential(-1/th)    (0, inf)
gamma:a,g      e^{-ax} x^{g-1} dx       Gamma(g, a-theta)     (0, inf)
laplace        (1/2) e^{-|x|} dx        piecewise exp.        (-inf, inf)
uniform3       uniform on {0,1,sqrt2}   reweighted atoms      (0, sqrt2)
=============  =======================  ====================  ==============

All callables broadcast over numpy arrays.  Measures are immutable and all
operations are pure given an externally supplied generator, so values can be
shared freely across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

SQRT2 = math.sqrt(2.0)

# Relative width of the guard band that keeps tilts strictly inside a finite
# domain endpoint (the cumulant diverges there).
DOMAIN_GUARD = 1e-12


class TiltBridgeError(Exception):
    """Base class for errors raised by this package."""


class UnknownMeasureError(TiltBridgeError, ValueError):
    """Measure family name is not registered."""


class InvalidParameterError(TiltBridgeError, ValueError):
    """Family parameters violate the family's constraints."""


class DomainError(TiltBridgeError, ValueError):
    """Argument outside the tilt domain or the attainable mean range."""


class BracketError(TiltBridgeError, ArithmeticError):
    """Numeric mean-map inversion failed to bracket a root."""


@dataclass(frozen=True)
class BaseMeasure:
    """An exponential family defined by its cumulant and domain data.

    Attributes
    ----------
    tilt_lo, tilt_hi : float
        Endpoints of the open tilt domain (may be +-inf).
    support_lo, support_hi : float
        Attainable mean range (A, B); equals the essential support bounds.
    cumulant, mean, variance : callable
        K, K', K'' as vectorized functions of the tilt.
    tilt_for_mean : callable or None
        Closed-form inverse of ``mean``; None falls back to bisection.
    sample : callable
        ``sample(theta, rng, size=None)`` draws from the tilted law; theta
        may be an array broadcast against ``size``.
    variance_increasing_logconvex : bool
        Whether K'' is non-decreasing and log-convex on the tilt domain.
    log_atom_mass : callable or None
        Log base-measure mass of an atom value (discrete families only).
    atoms : tuple or None
        Finite support, when the family has one.
    tilted_cdf : callable or None
        ``tilted_cdf(theta, x)``, provided where a simple closed form exists.
    reference_tilts : tuple
        Interior tilts used by self-checks and calibration grids.
    """

    name: str
    params: tuple
    tilt_lo: float
    tilt_hi: float
    support_lo: float
    support_hi: float
    cumulant: Callable
    mean: Callable
    variance: Callable
    tilt_for_mean: Optional[Callable]
    sample: Callable
    is_discrete: bool
    variance_increasing_logconvex: bool
    log_atom_mass: Optional[Callable] = None
    atoms: Optional[tuple] = None
    tilted_cdf: Optional[Callable] = None
    reference_tilts: tuple = field(default=(0.0,))

    def __repr__(self) -> str:  # params in CLI spec syntax
        if self.params:
            return f"BaseMeasure({self.spec_string()!r})"
        return f"BaseMeasure({self.name!r})"

    def spec_string(self) -> str:
        if self.params:
            return self.name + ":" + ",".join(repr(p) for p in self.params)
        return self.name

    def contains_tilt(self, theta) -> bool:
        t = np.asarray(theta, dtype=float)
        return bool(np.all(t > self.tilt_lo) and np.all(t < self.tilt_hi))

    def contains_mean(self, x) -> bool:
        v = np.asarray(x, dtype=float)
        return bool(np.all(v > self.support_lo) and np.all(v < self.support_hi))

    def clip_tilt(self, theta):
        """Clamp tilts into the guarded open domain (no-op when unbounded)."""
        lo, hi = self.tilt_lo, self.tilt_hi
        if not (math.isfinite(lo) or math.isfinite(hi)):
            return np.asarray(theta, dtype=float)
        width = (hi - lo) if (math.isfinite(lo) and math.isfinite(hi)) else 1.0
        eps = DOMAIN_GUARD * max(width, 1.0)
        lo_c = lo + eps if math.isfinite(lo) else -np.inf
        hi_c = hi - eps if math.isfinite(hi) else np.inf
        return np.clip(np.asarray(theta, dtype=float), lo_c, hi_c)

    def tilted_pmf(self, theta: float, values) -> np.ndarray:
        """Probability mass of the tilted law at the given atom values."""
        if not self.is_discrete or self.log_atom_mass is None:
            raise DomainError(f"{self.name} has no atom masses")
        v = np.asarray(values, dtype=float)
        return np.exp(theta * v - self.cumulant(theta) + self.log_atom_mass(v))

    def tilted_support(self, theta: float, eps: float = 1e-12):
        """Atom values covering all but ``eps`` mass of the tilted law."""
        if self.atoms is not None:
            return np.asarray(self.atoms, dtype=float)
        k, chunk = 0, 64
        out = []
        total = 0.0
        while total < 1.0 - eps and k < 100_000:
            vals = np.arange(k, k + chunk, dtype=float)
            out.append(vals)
            total += float(self.tilted_pmf(theta, vals).sum())
            k += chunk
        return np.concatenate(out)


@dataclass(frozen=True)
class TamenessBand:
    """Mean-value band [lo, hi] that a delta-tame table must stay within."""

    delta: float
    lo: float
    hi: float


def tameness_band(measure: BaseMeasure, delta: float) -> TamenessBand:
    if delta <= 0:
        raise InvalidParameterError("delta must be positive")
    lo = max(measure.support_lo + delta, -1.0 / delta)
    hi = min(measure.support_hi - delta, 1.0 / delta)
    return TamenessBand(delta, lo, hi)


def realized_delta(measure: BaseMeasure, z_min: float, z_max: float, cap: float = 1.0) -> float:
    """Largest delta whose tameness band contains [z_min, z_max], capped.

    The cap keeps the band non-degenerate for tables hugging zero means
    (an unbounded delta would collapse the band to a point).
    """
    candidates = [cap]
    if math.isfinite(measure.support_lo):
        candidates.append(z_min - measure.support_lo)
    if math.isfinite(measure.support_hi):
        candidates.append(measure.support_hi - z_max)
    if z_min < 0:
        candidates.append(-1.0 / z_min)
    if z_max > 0:
        candidates.append(1.0 / z_max)
    delta = min(candidates)
    if delta <= 0:
        raise DomainError("table entries touch the support boundary")
    return delta


# ---------------------------------------------------------------------------
# numeric mean-map inversion
# ---------------------------------------------------------------------------


def phi_numeric(measure: BaseMeasure, x: float, tol: float = 1e-12) -> float:
    """Invert the mean map numerically: find theta with mean(theta) = x.

    Brackets by geometric expansion from a start tilt (0 when the domain is
    all of R, otherwise one unit inside a finite endpoint or the midpoint),
    then runs safeguarded bisection with a Newton polish.  The mean map is
    strictly increasing, so bracketing is safe.
    """
    if not measure.contains_mean(x):
        raise DomainError(f"mean {x!r} outside ({measure.support_lo}, {measure.support_hi})")
    lo_d, hi_d = measure.tilt_lo, measure.tilt_hi
    if math.isfinite(lo_d) and math.isfinite(hi_d):
        start = 0.5 * (lo_d + hi_d)
        guard = DOMAIN_GUARD * (hi_d - lo_d)
    elif math.isfinite(hi_d):
        start, guard = hi_d - 1.0, DOMAIN_GUARD
    elif math.isfinite(lo_d):
        start, guard = lo_d + 1.0, DOMAIN_GUARD
    else:
        start, guard = 0.0, DOMAIN_GUARD

    f = lambda t: float(measure.mean(t)) - x
    lo = hi = start
    flo = fhi = f(start)
    step = 1.0
    for _ in range(200):
        if flo > 0.0:
            lo = max(lo - step, lo_d + guard) if math.isfinite(lo_d) else lo - step
            flo = f(lo)
        if fhi < 0.0:
            hi = min(hi + step, hi_d - guard) if math.isfinite(hi_d) else hi + step
            fhi = f(hi)
        if flo <= 0.0 <= fhi:
            break
        step *= 2.0
    else:
        raise BracketError(f"no bracket for mean {x!r} under {measure.name}")

    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    theta = 0.5 * (lo + hi)
    for _ in range(5):  # Newton polish; variance > 0 on the open domain
        step_n = (float(measure.mean(theta)) - x) / float(measure.variance(theta))
        theta_n = theta - step_n
        if lo_d < theta_n < hi_d:
            theta = theta_n
    if abs(float(measure.mean(theta)) - x) > tol * max(1.0, abs(x)):
        raise BracketError(f"inversion stalled at mean {x!r} under {measure.name}")
    return theta


def mean_inverse(measure: BaseMeasure, x):
    """Vectorized tilt-for-mean, preferring the family's closed form."""
    arr = np.asarray(x, dtype=float)
    if measure.tilt_for_mean is not None:
        out = measure.tilt_for_mean(arr)
        return out if arr.shape else float(out)
    flat = np.array([phi_numeric(measure, float(v)) for v in arr.ravel()])
    out = flat.reshape(arr.shape)
    return out if arr.shape else float(out)


def relative_entropy(measure: BaseMeasure, x):
    """Divergence of the mean-x tilted law from the base measure.

    Evaluates ``x * t - K(t)`` at ``t = tilt_for_mean(x)``; strictly convex in
    x with second derivative ``1 / variance(t)``.  Means at or beyond the
    support bounds return +inf (extended-value convention), which keeps the
    objective usable in minimization without special-casing.
    """
    arr = np.asarray(x, dtype=float)
    inside = (arr > measure.support_lo) & (arr < measure.support_hi)
    out = np.full(arr.shape, np.inf)
    if np.any(inside):
        vals = arr[inside] if arr.shape else arr
        t = mean_inverse(measure, vals)
        ent = vals * t - measure.cumulant(t)
        if arr.shape:
            out[inside] = ent
        else:
            out = np.asarray(ent)
    return out if arr.shape else float(out)


def sample_tilted(measure: BaseMeasure, theta: float, n: int, rng: np.random.Generator):
    """n i.i.d. draws from the theta-tilted law."""
    if not measure.contains_tilt(theta):
        raise DomainError(f"tilt {theta!r} outside ({measure.tilt_lo}, {measure.tilt_hi})")
    return measure.sample(theta, rng, size=n)


# ---------------------------------------------------------------------------
# family builders
# ---------------------------------------------------------------------------


def _normal_cdf(x):
    return 0.5 * (1.0 + np.vectorize(math.erf)(np.asarray(x, dtype=float) / SQRT2))


def _build_gaussian(params):
    if params:
        raise InvalidParameterError("gaussian takes no parameters")
    return BaseMeasure(
        name="gaussian",
        params=(),
        tilt_lo=-np.inf,
        tilt_hi=np.inf,
        support_lo=-np.inf,
        support_hi=np.inf,
        cumulant=lambda t: 0.5 * np.square(t),
        mean=lambda t: np.asarray(t, dtype=float) + 0.0,
        variance=lambda t: np.ones_like(np.asarray(t, dtype=float)),
        tilt_for_mean=lambda x: np.asarray(x, dtype=float) + 0.0,
        sample=lambda t, rng, size=None: rng.normal(loc=t, scale=1.0, size=size),
        is_discrete=False,
        variance_increasing_logconvex=True,
        tilted_cdf=lambda t, x: _normal_cdf(np.asarray(x) - t),
        reference_tilts=(-2.0, -0.5, 0.0, 0.7, 2.5),
    )


def _build_poisson(params):
    if params:
        raise InvalidParameterError("poisson takes no parameters")
    return BaseMeasure(
        name="poisson",
        params=(),
        tilt_lo=-np.inf,
        tilt_hi=np.inf,
        support_lo=0.0,
        support_hi=np.inf,
        cumulant=np.exp,
        mean=np.exp,
        variance=np.exp,
        tilt_for_mean=np.log,
        sample=lambda t, rng, size=None: rng.poisson(lam=np.exp(t), size=size).astype(float),
        is_discrete=True,
        variance_increasing_logconvex=True,
        log_atom_mass=lambda v: -np.vectorize(math.lgamma)(np.asarray(v, dtype=float) + 1.0),
        reference_tilts=(-2.0, -0.5, 0.0, 0.8, 2.0),
    )


def _build_binomial(params):
    if len(params) != 1 or params[0] != int(params[0]) or params[0] < 1:
        raise InvalidParameterError("binomial needs one integer parameter >= 1")
    trials = int(params[0])

    def sigmoid(t):
        return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(t, dtype=float)))

    log_binom = np.vectorize(
        lambda v: math.lgamma(trials + 1) - math.lgamma(v + 1) - math.lgamma(trials - v + 1)
    )
    return BaseMeasure(
        name="binomial",
        params=(trials,),
        tilt_lo=-np.inf,
        tilt_hi=np.inf,
        support_lo=0.0,
        support_hi=float(trials),
        cumulant=lambda t: trials * (np.logaddexp(0.0, t) - math.log(2.0)),
        mean=lambda t: trials * sigmoid(t),
        variance=lambda t: trials * sigmoid(t) * (1.0 - sigmoid(t)),
        tilt_for_mean=lambda x: np.log(np.asarray(x, dtype=float) / (trials - np.asarray(x, dtype=float))),
        sample=lambda t, rng, size=None: rng.binomial(trials, sigmoid(t), size=size).astype(float),
        is_discrete=True,
        variance_increasing_logconvex=False,
        log_atom_mass=lambda v: log_binom(np.asarray(v, dtype=float)) - trials * math.log(2.0),
        atoms=tuple(float(k) for k in range(trials + 1)),
        reference_tilts=(-3.0, -1.0, 0.0, 1.0, 3.0),
    )


def _geom_mean(t):
    # e^t / (1 - e^t), stable for t < 0
    return 1.0 / np.expm1(-np.asarray(t, dtype=float))


def _build_counting(params):
    if params:
        raise InvalidParameterError("counting takes no parameters")

    def cdf(t, x):
        k = np.floor(np.asarray(x, dtype=float))
        out = 1.0 - np.exp(t * (k + 1.0))
        return np.where(k < 0, 0.0, out)

    return BaseMeasure(
        name="counting",
        params=(),
        tilt_lo=-np.inf,
        tilt_hi=0.0,
        support_lo=0.0,
        support_hi=np.inf,
        cumulant=lambda t: -np.log(-np.expm1(np.asarray(t, dtype=float))),
        mean=_geom_mean,
        variance=lambda t: _geom_mean(t) * (1.0 + _geom_mean(t)),
        tilt_for_mean=lambda x: -np.log1p(1.0 / np.asarray(x, dtype=float)),
        sample=lambda t, rng, size=None: (
            rng.geometric(p=-np.expm1(np.asarray(t, dtype=float)), size=size) - 1
        ).astype(float),
        is_discrete=True,
        variance_increasing_logconvex=True,
        log_atom_mass=lambda v: np.zeros_like(np.asarray(v, dtype=float)),
        tilted_cdf=cdf,
        reference_tilts=(-3.0, -1.5, -0.7, -0.2, -0.05),
    )


def _build_negbinom(params):
    if len(params) != 1 or params[0] != int(params[0]) or params[0] < 1:
        raise InvalidParameterError("negbinom needs one integer parameter >= 1")
    r = int(params[0])
    log_mass = np.vectorize(
        lambda v: math.lgamma(r + v) - math.lgamma(v + 1) - math.lgamma(r)
    )
    return BaseMeasure(
        name="negbinom",
        params=(r,),
        tilt_lo=-np.inf,
        tilt_hi=0.0,
        support_lo=0.0,
        support_hi=np.inf,
        cumulant=lambda t: -r * np.log(-np.expm1(np.asarray(t, dtype=float))),
        mean=lambda t: r * _geom_mean(t),
        variance=lambda t: r * _geom_mean(t) * (1.0 + _geom_mean(t)),
        tilt_for_mean=lambda x: -np.log1p(r / np.asarray(x, dtype=float)),
        sample=lambda t, rng, size=None: rng.negative_binomial(
            r, p=-np.expm1(np.asarray(t, dtype=float)), size=size
        ).astype(float),
        is_discrete=True,
        variance_increasing_logconvex=True,
        log_atom_mass=lambda v: log_mass(np.asarray(v, dtype=float)),
        reference_tilts=(-3.0, -1.5, -0.7, -0.2, -0.05),
    )


def _build_lebesgue(params):
    if params:
        raise InvalidParameterError("lebesgue takes no parameters")

    def cdf(t, x):
        xv = np.asarray(x, dtype=float)
        return np.where(xv <= 0, 0.0, 1.0 - np.exp(t * np.maximum(xv, 0.0)))

    return BaseMeasure(
        name="lebesgue",
        params=(),
        tilt_lo=-np.inf,
        tilt_hi=0.0,
        support_lo=0.0,
        support_hi=np.inf,
        cumulant=lambda t: -np.log(-np.asarray(t, dtype=float)),
        mean=lambda t: -1.0 / np.asarray(t, dtype=float),
        variance=lambda t: 1.0 / np.square(np.asarray(t, dtype=float)),
        tilt_for_mean=lambda x: -1.0 / np.asarray(x, dtype=float),
        sample=lambda t, rng, size=None: rng.exponential(
            scale=-1.0 / np.asarray(t, dtype=float), size=size
        ),
        is_discrete=False,
        variance_increasing_logconvex=True,
        tilted_cdf=cdf,
        reference_tilts=(-5.0, -2.0, -1.0, -0.5, -0.1),
    )


def _build_gamma(params):
    if len(params) != 2:
        raise InvalidParameterError("gamma needs two parameters: rate >= 0, shape > 0")
    rate, shape = float(params[0]), float(params[1])
    if rate < 0 or shape <= 0:
        raise InvalidParameterError("gamma needs rate >= 0 and shape > 0")
    lg = math.lgamma(shape)
    return BaseMeasure(
        name="gamma",
        params=(rate, shape),
        tilt_lo=-np.inf,
        tilt_hi=rate,
        support_lo=0.0,
        support_hi=np.inf,
        cumulant=lambda t: lg - shape * np.log(rate - np.asarray(t, dtype=float)),
        mean=lambda t: shape / (rate - np.asarray(t, dtype=float)),
        variance=lambda t: shape / np.square(rate - np.asarray(t, dtype=float)),
        tilt_for_mean=lambda x: rate - shape / np.asarray(x, dtype=float),
        sample=lambda t, rng, size=None: rng.gamma(
            shape=shape, scale=1.0 / (rate - np.asarray(t, dtype=float)), size=size
        ),
        is_discrete=False,
        variance_increasing_logconvex=True,
        reference_tilts=tuple(rate - s for s in (5.0, 2.0, 1.0, 0.5, 0.1)),
    )


def _laplace_sample(t, rng, size=None):
    # Piecewise-analytic inverse CDF of exp(t*x - K(t)) * (1/2) exp(-|x|):
    # mass (1 - t)/2 below zero, exponential tails with rates (1 +- t).
    t = np.asarray(t, dtype=float)
    u = rng.random(size=size if size is not None else np.shape(t))
    split = 0.5 * (1.0 - t)
    neg = np.log(2.0 * u / (1.0 - t)) / (1.0 + t)
    pos = np.log(2.0 * (1.0 - u) / (1.0 + t)) / (t - 1.0)
    return np.where(u < split, neg, pos)


def _build_laplace(params):
    if params:
        raise InvalidParameterError("laplace takes no parameters")
    return BaseMeasure(
        name="laplace",
        params=(),
        tilt_lo=-1.0,
        tilt_hi=1.0,
        support_lo=-np.inf,
        support_hi=np.inf,
        cumulant=lambda t: -np.log1p(-np.square(np.asarray(t, dtype=float))),
        mean=lambda t: 2.0 * np.asarray(t, dtype=float) / (1.0 - np.square(np.asarray(t, dtype=float))),
        variance=lambda t: 2.0
        * (1.0 + np.square(np.asarray(t, dtype=float)))
        / np.square(1.0 - np.square(np.asarray(t, dtype=float))),
        tilt_for_mean=lambda x: np.asarray(x, dtype=float)
        / (1.0 + np.sqrt(1.0 + np.square(np.asarray(x, dtype=float)))),
        sample=_laplace_sample,
        is_discrete=False,
        variance_increasing_logconvex=False,
        reference_tilts=(-0.8, -0.4, 0.0, 0.3, 0.7),
    )


_U3_ATOMS = (0.0, 1.0, SQRT2)


def _u3_logweights(t):
    t = np.asarray(t, dtype=float)
    return np.stack([np.zeros_like(t), t, SQRT2 * t])


def _u3_cumulant(t):
    lw = _u3_logweights(t)
    return np.logaddexp.reduce(lw, axis=0) - math.log(3.0)


def _u3_probs(t):
    lw = _u3_logweights(t)
    lw = lw - lw.max(axis=0, keepdims=True)
    w = np.exp(lw)
    return w / w.sum(axis=0, keepdims=True)


def _u3_mean(t):
    p = _u3_probs(t)
    return p[1] + SQRT2 * p[2]


def _u3_variance(t):
    p = _u3_probs(t)
    m = p[1] + SQRT2 * p[2]
    return p[1] + 2.0 * p[2] - np.square(m)


def _u3_sample(t, rng, size=None):
    t = np.asarray(t, dtype=float)
    p = _u3_probs(t)
    u = rng.random(size=size if size is not None else np.shape(t))
    vals = np.where(u < p[0], 0.0, np.where(u < p[0] + p[1], 1.0, SQRT2))
    return vals


def _build_uniform3(params):
    if params:
        raise InvalidParameterError("uniform3 takes no parameters")
    return BaseMeasure(
        name="uniform3",
        params=(),
        tilt_lo=-np.inf,
        tilt_hi=np.inf,
        support_lo=0.0,
        support_hi=SQRT2,
        cumulant=_u3_cumulant,
        mean=_u3_mean,
        variance=_u3_variance,
        tilt_for_mean=None,
        sample=_u3_sample,
        is_discrete=True,
        variance_increasing_logconvex=False,
        log_atom_mass=lambda v: np.full(np.shape(np.asarray(v, dtype=float)), -math.log(3.0)),
        atoms=_U3_ATOMS,
        reference_tilts=(-4.0, -1.0, 0.0, 1.0, 4.0),
    )


_FAMILIES = {
    "gaussian": _build_gaussian,
    "poisson": _build_poisson,
    "binomial": _build_binomial,
    "counting": _build_counting,
    "negbinom": _build_negbinom,
    "lebesgue": _build_lebesgue,
    "gamma": _build_gamma,
    "laplace": _build_laplace,
    "uniform3": _build_uniform3,
}

FAMILY_NAMES = tuple(sorted(_FAMILIES))


def make_measure(name: str, params=()) -> BaseMeasure:
    """Construct a registered base measure from its family name and parameters."""
    try:
        builder = _FAMILIES[name]
    except KeyError:
        raise UnknownMeasureError(
            f"unknown measure family {name!r}; known: {', '.join(FAMILY_NAMES)}"
        ) from None
    return builder(tuple(params))


def parse_measure_spec(spec: str) -> BaseMeasure:
    """Parse a ``family[:p1,p2]`` specification string, e.g. ``gamma:1.0,2.0``."""
    name, _, raw = spec.partition(":")
    params = []
    if raw:
        for tok in raw.split(","):
            try:
                params.append(float(tok))
            except ValueError:
                raise InvalidParameterError(f"bad parameter {tok!r} in {spec!r}") from None
    return make_measure(name.strip(), params)
