"""Closed forms, derivative consistency, inversion, and sampler laws."""

import math

import numpy as np
import pytest

from tiltbridge.measures import (
    DomainError,
    InvalidParameterError,
    UnknownMeasureError,
    make_measure,
    mean_inverse,
    parse_measure_spec,
    phi_numeric,
    relative_entropy,
    sample_tilted,
    tameness_band,
)
from tiltbridge.util import ks_critical_value, ks_statistic

ALL_SPECS = [
    ("gaussian", ()),
    ("poisson", ()),
    ("binomial", (5,)),
    ("counting", ()),
    ("negbinom", (5,)),
    ("lebesgue", ()),
    ("gamma", (1.0, 2.0)),
    ("laplace", ()),
    ("uniform3", ()),
]


@pytest.fixture(params=ALL_SPECS, ids=lambda s: s[0])
def measure(request):
    return make_measure(*request.param)


def test_gaussian_closed_forms():
    g = make_measure("gaussian")
    assert g.cumulant(2.0) == pytest.approx(2.0)
    assert g.mean(1.3) == pytest.approx(1.3)
    assert mean_inverse(g, 0.7) == pytest.approx(0.7)
    assert g.support_lo == -math.inf and g.support_hi == math.inf
    assert g.tilt_lo == -math.inf and g.tilt_hi == math.inf


def test_counting_closed_forms():
    c = make_measure("counting")
    assert c.tilt_hi == 0.0 and c.tilt_lo == -math.inf
    assert (c.support_lo, c.support_hi) == (0.0, math.inf)
    assert mean_inverse(c, 1.0) == pytest.approx(-math.log(2.0), abs=1e-14)


def test_poisson_mean_at_zero():
    p = make_measure("poisson")
    assert p.mean(0.0) == pytest.approx(1.0)


def test_relative_entropy_values():
    assert relative_entropy(make_measure("gaussian"), 2.0) == pytest.approx(2.0)
    assert relative_entropy(make_measure("poisson"), 1.0) == pytest.approx(-1.0)
    assert relative_entropy(make_measure("counting"), 1.0) == pytest.approx(-2.0 * math.log(2.0))


def test_relative_entropy_boundary_sentinel():
    c = make_measure("counting")
    assert relative_entropy(c, 0.0) == math.inf
    assert relative_entropy(c, -1.0) == math.inf
    b = make_measure("binomial", (5,))
    assert relative_entropy(b, 5.0) == math.inf
    arr = relative_entropy(c, np.array([0.5, 0.0]))
    assert np.isfinite(arr[0]) and arr[1] == math.inf


def test_relative_entropy_strictly_convex(measure):
    lo, hi = measure.support_lo, measure.support_hi
    xs = np.linspace(max(lo, -3.0) + 0.3, min(hi, 3.0) - 0.3, 9)
    f = relative_entropy(measure, xs)
    second = f[:-2] - 2 * f[1:-1] + f[2:]
    assert np.all(second > 0)


def test_phi_numeric_examples():
    assert phi_numeric(make_measure("gaussian"), 0.3) == pytest.approx(0.3, abs=1e-10)
    assert phi_numeric(make_measure("counting"), 1.0) == pytest.approx(-math.log(2.0), abs=1e-10)
    assert phi_numeric(make_measure("laplace"), 0.0) == pytest.approx(0.0, abs=1e-10)


def test_phi_numeric_matches_closed_form(measure):
    for theta in measure.reference_tilts:
        x = float(measure.mean(theta))
        assert phi_numeric(measure, x) == pytest.approx(theta, abs=1e-8)


def test_mean_map_round_trip(measure):
    for theta in measure.reference_tilts:
        x = float(measure.mean(theta))
        assert mean_inverse(measure, x) == pytest.approx(theta, abs=1e-9)


def test_mean_strictly_increasing(measure):
    grid = np.asarray(measure.reference_tilts)
    vals = np.asarray(measure.mean(grid))
    assert np.all(np.diff(vals) > 0)


def test_cumulant_derivative_consistency(measure):
    h = 1e-5
    for theta in measure.reference_tilts:
        fd1 = (measure.cumulant(theta + h) - measure.cumulant(theta - h)) / (2 * h)
        m = float(measure.mean(theta))
        if abs(m) > 1.0:
            assert abs(fd1 - m) / abs(m) < 1e-6
        else:
            assert abs(fd1 - m) < 1e-6
        fd2 = (measure.cumulant(theta + h) - 2 * measure.cumulant(theta) + measure.cumulant(theta - h)) / h**2
        v = float(measure.variance(theta))
        assert abs(fd2 - v) / max(abs(v), 1e-12) < 1e-4


def test_variance_positive(measure):
    grid = np.asarray(measure.reference_tilts)
    assert np.all(np.asarray(measure.variance(grid)) > 0)


def test_variance_flag_monotone_logconvex(measure):
    if not measure.variance_increasing_logconvex:
        return
    grid = np.asarray(measure.reference_tilts)
    v = np.asarray(measure.variance(grid))
    assert np.all(np.diff(v) >= -1e-12 * np.abs(v[:-1]))
    # three-point convexity of log variance: slopes are non-decreasing
    lv = np.log(v)
    slopes = np.diff(lv) / np.diff(grid)
    assert np.all(np.diff(slopes) >= -1e-9)


def test_sampler_mean_generic(measure):
    rng = np.random.default_rng(11)
    n = 100_000
    theta = measure.reference_tilts[len(measure.reference_tilts) // 2]
    draws = sample_tilted(measure, theta, n, rng)
    target = float(measure.mean(theta))
    tol = 5.0 * math.sqrt(float(measure.variance(theta)) / n)
    assert abs(float(np.mean(draws)) - target) <= tol


def test_sampler_examples():
    rng = np.random.default_rng(5)
    g = sample_tilted(make_measure("gaussian"), 0.0, 100_000, rng)
    assert abs(g.mean()) < 0.02
    c = sample_tilted(make_measure("counting"), -math.log(2.0), 100_000, rng)
    assert abs(c.mean() - 1.0) < 0.03
    gam = sample_tilted(make_measure("gamma", (1.0, 2.0)), 0.0, 100_000, rng)
    assert abs(gam.mean() - 2.0) < 0.05


def test_sampler_out_of_domain():
    with pytest.raises(DomainError):
        sample_tilted(make_measure("counting"), 0.5, 10, np.random.default_rng(0))


@pytest.mark.parametrize(
    "name,theta",
    [("gaussian", 0.6), ("lebesgue", -0.8), ("counting", -0.7)],
)
def test_sampler_ks_law(name, theta):
    measure = make_measure(name)
    rng = np.random.default_rng(99)
    draws = sample_tilted(measure, theta, 100_000, rng)
    stat = ks_statistic(draws, lambda x: measure.tilted_cdf(theta, x))
    assert stat < ks_critical_value(draws.size, 1e-3)


def test_laplace_inverse_round_trip():
    # printed closed form x / (1 + sqrt(1 + x^2)) must invert the mean map
    lp = make_measure("laplace")
    for x in (-5.0, -1.0, -0.2, 0.0, 0.4, 2.0, 8.0):
        theta = float(mean_inverse(lp, x))
        assert -1.0 < theta < 1.0
        assert float(lp.mean(theta)) == pytest.approx(x, abs=1e-12)


def test_uniform3_counterexample_tilt():
    u3 = make_measure("uniform3")
    tilt = phi_numeric(u3, 1.0)
    assert tilt == pytest.approx(math.log(1.0 + math.sqrt(2.0)) / math.sqrt(2.0), abs=1e-12)
    # the tilted mass at the middle atom, a published spot value
    assert u3.tilted_pmf(tilt, [1.0])[0] == pytest.approx(0.3532, abs=5e-4)


def test_tameness_band():
    band = tameness_band(make_measure("counting"), 0.5)
    assert band.lo == pytest.approx(0.5)
    assert band.hi == pytest.approx(2.0)
    g = tameness_band(make_measure("gaussian"), 0.1)
    assert (g.lo, g.hi) == (-10.0, 10.0)


def test_make_measure_errors():
    with pytest.raises(UnknownMeasureError):
        make_measure("zeta")
    with pytest.raises(InvalidParameterError):
        make_measure("binomial", (0,))
    with pytest.raises(InvalidParameterError):
        make_measure("binomial", (2.5,))
    with pytest.raises(InvalidParameterError):
        make_measure("gamma", (-1.0, 2.0))
    with pytest.raises(InvalidParameterError):
        make_measure("gaussian", (3.0,))


def test_parse_measure_spec():
    m = parse_measure_spec("gamma:1.0,2.0")
    assert m.name == "gamma" and m.params == (1.0, 2.0)
    assert parse_measure_spec("binomial:5").params == (5,)
    assert parse_measure_spec("counting").name == "counting"
    with pytest.raises(InvalidParameterError):
        parse_measure_spec("gamma:a,b")
