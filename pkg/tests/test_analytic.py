import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from udnbeam.analytic import (FadingSpec, ase, ase_simplified, coverage_probability,
                              coverage_simplified, laplace_interference_far,
                              laplace_interference_near)
from udnbeam.errors import DomainError, PreconditionError
from udnbeam.model import BeamPattern, DualSlopeModel, NetworkParams, default_params, path_loss

LOG2E = 1 / math.log(2)


def omni_params(density=1e-3, mu=1.0, beta1=2.0):
    beams = BeamPattern(1.0, 1.0, 2 * math.pi, 1.0, 1.0, 2 * math.pi)
    return NetworkParams(density, mu, 0.0, 1.0, DualSlopeModel(1.0, beta1, 4.0, 10.0), beams)


def flat_params(density_per_km2=1000.0, q_width=(math.pi / 6, math.pi / 2), T=1.0, beta2=4.0, d0=10.0):
    beams = BeamPattern(100.0, 0.0, q_width[0], 10.0, 0.0, q_width[1])
    return NetworkParams(density_per_km2 * 1e-6, 1.0, 0.0, T, DualSlopeModel(1.0, 0.0, beta2, d0), beams)


def laplace_oracle(x, params, r0):
    # nested 2-D quadrature over (g, r) of 1 - exp(-x g a L(r)) against mu exp(-mu g)
    mu = params.mu
    total = 0.0
    for a, b in zip(params.gains.gains, params.gains.probs):
        if a == 0 or b == 0:
            continue

        def inner(r, a=a):
            c = x * a * path_loss(r, params.model)
            return quad(lambda g: -math.expm1(-c * g) * mu * math.exp(-mu * g), 0.0, np.inf,
                        epsabs=0, epsrel=1e-12, limit=200)[0] * r

        d0 = params.model.d0
        parts = [(r0, d0), (d0, 2 * d0), (2 * d0, np.inf)] if r0 < d0 else [(r0, 2 * r0), (2 * r0, np.inf)]
        for lo, hi in parts:
            total += b * quad(inner, lo, hi, epsabs=0, epsrel=1e-11, limit=200)[0]
    return math.exp(-2 * math.pi * params.density * total)


def test_laplace_near_matches_2d_oracle_omni():
    p = omni_params()
    got = laplace_interference_near(1.0, p, r0=5.0)
    assert got == pytest.approx(laplace_oracle(1.0, p, 5.0), rel=1e-8)


def test_laplace_far_matches_2d_oracle_reference_pattern():
    p = default_params()
    got = laplace_interference_far(1.0, p, r0=15.0)
    assert got == pytest.approx(laplace_oracle(1.0, p, 15.0), rel=1e-8)
    p3 = default_params(beta1=3.0)
    assert laplace_interference_near(200.0, p3, r0=3.0) == pytest.approx(
        laplace_oracle(200.0, p3, 3.0), rel=1e-8)


def test_laplace_trivial_limits():
    p = default_params()
    assert laplace_interference_near(0.0, p, r0=5.0) == 1.0
    assert laplace_interference_far(0.0, p, r0=15.0) == 1.0
    xs = np.logspace(-2, 8, 30)
    vals = laplace_interference_near(xs, p, r0=5.0)
    assert np.all(np.diff(vals) < 0) and vals[-1] < 1e-6 and np.all(vals <= 1)
    sparse = p.with_(density=1e-15)
    assert laplace_interference_far(1e3, sparse, r0=15.0) == pytest.approx(1.0, abs=1e-9)


def test_laplace_domain():
    p = default_params()
    with pytest.raises(DomainError):
        laplace_interference_near(1.0, p, r0=15.0)
    with pytest.raises(DomainError):
        laplace_interference_far(1.0, p, r0=5.0)
    with pytest.raises(DomainError):
        laplace_interference_near(-1.0, p, r0=5.0)


def test_custom_exponential_fading_matches_builtin():
    p = default_params(beta1=1.0, density_per_km2=1e4)
    custom = FadingSpec.custom(lambda g: np.exp(-g))
    a = coverage_probability(p)
    b = coverage_probability(p, fading=custom)
    assert b.value == pytest.approx(a.value, abs=1e-7 + a.est_abs_error + b.est_abs_error)
    x = laplace_interference_near(3.0, p, fading=custom, r0=4.0)
    assert x == pytest.approx(laplace_interference_near(3.0, p, r0=4.0), rel=1e-8)


def test_custom_fading_must_be_normalized():
    with pytest.raises(DomainError):
        FadingSpec.custom(lambda g: 2 * np.exp(-g))
    with pytest.raises(DomainError):
        FadingSpec.exponential(0.0)


def test_nakagami_interferers_lift_coverage():
    # less variable interference (Gamma shape 4, mean 1) gives a different, valid answer
    p = default_params(beta1=2.0, density_per_km2=1e3)
    nak = FadingSpec.custom(lambda g: 4 ** 4 * g ** 3 * np.exp(-4 * g) / 6)
    res = coverage_probability(p, fading=nak)
    assert 0 < res.value < 1
    assert abs(res.value - coverage_probability(p).value) < 0.1


def test_coverage_results_in_range_and_decreasing_in_threshold():
    p = default_params(beta1=2.0, density_per_km2=1e4)
    ts = np.logspace(-2, 3, 12)
    vals = [coverage_probability(p, threshold=t).value for t in ts]
    assert all(0 <= v <= 1 for v in vals)
    assert np.all(np.diff(vals) <= 1e-9)
    assert coverage_probability(p, threshold=1e12).value < 1e-6


@pytest.mark.parametrize("beta1,density,expected", [
    # frozen from the analytic engine, checked against 2e4-trial simulation at 3 sigma
    (1.0, 10.0, 0.30678),
    (1.0, 1000.0, 0.93272),
])
def test_coverage_regression_points(beta1, density, expected):
    res = coverage_probability(default_params(beta1=beta1, density_per_km2=density))
    assert res.value == pytest.approx(expected, abs=5e-5)
    assert res.est_abs_error < 1e-6


@settings(max_examples=15)
@given(st.floats(1.0, 1e5), st.floats(0.05, 1.0), st.floats(0.1, 100.0),
       st.floats(2.2, 6.0), st.floats(2.0, 30.0))
def test_corollary_closed_form_equals_general(density, q_frac, T, beta2, d0):
    w = 2 * math.pi * math.sqrt(q_frac)
    p = flat_params(density, (w, w), T, beta2, d0)
    general = coverage_probability(p)
    assert coverage_simplified(p) == pytest.approx(general.value, abs=general.est_abs_error + 1e-6)


def test_corollary_ase_equals_general():
    p = flat_params(1000.0, T=10 ** 0.7)
    general = ase(p)
    closed = ase_simplified(p)
    assert closed.value == pytest.approx(general.value, abs=general.est_abs_error + closed.est_abs_error + 1e-6 * p.density)


def test_corollary_preconditions_named():
    p = default_params()
    with pytest.raises(PreconditionError, match="sigma2"):
        coverage_simplified(p)
    with pytest.raises(PreconditionError, match="beta1"):
        ase_simplified(flat_params().with_(beta1=1.0))
    with pytest.raises(PreconditionError, match="side-lobe"):
        coverage_simplified(flat_params().with_(side_bs=1.0))


def test_coverage_simplified_limits():
    tiny = flat_params(1000.0, (1e-6, 1e-6))
    assert coverage_simplified(tiny) == pytest.approx(1.0, abs=1e-9)
    assert coverage_simplified(flat_params(1e9)) < 1e-12
    qs = np.linspace(0.05, 1.0, 10)
    vals = [coverage_simplified(flat_params(1000.0, (2 * math.pi * math.sqrt(q),) * 2)) for q in qs]
    assert np.all(np.diff(vals) < 0)


def test_ase_simplified_decreasing_in_alignment_and_density():
    vals = [ase_simplified(flat_params(1000.0, (2 * math.pi * math.sqrt(q),) * 2, T=10 ** 0.7)).value
            for q in (0.01, 0.05, 0.2, 0.6, 1.0)]
    assert np.all(np.diff(vals) < 0)
    p = flat_params(1e9, T=10 ** 0.7)
    assert ase_simplified(p).value < 1e-12 * p.density


def test_ase_lower_bound_and_limits():
    for beta1 in (1.0, 2.0):
        p = default_params(beta1=beta1, density_per_km2=1e3)
        a = ase(p).value
        pc = coverage_probability(p).value
        assert a >= p.density * LOG2E * math.log1p(p.threshold) * pc * (1 - 1e-9)
    p = default_params(beta1=2.0, density_per_km2=1e-3)
    assert ase(p).value < 1e-8
    ref = default_params()
    by_threshold = [ase(ref.with_(threshold=t)).value for t in (1e1, 1e3, 1e6, 1e9, 1e12)]
    assert all(b < a for a, b in zip(by_threshold, by_threshold[1:]))
    assert by_threshold[-1] < 1e-6 * ase(ref).value


def test_single_slope_collapse():
    p = omni_params(beta1=4.0).with_(threshold=10 ** 0.7)
    a = coverage_probability(p).value
    # classical single-slope Rayleigh result without noise: 1 / (1 + rho(T, 4))
    T = p.threshold
    assert a == pytest.approx(1 / (1 + math.sqrt(T) * math.atan(math.sqrt(T))), abs=1e-7)
    b = coverage_probability(p.with_(d0=50.0)).value
    assert b == pytest.approx(a, abs=1e-8)


def test_swap_symmetry():
    base = NetworkParams(1e-3, 1.0, 1e-4, 5.0, DualSlopeModel(1.0, 2.0, 4.0, 10.0),
                         BeamPattern(30.0, 0.5, 2 * math.pi, 30.0, 0.5, 2 * math.pi))
    swapped = base.with_(beams=base.beams.swapped())
    assert coverage_probability(base).value == coverage_probability(swapped).value
    asym = base.with_(beams=BeamPattern(30.0, 0.5, 1.0, 10.0, 0.2, 2.0))
    a = coverage_probability(asym).value
    b = coverage_probability(asym.with_(beams=asym.beams.swapped())).value
    assert a == pytest.approx(b, abs=1e-9)


def test_deterministic():
    p = default_params(beta1=3.0, density_per_km2=1e5)
    assert coverage_probability(p) == coverage_probability(p)
