import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from annuli.errors import ConfigError, DomainError, ParameterError
from annuli.maps import (
    Direction,
    custom_map,
    derivatives,
    evaluate,
    harmonicity_residual,
    hopf_check,
    hopf_differential,
    nitsche_map,
    power_map,
    power_map_between,
)
from annuli.metric import builtin_metric
from annuli.nitsche import AnnulusGeometry, solve_c


def _points(lo, hi, n=100, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(lo, hi, n) * np.exp(1j * rng.uniform(-math.pi, math.pi, n))


@pytest.fixture(scope="module")
def hdisk_profile():
    return solve_c(builtin_metric("hyperbolic_disk"), AnnulusGeometry(0.5, 0.9, 0.5))


def test_conformal_scaling(euclid):
    prof = solve_c(euclid, AnnulusGeometry(0.5, 1.0, 0.5))
    z = _points(0.5, 1.0)
    np.testing.assert_allclose(evaluate(nitsche_map(prof), z), z, atol=1e-12)
    assert np.max(np.abs(derivatives(nitsche_map(prof), z).K - 1.0)) <= 1e-12


def test_boundary_normalization(hdisk_profile):
    f = nitsche_map(hdisk_profile)
    t = np.linspace(0, 2 * math.pi, 9)
    np.testing.assert_allclose(np.abs(evaluate(f, 0.9 * np.exp(1j * t))), 1.0, atol=1e-14)
    np.testing.assert_allclose(np.abs(evaluate(f, 0.5 * np.exp(1j * t))), 0.5, rtol=1e-9)


@pytest.mark.parametrize("name,geom", [
    ("hyperbolic_disk", AnnulusGeometry(0.5, 0.9, 0.45)),
    ("spherical", AnnulusGeometry(0.3, 0.9, 0.3)),
    ("cigar", AnnulusGeometry(0.5, 0.9, 0.6)),
    ("punctured_disk", AnnulusGeometry(0.1, 0.3, 0.4)),
    ("euclidean", AnnulusGeometry(0.5, 1.0, 2 - math.sqrt(3))),
])
def test_round_trip(name, geom):
    prof = solve_c(builtin_metric(name), geom)
    f = nitsche_map(prof, rotation=0.3)
    z = _points(geom.tau, geom.sigma, seed=1)
    back = evaluate(f.inverse(), evaluate(f, z))
    assert np.max(np.abs(back - z)) <= 1e-9


def test_inverse_power_map_distortion():
    f = power_map(0.5, (0.25, 1.0))
    d = derivatives(f, _points(0.26, 0.99))
    np.testing.assert_allclose(d.K, 1.25, rtol=1e-14)


def test_forward_nitsche_distortion_above_one():
    prof = solve_c(builtin_metric("euclidean"), AnnulusGeometry(0.5, 1.0, 0.7))
    assert prof.c > 0
    f = nitsche_map(prof)
    s = np.linspace(0.51, 0.99, 40)
    assert np.all(s * f.log_deriv(s) < 1)
    assert np.all(derivatives(f, s).K > 1)


def test_distortion_formulas_agree(hdisk_profile):
    for f in (nitsche_map(hdisk_profile), nitsche_map(hdisk_profile, "inverse")):
        lo, hi = f.source
        d = derivatives(f, _points(lo + 1e-3, hi - 1e-3, seed=2))
        np.testing.assert_allclose(d.K_polar, d.K, rtol=1e-9)
        np.testing.assert_allclose(d.K_wirtinger, d.K, rtol=1e-9)
        assert np.all(d.J > 0)


def test_wirtinger_against_differences(hdisk_profile):
    f = nitsche_map(hdisk_profile, rotation=1.1)
    z = _points(0.55, 0.85, 20, seed=3)
    h = 1e-6
    dx = (evaluate(f, z + h) - evaluate(f, z - h)) / (2 * h)
    dy = (evaluate(f, z + 1j * h) - evaluate(f, z - 1j * h)) / (2 * h)
    d = derivatives(f, z)
    np.testing.assert_allclose(d.f_z, 0.5 * (dx - 1j * dy), atol=1e-7)
    np.testing.assert_allclose(d.f_zbar, 0.5 * (dx + 1j * dy), atol=1e-7)


def test_rotation_leaves_scalars_unchanged(hdisk_profile):
    f = nitsche_map(hdisk_profile)
    g = f.rotated(0.7, 2.1)
    z = _points(0.55, 0.85, seed=4)
    np.testing.assert_allclose(derivatives(g, z).K, derivatives(f, z).K, rtol=1e-14)
    np.testing.assert_allclose(np.abs(evaluate(g, z)), np.abs(evaluate(f, z)), rtol=1e-14)


def test_power_map_between_rings():
    f = power_map_between((0.5, 1.0), (0.25, 1.0))
    assert f.alpha == pytest.approx(2.0)
    assert f.target == pytest.approx((0.25, 1.0))
    assert f.inverse().alpha == pytest.approx(0.5)
    with pytest.raises(ParameterError):
        power_map(-1.0, (0.5, 1.0))


def test_domain_errors(hdisk_profile):
    f = nitsche_map(hdisk_profile)
    with pytest.raises(DomainError):
        evaluate(f, 0.95)
    with pytest.raises(DomainError):
        derivatives(f, 0.9)


def test_custom_map_has_no_inverse():
    f = custom_map(lambda s: s, lambda s: np.ones_like(s), (0.5, 1.0), (0.5, 1.0))
    with pytest.raises(ParameterError):
        f.inverse()
    assert derivatives(f, 0.7).K == pytest.approx(1.0)


# harmonicity

def test_identity_solves_the_euclidean_ode(euclid):
    h = power_map(1.0, (0.5, 1.0), direction=Direction.INVERSE)
    assert np.max(harmonicity_residual(h, euclid, np.linspace(0.51, 0.99, 50))) == 0.0


def test_power_map_solves_inverse_radius_ode():
    m = builtin_metric("inverse_radius")
    h = power_map(0.5, (0.25, 1.0), direction=Direction.INVERSE)
    assert np.max(harmonicity_residual(h, m, np.linspace(0.26, 0.99, 50))) < 1e-8


@pytest.mark.parametrize("name,geom", [
    ("hyperbolic_disk", AnnulusGeometry(0.5, 0.9, 0.45)),
    ("spherical", AnnulusGeometry(0.3, 0.9, 0.3)),
    ("cigar", AnnulusGeometry(0.5, 0.9, 0.6)),
])
def test_ode_residual_from_differences_of_values(name, geom):
    # independent route: differentiate sampled values of h instead of using phi'
    m = builtin_metric(name)
    h = nitsche_map(solve_c(m, geom), "inverse")
    lo, hi = h.source
    s = np.linspace(lo, hi, 801)[100:-100]
    step = 1e-4
    g = h.radial(s)[0]
    gp = h.radial(s + step)[0]
    gm = h.radial(s - step)[0]
    g1 = (gp - gm) / (2 * step)
    g2 = (gp - 2 * g + gm) / step**2
    w = m.drho(g) / m.rho(g)
    res = s * s * g2 + s * g1 - g + w * (s * s * g1 * g1 - g * g)
    assert np.max(np.abs(res)) < 1e-5


def test_non_harmonic_map_fails_the_ode():
    m = builtin_metric("hyperbolic_disk")
    h = power_map_between((0.4, 1.0), (0.5, 0.9), direction=Direction.INVERSE)
    assert np.max(harmonicity_residual(h, m, np.linspace(0.45, 0.95, 20))) > 1e-2


def test_ode_needs_inverse_direction(hdisk_profile):
    with pytest.raises(ParameterError):
        harmonicity_residual(nitsche_map(hdisk_profile), builtin_metric("hyperbolic_disk"), 0.7)


def test_hopf_vanishes_for_conformal_map(euclid):
    h = power_map(1.0, (0.5, 1.0), direction=Direction.INVERSE)
    _, _, psi = hopf_differential(h, euclid, (32, 32))
    assert np.max(np.abs(psi)) < 1e-12
    assert hopf_check(h, euclid, (32, 32)) < 1e-12


def test_hopf_residual_converges_for_harmonic_map(hdisk_profile):
    m = builtin_metric("hyperbolic_disk")
    h = nitsche_map(hdisk_profile, "inverse")
    res = [hopf_check(h, m, (n, n)) for n in (32, 64, 128)]
    assert res[0] > res[1] > res[2]
    assert res[1] / res[2] > 3.4


def test_hopf_residual_stalls_for_non_harmonic_map():
    m = builtin_metric("hyperbolic_disk")
    h = power_map_between((0.4, 1.0), (0.5, 0.9), direction=Direction.INVERSE)
    res = [hopf_check(h, m, (n, n)) for n in (32, 64, 128)]
    assert res[2] > 0.5 * res[1]


def test_hopf_rotation_invariant(hdisk_profile):
    m = builtin_metric("hyperbolic_disk")
    h = nitsche_map(hdisk_profile, "inverse")
    a = hopf_check(h, m, (32, 32))
    b = hopf_check(h.rotated(0.9), m, (32, 32))
    assert b == pytest.approx(a, rel=1e-10)


def test_hopf_grid_too_coarse(hdisk_profile):
    h = nitsche_map(hdisk_profile, "inverse")
    with pytest.raises(ConfigError):
        hopf_check(h, builtin_metric("hyperbolic_disk"), (8, 32))


@settings(max_examples=25, deadline=None)
@given(alpha=st.floats(0.2, 5.0), s=st.floats(0.51, 0.99))
def test_power_map_distortion_property(alpha, s):
    d = derivatives(power_map(alpha, (0.5, 1.0)), s)
    assert d.K == pytest.approx(0.5 * (alpha + 1 / alpha), rel=1e-12)
    assert d.K >= 1.0
