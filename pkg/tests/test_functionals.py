import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from annuli.errors import OrientationError, ParameterError, PreconditionError, RegimeError
from annuli.functionals import (
    Regime,
    classify_regime,
    energy_radial,
    extremal_value_identity,
    fat_gap_term,
    fat_lower_bound,
    fikin_bound_check,
    functional_report,
    mean_distortion_radial,
    mean_distortion_split,
    regime_verdict,
)
from annuli.maps import Direction, custom_map, nitsche_map, power_map
from annuli.metric import builtin_metric
from annuli.nitsche import AnnulusGeometry, critical_profile, nitsche_bound, solve_c


def _euclid_K(tau, sigma, c):
    return math.pi * (sigma * math.sqrt(sigma**2 + c) - tau * math.sqrt(tau**2 + c))


@pytest.mark.parametrize("r", [2 - math.sqrt(3), 0.3, 0.5, 0.8])
def test_euclidean_mean_distortion_closed_form(euclid, r):
    prof = solve_c(euclid, AnnulusGeometry(0.5, 1.0, r))
    K = mean_distortion_radial(nitsche_map(prof), euclid)
    assert K.value == pytest.approx(_euclid_K(0.5, 1.0, prof.c), rel=1e-10)
    assert K.err < 1e-8


def test_critical_euclidean_value(euclid):
    crit = critical_profile(euclid, AnnulusGeometry(0.5, 1.0, 0.1))
    K = mean_distortion_radial(nitsche_map(crit), euclid)
    assert K.value == pytest.approx(math.pi * math.sqrt(0.75), rel=1e-10)


@pytest.mark.parametrize("name,geom", [
    ("hyperbolic_disk", AnnulusGeometry(0.5, 0.9, 0.5)),
    ("spherical", AnnulusGeometry(0.3, 0.9, 0.3)),
    ("cigar", AnnulusGeometry(0.5, 0.9, 0.6)),
    ("punctured_disk", AnnulusGeometry(0.1, 0.3, 0.4)),
])
def test_three_routes_agree(name, geom):
    m = builtin_metric(name)
    prof = solve_c(m, geom)
    f = nitsche_map(prof)
    K = mean_distortion_radial(f, m).value
    assert mean_distortion_split(prof, m).value == pytest.approx(K, rel=1e-9)
    assert extremal_value_identity(prof, m).value == pytest.approx(K, rel=1e-9)
    assert energy_radial(f.inverse(), m).value == pytest.approx(K, rel=1e-9)


def test_power_map_value_closed_form():
    # euclidean, P = s^a on (1/2, 1): K = pi (a + 1/a)(1 - 1/4)/2
    m = builtin_metric("euclidean")
    a = 1.7
    K = mean_distortion_radial(power_map(a, (0.5, 1.0)), m)
    assert K.value == pytest.approx(math.pi * (a + 1 / a) * 0.75 / 2, rel=1e-11)


def test_extremal_is_below_competitors(hdisk):
    geom = AnnulusGeometry(0.5, 0.9, 0.5)
    best = mean_distortion_radial(nitsche_map(solve_c(hdisk, geom)), hdisk).value
    # the power map between the same rings is an admissible competitor
    alpha = math.log(1 / 0.5) / math.log(0.9 / 0.5)
    comp = mean_distortion_radial(power_map(alpha, (0.5, 0.9)), hdisk).value
    assert comp > best


def test_orientation_and_direction_errors(euclid):
    dec = custom_map(lambda s: 1.5 - s, lambda s: -np.ones_like(s), (0.5, 1.0), (0.5, 1.0))
    with pytest.raises(OrientationError):
        mean_distortion_radial(dec, euclid)
    with pytest.raises(ParameterError):
        mean_distortion_radial(power_map(1.0, (0.5, 1.0), direction=Direction.INVERSE), euclid)
    with pytest.raises(ParameterError):
        energy_radial(power_map(1.0, (0.5, 1.0)), euclid)


def test_regime_classification(euclid):
    r_star = 2 - math.sqrt(3)
    assert classify_regime(euclid, AnnulusGeometry(0.5, 1.0, 0.5)) is Regime.NITSCHE_RANGE
    assert classify_regime(euclid, AnnulusGeometry(0.5, 1.0, 0.1)) is Regime.FAT
    v = regime_verdict(euclid, AnnulusGeometry(0.5, 1.0, r_star))
    assert v.on_boundary and v.regime is Regime.NITSCHE_RANGE
    v = regime_verdict(builtin_metric("inverse_radius"), AnnulusGeometry(0.5, 1.0, 0.01))
    assert v.degenerate and v.regime is Regime.NITSCHE_RANGE


def test_fat_bound_closed_form(euclid):
    geom = AnnulusGeometry(0.5, 1.0, 0.1)
    rep = fat_lower_bound(euclid, geom)
    r_prime = 2 - math.sqrt(3)
    oracle = math.pi * math.sqrt(0.75) + math.pi * 0.25 * math.log(r_prime / 0.1)
    assert rep.lower_bound == pytest.approx(oracle, rel=1e-10)
    assert rep.lower_bound == pytest.approx(3.4948088359, abs=1e-9)
    assert rep.regime is Regime.FAT and rep.E_rho is None
    assert rep.K_rho > rep.lower_bound and rep.gap < 1e-3
    assert fat_gap_term(euclid, geom, r_prime) == pytest.approx(math.pi * 0.25 * math.log(r_prime / 0.1))


def test_fat_bound_rejects_nitsche_range(euclid):
    with pytest.raises(RegimeError):
        fat_lower_bound(euclid, AnnulusGeometry(0.5, 1.0, 0.5))


def test_functional_report_dispatch(hdisk):
    rep = functional_report(hdisk, AnnulusGeometry(0.5, 0.9, 0.5))
    assert rep.regime is Regime.NITSCHE_RANGE
    assert abs(rep.gap) < 1e-9
    assert rep.E_rho == pytest.approx(rep.K_rho, rel=1e-9)
    fat = functional_report(hdisk, AnnulusGeometry(0.5, 0.9, 0.05))
    assert fat.regime is Regime.FAT and fat.gap > 0


def test_curvature_sign_bound(hdisk, sphere):
    for m in (hdisk, sphere):
        rep = fikin_bound_check(m, AnnulusGeometry(0.3, 0.9, 0.3))
        assert rep.holds is True and rep.lhs >= rep.rhs
    assert fikin_bound_check(hdisk, AnnulusGeometry(0.3, 0.9, 0.3)).curvature_sign == -1
    assert fikin_bound_check(sphere, AnnulusGeometry(0.3, 0.9, 0.3)).curvature_sign == 1
    # flat metric: no definite sign, so no verdict
    assert fikin_bound_check(builtin_metric("euclidean"), AnnulusGeometry(0.3, 0.9, 0.5)).holds is None
    with pytest.raises(PreconditionError):
        fikin_bound_check(builtin_metric("inverse_radius"), AnnulusGeometry(0.3, 0.9, 0.5))


def test_curvature_sign_bound_left_side(hdisk):
    # H(x) = int_0^x 2/(1 - y^2) = 2 artanh(x)
    rep = fikin_bound_check(hdisk, AnnulusGeometry(0.3, 0.9, 0.3))
    assert rep.lhs == pytest.approx(math.atanh(0.9) / math.atanh(0.3), rel=1e-10)


@settings(max_examples=15, deadline=None)
@given(frac=st.floats(0.02, 0.98))
def test_energy_identity_property(frac):
    m = builtin_metric("hyperbolic_disk")
    geom = AnnulusGeometry(0.4, 0.85)
    r_star = nitsche_bound(m, geom).r_star
    prof = solve_c(m, geom.with_r(r_star + frac * (0.95 - r_star)))
    f = nitsche_map(prof)
    K = mean_distortion_radial(f, m).value
    E = energy_radial(f.inverse(), m).value
    assert abs(E - K) <= 1e-9 * (1 + K)
