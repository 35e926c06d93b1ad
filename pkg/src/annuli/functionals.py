"""Weighted mean distortion, energy of the inverse, and the sharp lower bounds.

All functionals of radial maps are reduced to one-dimensional integrals over
the radius.  The mean distortion of a forward map ``f = P(s) e^{it}`` is

    K_rho[f] = 2 pi int s rho^2 K(s) ds,   K(s) = (s Phi' + 1/(s Phi'))/2,

and the energy of an inverse map ``h = g(s) e^{it}`` is

    E_rho[h] = pi int (s g'^2 + g^2/s) rho(g)^2 ds.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    OrientationError,
    ParameterError,
    PreconditionError,
    RegimeError,
)
from .maps import Direction, RadialMap, nitsche_map
from .metric import RadialMetric, gauss_curvature
from .nitsche import (
    AnnulusGeometry,
    NitscheProfile,
    critical_band,
    critical_profile,
    nitsche_bound,
    solve_c,
)
from .numerics import DEFAULT_QUAD, QuadratureConfig, integrate

log = logging.getLogger(__name__)


class Regime(str, enum.Enum):
    NITSCHE_RANGE = "nitsche_range"
    FAT = "fat"


@dataclass(frozen=True)
class Estimate:
    value: float
    err: float


@dataclass(frozen=True)
class FunctionalReport:
    K_rho: float
    E_rho: float | None
    lower_bound: float
    gap: float
    quadrature_err: float
    regime: Regime
    c: float | None = None
    r_star: float | None = None


def _check_orientation(m: RadialMap, n: int = 65):
    lo, hi = m.source
    s = np.linspace(lo, hi, n)[1:-1]
    with np.errstate(all="ignore"):
        d = m.log_deriv(s)
    if not np.all(d > 0):
        raise OrientationError("the radial profile is not increasing")


def mean_distortion_radial(f: RadialMap, m: RadialMetric,
                           cfg: QuadratureConfig | None = None) -> Estimate:
    """``K_rho[f]`` for a forward radial map on its source ring."""
    cfg = (cfg or DEFAULT_QUAD).with_singular(True)
    if f.direction is not Direction.FORWARD:
        raise ParameterError("mean distortion is taken over the forward map")
    _check_orientation(f)
    lo, hi = f.source
    if f.kind == "nitsche":
        rad = f.profile.radicand

        def integrand(s):
            root = np.sqrt(np.maximum(rad.value(s), 0.0))
            rho = m.rho(s)
            return s * s * rho**3 / root + rho * root
    else:
        def integrand(s):
            sp = s * f.log_deriv(s)
            return s * m.rho(s) ** 2 * (sp + 1.0 / sp)

    val, err = integrate(integrand, lo, hi, cfg)
    return Estimate(math.pi * val, math.pi * err)


def mean_distortion_split(profile: NitscheProfile, m: RadialMetric,
                          cfg: QuadratureConfig | None = None) -> Estimate:
    """Same functional for a Nitsche profile, written with ``1/rho``.

    ``pi int s^2 rho^2 / sqrt(s^2 + c/rho^2) + rho^2 sqrt(s^2 + c/rho^2) ds``.
    Off the critical value this is an independent evaluation route.
    """
    cfg = (cfg or DEFAULT_QUAD).with_singular(True)
    c = profile.c

    def integrand(s):
        rho = m.rho(s)
        root = np.sqrt(np.maximum(s * s + c / rho**2, 0.0))
        return s * s * rho**2 / root + rho**2 * root

    val, err = integrate(integrand, profile.tau, profile.sigma, cfg)
    return Estimate(math.pi * val, math.pi * err)


def extremal_value_identity(profile: NitscheProfile, m: RadialMetric,
                            cfg: QuadratureConfig | None = None) -> Estimate:
    """``2 pi int s^2 rho^3 / sqrt(rad) ds + pi c log(1/r)``.

    Algebraically equal to the mean distortion of the Nitsche map; used as the
    sharp lower bound in the Nitsche range.
    """
    cfg = (cfg or DEFAULT_QUAD).with_singular(True)
    rad = profile.radicand

    def integrand(s):
        return s * s * m.rho(s) ** 3 / np.sqrt(np.maximum(rad.value(s), 0.0))

    val, err = integrate(integrand, profile.tau, profile.sigma, cfg)
    extra = math.pi * profile.c * (-profile.log_r)
    return Estimate(2.0 * math.pi * val + extra,
                    2.0 * math.pi * err + math.pi * abs(profile.c) * profile.quad_err)


def energy_radial(h: RadialMap, m: RadialMetric, cfg: QuadratureConfig | None = None) -> Estimate:
    """Weighted Dirichlet energy of an inverse-direction radial map over its source."""
    cfg = cfg or DEFAULT_QUAD
    if h.direction is not Direction.INVERSE:
        raise ParameterError("the energy is taken over the inverse map")
    _check_orientation(h)
    lo, hi = h.source

    def integrand(s):
        g, g1, _ = h.radial(s)
        return (s * g1 * g1 + g * g / s) * m.rho(g) ** 2

    val, err = integrate(integrand, lo, hi, cfg)
    return Estimate(math.pi * val, math.pi * err)


@dataclass(frozen=True)
class RegimeVerdict:
    regime: Regime
    r_star: float
    on_boundary: bool
    degenerate: bool


def regime_verdict(m: RadialMetric, geom: AnnulusGeometry,
                   cfg: QuadratureConfig | None = None) -> RegimeVerdict:
    r = geom.require_r()
    b = nitsche_bound(m, geom, cfg)
    if b.degenerate:
        return RegimeVerdict(Regime.NITSCHE_RANGE, 0.0, False, True)
    on_boundary = abs(r - b.r_star) < 1e-8 or abs(math.log(r) + b.log_inv) <= critical_band(b)
    if on_boundary:
        log.warning("r=%.12g lies within the tolerance band of r*=%.12g", r, b.r_star)
    regime = Regime.NITSCHE_RANGE if (r >= b.r_star or abs(math.log(r) + b.log_inv)
                                      <= critical_band(b)) else Regime.FAT
    return RegimeVerdict(regime, b.r_star, on_boundary, False)


def classify_regime(m: RadialMetric, geom: AnnulusGeometry,
                    cfg: QuadratureConfig | None = None) -> Regime:
    """Nitsche range when ``r >= r*`` (within tolerance), fat otherwise."""
    return regime_verdict(m, geom, cfg).regime


def fat_gap_term(m: RadialMetric, geom: AnnulusGeometry, r_prime: float) -> float:
    """``(tau^2 rho(tau)^2 / 2) Mod A(r, r')``."""
    g_tau = float(m.s_rho(geom.tau))
    return math.pi * g_tau**2 * math.log(r_prime / geom.require_r())


def fat_lower_bound(m: RadialMetric, geom: AnnulusGeometry,
                    cfg: QuadratureConfig | None = None, n_ref: int = 3000) -> FunctionalReport:
    """Sharp lower bound on ``K_rho`` for a fat pair of annuli.

    ``K_rho`` in the report is the value of the spliced competitor at
    ``n_ref``; no map attains the bound.
    """
    from .minseq import build_element

    r = geom.require_r()
    crit = critical_profile(m, geom, cfg)
    r_prime = crit.r_achieved
    if r >= r_prime:
        raise RegimeError(f"r={r:.12g} is in the Nitsche range (r'={r_prime:.12g})")
    base = mean_distortion_radial(nitsche_map(crit), m, cfg)
    bound = base.value + fat_gap_term(m, geom, r_prime)
    elem = build_element(m, geom, n_ref, profile=crit, cfg=cfg)
    err = base.err + elem.err
    return FunctionalReport(elem.K_rho_n, None, bound, elem.K_rho_n - bound, err,
                            Regime.FAT, crit.c, r_prime)


def nitsche_range_report(m: RadialMetric, geom: AnnulusGeometry,
                         cfg: QuadratureConfig | None = None) -> FunctionalReport:
    """Values of the extremal Nitsche map and its inverse in the Nitsche range."""
    prof = solve_c(m, geom, cfg)
    f = nitsche_map(prof)
    K = mean_distortion_radial(f, m, cfg)
    E = energy_radial(f.inverse(), m, cfg)
    lb = extremal_value_identity(prof, m, cfg)
    b = nitsche_bound(m, geom, cfg, check=False)
    return FunctionalReport(K.value, E.value, lb.value, K.value - lb.value, K.err + lb.err,
                            Regime.NITSCHE_RANGE, prof.c, b.r_star)


def functional_report(m: RadialMetric, geom: AnnulusGeometry,
                      cfg: QuadratureConfig | None = None) -> FunctionalReport:
    if classify_regime(m, geom, cfg) is Regime.NITSCHE_RANGE:
        return nitsche_range_report(m, geom, cfg)
    return fat_lower_bound(m, geom, cfg)


@dataclass(frozen=True)
class FikinCheck:
    lhs: float
    rhs: float
    holds: bool | None
    curvature_sign: int


def fikin_bound_check(m: RadialMetric, geom: AnnulusGeometry,
                      cfg: QuadratureConfig | None = None, n: int = 200) -> FikinCheck:
    """Necessary condition relating ``int_0^x rho`` at ``tau`` and ``sigma`` to ``r``.

    ``H(sigma)/H(tau) >= 1 + tau/(2 H(tau)) log^2 r (t rho)'``, with the
    derivative taken at ``tau`` for negative curvature and at ``sigma`` for
    positive curvature.  ``holds`` is ``None`` when the curvature sign is
    not definite on ``(0, sigma)``.
    """
    r = geom.require_r()
    if not m.defined_at_zero:
        raise PreconditionError(f"{m.name} is not defined at the origin")
    if not m.contains(geom.sigma):
        raise PreconditionError("sigma must lie inside the metric domain")
    s = np.linspace(0.0, geom.sigma, n + 2)[1:]
    K = np.asarray(gauss_curvature(m, s))
    if np.all(K < 0):
        sign, at = -1, geom.tau
    elif np.all(K > 0):
        sign, at = 1, geom.sigma
    else:
        sign, at = 0, None
    H_tau, _ = integrate(m.rho, 0.0, geom.tau, cfg)
    H_sigma, _ = integrate(m.rho, 0.0, geom.sigma, cfg)
    lhs = H_sigma / H_tau
    if at is None:
        return FikinCheck(lhs, math.nan, None, 0)
    rhs = 1.0 + geom.tau / (2.0 * H_tau) * math.log(r) ** 2 * float(m.s_rho_deriv(at))
    return FikinCheck(lhs, rhs, bool(lhs >= rhs), sign)

