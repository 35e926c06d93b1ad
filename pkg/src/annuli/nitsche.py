"""Nitsche-type bound, the parameter ``c`` and the monotone profiles ``phi``/``q``.

For a radial metric on ``A'(tau, sigma)`` the radial harmonic stretchings are
indexed by ``c >= c# = -tau^2 rho(tau)^2``; their logarithmic profile is

    phi(s) = int_sigma^s rho(y) / sqrt(y^2 rho(y)^2 + c) dy.

Internally ``c`` is carried as ``dc = c - c#`` and the radicand is written as
``(g(y) - g_tau)(g(y) + g_tau) + dc`` with ``g = s*rho``, so nothing cancels
when ``y`` approaches ``tau`` at the critical value.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import (
    AccuracyError,
    DegeneracyError,
    DomainError,
    FatnessRangeError,
    GeometryError,
    RegularityError,
)
from .metric import RadialMetric, check_regularity
from .numerics import (
    DEFAULT_QUAD,
    DEFAULT_ROOT,
    QuadratureConfig,
    RootConfig,
    find_root,
    integrate,
    integrate_segments,
)

log = logging.getLogger(__name__)

# below this offset from tau, g(y) - g(tau) is taken from a midpoint derivative
_NEAR_TAU = 1e-5
DEGENERACY_RTOL = 1e-12
PROFILE_MIN_NODES = 512
PROFILE_TOL = 1e-10


@dataclass(frozen=True)
class AnnulusGeometry:
    """Target ring ``tau < |w| < sigma`` and source ring ``r < |z| < 1``."""

    tau: float
    sigma: float
    r: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.tau) and math.isfinite(self.sigma)):
            raise GeometryError("tau and sigma must be finite")
        if not (0.0 < self.tau < self.sigma):
            raise GeometryError(f"need 0 < tau < sigma, got tau={self.tau}, sigma={self.sigma}")
        if self.r is not None and not (0.0 < self.r < 1.0):
            raise GeometryError(f"need 0 < r < 1, got r={self.r}")

    def require_r(self) -> float:
        if self.r is None:
            raise GeometryError("this computation needs the source radius r")
        return self.r

    def with_r(self, r: float) -> "AnnulusGeometry":
        return AnnulusGeometry(self.tau, self.sigma, r)


@dataclass(frozen=True)
class NitscheBound:
    r_star: float
    err: float
    degenerate: bool
    log_inv: float  # log(1/r*), inf when degenerate


def modulus(p: float, q: float) -> float:
    """Conformal modulus ``2 pi log(q/p)`` of the ring ``p < |z| < q``."""
    if not (0.0 < p < q):
        raise GeometryError(f"need 0 < p < q, got ({p}, {q})")
    return 2.0 * math.pi * math.log(q / p)


class Radicand:
    """Evaluates ``y^2 rho^2 + c`` and the ``phi`` integrand for one ``(metric, tau, dc)``."""

    def __init__(self, m: RadialMetric, tau: float, dc: float):
        self.m = m
        self.tau = float(tau)
        self.dc = float(dc)
        self.g_tau = float(m.s_rho(tau))
        self.gp_tau = float(m.s_rho_deriv(tau))
        self.c = self.dc - self.g_tau**2

    def _split(self, d):
        """``(g(tau+d) - g(tau)) / d`` and ``g(tau+d) - g(tau)`` for offsets ``d >= 0``."""
        d = np.asarray(d, dtype=float)
        near = d < _NEAR_TAU * self.tau
        dd = np.where(near, _NEAR_TAU * self.tau, d)
        with np.errstate(divide="ignore", invalid="ignore"):
            far_ratio = (self.m.s_rho(self.tau + dd) - self.g_tau) / dd
        near_ratio = self.m.s_rho_deriv(self.tau + 0.5 * np.where(near, d, 0.0))
        ratio = np.where(near, near_ratio, far_ratio)
        return ratio, ratio * d

    def g_minus(self, y):
        """``g(y) - g(tau)`` without cancellation close to ``tau``."""
        y = np.asarray(y, dtype=float)
        return self._split(y - self.tau)[1]

    def value(self, y):
        y = np.asarray(y, dtype=float)
        gm = self.g_minus(y)
        return gm * (gm + 2.0 * self.g_tau) + self.dc

    def phi_prime(self, y):
        rad = np.maximum(self.value(y), 0.0)
        return self.m.rho(y) / np.sqrt(rad)

    def phi_second(self, y):
        y = np.asarray(y, dtype=float)
        rad = np.maximum(self.value(y), 0.0)
        rho = self.m.rho(y)
        g = y * rho
        gp = self.m.s_rho_deriv(y)
        return self.m.drho(y) / np.sqrt(rad) - rho * g * gp / rad**1.5

    def dphi_dv(self, v):
        """``d phi / dv`` for ``s = tau + v^2``; finite even at the critical value."""
        d = np.asarray(v, dtype=float) ** 2
        ratio, gm = self._split(d)
        with np.errstate(divide="ignore", invalid="ignore"):
            extra = np.where(d > 0, self.dc / d, np.inf) if self.dc > 0 else 0.0
            quot = ratio * (gm + 2.0 * self.g_tau) + extra
            return 2.0 * self.m.rho(self.tau + d) / np.sqrt(quot)


def _log_inv_r(m: RadialMetric, tau: float, sigma: float, dc: float, cfg: QuadratureConfig):
    """``int_tau^sigma rho / sqrt(rad) dy`` and its error estimate."""
    rad = Radicand(m, tau, dc)
    return integrate(rad.phi_prime, tau, sigma, cfg.with_singular(True))


def _check_inputs(m: RadialMetric, geom: AnnulusGeometry, check: bool = True):
    if not (m.contains(geom.tau, closed=True) and m.contains(geom.sigma, closed=True)):
        raise DomainError(
            f"annulus ({geom.tau}, {geom.sigma}) leaves the domain of {m.name} "
            f"[{m.domain_lo}, {m.domain_hi}]"
        )
    if not (m.contains(geom.tau) or geom.tau == m.domain_lo and np.isfinite(m.s_rho(geom.tau))):
        raise DomainError(f"{m.name} is not finite at tau={geom.tau}")
    if check:
        rep = check_regularity(m, geom.tau, geom.sigma)
        if not rep.is_regular:
            raise RegularityError(
                f"{m.name} is not regular on ({geom.tau}, {geom.sigma}): "
                f"inf s*rho = {rep.inf_s_rho:.12g} at s = {rep.inf_location:.6g}, "
                f"limit at tau = {rep.boundary_limit:.12g}"
            )


def is_degenerate(m: RadialMetric, tau: float, sigma: float, n: int = 257) -> bool:
    """True when ``s*rho`` is constant on the ring or flat at ``tau``.

    In both cases the critical integral diverges and every modulus is reachable.
    """
    s = np.linspace(tau, sigma, n)
    g = m.s_rho(s)
    top = float(np.max(np.abs(g)))
    if float(np.max(g) - np.min(g)) < DEGENERACY_RTOL * top:
        return True
    g_tau = float(m.s_rho(tau))
    return float(m.s_rho_deriv(tau)) * tau <= DEGENERACY_RTOL * g_tau


def nitsche_bound(m: RadialMetric, geom: AnnulusGeometry,
                  cfg: QuadratureConfig | None = None, check: bool = True) -> NitscheBound:
    """Smallest inner radius ``r*`` admitting a harmonic stretching onto ``A'``."""
    cfg = cfg or DEFAULT_QUAD
    _check_inputs(m, geom, check)
    if is_degenerate(m, geom.tau, geom.sigma):
        return NitscheBound(0.0, 0.0, True, math.inf)
    val, err = _log_inv_r(m, geom.tau, geom.sigma, 0.0, cfg)
    r_star = math.exp(-val)
    return NitscheBound(r_star, r_star * err, False, val)


def critical_band(bound: NitscheBound) -> float:
    """Half-width in ``log r`` inside which ``r`` counts as equal to ``r*``."""
    return max(10.0 * bound.err / max(bound.r_star, 1e-300), 1e-12)


class NitscheProfile:
    """Certified table of ``phi`` on ``[tau, sigma]`` for one value of ``c``.

    The table lives in ``v = sqrt(s - tau)``, where ``phi`` is smooth even at the
    critical ``c``; a cubic Hermite interpolant with exact slopes is refined
    until midpoint checks against direct quadrature agree to ``tol``.
    """

    def __init__(self, m: RadialMetric, tau: float, sigma: float, dc: float, *,
                 is_critical: bool = False, quad: QuadratureConfig | None = None,
                 min_nodes: int = PROFILE_MIN_NODES, tol: float = PROFILE_TOL):
        self.metric = m
        self.tau = float(tau)
        self.sigma = float(sigma)
        self.dc = float(dc)
        self.is_critical = bool(is_critical)
        self.radicand = Radicand(m, tau, dc)
        self.c = self.radicand.c
        self._quad = quad or DEFAULT_QUAD
        self._build(min_nodes, tol)

    # construction

    def _segments(self, v):
        vals, errs = integrate_segments(self.radicand.dphi_dv, v, self._quad)
        return vals, errs

    def _build(self, min_nodes, tol, max_rounds=12):
        vmax = math.sqrt(self.sigma - self.tau)
        v = np.linspace(0.0, vmax, min_nodes + 1)
        seg, err = self._segments(v)
        for _ in range(max_rounds):
            phi = -np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
            slope = self.radicand.dphi_dv(v)
            spline = CubicHermiteSpline(v, phi, slope)
            mid = 0.5 * (v[:-1] + v[1:])
            left, lerr = self._segments(np.column_stack([v[:-1], mid]).ravel())
            left, lerr = left[0::2], lerr[0::2]
            exact_mid = phi[:-1] + left
            miss = np.abs(spline(mid) - exact_mid)
            bad = miss > tol * (1.0 + np.abs(exact_mid))
            if not bad.any():
                break
            # split the failing cells; both halves are already integrated
            right = seg - left
            new_v, new_seg, new_err = [], [], []
            for i in range(seg.size):
                new_v.append(v[i])
                if bad[i]:
                    new_v.append(mid[i])
                    new_seg.extend([left[i], right[i]])
                    new_err.extend([lerr[i], err[i]])
                else:
                    new_seg.append(seg[i])
                    new_err.append(err[i])
            new_v.append(v[-1])
            v = np.asarray(new_v)
            seg = np.asarray(new_seg)
            err = np.asarray(new_err)
        else:
            raise AccuracyError(
                f"profile table did not reach {tol:g} after {max_rounds} refinements",
                best=float(np.max(miss)),
            )
        self.v_nodes = v
        self.phi_nodes = phi
        self.slope_nodes = slope
        self.s_nodes = self.tau + v * v
        self._spline = spline
        self.interp_err = float(np.max(miss)) if miss.size else 0.0
        self.quad_err = float(np.sum(err))
        self.log_r = float(phi[0])
        self.r_achieved = math.exp(self.log_r)

    # evaluation

    def _v_of(self, s):
        s = np.asarray(s, dtype=float)
        eps = 1e-13 * self.sigma
        if np.any((s < self.tau - eps) | (s > self.sigma + eps)):
            raise DomainError(f"radius outside [{self.tau}, {self.sigma}]")
        return np.sqrt(np.clip(s - self.tau, 0.0, self.sigma - self.tau))

    def phi(self, s):
        out = self._spline(self._v_of(s))
        return float(out) if np.ndim(out) == 0 else out

    def q(self, s):
        return np.exp(self.phi(s))

    def phi_prime(self, s):
        """Exact ``phi'(s) = rho / sqrt(s^2 rho^2 + c)``; infinite at ``tau`` when critical."""
        self._v_of(s)
        with np.errstate(divide="ignore"):
            out = self.radicand.phi_prime(s)
        return float(out) if np.ndim(out) == 0 else out

    def phi_second(self, s):
        self._v_of(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.radicand.phi_second(s)
        return float(out) if np.ndim(out) == 0 else out

    def s_phi_prime(self, s):
        s = np.asarray(s, dtype=float)
        return s * self.phi_prime(s)

    def q_inverse(self, x):
        """Radius ``s`` with ``q(s) = x`` for ``x`` in ``[r_achieved, 1]``."""
        x = np.asarray(x, dtype=float)
        lx = np.log(x)
        tol = 1e-13 * max(1.0, abs(self.log_r))
        if np.any((lx < self.log_r - tol) | (lx > tol)):
            raise DomainError(f"value outside [{self.r_achieved}, 1]")
        v = self._invert_phi(np.atleast_1d(np.clip(lx, self.log_r, 0.0)).ravel())
        s = (self.tau + v * v).reshape(x.shape)
        s = np.minimum(s, self.sigma)
        return float(s) if np.ndim(s) == 0 else s

    def _invert_phi(self, target):
        pn, vn = self.phi_nodes, self.v_nodes
        idx = np.clip(np.searchsorted(pn, target, side="right") - 1, 0, pn.size - 2)
        a, b = vn[idx].copy(), vn[idx + 1].copy()
        v = a + (b - a) * np.where(pn[idx + 1] > pn[idx],
                                   (target - pn[idx]) / (pn[idx + 1] - pn[idx]), 0.5)
        d1 = self._spline.derivative()
        for _ in range(60):
            f = self._spline(v) - target
            lo = f < 0
            a = np.where(lo, v, a)
            b = np.where(lo, b, v)
            fp = d1(v)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = v - f / fp
            ok = np.isfinite(step) & (step > a) & (step < b)
            v_new = np.where(ok, step, 0.5 * (a + b))
            if np.all(np.abs(v_new - v) <= 4e-16 * np.maximum(np.abs(v_new), 1e-300)):
                v = v_new
                break
            v = v_new
        return v

    def case_sign_ok(self) -> bool:
        """Sign of ``s^2 phi'^2 - 1`` opposite to ``c`` at every node."""
        s = self.s_nodes[1:] if self.is_critical else self.s_nodes
        w = (s * self.phi_prime(s)) ** 2 - 1.0
        tol = 1e-12
        if self.c > 0:
            return bool(np.all(w <= tol))
        if self.c < 0:
            return bool(np.all(w >= -tol))
        return bool(np.all(np.abs(w) <= 1e-10))

    def nodes(self):
        """Rows ``(s, phi, q, s*phi')`` of the table."""
        s = self.s_nodes
        with np.errstate(divide="ignore"):
            sp = self.s_phi_prime(s)
        return np.column_stack([s, self.phi_nodes, np.exp(self.phi_nodes), sp])


def _profile(m, geom, dc, critical, quad):
    return NitscheProfile(m, geom.tau, geom.sigma, dc, is_critical=critical, quad=quad)


def critical_profile(m: RadialMetric, geom: AnnulusGeometry,
                     quad: QuadratureConfig | None = None, check: bool = True) -> NitscheProfile:
    """Profile at ``c = -tau^2 rho(tau)^2``; its inner radius is the bound ``r*``."""
    _check_inputs(m, geom, check)
    if is_degenerate(m, geom.tau, geom.sigma):
        raise DegeneracyError(
            f"s*rho is constant (or flat at tau) for {m.name} on ({geom.tau}, {geom.sigma}); "
            "the critical map does not exist"
        )
    return _profile(m, geom, 0.0, True, quad)


def solve_c(m: RadialMetric, geom: AnnulusGeometry, quad: QuadratureConfig | None = None,
            root: RootConfig | None = None, check: bool = True) -> NitscheProfile:
    """Profile of the harmonic stretching with inner radius ``geom.r``."""
    quad = quad or DEFAULT_QUAD
    root = root or DEFAULT_ROOT
    r = geom.require_r()
    bound = nitsche_bound(m, geom, quad, check)
    target = -math.log(r)
    if not bound.degenerate:
        gap = bound.log_inv - target
        if abs(gap) <= critical_band(bound):
            log.info("r equals r* within tolerance; returning the critical profile")
            return _profile(m, geom, 0.0, True, quad)
        if gap < 0:
            raise FatnessRangeError(
                f"r={r:.12g} is below the bound r*={bound.r_star:.12g}; "
                "no harmonic stretching exists (use the critical profile)"
            )

    g_tau = float(m.s_rho(geom.tau))

    def f(w):
        val, _ = _log_inv_r(m, geom.tau, geom.sigma, w * w, quad)
        return val - target

    # f decreases in w = sqrt(c - c#); bracket [lo, hi] with f(lo) > 0 > f(hi)
    scale = max(g_tau, 1e-300)
    lo = 0.0
    if bound.degenerate:
        lo = scale
        while f(lo) <= 0:
            lo *= 0.5
            if lo < 1e-300:
                raise AccuracyError("could not bracket c from below")
    hi = max(lo, scale)
    step = scale
    while f(hi) > 0:
        lo = hi
        hi += step
        step *= 2.0
        if step > 2.0**60 * scale:
            raise AccuracyError("could not bracket c from above")
    w = find_root(f, (lo, hi), RootConfig(min(root.x_tol, 1e-14 * hi + 1e-300),
                                          root.f_tol, root.max_iter))
    prof = _profile(m, geom, w * w, False, quad)
    miss = abs(prof.log_r + target)
    if miss > 1e-9:
        raise AccuracyError(f"solved profile misses log r by {miss:.3g}", best=prof.c)
    return prof
