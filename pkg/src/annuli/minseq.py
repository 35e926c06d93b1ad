"""Spliced competitors whose mean distortion decreases to the fat-regime bound.

For ``r < r'`` the n-th element keeps the critical stretching on
``[s_n, sigma]`` and uses the power map ``r (s/tau)^n`` on ``[tau, s_n]``,
where ``s_n`` makes the two moduli agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BracketError, ParameterError, RegimeError
from .functionals import fat_gap_term, mean_distortion_radial
from .maps import RadialMap, nitsche_map, power_map
from .metric import RadialMetric
from .nitsche import AnnulusGeometry, NitscheProfile, critical_profile
from .numerics import DEFAULT_QUAD, QuadratureConfig, RootConfig, find_root, integrate

DEFAULT_LADDER = (10, 30, 100, 300, 1000, 3000)


def _critical(m, geom, profile, cfg):
    prof = profile if profile is not None else critical_profile(m, geom, cfg)
    if not prof.is_critical:
        raise ParameterError("the spliced sequence needs the critical profile")
    if geom.require_r() >= prof.r_achieved:
        raise RegimeError(
            f"r={geom.r:.12g} is not below r'={prof.r_achieved:.12g}; the pair is not fat"
        )
    return prof


def splice_radius(m: RadialMetric, geom: AnnulusGeometry, n: int,
                  profile: NitscheProfile | None = None,
                  cfg: QuadratureConfig | None = None) -> float:
    """Radius ``s_n`` in ``(tau, sigma)`` where ``q#(s) = r (s/tau)^n``."""
    prof = _critical(m, geom, profile, cfg)
    if n < 1:
        raise BracketError("n must be a positive integer")
    tau, sigma = geom.tau, geom.sigma
    log_r = math.log(geom.r)
    if log_r + n * math.log(sigma / tau) <= 0:
        raise BracketError(
            f"n={n} is too small: r (sigma/tau)^n <= 1, so no splice radius exists; increase n"
        )

    # root in v = sqrt(s - tau), where the critical profile is smooth
    def p(v):
        s = tau + v * v
        return prof.phi(s) - log_r - n * math.log1p(v * v / tau)

    vmax = math.sqrt(sigma - tau)
    v = find_root(p, (0.0, vmax), RootConfig(x_tol=1e-15 * vmax, f_tol=1e-15, max_iter=400))
    return tau + v * v


@dataclass(frozen=True)
class MinSeqElement:
    n: int
    s_n: float
    K_rho_n: float
    gap: float
    bound: float
    err: float
    inner_modulus: float
    outer_modulus: float
    outer: RadialMap
    inner: RadialMap

    def evaluate(self, z):
        z = np.asarray(z, dtype=complex)
        s = np.abs(z)
        use_inner = s < self.s_n
        out = np.empty_like(z)
        if np.any(use_inner):
            zi = z[use_inner]
            out[use_inner] = self.inner.radial(np.abs(zi))[0] * np.exp(1j * np.angle(zi))
        if np.any(~use_inner):
            zo = z[~use_inner]
            out[~use_inner] = self.outer.radial(np.abs(zo))[0] * np.exp(1j * np.angle(zo))
        return complex(out) if out.ndim == 0 else out

    def distortion(self, s):
        """Pointwise ``K`` of the element at radius ``s``."""
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            sp = np.where(s < self.s_n, float(self.n), s * self.outer.log_deriv(np.maximum(s, self.s_n)))
        return 0.5 * (sp + 1.0 / sp)


def build_element(m: RadialMetric, geom: AnnulusGeometry, n: int,
                  profile: NitscheProfile | None = None,
                  cfg: QuadratureConfig | None = None) -> MinSeqElement:
    """The n-th spliced competitor and its mean distortion."""
    cfg = cfg or DEFAULT_QUAD
    prof = _critical(m, geom, profile, cfg)
    s_n = splice_radius(m, geom, n, prof, cfg)
    tau = geom.tau
    r = geom.r
    outer = nitsche_map(prof)
    inner_mod = r * math.exp(n * math.log1p((s_n - tau) / tau))
    inner = power_map(float(n), (tau, s_n), inner_mod)
    outer_mod = float(prof.q(s_n))

    total = mean_distortion_radial(outer, m, cfg)
    rad = prof.radicand

    def crit_integrand(s):
        root = np.sqrt(np.maximum(rad.value(s), 0.0))
        rho = m.rho(s)
        return s * s * rho**3 / root + rho * root

    sing = cfg.with_singular(True)
    k_in, e1 = integrate(crit_integrand, tau, s_n, sing)
    area, e2 = integrate(lambda s: s * m.rho(s) ** 2, tau, s_n, cfg)
    k_in *= math.pi
    inner_val = math.pi * (n + 1.0 / n) * area
    bound_extra = fat_gap_term(m, geom, prof.r_achieved)
    gap = inner_val - k_in - bound_extra
    K = total.value - k_in + inner_val
    err = total.err + math.pi * e1 + math.pi * (n + 1.0 / n) * e2
    return MinSeqElement(n, s_n, K, gap, total.value + bound_extra, err, inner_mod, outer_mod,
                         outer, inner)


@dataclass(frozen=True)
class LimitRow:
    n: int
    s_n: float
    n_offset: float      # n (s_n - tau)
    n_half_sq: float     # (n/2)(s_n^2 - tau^2)
    K_rho_n: float
    gap: float


@dataclass(frozen=True)
class LimitStudy:
    rows: tuple
    bound: float
    offset_limit: float     # tau log(r'/r)
    half_sq_limit: float    # tau^2 log(r'/r)
    rate_constant: float    # least-squares C in gap ~ C/n
    gaps_decreasing: bool
    offsets_monotone: bool


def limit_study(m: RadialMetric, geom: AnnulusGeometry, n_list=DEFAULT_LADDER,
                cfg: QuadratureConfig | None = None) -> LimitStudy:
    prof = _critical(m, geom, None, cfg)
    tau = geom.tau
    L = math.log(prof.r_achieved / geom.r)
    rows = []
    bound = math.nan
    for n in sorted(int(k) for k in n_list):
        el = build_element(m, geom, n, prof, cfg)
        d = el.s_n - tau
        rows.append(LimitRow(n, el.s_n, n * d, 0.5 * n * d * (2 * tau + d), el.K_rho_n, el.gap))
        bound = el.bound
    ns = np.array([row.n for row in rows], dtype=float)
    gaps = np.array([row.gap for row in rows])
    C = float(np.sum(gaps / ns) / np.sum(1.0 / ns**2))
    offs = np.array([row.n_offset for row in rows])
    target = tau * L
    return LimitStudy(
        rows=tuple(rows),
        bound=bound,
        offset_limit=target,
        half_sq_limit=tau * tau * L,
        rate_constant=C,
        gaps_decreasing=bool(np.all(np.diff(gaps) < 0)),
        offsets_monotone=bool(np.all(np.diff(np.abs(offs - target)) <= 0)),
    )
