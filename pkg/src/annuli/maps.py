"""Radial stretchings ``P(s) e^{i t}`` between annuli and their pointwise calculus."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ConfigError, DomainError, GeometryError, ParameterError
from .metric import RadialMetric
from .nitsche import NitscheProfile


class Direction(str, enum.Enum):
    FORWARD = "forward"  # A'(tau, sigma) -> A(r, 1)
    INVERSE = "inverse"  # A(r, 1) -> A'(tau, sigma)


_EDGE_RTOL = 1e-12


@dataclass(frozen=True)
class RadialMap:
    """``z = s e^{it} -> P(s) e^{i(t + pre_rotation + rotation)}``.

    ``kind`` is ``"nitsche"`` (profile-backed), ``"power"`` (``P = B s^alpha``)
    or ``"custom"`` (user callables for ``P, P', P''``).
    """

    kind: str
    direction: Direction
    source: tuple
    target: tuple
    rotation: float = 0.0
    pre_rotation: float = 0.0
    profile: NitscheProfile | None = field(default=None, repr=False, compare=False)
    alpha: float | None = None
    funcs: tuple | None = field(default=None, repr=False, compare=False)

    # radial profile and its derivatives

    def radial(self, s):
        """``(P, P', P'')`` at radii ``s`` of the source ring."""
        s = np.asarray(s, dtype=float)
        if self.kind == "power":
            B = self.target[1] / self.source[1] ** self.alpha
            P = B * s**self.alpha
            return P, self.alpha * P / s, self.alpha * (self.alpha - 1.0) * P / s**2
        if self.kind == "custom":
            f0, f1, f2 = self.funcs
            P2 = f2(s) if f2 is not None else _fd2(f0, s, self.source)
            return np.asarray(f0(s), float), np.asarray(f1(s), float), np.asarray(P2, float)
        prof = self.profile
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.direction is Direction.FORWARD:
                P = prof.q(s)
                d1 = prof.phi_prime(s)
                d2 = prof.phi_second(s)
                return P, P * d1, P * (d2 + d1 * d1)
            g = prof.q_inverse(s)
            p1 = prof.phi_prime(g)
            p2 = prof.phi_second(g)
            g1 = 1.0 / (s * p1)
            g2 = (-1.0 / s**2 - p2 * g1 * g1) / p1
            return g, g1, g2

    def log_deriv(self, s):
        """``Phi'(s) = P'/P``."""
        P, P1, _ = self.radial(s)
        return P1 / P

    def inverse(self) -> "RadialMap":
        flip = Direction.INVERSE if self.direction is Direction.FORWARD else Direction.FORWARD
        common = dict(direction=flip, source=self.target, target=self.source,
                      rotation=-self.pre_rotation, pre_rotation=-self.rotation)
        if self.kind == "nitsche":
            return replace(self, **common)
        if self.kind == "power":
            return replace(self, alpha=1.0 / self.alpha, **common)
        raise ParameterError("custom maps carry no inverse")

    def rotated(self, rotation: float = 0.0, pre_rotation: float = 0.0) -> "RadialMap":
        return replace(self, rotation=self.rotation + rotation,
                       pre_rotation=self.pre_rotation + pre_rotation)

    @property
    def total_rotation(self) -> float:
        return self.rotation + self.pre_rotation


def _fd2(f, s, source):
    h = 1e-4 * (source[1] - source[0])
    lo, hi = source
    s = np.clip(s, lo + h, hi - h)
    return (f(s + h) - 2 * f(s) + f(s - h)) / (h * h)


def nitsche_map(profile: NitscheProfile, direction=Direction.FORWARD,
                rotation: float = 0.0) -> RadialMap:
    """Harmonic stretching of a solved profile, in either direction."""
    direction = Direction(direction)
    a = (profile.tau, profile.sigma)
    b = (profile.r_achieved, 1.0)
    src, tgt = (a, b) if direction is Direction.FORWARD else (b, a)
    return RadialMap("nitsche", direction, src, tgt, float(rotation), profile=profile)


def power_map(alpha: float, source: tuple, target_hi: float = 1.0,
              direction=Direction.FORWARD, rotation: float = 0.0) -> RadialMap:
    """``P(s) = target_hi (s / source_hi)^alpha`` on the ring ``source``."""
    if not (alpha > 0 and math.isfinite(alpha)):
        raise ParameterError(f"power exponent must be positive, got {alpha}")
    lo, hi = map(float, source)
    if not 0 < lo < hi:
        raise GeometryError(f"bad source ring {source}")
    tgt = (target_hi * (lo / hi) ** alpha, float(target_hi))
    return RadialMap("power", Direction(direction), (lo, hi), tgt, float(rotation), alpha=float(alpha))


def power_map_between(source: tuple, target: tuple, direction=Direction.FORWARD) -> RadialMap:
    """The power stretching carrying ring ``source`` onto ring ``target``."""
    alpha = math.log(target[1] / target[0]) / math.log(source[1] / source[0])
    return power_map(alpha, source, target[1], direction)


def custom_map(P: Callable, dP: Callable, source: tuple, target: tuple,
               d2P: Callable | None = None, direction=Direction.FORWARD) -> RadialMap:
    return RadialMap("custom", Direction(direction), tuple(source), tuple(target),
                     funcs=(P, dP, d2P))


def _check_source(m: RadialMap, s, interior: bool):
    lo, hi = m.source
    tol = _EDGE_RTOL * hi
    if interior:
        bad = (s <= lo) | (s >= hi)
    else:
        bad = (s < lo - tol) | (s > hi + tol)
    if np.any(bad):
        kind = "strictly inside" if interior else "in"
        raise DomainError(f"|z| must lie {kind} [{lo:.12g}, {hi:.12g}]")


def evaluate(m: RadialMap, z):
    """Image of the point(s) ``z`` under ``m``."""
    z = np.asarray(z, dtype=complex)
    s = np.abs(z)
    _check_source(m, s, interior=False)
    s = np.clip(s, *m.source)
    P = m.radial(s)[0]
    out = P * np.exp(1j * (np.angle(z) + m.total_rotation))
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PointDerivatives:
    f_s: complex
    f_t: complex
    f_z: complex
    f_zbar: complex
    J: float
    K: float
    K_polar: float
    K_wirtinger: float
    degenerate: bool


def derivatives(m: RadialMap, z) -> PointDerivatives:
    """Polar and Wirtinger derivatives, Jacobian and distortion at interior ``z``.

    ``K`` uses the radial formula ``(s Phi' + 1/(s Phi'))/2``; ``K_polar`` and
    ``K_wirtinger`` are the two general expressions, kept as cross-checks.
    """
    z = np.asarray(z, dtype=complex)
    s = np.abs(z)
    _check_source(m, s, interior=True)
    t = np.angle(z)
    P, P1, _ = m.radial(s)
    e = np.exp(1j * (t + m.total_rotation))
    f_s = P1 * e
    f_t = 1j * P * e
    f_z = 0.5 * np.exp(-1j * t) * (f_s - 1j / s * f_t)
    f_zbar = 0.5 * np.exp(1j * t) * (f_s + 1j / s * f_t)
    J = np.imag(f_t * np.conj(f_s)) / s
    sphi = s * P1 / P
    degenerate = J <= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        K = np.where(degenerate, 1.0, 0.5 * (sphi + 1.0 / sphi))
        K_polar = np.where(degenerate, 1.0,
                           (s * np.abs(f_s) ** 2 + np.abs(f_t) ** 2 / s)
                           / (2.0 * np.imag(f_t * np.conj(f_s))))
        a2, b2 = np.abs(f_z) ** 2, np.abs(f_zbar) ** 2
        K_w = np.where(degenerate, 1.0, (a2 + b2) / (a2 - b2))

    def out(x):
        return x.item() if np.ndim(x) == 0 else x

    return PointDerivatives(out(f_s), out(f_t), out(f_z), out(f_zbar), out(J), out(K),
                            out(K_polar), out(K_w), out(degenerate) if np.ndim(degenerate) == 0
                            else degenerate)


def harmonicity_residual(m: RadialMap, metric: RadialMetric, s):
    """Residual of the radial harmonic-map ODE for an inverse-direction map.

    ``s^2 g'' + s g' - g + (rho'(g)/rho(g)) (s^2 g'^2 - g^2)``, divided by
    ``max(1, |g|)``.  Returned in absolute value.
    """
    if m.direction is not Direction.INVERSE:
        raise ParameterError("the harmonic-map ODE applies to the inverse direction")
    s = np.asarray(s, dtype=float)
    _check_source(m, s, interior=True)
    g, g1, g2 = m.radial(s)
    w = metric.drho(g) / metric.rho(g)
    res = s * s * g2 + s * g1 - g + w * (s * s * g1 * g1 - g * g)
    out = np.abs(res) / np.maximum(1.0, np.abs(g))
    return float(out) if out.ndim == 0 else out


def hopf_differential(m: RadialMap, metric: RadialMetric, mesh=(64, 64)):
    """``Psi = rho^2(h) h_zeta conj(h_zetabar)`` on a log-polar grid, from differences of ``h``.

    Returns ``(s, t, Psi)`` with ``log s`` uniform over the source ring
    (endpoints included) and ``t`` uniform over the circle.
    """
    n_s, n_t = int(mesh[0]), int(mesh[1])
    if n_s < 16 or n_t < 16:
        raise ConfigError("Hopf grid must be at least 16x16")
    lo, hi = m.source
    x = np.linspace(math.log(lo), math.log(hi), n_s)
    s = np.exp(x)
    s[0], s[-1] = lo, hi
    t = 2.0 * math.pi * np.arange(n_t) / n_t
    dx, dt = x[1] - x[0], t[1] - t[0]
    S, T = np.meshgrid(s, t, indexing="ij")
    H = evaluate(m, S * np.exp(1j * T))
    # every quotient is normalised to be exact on e^x and e^{it}, so the
    # identity map gives Psi = 0 to rounding
    H_x = np.empty_like(H)
    H_x[1:-1] = (H[2:] - H[:-2]) / (2 * math.sinh(dx))
    H_x[0] = (-3 * H[0] + 4 * H[1] - H[2]) / (-3 + 4 * math.exp(dx) - math.exp(2 * dx))
    H_x[-1] = (3 * H[-1] - 4 * H[-2] + H[-3]) / (3 - 4 * math.exp(-dx) + math.exp(-2 * dx))
    H_t = (np.roll(H, -1, axis=1) - np.roll(H, 1, axis=1)) / (2 * math.sin(dt))
    h_z = 0.5 * np.exp(-1j * T) / S * (H_x - 1j * H_t)
    h_zb = 0.5 * np.exp(1j * T) / S * (H_x + 1j * H_t)
    Psi = metric.rho(np.abs(H)) ** 2 * h_z * np.conj(h_zb)
    return s, t, Psi


def hopf_check(m: RadialMap, metric: RadialMetric, mesh=(64, 64)) -> float:
    """Max discrete Cauchy-Riemann residual ``|Psi_s + (i/s) Psi_t|`` over interior nodes.

    Differences are taken in ``(log s, t)``, where the operator reads
    ``(Psi_x + i Psi_t)/s``.  Scaled by ``max(1, max |Psi|)``.  Vanishes as
    the grid is refined exactly when ``h`` is harmonic for ``metric``.
    """
    if m.direction is not Direction.INVERSE:
        raise ParameterError("the Hopf check applies to the inverse direction")
    s, t, Psi = hopf_differential(m, metric, mesh)
    dx = math.log(s[-1] / s[0]) / (len(s) - 1)
    dt = t[1] - t[0]
    P_x = (Psi[2:] - Psi[:-2]) / (2 * dx)
    P_t = (np.roll(Psi, -1, axis=1) - np.roll(Psi, 1, axis=1))[1:-1] / (2 * dt)
    # skip the first and last interior rows: their h_x uses a one-sided stencil
    res = (np.abs(P_x + 1j * P_t) / s[1:-1, None])[1:-1]
    scale = max(1.0, float(np.max(np.abs(Psi))))
    return float(np.max(res)) / scale
