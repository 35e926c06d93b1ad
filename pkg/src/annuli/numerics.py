"""Quadrature and scalar root finding.

The quadrature is a batched tanh-sinh (double exponential) rule.  Every
integral in the package goes through :func:`integrate` or
:func:`integrate_segments`; every scalar equation goes through
:func:`find_root`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import optimize

from .errors import AccuracyError, BracketError, EvaluationError, ParameterError, UnboundedRootError

_T_MAX = 4.0
_MIN_LEVEL = 3


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_levels: int = 12
    singular_lo: bool = False

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ParameterError("quadrature tolerances must be positive")
        if self.max_levels < 4:
            raise ParameterError("max_levels must be >= 4")

    def with_singular(self, flag: bool = True) -> "QuadratureConfig":
        return QuadratureConfig(self.rel_tol, self.abs_tol, self.max_levels, flag)


@dataclass(frozen=True)
class RootConfig:
    x_tol: float = 1e-12
    f_tol: float = 1e-12
    max_iter: int = 200

    def __post_init__(self):
        if not (self.x_tol > 0 and self.f_tol > 0 and self.max_iter > 0):
            raise ParameterError("root tolerances must be positive")


DEFAULT_QUAD = QuadratureConfig()
DEFAULT_ROOT = RootConfig()


@lru_cache(maxsize=32)
def _level_nodes(level: int):
    """Abscissae added at ``level`` on the reference line, with their offsets.

    Returns ``(t, frac_lo, frac_hi, jac)``: ``frac_lo`` is the distance of the
    node from the left end of [0, 1], ``frac_hi`` the distance from the right
    end, both computed without cancellation, and ``jac`` is dx/dt.
    """
    if level == 0:
        t = np.arange(-_T_MAX, _T_MAX + 0.5)
    else:
        h = 2.0 ** -level
        t = h * np.arange(1, round(_T_MAX / h), 2)
        t = np.concatenate([-t[::-1], t])
    u = 0.5 * math.pi * np.sinh(t)
    frac_lo = 1.0 / (1.0 + np.exp(-2.0 * u))
    frac_hi = 1.0 / (1.0 + np.exp(2.0 * u))
    jac = 2.0 * frac_lo * frac_hi * 0.5 * math.pi * np.cosh(t)
    return t, frac_lo, frac_hi, jac


def _level_sum(f, lo, hi, level, singular):
    t, fl, fh, jac = _level_nodes(level)
    lo = lo[:, None]
    hi = hi[:, None]
    length = hi - lo
    left = t < 0
    if singular:
        # y = lo + v^2 removes the inverse square root; the offset y - lo is
        # recomputed from the rounded abscissa so the sample is exact.
        vmax = np.sqrt(length)
        v = np.where(left, vmax * fl, vmax - vmax * fh)
        dv = vmax * fh
        x = np.where(left, lo + v * v, hi - dv * (2.0 * vmax - dv))
        x = np.where(left, np.maximum(x, np.nextafter(lo, np.inf)), x)
        valid = x < hi
        v = np.where(left, np.sqrt(np.maximum(x - lo, 0.0)), v)
        w = vmax * jac * 2.0 * v
    else:
        x = np.where(left, lo + length * fl, hi - length * fh)
        valid = (x > lo) & (x < hi)
        w = length * jac
    xs = np.where(valid, x, 0.5 * (lo + hi))
    with np.errstate(all="ignore"):
        fx = np.asarray(f(xs), dtype=float)
    fx = np.broadcast_to(fx, xs.shape)
    bad = valid & ~np.isfinite(fx)
    if bad.any():
        where = xs[bad][0]
        raise EvaluationError(f"integrand is not finite at x={where!r}")
    contrib = np.where(valid, w * fx, 0.0)
    h = 1.0 if level == 0 else 2.0 ** -level
    return h * contrib.sum(axis=1)


def integrate_segments(f: Callable, edges, cfg: QuadratureConfig | None = None):
    """Integrate ``f`` over each consecutive interval of ``edges``.

    ``f`` must accept and return arrays elementwise.  With ``cfg.singular_lo``
    every segment is treated as having an inverse square root singularity at
    its left end.  Returns ``(values, err_estimates)`` as arrays.
    """
    cfg = cfg or DEFAULT_QUAD
    edges = np.asarray(edges, dtype=float)
    lo = edges[:-1].copy()
    hi = edges[1:].copy()
    if lo.size == 0:
        return np.zeros(0), np.zeros(0)
    if np.any(~(hi > lo)):
        raise ParameterError("integration limits must satisfy lo < hi")
    total = _level_sum(f, lo, hi, 0, cfg.singular_lo)
    err = np.full_like(total, np.inf)
    for level in range(1, cfg.max_levels + 1):
        new = 0.5 * total + _level_sum(f, lo, hi, level, cfg.singular_lo)
        err = np.abs(new - total)
        total = new
        if level >= _MIN_LEVEL:
            ok = err <= np.maximum(cfg.rel_tol * np.abs(total), cfg.abs_tol)
            if ok.all():
                return total, err
    raise AccuracyError(
        f"tanh-sinh did not converge in {cfg.max_levels} levels "
        f"(max err {float(err.max()):.3g})",
        best=total,
        err=err,
    )


def integrate(f: Callable, lo: float, hi: float, cfg: QuadratureConfig | None = None):
    """Return ``(value, err_est)`` for the integral of ``f`` over ``[lo, hi]``."""
    if not hi > lo:
        raise ParameterError(f"need lo < hi, got [{lo}, {hi}]")
    try:
        vals, errs = integrate_segments(f, [lo, hi], cfg)
    except AccuracyError as exc:
        raise AccuracyError(str(exc), best=float(exc.best[0]), err=float(exc.err[0])) from None
    return float(vals[0]), float(errs[0])


def find_root(f: Callable[[float], float], bracket, cfg: RootConfig | None = None) -> float:
    """Bracketing root finder (Brent's method with bisection safeguard)."""
    cfg = cfg or DEFAULT_ROOT
    a, b = float(bracket[0]), float(bracket[1])
    if a > b:
        a, b = b, a
    fa, fb = f(a), f(b)
    if not (np.isfinite(fa) and np.isfinite(fb)):
        raise EvaluationError(f"non-finite value at bracket end ({fa}, {fb})")
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if np.sign(fa) == np.sign(fb):
        raise BracketError(f"no sign change on [{a}, {b}]: f={fa:.3g}, {fb:.3g}")
    x, info = optimize.brentq(
        f, a, b, xtol=cfg.x_tol, rtol=4 * np.finfo(float).eps,
        maxiter=cfg.max_iter, full_output=True, disp=False,
    )
    if not info.converged:
        raise AccuracyError(f"root finder stopped after {info.iterations} iterations", best=x)
    return float(x)


def expand_bracket_up(f: Callable[[float], float], lo: float, step: float = 1.0,
                      cap: float = 2.0 ** 60):
    """Grow ``lo + step * 2**k`` until ``f`` changes sign; return the bracket."""
    f0 = f(lo)
    if not np.isfinite(f0):
        raise EvaluationError(f"f({lo}) is not finite")
    if f0 == 0.0:
        return lo, lo
    prev = lo
    offset = step
    while offset <= cap:
        x = lo + offset
        fx = f(x)
        if np.isfinite(fx) and np.sign(fx) != np.sign(f0):
            return prev, x
        prev = x
        offset *= 2.0
    raise UnboundedRootError(f"no sign change within offset {cap:g} of {lo}")
