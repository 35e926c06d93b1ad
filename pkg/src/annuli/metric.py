"""Radial conformal metrics ``rho(z) = h(|z|^2)``.

A :class:`RadialMetric` is an immutable bundle of vectorised callables for the
density and its derivatives in the radius ``s = |z|``.  Builtin metrics carry
closed-form first and second derivatives; tabulated metrics are monotone cubic
interpolants of user data and get curvature from finite differences.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, EvaluationError, ParameterError

BUILTIN_NAMES = (
    "euclidean",
    "inverse_radius",
    "hyperbolic_disk",
    "punctured_disk",
    "hyperbolic_annulus",
    "spherical",
    "cigar",
)

REGULARITY_RTOL = 1e-8


@dataclass(frozen=True)
class RadialMetric:
    name: str
    density: Callable
    density_deriv: Callable
    domain_lo: float
    domain_hi: float
    defined_at_zero: bool = False
    density_deriv2: Callable | None = None
    params: tuple = ()
    spec: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not (0.0 <= self.domain_lo < self.domain_hi):
            raise ParameterError(f"bad metric domain ({self.domain_lo}, {self.domain_hi})")

    def _check(self, s):
        s = np.asarray(s, dtype=float)
        if np.any((s < self.domain_lo) | (s > self.domain_hi)):
            raise DomainError(
                f"{self.name}: radius outside domain [{self.domain_lo}, {self.domain_hi}]"
            )
        return s

    def rho(self, s):
        return self.density(self._check(s))

    def drho(self, s):
        return self.density_deriv(self._check(s))

    def d2rho(self, s):
        if self.density_deriv2 is None:
            raise ParameterError(f"{self.name}: no analytic second derivative")
        return self.density_deriv2(self._check(s))

    def varrho(self, s):
        """Reciprocal density ``1/rho``."""
        return 1.0 / self.rho(s)

    def s_rho(self, s):
        s = self._check(s)
        return s * self.density(s)

    def s_rho_deriv(self, s):
        """Derivative of ``s*rho(s)``, i.e. ``rho + s*rho'``."""
        s = self._check(s)
        return self.density(s) + s * self.density_deriv(s)

    def h(self, t):
        """The profile in ``t = |z|^2``."""
        return self.rho(np.sqrt(t))

    def contains(self, s: float, closed: bool = False) -> bool:
        if closed:
            return self.domain_lo <= s <= self.domain_hi
        return self.domain_lo < s < self.domain_hi

    @property
    def has_closed_form(self) -> bool:
        return self.density_deriv2 is not None


@dataclass(frozen=True)
class RegularityReport:
    inf_s_rho: float
    inf_location: float
    boundary_limit: float
    curvature_bound: float
    is_regular: bool


class Monotonicity(str, enum.Enum):
    INCREASING = "increasing"
    DECREASING = "decreasing"
    CONSTANT = "constant"
    INCONCLUSIVE = "inconclusive"


def _euclidean():
    one = lambda s: np.ones_like(np.asarray(s, dtype=float))
    zero = lambda s: np.zeros_like(np.asarray(s, dtype=float))
    return one, zero, zero, (0.0, math.inf), True


def _inverse_radius():
    return (lambda s: 1.0 / s, lambda s: -1.0 / s**2, lambda s: 2.0 / s**3,
            (0.0, math.inf), False)


def _hyperbolic_disk():
    return (
        lambda s: 2.0 / (1.0 - s**2),
        lambda s: 4.0 * s / (1.0 - s**2) ** 2,
        lambda s: (4.0 + 12.0 * s**2) / (1.0 - s**2) ** 3,
        (0.0, 1.0),
        True,
    )


def _punctured_disk():
    def d0(s):
        return 1.0 / (s * -np.log(s))

    def d1(s):
        L = -np.log(s)
        return (1.0 - L) / (s**2 * L**2)

    def d2(s):
        L = -np.log(s)
        return 2.0 * (L - 1.0) ** 2 / (s**3 * L**3) + 1.0 / (s**3 * L**2)

    return d0, d1, d2, (0.0, 1.0), False


def _hyperbolic_annulus(R: float):
    if not R > 1.0:
        raise ParameterError(f"hyperbolic_annulus needs R > 1, got {R}")
    b = 0.5 * math.pi / math.log(R)

    def d0(s):
        return b / (s * np.cos(b * np.log(s)))

    def d1(s):
        return d0(s) * (b * np.tan(b * np.log(s)) - 1.0) / s

    def d2(s):
        th = b * np.log(s)
        k = b * np.tan(th) - 1.0
        return d0(s) * (k * k + b * b / np.cos(th) ** 2 - k) / s**2

    return d0, d1, d2, (1.0 / R, R), False


def _spherical():
    return (
        lambda s: 2.0 / (1.0 + s**2),
        lambda s: -4.0 * s / (1.0 + s**2) ** 2,
        lambda s: (12.0 * s**2 - 4.0) / (1.0 + s**2) ** 3,
        (0.0, math.inf),
        True,
    )


def _cigar():
    return (
        lambda s: (1.0 + s**2) ** -0.5,
        lambda s: -s * (1.0 + s**2) ** -1.5,
        lambda s: (2.0 * s**2 - 1.0) * (1.0 + s**2) ** -2.5,
        (0.0, math.inf),
        True,
    )


def builtin_metric(name: str, params: Sequence[float] = ()) -> RadialMetric:
    """Return one of the builtin metrics with its exact density and derivatives."""
    params = tuple(float(p) for p in params)
    if name == "hyperbolic_annulus":
        if len(params) != 1:
            raise ParameterError("hyperbolic_annulus takes exactly one parameter R")
        d0, d1, d2, (lo, hi), at0 = _hyperbolic_annulus(params[0])
    else:
        factories = {
            "euclidean": _euclidean,
            "inverse_radius": _inverse_radius,
            "hyperbolic_disk": _hyperbolic_disk,
            "punctured_disk": _punctured_disk,
            "spherical": _spherical,
            "cigar": _cigar,
        }
        if name not in factories:
            raise ParameterError(f"unknown metric {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
        if params:
            raise ParameterError(f"{name} takes no parameters")
        d0, d1, d2, (lo, hi), at0 = factories[name]()
    return RadialMetric(
        name=name, density=d0, density_deriv=d1, density_deriv2=d2,
        domain_lo=lo, domain_hi=hi, defined_at_zero=at0, params=params,
        spec={"name": name, "params": list(params)},
    )


def tabulated_metric(table, name: str = "table") -> RadialMetric:
    """Metric from ``(s, rho)`` pairs via monotone cubic interpolation.

    The domain is the closed span of the table; evaluation outside it raises.
    """
    arr = np.asarray(table, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 4:
        raise ParameterError("metric table must be a list of at least four [s, rho] pairs")
    order = np.argsort(arr[:, 0])
    s, rho = arr[order, 0], arr[order, 1]
    if np.any(np.diff(s) <= 0) or s[0] < 0:
        raise ParameterError("metric table radii must be distinct and nonnegative")
    if np.any(rho <= 0) or not np.all(np.isfinite(rho)):
        raise ParameterError("metric table densities must be positive and finite")
    interp = PchipInterpolator(s, rho, extrapolate=False)
    deriv = interp.derivative()
    return RadialMetric(
        name=name, density=interp, density_deriv=deriv,
        domain_lo=float(s[0]), domain_hi=float(s[-1]),
        defined_at_zero=bool(s[0] == 0.0),
        spec={"table": arr[order].tolist()},
    )


def metric_from_spec(spec: dict) -> RadialMetric:
    """Build a metric from its config form ``{"name", "params"}`` or ``{"table"}``."""
    if not isinstance(spec, dict):
        raise ParameterError("metric spec must be an object")
    unknown = set(spec) - {"name", "params", "table"}
    if unknown:
        raise ParameterError(f"unknown metric keys: {sorted(unknown)}")
    if "table" in spec:
        return tabulated_metric(spec["table"], name=spec.get("name", "table"))
    if "name" not in spec:
        raise ParameterError("metric spec needs 'name' or 'table'")
    return builtin_metric(spec["name"], spec.get("params", ()))


def _central_log_second(m: RadialMetric, s, step=1e-3):
    """Five-point second derivative of ``log rho`` in ``x = log s``."""
    s = np.asarray(s, dtype=float)
    x = np.log(s)
    lo = math.log(m.domain_lo) if m.domain_lo > 0 else -math.inf
    hi = math.log(m.domain_hi) if math.isfinite(m.domain_hi) else math.inf
    room = np.minimum(x - lo, hi - x) / 2.5
    hx = np.minimum(step, room)
    f = lambda xx: np.log(m.density(np.exp(xx)))
    return (-f(x + 2 * hx) + 16 * f(x + hx) - 30 * f(x) + 16 * f(x - hx) - f(x - 2 * hx)) / (
        12 * hx * hx
    )


def gauss_curvature(m: RadialMetric, s, finite_difference: bool = False):
    """Gauss curvature of ``m`` at radius ``s``.

    Uses ``K = -(1/h^2) (4 t h'(t)/h)'`` with ``t = s^2``.  Metrics without a
    closed-form second derivative (or ``finite_difference=True``) fall back to
    ``K = -(d^2/dx^2 log rho) / (s^2 rho^2)`` on a log-spaced stencil.
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any((s_arr <= m.domain_lo) | (s_arr >= m.domain_hi)):
        raise DomainError(f"{m.name}: curvature needs s strictly inside the domain")
    if finite_difference or not m.has_closed_form:
        rho = m.density(s_arr)
        out = -_central_log_second(m, s_arr) / (s_arr**2 * rho**2)
    else:
        h = m.density(s_arr)
        h1 = m.density_deriv(s_arr) / (2 * s_arr)
        h2 = (m.density_deriv2(s_arr) - m.density_deriv(s_arr) / s_arr) / (4 * s_arr**2)
        t = s_arr**2
        dF = 4 * h1 / h + 4 * t * h2 / h - 4 * t * h1**2 / h**2
        out = -dF / h**2
    return float(out) if np.ndim(out) == 0 else out


def _boundary_limit(m: RadialMetric, tau: float) -> float:
    """``lim_{s -> tau+} s rho(s)``; ``inf`` when it diverges at a domain end."""
    if tau > m.domain_lo:
        return float(m.s_rho(tau))
    with np.errstate(all="ignore"):
        seq = [float(m.s_rho(tau + tau * 10.0**-k)) for k in (6, 9, 12)]
    if all(np.isfinite(v) and v > 0 for v in seq) and abs(seq[2] - seq[1]) <= 1e-6 * abs(seq[2]):
        return seq[2]
    return math.inf


def check_regularity(m: RadialMetric, tau: float, sigma: float, grid_n: int = 64) -> RegularityReport:
    """Test ``inf s*rho(s) == lim_{s->tau+} s*rho(s)`` and bounded curvature."""
    if grid_n < 16:
        raise ParameterError("grid_n must be >= 16")
    if not (m.domain_lo <= tau < sigma <= m.domain_hi):
        raise DomainError(f"annulus ({tau}, {sigma}) is not inside the domain of {m.name}")
    span = sigma - tau
    offsets = np.unique(np.concatenate([
        np.geomspace(1e-9, 1.0, grid_n), np.linspace(0.0, 1.0, grid_n + 1)[1:],
    ]))
    grid = tau + span * offsets
    grid = grid[(grid > tau) & (grid < sigma)]
    with np.errstate(all="ignore"):
        vals = m.s_rho(grid)
    if not np.all(np.isfinite(vals)):
        raise EvaluationError(f"{m.name}: s*rho not finite inside ({tau}, {sigma})")
    i = int(np.argmin(vals))
    inf_val, inf_loc = float(vals[i]), float(grid[i])
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, grid.size - 1)]
    if b > a:
        res = optimize.minimize_scalar(lambda x: float(m.s_rho(x)), bounds=(a, b), method="bounded",
                                       options={"xatol": 1e-14 * max(1.0, b)})
        if res.fun < inf_val:
            inf_val, inf_loc = float(res.fun), float(res.x)
    limit = _boundary_limit(m, tau)
    inf_val = min(inf_val, limit)
    try:
        curv = np.abs(gauss_curvature(m, grid))
        curvature_bound = float(np.max(curv)) if np.all(np.isfinite(curv)) else math.inf
    except DomainError:
        curvature_bound = math.inf
    regular = (
        np.isfinite(limit)
        and abs(inf_val - limit) <= REGULARITY_RTOL * abs(limit)
        and np.isfinite(curvature_bound)
    )
    return RegularityReport(inf_val, inf_loc, limit, curvature_bound, bool(regular))


def monotonicity_of_h(m: RadialMetric, lo: float, hi: float, n: int = 256) -> Monotonicity:
    """Direction of ``t -> 4 t h'(t)/h(t)`` on radii ``[lo, hi]``.

    Nonpositive curvature forces it increasing, nonnegative curvature
    decreasing.  A mixed curvature sign gives ``INCONCLUSIVE``.
    """
    s = np.linspace(lo, hi, n)
    s = s[(s > m.domain_lo) & (s < m.domain_hi)]
    # 4 t h'(t)/h with t = s^2 equals 2 s rho'(s)/rho(s)
    F = 2 * s * m.drho(s) / m.rho(s)
    dF = np.diff(F)
    scale = 1e-12 * max(1.0, float(np.max(np.abs(F))))
    up = bool(np.all(dF >= -scale))
    down = bool(np.all(dF <= scale))
    K = np.asarray(gauss_curvature(m, s))
    ktol = 1e-9
    if up and down:
        return Monotonicity.CONSTANT
    if np.any(K > ktol) and np.any(K < -ktol):
        return Monotonicity.INCONCLUSIVE
    if up:
        return Monotonicity.INCREASING
    if down:
        return Monotonicity.DECREASING
    return Monotonicity.INCONCLUSIVE
