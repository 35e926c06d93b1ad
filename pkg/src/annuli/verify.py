"""Independent checks of extremality: pointwise inequalities, radial Ritz
minimisation, and a two-dimensional mesh minimiser of the weighted energy."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernel
from .errors import ConfigError, GeometryError, ParameterError
from .functionals import energy_radial, mean_distortion_radial
from .maps import Direction, RadialMap, harmonicity_residual
from .metric import RadialMetric
from .nitsche import AnnulusGeometry
from .numerics import integrate_segments, find_root

log = logging.getLogger(__name__)


# ---------------------------------------------------------------- test maps

@dataclass(frozen=True)
class TestMap:
    """A map on a ring given by samples, with analytic or difference derivatives.

    ``derivs(s, t)`` returns ``(f_s, f_t)``; without it, central differences
    with steps ``fd_step`` (radial, relative to the ring width) and ``fd_step``
    times ``2 pi`` (angular) are used.
    """

    __test__ = False  # keep pytest from collecting the class

    sampler: Callable
    source: tuple
    derivs: Callable | None = None
    fd_step: float = 1e-4
    label: str = ""

    def polar(self, s, t, scale: float = 1.0):
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if self.derivs is not None and scale == 1.0:
            return self.derivs(s, t)
        hs = scale * self.fd_step * (self.source[1] - self.source[0])
        ht = scale * self.fd_step * 2.0 * math.pi
        f = lambda ss, tt: self.sampler(ss * np.exp(1j * tt))
        f_s = (f(s + hs, t) - f(s - hs, t)) / (2 * hs)
        f_t = (f(s, t + ht) - f(s, t - ht)) / (2 * ht)
        return f_s, f_t


def radial_test_map(m: RadialMap) -> TestMap:
    """Wrap a forward radial map with its exact derivatives."""
    def sampler(z):
        s = np.abs(z)
        return m.radial(s)[0] * np.exp(1j * (np.angle(z) + m.total_rotation))

    def derivs(s, t):
        P, P1, _ = m.radial(s)
        e = np.exp(1j * (t + m.total_rotation))
        return P1 * e, 1j * P * e

    return TestMap(sampler, m.source, derivs, label=f"{m.kind}-{m.direction.value}")


def random_test_map(seed: int, source: tuple, target: tuple, shear: float = 0.15,
                    analytic: bool = True) -> TestMap:
    """Seeded smooth map ``R(s,t) e^{i Theta(s,t)}`` with radial and angular shear.

    ``R`` is a power stretching between the rings, modulated in angle;
    ``Theta = t + shear * a(s) sin(k t + b)``.  Amplitudes are kept small
    enough that the Jacobian stays positive.
    """
    rng = np.random.default_rng(seed)
    lo, hi = source
    tlo, thi = target
    alpha = math.log(thi / tlo) / math.log(hi / lo)
    k1, k2 = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    b1, b2 = rng.uniform(0, 2 * math.pi, 2)
    e1 = shear * rng.uniform(0.2, 1.0) / (1 + k1)
    e2 = shear * rng.uniform(0.2, 1.0) / (1 + k2)
    om = rng.uniform(0.5, 3.0) * math.pi / (hi - lo)
    # the radial bump vanishes on both circles so the boundary values are kept
    bump = lambda s: np.sin(math.pi * (s - lo) / (hi - lo))
    dbump = lambda s: math.pi / (hi - lo) * np.cos(math.pi * (s - lo) / (hi - lo))

    def parts(s, t):
        P = thi * (s / hi) ** alpha
        P1 = alpha * P / s
        mod = 1.0 + e1 * bump(s) * np.cos(k1 * t + b1)
        R = P * mod
        R_s = P1 * mod + P * e1 * dbump(s) * np.cos(k1 * t + b1)
        R_t = -P * e1 * bump(s) * k1 * np.sin(k1 * t + b1)
        Th = t + e2 * np.sin(om * (s - lo)) * np.sin(k2 * t + b2)
        Th_s = e2 * om * np.cos(om * (s - lo)) * np.sin(k2 * t + b2)
        Th_t = 1.0 + e2 * k2 * np.sin(om * (s - lo)) * np.cos(k2 * t + b2)
        return R, R_s, R_t, Th, Th_s, Th_t

    def sampler(z):
        R, *_rest = parts(np.abs(z), np.angle(z))
        return R * np.exp(1j * _rest[2])

    def derivs(s, t):
        R, R_s, R_t, Th, Th_s, Th_t = parts(s, t)
        e = np.exp(1j * Th)
        return (R_s + 1j * R * Th_s) * e, (R_t + 1j * R * Th_t) * e

    return TestMap(sampler, (lo, hi), derivs if analytic else None, label=f"random-{seed}")


# ---------------------------------------------------------------- lepo check

@dataclass(frozen=True)
class LepoReport:
    n_points: int
    n_excluded: int
    n_violations: int
    max_violation: float
    max_identity_err: float
    max_abs_slack: float
    min_slack_ine: float
    min_slack_eni: float
    disc_err: float
    orientation_warning: bool


def _lepo_terms(f_s, f_t, s, dphi):
    J = np.imag(f_t * np.conj(f_s)) / s
    with np.errstate(divide="ignore", invalid="ignore"):
        K = (s * np.abs(f_s) ** 2 + np.abs(f_t) ** 2 / s) / (2 * s * J)
        ine = s * dphi + (1 - s * s * dphi**2) / (2 * s * s * J) * np.abs(f_t) ** 2
        eni = 1 / (s * dphi) + (s * s * dphi**2 - 1) / dphi**2 / (2 * s * s * J) * np.abs(f_s) ** 2
        slack = np.abs(f_s + 1j * dphi * f_t) ** 2 / (2 * J)
    return J, K, ine, eni, slack


def lepo_check(f: TestMap, phi_prime: Callable, mesh=(32, 64), j_tol: float = 1e-12) -> LepoReport:
    """Both pointwise lower bounds for ``K(z, f)`` in terms of a monotone ``phi``.

    ``K - (s phi' + (1 - s^2 phi'^2)|f_t|^2 / (2 s^2 J))`` must be nonnegative
    and equal ``|f_s + i phi' f_t|^2 / (2J)``; the second bound is the same
    statement divided by ``s^2 phi'^2``.  Points with ``J <= j_tol`` are
    excluded.  With difference derivatives, the error estimate at each point is
    the change in slack when the step is doubled.
    """
    n_s, n_t = int(mesh[0]), int(mesh[1])
    if n_s < 4 or n_t < 4:
        raise ConfigError("lepo grid must be at least 4x4")
    lo, hi = f.source
    s1 = np.linspace(lo, hi, n_s + 2)[1:-1]
    t1 = 2 * math.pi * np.arange(n_t) / n_t
    S, T = np.meshgrid(s1, t1, indexing="ij")
    dphi = np.asarray(phi_prime(S), dtype=float)
    if np.any(dphi <= 0):
        raise ParameterError("phi' must be positive on the grid")
    f_s, f_t = f.polar(S, T)
    J, K, ine, eni, slack = _lepo_terms(f_s, f_t, S, dphi)
    keep = J > j_tol
    scale = 1.0 + np.abs(K)
    if f.derivs is None:
        f_s2, f_t2 = f.polar(S, T, scale=2.0)
        _, K2, ine2, _, _ = _lepo_terms(f_s2, f_t2, S, dphi)
        disc = np.abs((K - ine) - (K2 - ine2)) + 1e-14 * scale
    else:
        disc = 1e-13 * scale
    d_ine = K - ine
    d_eni = K - eni
    viol = np.maximum(-d_ine - 10 * disc, 0) + np.maximum(-d_eni - 10 * disc / np.maximum(
        (S * dphi) ** 2, 1e-300), 0)
    viol = np.where(keep, viol, 0.0)
    ident = np.where(keep, np.abs(d_ine - slack) / scale, 0.0)
    excluded = int(np.sum(~keep))
    warn = excluded > 0
    if warn:
        log.warning("%d grid points with J <= %g excluded", excluded, j_tol)
    return LepoReport(
        n_points=int(np.sum(keep)),
        n_excluded=excluded,
        n_violations=int(np.sum(viol > 0)),
        max_violation=float(np.max(viol)),
        max_identity_err=float(np.max(ident)),
        max_abs_slack=float(np.max(np.where(keep, np.abs(d_ine), 0.0))),
        min_slack_ine=float(np.min(np.where(keep, d_ine, np.inf))),
        min_slack_eni=float(np.min(np.where(keep, d_eni, np.inf))),
        disc_err=float(np.max(np.where(keep, disc, 0.0))),
        orientation_warning=warn,
    )


# ---------------------------------------------------------------- radial Ritz

@dataclass(frozen=True)
class RadialMinResult:
    edges: np.ndarray
    slopes: np.ndarray
    value: float
    multiplier: float

    @property
    def mids(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def slope_error(self, profile) -> float:
        """Sup distance from the cell averages of the profile's ``phi'``."""
        avg = np.diff(profile.phi(self.edges)) / np.diff(self.edges)
        return float(np.max(np.abs(self.slopes - avg)))


def radial_discrete_minimize(m: RadialMetric, geom: AnnulusGeometry, n_nodes: int = 200) -> RadialMinResult:
    """Minimise ``K_rho`` over radial stretchings with piecewise constant ``Phi'``.

    On cell ``i`` of width ``h_i`` with moments ``A_i = int s^2 rho^2`` and
    ``B_i = int rho^2`` the functional is ``pi sum (p_i A_i + B_i / p_i)``,
    subject to ``sum h_i p_i = log(1/r)``.  Stationarity gives
    ``p_i = sqrt(B_i / (A_i - mu h_i))``; ``mu`` is found by root finding.
    The returned value is the exact functional of an admissible map.
    """
    r = geom.require_r()
    if r >= 1:
        raise GeometryError("need r < 1")
    if n_nodes < 2:
        raise ParameterError("n_nodes must be >= 2")
    edges = np.linspace(geom.tau, geom.sigma, n_nodes + 1)
    h = np.diff(edges)
    A, _ = integrate_segments(lambda s: s * s * m.rho(s) ** 2, edges)
    B, _ = integrate_segments(lambda s: m.rho(s) ** 2, edges)
    target = -math.log(r)
    ratio = A / h
    mu_max = float(np.min(ratio))

    def slopes(mu):
        return np.sqrt(B / (A - mu * h))

    def F(mu):
        if mu >= mu_max:
            return math.inf
        return float(np.sum(h * slopes(mu))) - target

    # F increases from -target (mu -> -inf) to +inf (mu -> mu_max)
    hi = mu_max - 1e-15 * max(1.0, abs(mu_max))
    while not F(hi) > 0:
        hi = 0.5 * (hi + mu_max)
        if hi >= mu_max:
            raise ParameterError("constraint cannot be met")
    lo, step = hi, max(1.0, abs(mu_max))
    while F(lo) > 0:
        lo -= step
        step *= 2.0
    mu = find_root(F, (lo, hi))
    p = slopes(mu)
    value = math.pi * float(np.sum(p * A + B / p))
    return RadialMinResult(edges, p, value, mu)


# ---------------------------------------------------------------- mesh minimiser

@dataclass
class MeshState:
    """Node values ``h[i, j]`` at ``s_i = exp(x_i)``, ``t_j = 2 pi j / n_t``."""

    n_r: int
    n_t: int
    x: np.ndarray
    values: np.ndarray
    tau: float
    sigma: float
    energy: float = math.nan
    history: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    stagnated: bool = False
    backend: str = kernel.BACKEND

    @property
    def s(self):
        return np.exp(self.x)

    @property
    def t(self):
        return 2 * math.pi * np.arange(self.n_t) / self.n_t

    def radial_profile(self):
        """Mean modulus of each row."""
        return np.mean(np.abs(self.values), axis=1)

    def boundary_error(self) -> float:
        A = np.abs(self.values)
        return float(max(np.max(np.abs(A[0] - self.tau)), np.max(np.abs(A[-1] - self.sigma))))

    def jacobian_positive_fraction(self) -> float:
        H = self.values
        H1 = np.roll(H, -1, axis=1)
        hx = 0.5 * ((H[1:] - H[:-1]) + (H1[1:] - H1[:-1]))
        ht = 0.5 * ((H1[:-1] - H[:-1]) + (H1[1:] - H[1:]))
        J = np.imag(ht * np.conj(hx))
        return float(np.mean(J > 0))


def initial_mesh(geom: AnnulusGeometry, n_r: int = 64, n_t: int = 128) -> MeshState:
    """Log-linear radial start: ``log|h|`` affine in ``log s``, ``arg h = t``."""
    r = geom.require_r()
    if n_r < 32 or n_t < 64:
        raise ConfigError("mesh must be at least 32x64")
    x = np.linspace(math.log(r), 0.0, n_r)
    lam = (x - x[0]) / (x[-1] - x[0])
    mod = geom.tau * (geom.sigma / geom.tau) ** lam
    mod[0], mod[-1] = geom.tau, geom.sigma
    t = 2 * math.pi * np.arange(n_t) / n_t
    H = np.ascontiguousarray(mod[:, None] * np.exp(1j * t)[None, :])
    return MeshState(n_r, n_t, x, H, geom.tau, geom.sigma)


class _MeshEnergy:
    def __init__(self, m: RadialMetric, state: MeshState):
        self.m = m
        dx = state.x[1] - state.x[0]
        dt = 2 * math.pi / state.n_t
        area = dx * dt
        self.cx = area / (4 * dx * dx)
        self.ct = area / (16 * math.sin(0.5 * dt) ** 2)

    def __call__(self, H):
        M = kernel.cell_moduli(H)
        rho = self.m.rho(M)
        w = np.ascontiguousarray(rho * rho)
        dw = np.ascontiguousarray(2 * rho * self.m.drho(M))
        return kernel.assemble(H, w, dw, self.cx, self.ct)


def mesh_energy(m: RadialMetric, state: MeshState) -> float:
    return _MeshEnergy(m, state)(state.values)[0]


def _project(H, tau, sigma):
    A = np.abs(H)
    H = H.copy()
    H[0] *= tau / A[0]
    H[-1] *= sigma / A[-1]
    inner = A[1:-1]
    clipped = np.clip(inner, tau, sigma)
    H[1:-1] *= np.where(inner > 0, clipped / np.where(inner > 0, inner, 1.0), 1.0)
    return np.ascontiguousarray(H)


def mesh_energy_minimize(m: RadialMetric, geom: AnnulusGeometry, mesh: MeshState | None = None,
                         iters: int = 5000, rel_tol: float = 1e-13,
                         max_backtrack: int = 60) -> MeshState:
    """Projected gradient descent on the discrete weighted energy.

    The trial step is the Barzilai-Borwein length, then halved until the
    projected point lowers the energy, so accepted energies never increase.
    Boundary rows are kept on their circles and interior moduli in
    ``[tau, sigma]``.
    """
    state = mesh if mesh is not None else initial_mesh(geom)
    if state.n_r < 32 or state.n_t < 64:
        raise ConfigError("mesh must be at least 32x64")
    fun = _MeshEnergy(m, state)
    H = _project(state.values, geom.tau, geom.sigma)
    E, G = fun(H)
    hist = [E]
    step = 1.0
    H_prev = G_prev = None
    quiet = 0
    k = 0
    converged = stagnated = False
    for k in range(1, iters + 1):
        if H_prev is not None:
            dH = (H - H_prev).ravel()
            dG = (G - G_prev).ravel()
            curv = float(np.real(np.vdot(dH, dG)))
            if curv > 0:
                step = float(np.real(np.vdot(dH, dH))) / curv
        for _ in range(max_backtrack):
            H_new = _project(H - step * G, geom.tau, geom.sigma)
            E_new, G_new = fun(H_new)
            if E_new <= E:
                break
            step *= 0.5
        else:
            stagnated = True
            log.warning("mesh descent stagnated at iteration %d", k)
            break
        H_prev, G_prev = H, G
        drop = E - E_new
        H, E, G = H_new, E_new, G_new
        hist.append(E)
        quiet = quiet + 1 if drop <= rel_tol * abs(E) else 0
        if quiet >= 20:
            converged = True
            break
    state = MeshState(state.n_r, state.n_t, state.x, H, geom.tau, geom.sigma, E, hist, k,
                      converged, stagnated, kernel.BACKEND)
    return state


@dataclass(frozen=True)
class LayerDiagnostic:
    plateau_fraction: float  # share of log-radius pinned at the inner circle
    layer_width: float       # first unpinned row's modulus minus tau
    plateau_radius: float    # outermost pinned source radius


def inner_layer(state: MeshState, rtol: float = 1e-6) -> LayerDiagnostic:
    prof = state.radial_profile()
    pinned = prof <= state.tau * (1 + rtol)
    idx = int(np.argmin(pinned)) if not pinned.all() else prof.size - 1
    # rows 0..idx-1 are pinned
    x = state.x
    frac = (x[max(idx - 1, 0)] - x[0]) / (x[-1] - x[0])
    return LayerDiagnostic(float(frac), float(prof[idx] - state.tau), float(math.exp(x[max(idx - 1, 0)])))


# ---------------------------------------------------------------- rotations

@dataclass(frozen=True)
class RotationReport:
    angles: tuple
    K_values: tuple
    E_values: tuple
    residuals: tuple
    invariant: bool


def rotation_invariance_check(f: RadialMap, m: RadialMetric, seed: int = 0, n_angles: int = 3,
                              tol: float = 1e-12) -> RotationReport:
    """``K_rho``, ``E_rho`` and the ODE residual under pre- and post-rotation."""
    if f.direction is not Direction.FORWARD:
        f = f.inverse()
    rng = np.random.default_rng(seed)
    angles = [(0.0, 0.0)] + [tuple(rng.uniform(0, 2 * math.pi, 2)) for _ in range(n_angles)]
    lo, hi = f.target
    x = np.linspace(lo, hi, 52)[1:-1]
    Ks, Es, Rs = [], [], []
    for a, b in angles:
        g = f.rotated(a, b)
        Ks.append(mean_distortion_radial(g, m).value)
        h = g.inverse()
        Es.append(energy_radial(h, m).value)
        Rs.append(float(np.max(harmonicity_residual(h, m, x))) if f.kind != "custom" else 0.0)

    def same(vals):
        ref = vals[0]
        return all(abs(v - ref) <= tol * max(1.0, abs(ref)) for v in vals)

    ok = same(Ks) and same(Es) and all(abs(v - Rs[0]) <= tol for v in Rs)
    return RotationReport(tuple(angles), tuple(Ks), tuple(Es), tuple(Rs), ok)
