"""Independent ground truth for solver validation.

This module must stay structurally independent of the solver: the
self-similar reference comes from integrating a radial ODE with an
off-the-shelf ODE integrator, never from the PDE scheme it validates.

The source-type solution of the fast-diffusion gradient equation has the
form u(x, t) = t^(-a) F(|x| t^(-a/N)) with a = N / (p - N(2-p)); regularity
at the origin reduces the profile to the first-order ODE

    F'(xi) = -(s xi F)^(1/(p-1)),      s = a / N,

integrated outward from F(0) = F0. The shooting parameter F0 is bisected
until the total mass N w_N int F xi^(N-1) dxi hits the prescribed value;
the power-law tail F ~ c xi^(-p/(2-p)) is accounted for analytically
beyond the integration range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.interpolate import PchipInterpolator

from .core_model import (DOUBLY_NONLINEAR, Cylinder, Grid,
                         SpaceTimeField, unit_ball_measure)
from .errors import RangeError, SupportError

_XI_MAX = 240.0
_TABLE_POINTS = 4001


def self_similar_decay_rate(p: float, dim_n: int) -> float:
    """Decay exponent N / (p - N(2-p)); defined only above the mass-conserving threshold."""
    denom = p - dim_n * (2.0 - p)
    if denom <= 0.0:
        raise RangeError(
            f"p <= 2N/(N+1): no mass-conserving source solution for p={p}, N={dim_n}")
    return dim_n / denom


def _integrate_profile(p: float, dim_n: int, phi0: float):
    """Integrate the radial profile ODE outward; returns (xi, phi) tables."""
    sigma = self_similar_decay_rate(p, dim_n) / dim_n
    expo = 1.0 / (p - 1.0)

    def rhs(xi, y):
        val = max(y[0], 0.0)
        return [-((sigma * xi * val) ** expo)]

    xi = np.concatenate([np.linspace(0.0, 2.0, _TABLE_POINTS // 2, endpoint=False),
                         np.geomspace(2.0, _XI_MAX, _TABLE_POINTS - _TABLE_POINTS // 2)])
    sol = solve_ivp(rhs, (0.0, _XI_MAX), [phi0], t_eval=xi,
                    rtol=1e-11, atol=1e-14, method="RK45")
    if not sol.success:
        raise RangeError(f"profile integration failed: {sol.message}")
    phi = np.maximum(sol.y[0], 0.0)
    return xi, phi


def _profile_mass(xi, phi, p, dim_n):
    """Total mass of the profile: table quadrature plus the analytic tail."""
    surface = dim_n * unit_ball_measure(dim_n)
    core = surface * simpson(phi * xi ** (dim_n - 1.0), x=xi)
    q = p / (2.0 - p)
    tail_coef = phi[-1] * xi[-1] ** q
    tail = surface * tail_coef * xi[-1] ** (dim_n - q) / (q - dim_n)
    return core + tail


@dataclass(frozen=True)
class SelfSimilarProfile:
    """Radial source-solution profile with its decay rate and mass."""

    p: float
    dim_n: int
    alpha_ss: float
    xi: np.ndarray
    phi: np.ndarray
    total_mass: float
    phi0: float

    def __post_init__(self):
        for arr in (self.xi, self.phi):
            np.asarray(arr).flags.writeable = False

    @classmethod
    def build(cls, p: float, dim_n: int, total_mass: float = 1.0) -> "SelfSimilarProfile":
        """Shoot on the center value, bisecting until the mass matches."""
        if total_mass <= 0.0:
            raise RangeError("total_mass must be positive")
        alpha = self_similar_decay_rate(p, dim_n)

        def mass_of(phi0):
            xi, phi = _integrate_profile(p, dim_n, phi0)
            return _profile_mass(xi, phi, p, dim_n)

        lo, hi = 0.5, 2.0
        while mass_of(lo) > total_mass:
            lo *= 0.25
            if lo < 1e-12:
                raise RangeError("bisection bracket collapsed (mass too small)")
        while mass_of(hi) < total_mass:
            hi *= 4.0
            if hi > 1e12:
                raise RangeError("bisection bracket collapsed (mass too large)")
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if mass_of(mid) < total_mass:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-13 * hi:
                break
        phi0 = 0.5 * (lo + hi)
        xi, phi = _integrate_profile(p, dim_n, phi0)
        prof = cls(p=p, dim_n=dim_n, alpha_ss=alpha, xi=xi, phi=phi,
                   total_mass=_profile_mass(xi, phi, p, dim_n), phi0=phi0)
        if np.any(np.diff(phi) > 0.0) or phi[0] <= 0.0:
            raise RangeError("profile is not positive and radially nonincreasing")
        return prof

    @property
    def sigma(self) -> float:
        """Spatial spreading rate alpha/N."""
        return self.alpha_ss / self.dim_n

    def radial(self, r: np.ndarray) -> np.ndarray:
        """Profile values at similarity radii, analytic power tail beyond the table."""
        interp = PchipInterpolator(self.xi, self.phi, extrapolate=False)
        r = np.asarray(r, dtype=float)
        out = interp(np.clip(r, 0.0, self.xi[-1]))
        q = self.p / (2.0 - self.p)
        tail_coef = self.phi[-1] * self.xi[-1] ** q
        beyond = r > self.xi[-1]
        if np.any(beyond):
            out = np.where(beyond, tail_coef * np.where(beyond, r, 1.0) ** (-q), out)
        return out

    def mass_within(self, r: float) -> float:
        """Mass of the profile inside similarity radius r (table quadrature)."""
        surface = self.dim_n * unit_ball_measure(self.dim_n)
        mask = self.xi <= r
        xi, phi = self.xi[mask], self.phi[mask]
        return surface * simpson(phi * xi ** (self.dim_n - 1.0), x=xi)


def barenblatt_reference(profile: SelfSimilarProfile, t: float, grid: Grid) -> np.ndarray:
    """Evaluate the source solution at time t on the grid's cell centers."""
    if t <= 0.0:
        raise RangeError("barenblatt_reference needs t > 0")
    if grid.dim_n != profile.dim_n:
        raise RangeError("grid/profile dimension mismatch")
    mesh = grid.center_mesh()
    r = np.sqrt(sum(m * m for m in mesh))
    scale = t ** (-profile.alpha_ss)
    return scale * profile.radial(r * t ** (-profile.sigma))


def barenblatt_spacetime(profile: SelfSimilarProfile, grid: Grid, t_start: float,
                         params=None, label: str = "barenblatt") -> SpaceTimeField:
    """Reference solution sampled on every slice of the grid, as a field."""
    from .core_model import ProblemParams
    if params is None:
        params = ProblemParams(dim_n=grid.dim_n, p=profile.p)
    vals = np.stack([barenblatt_reference(profile, t_start + k * grid.dt, grid)
                     for k in range(grid.n_steps + 1)])
    return SpaceTimeField(grid, vals, params, label=label, t_origin=t_start)


class TensorBump:
    """Smooth compactly supported test function: product of (1 - s^2)^3 factors.

    One polynomial bump per spatial axis plus one in time; all derivatives
    used by the weak form are exact closed forms.
    """

    def __init__(self, center_x, radius_x: float, center_t: float, radius_t: float,
                 amplitude: float = 1.0):
        self.center_x = tuple(float(c) for c in np.atleast_1d(center_x))
        self.radius_x = float(radius_x)
        self.center_t = float(center_t)
        self.radius_t = float(radius_t)
        self.amplitude = float(amplitude)
        if radius_x <= 0 or radius_t <= 0:
            raise RangeError("bump radii must be positive")

    @staticmethod
    def _bump(s):
        return np.where(np.abs(s) < 1.0, (1.0 - s * s) ** 3, 0.0)

    @staticmethod
    def _dbump(s):
        return np.where(np.abs(s) < 1.0, -6.0 * s * (1.0 - s * s) ** 2, 0.0)

    def _space_factors(self, coords):
        return [self._bump((c - y) / self.radius_x)
                for c, y in zip(coords, self.center_x)]

    def value(self, coords, t):
        out = self.amplitude * self._bump((t - self.center_t) / self.radius_t)
        for f in self._space_factors(coords):
            out = out * f
        return out

    def time_derivative(self, coords, t):
        out = self.amplitude * self._dbump((t - self.center_t) / self.radius_t) / self.radius_t
        for f in self._space_factors(coords):
            out = out * f
        return out

    def gradient(self, coords, t):
        factors = self._space_factors(coords)
        tfac = self._bump((t - self.center_t) / self.radius_t)
        grads = []
        for axis, y in enumerate(self.center_x):
            g = self.amplitude * tfac * self._dbump((coords[axis] - y) / self.radius_x) \
                / self.radius_x
            for other, f in enumerate(factors):
                if other != axis:
                    g = g * f
            grads.append(g)
        return grads

    def support_bounds(self):
        lo = tuple(c - self.radius_x for c in self.center_x)
        hi = tuple(c + self.radius_x for c in self.center_x)
        return lo, hi, self.center_t - self.radius_t, self.center_t + self.radius_t


def _check_support(test_fn, window: Cylinder):
    lo, hi, t_lo, t_hi = test_fn.support_bounds()
    y = window.center_x
    corner = math.sqrt(sum(max(abs(l - c), abs(h - c)) ** 2
                           for l, h, c in zip(lo, hi, y)))
    if corner >= window.radius:
        raise SupportError("test function support touches the window ball")
    if not (t_lo > window.top_time - window.length and t_hi < window.top_time):
        raise SupportError("test function support touches the window time interval")


def _power_flux(g, modulus_sq, p):
    """|grad|^(p-2) grad with the face modulus; zero where the gradient vanishes."""
    with np.errstate(divide="ignore", invalid="ignore"):
        flux = np.where(modulus_sq > 0.0, modulus_sq ** (0.5 * (p - 2.0)) * g, 0.0)
    return flux


def weak_residual(field: SpaceTimeField, test_fn, window: Cylinder) -> float:
    """Discrete weak-form defect of the field against one test function.

    Midpoint quadrature in space (cell centers) and time (slices weighted by
    dt), face-centered discrete gradients for the flux term. For the
    gradient equation the time-boundary term of the weak identity is
    included; the doubly nonlinear form has none.
    """
    grid = field.grid
    if not window.contained_in(grid, field.t_origin):
        raise RangeError("window must be contained in the grid domain")
    _check_support(test_fn, window)

    p = field.params.p
    dnl = field.params.equation == DOUBLY_NONLINEAR
    h = grid.h
    cellvol = grid.cell_volume()
    times = field.slice_times()
    included = np.nonzero((times > window.top_time - window.length) &
                          (times <= window.top_time))[0]
    if included.size == 0:
        raise RangeError("window covers no time slice")

    mesh = grid.center_mesh()
    if dnl:
        beta = field.params.beta
        pref = beta ** (1.0 - p)
    total = 0.0
    for k in included:
        u = field.values[k]
        t = times[k]
        phit = test_fn.time_derivative(mesh, t)
        total += -np.sum(u * phit) * cellvol * grid.dt

        w = u ** field.params.beta if dnl else u
        scale = pref if dnl else 1.0
        if grid.dim_n == 1:
            g = np.diff(w) / h
            m2 = g * g
            flux = scale * _power_flux(g, m2, p)
            xf = [0.5 * (mesh[0][1:] + mesh[0][:-1])]
            gphi = test_fn.gradient(xf, t)[0]
            total += np.sum(flux * gphi) * cellvol * grid.dt
        else:
            X, Y = mesh
            gx = (w[1:, :] - w[:-1, :]) / h
            ty = (w[1:, 2:] - w[1:, :-2] + w[:-1, 2:] - w[:-1, :-2]) / (4.0 * h)
            fx = scale * _power_flux(gx[:, 1:-1], gx[:, 1:-1] ** 2 + ty * ty, p)
            xfc = [0.5 * (X[1:, 1:-1] + X[:-1, 1:-1]), Y[1:, 1:-1]]
            gphix = test_fn.gradient(xfc, t)[0]
            total += np.sum(fx * gphix) * cellvol * grid.dt

            gy = (w[:, 1:] - w[:, :-1]) / h
            tx = (w[2:, 1:] - w[:-2, 1:] + w[2:, :-1] - w[:-2, :-1]) / (4.0 * h)
            fy = scale * _power_flux(gy[1:-1, :], gy[1:-1, :] ** 2 + tx * tx, p)
            yfc = [X[1:-1, :-1], 0.5 * (Y[1:-1, 1:] + Y[1:-1, :-1])]
            gphiy = test_fn.gradient(yfc, t)[1]
            total += np.sum(fy * gphiy) * cellvol * grid.dt

    if not dnl:
        k1, k2 = included[0], included[-1]
        phi2 = test_fn.value(mesh, times[k2])
        phi1 = test_fn.value(mesh, times[k1])
        total += (np.sum(field.values[k2] * phi2) -
                  np.sum(field.values[k1] * phi1)) * cellvol
    return float(total)
