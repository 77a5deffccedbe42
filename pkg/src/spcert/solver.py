"""Implicit time integrator for the two prototype singular diffusion equations.

Space: cell-centered finite volumes on the uniform cube grid, face-centered
fluxes with a regularized modulus (|grad|^2 + eps_reg^2)^((p-2)/2). Time:
backward Euler, unconditionally stable for these monotone operators. The
nonlinear system of each step is solved by Picard iteration on the lagged
face coefficients (default) or by a Newton iteration on the primary-direction
flux derivative; in both cases convergence is declared on the exact discrete
residual, so the accepted iterate solves the stated scheme to tolerance.

For the doubly nonlinear equation the unknown stays u itself and the face
flux is beta^(1-p) (|grad_h w|^2 + eps^2)^((p-2)/2) grad_h w with
w = max(u, floor)^beta; the linearization uses the exact secant slope of
u -> u^beta across each face, which reproduces the exact residual at the
fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels
from .core_model import (DIRICHLET, DOUBLY_NONLINEAR, P_LAPLACIAN, PERIODIC,
                         Grid, ProblemParams, SpaceTimeField, validate_params)
from .errors import NegativityError, NonlinearDivergence, RangeError

PICARD = "picard"
NEWTON = "newton"

# secant slope of u -> u^beta falls back to the tangent below this gap
_SECANT_GAP = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the implicit solve.

    flux_regularization_eps None means "use the grid spacing h", which keeps
    the regularization error at discretization order. positivity_floor
    guards the beta-power (and its derivative in Newton mode) for the
    doubly nonlinear equation; zero is allowed only when the initial data
    stays away from zero or for the gradient-only equation.
    """

    flux_regularization_eps: Optional[float] = None
    positivity_floor: float = 1e-12
    nonlinear_tol: float = 1e-10
    max_newton_iters: int = 50
    linearization: str = PICARD
    source: Optional[Callable] = None  # source(mesh_arrays, t) -> spatial array

    def __post_init__(self):
        if self.flux_regularization_eps is not None and self.flux_regularization_eps <= 0:
            raise RangeError("flux_regularization_eps must be positive")
        if self.nonlinear_tol <= 0:
            raise RangeError("nonlinear_tol must be positive")
        if self.positivity_floor < 0:
            raise RangeError("positivity_floor must be non-negative")
        if self.max_newton_iters < 1:
            raise RangeError("max_newton_iters >= 1 required")
        if self.linearization not in (PICARD, NEWTON):
            raise RangeError(f"linearization must be picard|newton, got {self.linearization!r}")

    def eps_reg(self, grid: Grid) -> float:
        return grid.h if self.flux_regularization_eps is None else self.flux_regularization_eps


@dataclass(frozen=True)
class SolveResult:
    field: SpaceTimeField
    newton_iteration_counts: np.ndarray
    converged: bool
    mass_history: np.ndarray
    clamp_activations: np.ndarray


class _Boundary:
    """Resolves ghost values and Dirichlet face data for one run.

    Dirichlet face values are a callable g(points, t) with points of shape
    (n_points, N); when none is supplied the initial trace is extrapolated
    to the boundary faces once and frozen for the whole run.
    """

    def __init__(self, grid: Grid, initial: np.ndarray, dirichlet_values=None):
        self.grid = grid
        self.kind = grid.bc
        self._g = dirichlet_values
        self._frozen = None
        if self.kind == DIRICHLET and self._g is None:
            self._frozen = _extrapolated_trace(grid, initial)

    def face_values(self, t: float):
        """Dirichlet data per side: list of (low, high) arrays, one pair per axis."""
        if self._frozen is not None:
            return self._frozen
        out = []
        for axis in range(self.grid.dim_n):
            lo_pts, hi_pts = _face_points(self.grid, axis)
            out.append((np.asarray(self._g(lo_pts, t), dtype=float).reshape(lo_pts.shape[0]),
                        np.asarray(self._g(hi_pts, t), dtype=float).reshape(hi_pts.shape[0])))
        return out

    def pad(self, u: np.ndarray, t: float, fn=None) -> np.ndarray:
        """Pad with one ghost layer.

        fn, when given, maps values into the flux variable (the beta power);
        ghosts are mirrored in that variable so profiles linear in it stay
        exactly stationary, and Dirichlet data are transformed pointwise.
        """
        arr = u if fn is None else fn(u)
        if self.kind == PERIODIC:
            return np.pad(arr, 1, mode="wrap")
        faces = self.face_values(t)
        if fn is not None:
            faces = [(fn(lo), fn(hi)) for lo, hi in faces]
        if arr.ndim == 1:
            (g_lo, g_hi), = faces
            return np.concatenate(([2.0 * g_lo[0] - arr[0]], arr,
                                   [2.0 * g_hi[0] - arr[-1]]))
        pad = np.empty((arr.shape[0] + 2, arr.shape[1] + 2), dtype=float)
        pad[1:-1, 1:-1] = arr
        (gx_lo, gx_hi), (gy_lo, gy_hi) = faces
        pad[0, 1:-1] = 2.0 * gx_lo - arr[0, :]
        pad[-1, 1:-1] = 2.0 * gx_hi - arr[-1, :]
        pad[1:-1, 0] = 2.0 * gy_lo - arr[:, 0]
        pad[1:-1, -1] = 2.0 * gy_hi - arr[:, -1]
        # corners feed only the transverse averages; linear extension keeps
        # affine profiles exact
        pad[0, 0] = pad[0, 1] + pad[1, 0] - pad[1, 1]
        pad[0, -1] = pad[0, -2] + pad[1, -1] - pad[1, -2]
        pad[-1, 0] = pad[-1, 1] + pad[-2, 0] - pad[-2, 1]
        pad[-1, -1] = pad[-1, -2] + pad[-2, -1] - pad[-2, -2]
        return pad


def _face_points(grid: Grid, axis: int):
    """Coordinates of boundary-face midpoints on the low/high side of an axis."""
    L = grid.domain_half_width
    if grid.dim_n == 1:
        return np.array([[-L]]), np.array([[L]])
    other = grid.axis_centers()
    lo = np.column_stack([np.full_like(other, -L), other]) if axis == 0 \
        else np.column_stack([other, np.full_like(other, -L)])
    hi = np.column_stack([np.full_like(other, L), other]) if axis == 0 \
        else np.column_stack([other, np.full_like(other, L)])
    return lo, hi


def _extrapolated_trace(grid: Grid, u: np.ndarray):
    """Second-order extrapolation of cell data to the boundary faces."""
    if grid.dim_n == 1:
        lo = np.array([1.5 * u[0] - 0.5 * u[1]])
        hi = np.array([1.5 * u[-1] - 0.5 * u[-2]])
        return [(lo, hi)]
    out = []
    out.append((1.5 * u[0, :] - 0.5 * u[1, :], 1.5 * u[-1, :] - 0.5 * u[-2, :]))
    out.append((1.5 * u[:, 0] - 0.5 * u[:, 1], 1.5 * u[:, -1] - 0.5 * u[:, -2]))
    return out


def _transform(values: np.ndarray, params: ProblemParams, floor: float):
    """Flux variable: identity, or the guarded beta power."""
    if params.equation == P_LAPLACIAN:
        return values
    return np.maximum(values, floor) ** params.beta


def _secant(u_pad: np.ndarray, w_pad: np.ndarray, params: ProblemParams,
            floor: float, axis: int = 0):
    """Face slope of u -> w; exact secant with tangent fallback on flat faces."""
    if params.equation == P_LAPLACIAN:
        sl_hi = [slice(None)] * u_pad.ndim
        sl_hi[axis] = slice(1, None)
        return np.ones_like(u_pad[tuple(sl_hi)])
    hi = [slice(None)] * u_pad.ndim
    lo = [slice(None)] * u_pad.ndim
    hi[axis] = slice(1, None)
    lo[axis] = slice(None, -1)
    du = u_pad[tuple(hi)] - u_pad[tuple(lo)]
    dw = w_pad[tuple(hi)] - w_pad[tuple(lo)]
    beta = params.beta
    mid = np.maximum(0.5 * (u_pad[tuple(hi)] + u_pad[tuple(lo)]), floor)
    tangent = beta * mid ** (beta - 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(np.abs(du) > _SECANT_GAP, dw / np.where(du == 0.0, 1.0, du), tangent)
    return s


def _wprime(u: np.ndarray, params: ProblemParams, floor: float):
    if params.equation == P_LAPLACIAN:
        return np.ones_like(u)
    beta = params.beta
    guarded = np.maximum(u, floor)
    return np.where(u > floor, beta * guarded ** (beta - 1.0), 0.0)


def _prefactor(params: ProblemParams) -> float:
    if params.equation == P_LAPLACIAN:
        return 1.0
    return params.beta ** (1.0 - params.p)


def _residual(u, rhs, dt, pref, div):
    return u - dt * pref * div - rhs


def _solve_linear_1d(c, rhs2, grid: Grid, g_faces):
    """Solve (I - div(c grad)) u = rhs with face coefficients c (length n+1)."""
    n = rhs2.shape[0]
    diag = 1.0 + c[:-1] + c[1:]
    b = rhs2.copy()
    rows, cols, vals = [], [], []
    if grid.bc == PERIODIC:
        interior = np.arange(1, n)
        rows += [interior, interior - 1, np.array([0, n - 1])]
        cols += [interior - 1, interior, np.array([n - 1, 0])]
        vals += [-c[1:n], -c[1:n], np.array([-c[0], -c[n]])]
    else:
        (g_lo, g_hi), = g_faces
        diag = diag.copy()
        diag[0] += c[0]          # ghost elimination doubles the boundary face
        diag[-1] += c[n]
        b[0] += 2.0 * c[0] * g_lo[0]
        b[-1] += 2.0 * c[n] * g_hi[0]
        interior = np.arange(1, n)
        rows += [interior, interior - 1]
        cols += [interior - 1, interior]
        vals += [-c[1:n], -c[1:n]]
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    return spla.spsolve(A, b)


def _solve_linear_2d(cx, cy, rhs2, grid: Grid, g_faces):
    n0, n1 = rhs2.shape
    n = n0 * n1
    idx = np.arange(n).reshape(n0, n1)
    diag = 1.0 + cx[:-1, :] + cx[1:, :] + cy[:, :-1] + cy[:, 1:]
    b = rhs2.copy()
    rows, cols, vals = [], [], []

    def couple(a_idx, b_idx, coeff):
        rows.append(a_idx.ravel())
        cols.append(b_idx.ravel())
        vals.append(-coeff.ravel())
        rows.append(b_idx.ravel())
        cols.append(a_idx.ravel())
        vals.append(-coeff.ravel())

    couple(idx[:-1, :], idx[1:, :], cx[1:-1, :])
    couple(idx[:, :-1], idx[:, 1:], cy[:, 1:-1])
    if grid.bc == PERIODIC:
        couple(idx[-1, :], idx[0, :], cx[0, :])
        couple(idx[:, -1], idx[:, 0], cy[:, 0])
    else:
        (gx_lo, gx_hi), (gy_lo, gy_hi) = g_faces
        diag = diag.copy()
        diag[0, :] += cx[0, :]
        diag[-1, :] += cx[-1, :]
        diag[:, 0] += cy[:, 0]
        diag[:, -1] += cy[:, -1]
        b[0, :] += 2.0 * cx[0, :] * gx_lo
        b[-1, :] += 2.0 * cx[-1, :] * gx_hi
        b[:, 0] += 2.0 * cy[:, 0] * gy_lo
        b[:, -1] += 2.0 * cy[:, -1] * gy_hi
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(diag.ravel())
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    return spla.spsolve(A, b.ravel()).reshape(n0, n1)


def _newton_1d(residual, dFda, wprime_pad, dt, h, grid):
    """One modified-Newton linear solve J delta = -residual (1D).

    Face f couples padded cells f and f+1; the coupling strength carries the
    slope of the flux w.r.t. the face gradient times the slope of the power
    transform at the differentiated cell.
    """
    n = residual.shape[0]
    lam = dt / (h * h)
    dl = lam * dFda * wprime_pad[:-1]   # derivative through the left cell
    dr = lam * dFda * wprime_pad[1:]    # derivative through the right cell
    diag = 1.0 + dr[:-1] + dl[1:]
    rows, cols, vals = [], [], []
    interior = np.arange(1, n)
    rows += [interior, interior - 1]
    cols += [interior - 1, interior]
    vals += [-dl[1:n], -dr[1:n]]
    if grid.bc == PERIODIC:
        rows.append(np.array([0, n - 1]))
        cols.append(np.array([n - 1, 0]))
        vals.append(np.array([-dl[0], -dr[n]]))
    else:
        # ghosts mirror the flux variable around the Dirichlet value, so the
        # boundary-face gradient differentiates to twice the edge slope
        diag = diag.copy()
        diag[0] += dr[0]
        diag[-1] += dl[n]
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    J = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    return spla.spsolve(J, -residual)


def _newton_2d(residual, dFdax, dFday, wprime_pad, dt, h, grid):
    """One modified-Newton linear solve J delta = -residual (2D)."""
    n0, n1 = residual.shape
    n = n0 * n1
    lam = dt / (h * h)
    idx = np.arange(n).reshape(n0, n1)

    dlx = lam * dFdax * wprime_pad[:-1, 1:-1]
    drx = lam * dFdax * wprime_pad[1:, 1:-1]
    dly = lam * dFday * wprime_pad[1:-1, :-1]
    dry = lam * dFday * wprime_pad[1:-1, 1:]
    diag = 1.0 + drx[:-1, :] + dlx[1:, :] + dry[:, :-1] + dly[:, 1:]

    rows, cols, vals = [], [], []

    def couple(a_idx, b_idx, a_to_b, b_to_a):
        rows.append(a_idx.ravel())
        cols.append(b_idx.ravel())
        vals.append(-a_to_b.ravel())
        rows.append(b_idx.ravel())
        cols.append(a_idx.ravel())
        vals.append(-b_to_a.ravel())

    # interior x-faces f=1..n0-1 couple cells (f-1, j) and (f, j)
    couple(idx[:-1, :], idx[1:, :], drx[1:-1, :], dlx[1:-1, :])
    couple(idx[:, :-1], idx[:, 1:], dry[:, 1:-1], dly[:, 1:-1])
    if grid.bc == PERIODIC:
        couple(idx[-1, :], idx[0, :], drx[0, :], dlx[0, :])
        couple(idx[:, -1], idx[:, 0], dry[:, 0], dly[:, 0])
    else:
        diag = diag.copy()
        diag[0, :] += drx[0, :]
        diag[-1, :] += dlx[-1, :]
        diag[:, 0] += dry[:, 0]
        diag[:, -1] += dly[:, -1]
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(diag.ravel())
    J = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    return spla.spsolve(J, -residual.ravel()).reshape(n0, n1)


def _step(u_prev, cfg: SolverConfig, grid: Grid, params: ProblemParams,
          boundary: _Boundary, t_next: float, rhs):
    """One backward-Euler step; returns (u_next, n_iterations, clamp_count)."""
    h = grid.h
    dt = grid.dt
    eps2 = cfg.eps_reg(grid) ** 2
    pref = _prefactor(params)
    floor = cfg.positivity_floor
    dnl = params.equation == DOUBLY_NONLINEAR
    lam = dt * pref / (h * h)

    u = u_prev.copy()
    g_faces = boundary.face_values(t_next) if grid.bc == DIRICHLET else None
    for it in range(cfg.max_newton_iters + 1):
        u_pad = boundary.pad(u, t_next)
        if dnl:
            w_pad = boundary.pad(u, t_next, fn=lambda v: _transform(v, params, floor))
        else:
            w_pad = u_pad
        if grid.dim_n == 1:
            div, D, G, M2 = _kernels.flux_arrays_1d(w_pad, h, params.p, eps2)
        else:
            div, Dx, Gx, M2x, Dy, Gy, M2y = _kernels.flux_arrays_2d(w_pad, h, params.p, eps2)
        res = _residual(u, rhs, dt, pref, div)
        res_norm = np.abs(res).max()
        if res_norm <= cfg.nonlinear_tol:
            break
        if it == cfg.max_newton_iters:
            raise NonlinearDivergence(
                f"nonlinear solve stalled at residual {res_norm:.3e} "
                f"(tol {cfg.nonlinear_tol:.1e}) after {it} iterations; "
                "reduce dt or increase flux_regularization_eps",
                residual=res_norm)
        if cfg.linearization == PICARD:
            if grid.dim_n == 1:
                s = _secant(u_pad, w_pad, params, floor)
                u = _solve_linear_1d(lam * D * s, rhs, grid, g_faces)
            else:
                sx = _secant(u_pad, w_pad, params, floor, axis=0)[:, 1:-1]
                sy = _secant(u_pad, w_pad, params, floor, axis=1)[1:-1, :]
                u = _solve_linear_2d(lam * Dx * sx, lam * Dy * sy, rhs, grid, g_faces)
        else:
            wp_pad = _wprime(u_pad, params, floor)
            if grid.dim_n == 1:
                dFda = pref * D * (1.0 + (params.p - 2.0) * G * G / M2)
                u = u + _newton_1d(res, dFda, wp_pad, dt, h, grid)
            else:
                dFdax = pref * Dx * (1.0 + (params.p - 2.0) * Gx * Gx / M2x)
                dFday = pref * Dy * (1.0 + (params.p - 2.0) * Gy * Gy / M2y)
                u = u + _newton_2d(res, dFdax, dFday, wp_pad, dt, h, grid)
    clamp_count = 0
    if dnl:
        if u.min() < -cfg.nonlinear_tol:
            raise NegativityError(
                f"iterate dropped to {u.min():.3e} < -nonlinear_tol; scheme failure")
        clamp_count = int((u < 0.0).sum())
        if clamp_count:
            u = np.maximum(u, 0.0)
    return u, it, clamp_count


def step_p_laplacian(u_prev, cfg: SolverConfig, grid: Grid, params: ProblemParams,
                     dirichlet_values=None, t_prev: float = 0.0):
    """Advance the gradient-diffusion equation one backward-Euler step."""
    if params.equation != P_LAPLACIAN:
        raise RangeError("step_p_laplacian requires the p_laplacian equation")
    return _single_step(u_prev, cfg, grid, params, dirichlet_values, t_prev)


def step_doubly_nonlinear(u_prev, cfg: SolverConfig, grid: Grid, params: ProblemParams,
                          dirichlet_values=None, t_prev: float = 0.0):
    """Advance the doubly nonlinear equation one backward-Euler step."""
    if params.equation != DOUBLY_NONLINEAR:
        raise RangeError("step_doubly_nonlinear requires the doubly_nonlinear equation")
    if np.asarray(u_prev).min() < 0.0:
        raise RangeError("doubly nonlinear step requires non-negative data")
    return _single_step(u_prev, cfg, grid, params, dirichlet_values, t_prev)


def _single_step(u_prev, cfg, grid, params, dirichlet_values, t_prev):
    u_prev = np.asarray(u_prev, dtype=float)
    boundary = _Boundary(grid, u_prev, dirichlet_values)
    t_next = t_prev + grid.dt
    rhs = u_prev.copy()
    if cfg.source is not None:
        rhs = rhs + grid.dt * np.asarray(cfg.source(grid.center_mesh(), t_next), dtype=float)
    u_next, _, _ = _step(u_prev, cfg, grid, params, boundary, t_next, rhs)
    return u_next


def solve(initial, cfg: SolverConfig, grid: Grid, params: ProblemParams,
          dirichlet_values=None, label: str = "", t_origin: float = 0.0) -> SolveResult:
    """Run the full time loop and collect every slice plus diagnostics."""
    validate_params(params)
    initial = np.asarray(initial, dtype=float)
    if initial.shape != grid.spatial_shape:
        raise RangeError(f"initial shape {initial.shape} != grid {grid.spatial_shape}")
    if params.equation == DOUBLY_NONLINEAR:
        if initial.min() < 0.0:
            raise RangeError("doubly nonlinear runs need non-negative initial data")
        if cfg.positivity_floor == 0.0 and initial.min() <= 0.0:
            raise RangeError("positivity_floor = 0 needs initial data bounded away from 0")

    boundary = _Boundary(grid, initial, dirichlet_values)
    mesh = grid.center_mesh() if cfg.source is not None else None
    slices = np.empty((grid.n_steps + 1,) + grid.spatial_shape, dtype=float)
    slices[0] = initial
    iters = np.zeros(grid.n_steps, dtype=int)
    clamps = np.zeros(grid.n_steps, dtype=int)
    u = initial
    for k in range(1, grid.n_steps + 1):
        t_next = t_origin + k * grid.dt
        rhs = u.copy()
        if cfg.source is not None:
            rhs = rhs + grid.dt * np.asarray(cfg.source(mesh, t_next), dtype=float)
        try:
            u, iters[k - 1], clamps[k - 1] = _step(u, cfg, grid, params, boundary,
                                                   t_next, rhs)
        except (NonlinearDivergence, NegativityError) as exc:
            raise type(exc)(f"step {k}: {exc}") from exc
        slices[k] = u

    field = SpaceTimeField(grid, slices, params, label=label, t_origin=t_origin)
    return SolveResult(field=field,
                       newton_iteration_counts=iters,
                       converged=True,
                       mass_history=field.mass_history(),
                       clamp_activations=clamps)
