"""Measurement layer: oscillations, level-set fractions, normalizing
transforms and the intrinsic space-time distances.

Discrete conventions (shared with the brute-force oracles in the tests):
a grid node belongs to a ball iff its Euclidean distance from the center is
strictly below the radius; a slice belongs to a cylinder iff its time t
satisfies top - length < t <= top, with exact float comparisons. Measures
are node-count fractions, not cell volumes.
"""

from __future__ import annotations

import numpy as np

from .core_model import (DIRICHLET, Cylinder, Grid, ProblemParams,
                         SpaceTimeField)
from .errors import (DegenerateOscillation, EmptyBall, EmptyCylinder,
                     RangeError, ZeroSup)

ABOVE = "above"
AT_OR_BELOW = "at_or_below"


def ball_mask(grid: Grid, center, radius: float) -> np.ndarray:
    """Boolean mask of cell centers strictly inside the ball."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.size != grid.dim_n:
        raise RangeError("ball center dimension mismatch")
    mesh = grid.center_mesh()
    dist_sq = sum((m - c) ** 2 for m, c in zip(mesh, center))
    return dist_sq < radius * radius


def slice_indices(field: SpaceTimeField, t_top: float, length: float) -> np.ndarray:
    """Indices of slices with time in (t_top - length, t_top]."""
    times = field.slice_times()
    return np.nonzero((times > t_top - length) & (times <= t_top))[0]


def cylinder_points(field: SpaceTimeField, q: Cylinder):
    """(slice indices, spatial mask) of the discrete points inside q."""
    if not q.contained_in(field.grid, field.t_origin):
        raise RangeError("cylinder not contained in the grid domain")
    ks = slice_indices(field, q.top_time, q.length)
    mask = ball_mask(field.grid, q.center_x, q.radius)
    if ks.size == 0 or not mask.any():
        raise EmptyCylinder(
            f"no discrete point in cylinder (slices={ks.size}, nodes={int(mask.sum())})")
    return ks, mask


def cylinder_node_count(field: SpaceTimeField, q: Cylinder) -> int:
    ks, mask = cylinder_points(field, q)
    return ks.size * int(mask.sum())


def ess_osc(field: SpaceTimeField, q: Cylinder) -> float:
    """Discrete essential oscillation: max - min over points inside q."""
    ks, mask = cylinder_points(field, q)
    vals = field.values[ks][:, mask]
    return float(vals.max() - vals.min())


def ess_sup(field: SpaceTimeField, q: Cylinder) -> float:
    ks, mask = cylinder_points(field, q)
    return float(field.values[ks][:, mask].max())


def ess_inf(field: SpaceTimeField, q: Cylinder) -> float:
    ks, mask = cylinder_points(field, q)
    return float(field.values[ks][:, mask].min())


def level_set_fraction(field: SpaceTimeField, q: Cylinder, k: float,
                       direction: str = ABOVE) -> float:
    """Node fraction of q where u > k (above) or u <= k (at_or_below)."""
    ks, mask = cylinder_points(field, q)
    vals = field.values[ks][:, mask]
    if direction == ABOVE:
        hits = int((vals > k).sum())
    elif direction == AT_OR_BELOW:
        hits = int((vals <= k).sum())
    else:
        raise RangeError(f"direction must be above|at_or_below, got {direction!r}")
    return hits / vals.size


def slice_level_fraction(field: SpaceTimeField, center, radius: float,
                         t: float, k: float) -> float:
    """Fraction of the ball's nodes with u(., t) > k on one grid slice."""
    grid = field.grid
    rel = (t - field.t_origin) / grid.dt
    idx = int(round(rel))
    if not 0 <= idx <= grid.n_steps or abs(rel - idx) > 1e-9 * max(1.0, abs(rel)):
        raise RangeError(f"t={t} is not on a grid time slice")
    mask = ball_mask(grid, center, radius)
    n = int(mask.sum())
    if n == 0:
        raise EmptyBall(f"ball of radius {radius} holds no grid node")
    return int((field.values[idx][mask] > k).sum()) / n


def restrict_window(field: SpaceTimeField, center, top_time: float,
                    half_width: float, depth: float,
                    scale_x: float, scale_t: float,
                    shift_u: float = 0.0, scale_u: float = 1.0,
                    params: ProblemParams | None = None,
                    label: str = "") -> SpaceTimeField:
    """Nearest-node restriction of (u - shift_u)/scale_u onto a rescaled window.

    Cells with centers in the cube center +- half_width and slices in
    (top_time - depth, top_time] are kept with their values; coordinates are
    divided by scale_x (space) and scale_t (time). No interpolation happens,
    so level-set fractions are preserved exactly; the window center may land
    up to half a cell off the exact transform.
    """
    grid = field.grid
    center = np.atleast_1d(np.asarray(center, dtype=float))
    axes = grid.axis_centers()
    sel = [np.nonzero(np.abs(axes - c) <= half_width)[0] for c in center]
    counts = {s.size for s in sel}
    if len(counts) != 1:
        lo = min(s.size for s in sel)
        sel = [s[(s.size - lo) // 2:(s.size - lo) // 2 + lo] for s in sel]
    n_cells = sel[0].size
    if n_cells < 8:
        raise EmptyCylinder(f"window holds only {n_cells} cells per axis (< 8)")
    ks = slice_indices(field, top_time, depth)
    if ks.size < 2:
        raise EmptyCylinder("window holds fewer than two slices")

    indexer = np.ix_(ks, *sel)
    vals = (field.values[indexer] - shift_u) / scale_u
    new_h = grid.h / scale_x
    new_grid = Grid(dim_n=grid.dim_n, cells_per_axis=n_cells,
                    domain_half_width=0.5 * n_cells * new_h,
                    dt=grid.dt / scale_t, n_steps=ks.size - 1,
                    bc=DIRICHLET, bc_value_id="window-restriction")
    new_params = field.params if params is None else params
    return SpaceTimeField(new_grid, vals, new_params, label=label,
                          t_origin=-(ks.size - 1) * grid.dt / scale_t)


def normalize_p_laplacian(field: SpaceTimeField, center, top_time: float,
                          rho: float, omega: float, mu_minus: float,
                          z_extent: float = 1.0,
                          tau_depth: float = 1.0) -> SpaceTimeField:
    """Map u on the oscillation-adapted cylinder to v on the unit cylinder.

    The intrinsic change of variables divides space by omega^((p-2)/p) rho,
    time by rho^p, and levels by (u - mu_minus)/omega. z_extent/tau_depth
    widen the restriction window (in unit-cylinder coordinates) so callers
    can keep the margins their estimates need.
    """
    if omega == 0.0:
        raise DegenerateOscillation("oscillation is zero; nothing to normalize")
    p = field.params.p
    c0 = omega ** ((p - 2.0) / p)
    return restrict_window(field, center, top_time,
                           half_width=z_extent * c0 * rho,
                           depth=tau_depth * rho ** p,
                           scale_x=c0 * rho, scale_t=rho ** p,
                           shift_u=mu_minus, scale_u=omega,
                           label=f"{field.label}|normalized")


def normalize_dnl(field: SpaceTimeField, M: float) -> SpaceTimeField:
    """Divide the whole field by its reference supremum M."""
    if M == 0.0:
        raise ZeroSup("reference supremum is zero")
    if M < 0.0:
        raise RangeError("reference supremum must be positive")
    return field.with_values(field.values / M, label=f"{field.label}|scaled")


def p_dist(points_k, points_gamma, sup_norm_u: float, p: float) -> float:
    """Intrinsic parabolic distance between two finite space-time point sets.

    inf over pairs of ||u||^((2-p)/p) |x - y| + |t - s|^(1/p).
    """
    return _weighted_dist(points_k, points_gamma, sup_norm_u ** ((2.0 - p) / p), p)


def mp_dist(points_k, points_gamma, sup_norm_u: float, p: float, m: float) -> float:
    """Intrinsic distance weighted for the doubly nonlinear scaling,
    ||u||^((3-m-p)/p) |x - y| + |t - s|^(1/p)."""
    return _weighted_dist(points_k, points_gamma,
                          sup_norm_u ** ((3.0 - m - p) / p), p)


def _weighted_dist(points_k, points_gamma, weight: float, p: float) -> float:
    pk = _as_points(points_k)
    pg = _as_points(points_gamma)
    if pk.shape[1] != pg.shape[1]:
        raise RangeError("point sets live in different dimensions")
    best = np.inf
    for a in pk:
        dx = np.sqrt(((pg[:, :-1] - a[:-1]) ** 2).sum(axis=1))
        dt = np.abs(pg[:, -1] - a[-1]) ** (1.0 / p)
        best = min(best, float((weight * dx + dt).min()))
    return best


def _as_points(pts) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(pts, dtype=float))
    if arr.size == 0:
        raise RangeError("point set must be non-empty")
    return arr
