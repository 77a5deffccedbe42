"""Independent reference implementations for the tests.

Everything here deliberately avoids the package's vectorized code paths:
plain Python loops, math-module arithmetic, Decimal-based powers. The main
code must agree with these, not the other way around.
"""

import math
from decimal import Decimal, getcontext

import numpy as np

from spcert.core_model import SpaceTimeField


def brute_points_in_cylinder(field: SpaceTimeField, center, top, radius, length):
    """Every (slice index, flat node index, value) inside the cylinder, by loops."""
    grid = field.grid
    axes = [grid.axis_centers() for _ in range(grid.dim_n)]
    out = []
    for k in range(field.n_slices):
        t = field.t_origin + k * grid.dt
        if not (top - length < t <= top):
            continue
        flat = field.values[k].ravel()
        for j in range(flat.size):
            idx = np.unravel_index(j, grid.spatial_shape)
            d2 = 0.0
            for a in range(grid.dim_n):
                d2 += (axes[a][idx[a]] - center[a]) ** 2
            if math.sqrt(d2) < radius:
                out.append((k, j, float(flat[j])))
    return out


def brute_ess_osc(field, center, top, radius, length):
    vals = [v for _, _, v in brute_points_in_cylinder(field, center, top, radius, length)]
    if not vals:
        return None
    return max(vals) - min(vals)


def brute_level_fraction(field, center, top, radius, length, level, above=True):
    pts = brute_points_in_cylinder(field, center, top, radius, length)
    if not pts:
        return None
    if above:
        hits = sum(1 for _, _, v in pts if v > level)
    else:
        hits = sum(1 for _, _, v in pts if v <= level)
    return hits / len(pts)


def brute_slice_fraction(field, center, radius, k_slice, level):
    grid = field.grid
    axes = [grid.axis_centers() for _ in range(grid.dim_n)]
    flat = field.values[k_slice].ravel()
    inside, hits = 0, 0
    for j in range(flat.size):
        idx = np.unravel_index(j, grid.spatial_shape)
        d2 = sum((axes[a][idx[a]] - center[a]) ** 2 for a in range(grid.dim_n))
        if math.sqrt(d2) < radius:
            inside += 1
            if flat[j] > level:
                hits += 1
    if inside == 0:
        return None
    return hits / inside


def decimal_power(base: float, exponent: float, digits: int = 40) -> float:
    """High-precision base**exponent via Decimal ln/exp."""
    getcontext().prec = digits
    b = Decimal(repr(base))
    e = Decimal(repr(exponent))
    return float((e * b.ln()).exp())


def mms_plap_source(p: float):
    """Manufactured solution u = 2 + sin(pi x) e^{-t} + 4x and its source.

    The gradient 4 + pi cos(pi x) e^{-t} never vanishes, so the source is
    smooth: S = u_t - (p-1) |u_x|^(p-2) u_xx.
    """
    def exact(x, t):
        return 2.0 + np.sin(np.pi * x) * np.exp(-t) + 4.0 * x

    def source(mesh, t):
        x = mesh[0]
        ux = 4.0 + np.pi * np.cos(np.pi * x) * np.exp(-t)
        uxx = -np.pi ** 2 * np.sin(np.pi * x) * np.exp(-t)
        ut = -np.sin(np.pi * x) * np.exp(-t)
        return ut - (p - 1.0) * np.abs(ux) ** (p - 2.0) * uxx

    def boundary(pts, t):
        return exact(pts[:, 0], t)

    return exact, source, boundary


def mms_dnl_source(p: float, m: float):
    """Positive manufactured solution u = 7 + sin(pi x) e^{-t} + 4x for the
    doubly nonlinear flux beta^(1-p) |(u^beta)_x|^(p-2) (u^beta)_x."""
    beta = (p + m - 2.0) / (p - 1.0)

    def exact(x, t):
        return 7.0 + np.sin(np.pi * x) * np.exp(-t) + 4.0 * x

    def source(mesh, t):
        x = mesh[0]
        u = exact(x, t)
        ux = 4.0 + np.pi * np.cos(np.pi * x) * np.exp(-t)
        uxx = -np.pi ** 2 * np.sin(np.pi * x) * np.exp(-t)
        ut = -np.sin(np.pi * x) * np.exp(-t)
        wx = beta * u ** (beta - 1.0) * ux
        wxx = beta * (beta - 1.0) * u ** (beta - 2.0) * ux ** 2 \
            + beta * u ** (beta - 1.0) * uxx
        # d/dx [ beta^(1-p) |wx|^(p-2) wx ] = beta^(1-p) (p-1)|wx|^(p-2) wxx
        flux_div = beta ** (1.0 - p) * (p - 1.0) * np.abs(wx) ** (p - 2.0) * wxx
        return ut - flux_div

    def boundary(pts, t):
        return exact(pts[:, 0], t)

    return exact, source, boundary
