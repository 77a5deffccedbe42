"""Shared domain types: problem parameters, grids, fields and cylinders.

Everything here is an immutable value object; arrays are frozen after
construction so instances can be shared freely across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateOscillation, RangeError

P_LAPLACIAN = "p_laplacian"
DOUBLY_NONLINEAR = "doubly_nonlinear"
EQUATIONS = (P_LAPLACIAN, DOUBLY_NONLINEAR)

PERIODIC = "periodic"
DIRICHLET = "dirichlet"
BOUNDARY_KINDS = (PERIODIC, DIRICHLET)


@dataclass(frozen=True)
class ProblemParams:
    """Equation selector plus the exponents that define the admissible range.

    ``m`` is ignored for the gradient-only equation. The structure constants
    are informational for the prototype fluxes (they bound a general flux
    field between two power laws) and only need to be positive.
    """

    dim_n: int
    p: float
    equation: str = P_LAPLACIAN
    m: float = 1.0
    c0_struct: float = 1.0
    c1_struct: float = 1.0

    def __post_init__(self):
        validate_params(self)

    @property
    def beta(self) -> float:
        """Power transform exponent (p + m - 2)/(p - 1) for the doubly nonlinear flux."""
        return (self.p + self.m - 2.0) / (self.p - 1.0)


def validate_params(params: ProblemParams) -> None:
    """Check every admissibility inequality; raise RangeError naming the first violated one.

    The gradient-only equation needs 1 < p < 2. The doubly nonlinear one
    additionally needs m > 1 with 2 < m+p < 3 and m+p > 3 - p/N (the
    supercritical window).
    """
    n, p, m = params.dim_n, params.p, params.m
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise RangeError(f"dim_n must be a positive integer, got {n!r}")
    if n > 3:
        raise RangeError(f"dim_n <= 3 required, got {n}")
    if not 1.0 < p:
        raise RangeError(f"p > 1 violated: p={p}")
    if not p < 2.0:
        raise RangeError(f"p < 2 violated: p={p}")
    if params.equation not in EQUATIONS:
        raise RangeError(f"unknown equation {params.equation!r}")
    if params.c0_struct <= 0 or params.c1_struct <= 0:
        raise RangeError("structure constants must be positive")
    if params.equation == DOUBLY_NONLINEAR:
        if not m > 1.0:
            raise RangeError(f"m > 1 violated: m={m}")
        if not m + p < 3.0:
            raise RangeError(f"m + p < 3 violated: m+p={m + p}")
        if not m + p > 2.0:
            raise RangeError(f"m + p > 2 violated: m+p={m + p}")
        if not m + p > 3.0 - p / n:
            raise RangeError(
                f"supercritical range m + p > 3 - p/N violated: "
                f"m+p={m + p}, 3-p/N={3.0 - p / n}"
            )


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid on the cube [-L, L]^N with a fixed time step.

    Cell centers sit at -L + (i + 1/2) h with h = 2L / cells_per_axis, the
    same along every axis. The run covers n_steps steps of size dt, so the
    declared final time is exactly n_steps * dt.
    """

    dim_n: int
    cells_per_axis: int
    domain_half_width: float
    dt: float
    n_steps: int
    bc: str = PERIODIC
    bc_value_id: str = "frozen-initial"

    def __post_init__(self):
        if self.dim_n < 1 or self.dim_n > 3:
            raise RangeError(f"dim_n must be in 1..3, got {self.dim_n}")
        if self.cells_per_axis < 8:
            raise RangeError("cells_per_axis >= 8 required")
        if self.domain_half_width <= 0:
            raise RangeError("domain_half_width must be positive")
        if self.dt <= 0:
            raise RangeError("dt must be positive")
        if self.n_steps < 1:
            raise RangeError("n_steps >= 1 required")
        if self.bc not in BOUNDARY_KINDS:
            raise RangeError(f"unknown boundary kind {self.bc!r}")

    @property
    def h(self) -> float:
        return 2.0 * self.domain_half_width / self.cells_per_axis

    @property
    def final_time(self) -> float:
        return self.n_steps * self.dt

    @property
    def spatial_shape(self) -> tuple:
        return (self.cells_per_axis,) * self.dim_n

    def axis_centers(self) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        L, h = self.domain_half_width, self.h
        return -L + (np.arange(self.cells_per_axis) + 0.5) * h

    def center_mesh(self) -> list:
        """Cell-center coordinate arrays, one per axis, broadcast to spatial shape."""
        axes = [self.axis_centers() for _ in range(self.dim_n)]
        return list(np.meshgrid(*axes, indexing="ij"))

    def cell_volume(self) -> float:
        return self.h ** self.dim_n


@dataclass(frozen=True)
class SpaceTimeField:
    """A discrete solution: values[k, ix...] at slice time t_origin + k dt.

    Values are made read-only at construction. Fields produced for the
    doubly nonlinear equation must be non-negative everywhere.
    """

    grid: Grid
    values: np.ndarray
    params: ProblemParams
    label: str = ""
    t_origin: float = 0.0

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        expected = (self.grid.n_steps + 1,) + self.grid.spatial_shape
        if vals.shape != expected:
            raise RangeError(f"values shape {vals.shape} != expected {expected}")
        if not np.all(np.isfinite(vals)):
            raise RangeError("field contains non-finite values")
        if self.params.equation == DOUBLY_NONLINEAR and vals.min() < 0.0:
            raise RangeError("doubly nonlinear fields must be non-negative")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def n_slices(self) -> int:
        return self.values.shape[0]

    def slice_times(self) -> np.ndarray:
        return self.t_origin + np.arange(self.n_slices) * self.grid.dt

    @property
    def final_time(self) -> float:
        return self.t_origin + self.grid.n_steps * self.grid.dt

    def mass_history(self) -> np.ndarray:
        """Midpoint-rule integral of the field over the cube, per slice."""
        axes = tuple(range(1, self.values.ndim))
        return self.values.sum(axis=axes) * self.grid.cell_volume()

    def with_values(self, values: np.ndarray, label: str | None = None) -> "SpaceTimeField":
        return replace(self, values=values,
                       label=self.label if label is None else label)


@dataclass(frozen=True)
class Cylinder:
    """The set B_rho(center) x (top_time - length, top_time].

    Discrete membership is strict in space (|x - y| < rho in the Euclidean
    norm) and half-open in time with the top slice included; comparisons are
    exact float comparisons, so callers should align top_time with slice
    times when inclusion of the top slice matters.
    """

    center_x: tuple
    top_time: float
    radius: float
    length: float

    def __post_init__(self):
        center = tuple(float(c) for c in np.atleast_1d(self.center_x))
        object.__setattr__(self, "center_x", center)
        if self.radius <= 0:
            raise RangeError("cylinder radius must be positive")
        if self.length <= 0:
            raise RangeError("cylinder length must be positive")

    def contained_in(self, grid: Grid, t_origin: float = 0.0) -> bool:
        """True iff the ball fits in the cube and the time window in (t_origin, final]."""
        if len(self.center_x) != grid.dim_n:
            raise RangeError("cylinder/grid dimension mismatch")
        L = grid.domain_half_width
        ball_ok = all(abs(c) + self.radius <= L for c in self.center_x)
        t_lo = self.top_time - self.length
        time_ok = (t_lo >= t_origin) and (self.top_time <= t_origin + grid.final_time)
        return ball_ok and time_ok

    def shrunk(self, radius_factor: float = 1.0, length_factor: float = 1.0) -> "Cylinder":
        return Cylinder(self.center_x, self.top_time,
                        self.radius * radius_factor, self.length * length_factor)


@dataclass(frozen=True)
class IntrinsicCylinderSpec:
    """Oscillation-adapted cylinder geometry: radius scale omega^((p-2)/p), length rho^p.

    For omega = 1 or p = 2 the radius scale is 1 and the cylinder is the
    standard parabolic one. Since (p-2)/p < 0 for p < 2, the radius scale
    grows as the oscillation shrinks.
    """

    rho: float
    omega: float
    p: float

    def __post_init__(self):
        if self.rho <= 0:
            raise RangeError("rho must be positive")
        if self.omega < 0:
            raise RangeError("omega must be non-negative")
        if not 1.0 < self.p <= 2.0:
            raise RangeError(f"p in (1, 2] required, got {self.p}")

    @property
    def c0(self) -> float:
        if self.omega == 0.0:
            raise DegenerateOscillation("oscillation is zero; iteration terminates")
        return self.omega ** ((self.p - 2.0) / self.p)

    def expand(self, center, top_time: float) -> Cylinder:
        return Cylinder(tuple(np.atleast_1d(center)), top_time,
                        self.c0 * self.rho, self.rho ** self.p)


def intrinsic_cylinder(rho: float, omega: float, p: float,
                       center, top_time: float) -> Cylinder:
    """Build the oscillation-adapted cylinder with radius omega^((p-2)/p) rho, length rho^p."""
    if omega == 0.0:
        raise DegenerateOscillation("oscillation is zero; iteration terminates")
    if omega < 0.0:
        raise RangeError("omega must be non-negative")
    return IntrinsicCylinderSpec(rho, omega, p).expand(center, top_time)


def unit_ball_measure(dim_n: int) -> float:
    """Lebesgue measure of the N-dimensional unit ball, pi^(N/2)/Gamma(N/2+1)."""
    if dim_n == 1:
        return 2.0
    if dim_n == 2:
        return math.pi
    if dim_n == 3:
        return 4.0 * math.pi / 3.0
    return math.pi ** (dim_n / 2.0) / math.gamma(dim_n / 2.0 + 1.0)
