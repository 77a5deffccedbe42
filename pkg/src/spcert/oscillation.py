"""Reduction-of-oscillation iteration and the empirical smoothness-exponent fit.

The iteration shrinks radii geometrically, updates the oscillation bound by
omega_{n+1} = max(a omega_n, Gamma rho_n^eps_star), and re-measures the
actual oscillation on each oscillation-adapted cylinder. The fit regresses
log(measured oscillation) on log(radius ratio) over a family of such
cylinders, giving an empirical growth exponent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core_model import Cylinder, SpaceTimeField, intrinsic_cylinder
from .errors import EmptyCylinder, InitialOscillationViolated, RangeError
from .geometry import cylinder_node_count, ess_osc, ess_sup

_MIN_NODES = 8


@dataclass(frozen=True)
class OscillationTrace:
    """Per-level record of the reduction iteration.

    omega_seq is the recursive bound; measured_osc_seq the fresh measurement
    on each cylinder (the two are deliberately kept apart). all_nested
    reports geometric nesting of consecutive cylinders, which can genuinely
    fail when the bound decays fast (the radius scale grows as the bound
    shrinks); all_bounded reports measured <= bound levelwise.
    """

    rho_seq: np.ndarray
    omega_seq: np.ndarray
    measured_osc_seq: np.ndarray
    cylinders: list
    all_nested: bool
    all_bounded: bool
    a: float
    b: float
    Gamma: float
    eps_star: float

    @property
    def levels(self) -> int:
        return len(self.rho_seq)


def bound_sequence(omega0: float, rho0: float, a: float, b: float,
                   Gamma: float, eps_star: float, n_levels: int):
    """The (rho_n, omega_n) recursion alone, without any field."""
    rhos = rho0 * b ** (-np.arange(n_levels, dtype=float))
    omegas = np.empty(n_levels)
    om = omega0
    for n in range(n_levels):
        omegas[n] = om
        om = max(a * om, Gamma * rhos[n] ** eps_star)
    return rhos, omegas


def build_trace(field: SpaceTimeField, center, top_time: float, rho0: float,
                omega0: float, a: float, b: float, Gamma: float,
                eps_star: float, n_max: int) -> OscillationTrace:
    """Run the reduction iteration on a solved field.

    Stops early when a cylinder leaves the domain or holds fewer than 8
    discrete points. The seed bound omega0 must dominate the measured
    oscillation on the seed cylinder.
    """
    if not 0.0 < a < 1.0:
        raise RangeError("a must lie in (0,1)")
    if b <= 1.0 or Gamma <= 0.0 or eps_star <= 0.0:
        raise RangeError("need b > 1, Gamma > 0, eps_star > 0")
    if omega0 <= 0.0:
        raise RangeError("omega0 must be positive")

    p = field.params.p
    rhos, omegas, cylinders, measured = [], [], [], []
    om = omega0
    for n in range(n_max):
        rho_n = rho0 * b ** (-float(n))
        q = intrinsic_cylinder(rho_n, om, p, center, top_time)
        if not q.contained_in(field.grid, field.t_origin):
            break
        try:
            if cylinder_node_count(field, q) < _MIN_NODES:
                break
        except EmptyCylinder:
            break
        osc = ess_osc(field, q)
        if n == 0 and osc > omega0:
            raise InitialOscillationViolated(
                f"measured oscillation {osc} exceeds the declared bound {omega0}")
        rhos.append(rho_n)
        omegas.append(om)
        cylinders.append(q)
        measured.append(osc)
        om = max(a * om, Gamma * rho_n ** eps_star)
    if not rhos:
        raise EmptyCylinder("seed cylinder does not fit the grid")

    nested = all(
        cylinders[i + 1].radius <= cylinders[i].radius
        and cylinders[i + 1].length <= cylinders[i].length
        for i in range(len(cylinders) - 1))
    bounded = all(m <= w for m, w in zip(measured, omegas))
    return OscillationTrace(rho_seq=np.array(rhos), omega_seq=np.array(omegas),
                            measured_osc_seq=np.array(measured),
                            cylinders=cylinders, all_nested=nested,
                            all_bounded=bounded, a=a, b=b, Gamma=Gamma,
                            eps_star=eps_star)


def fit_holder_exponent(field: SpaceTimeField, center, rho0: float,
                        radii, p: float, m: float | None = None,
                        top_time: float | None = None):
    """Least-squares slope of log(oscillation) against log(r / rho0).

    Cylinders follow the oscillation-adapted geometry seeded by the
    oscillation on the rho0 cylinder; for the doubly nonlinear scaling
    (m given) the time depth is weighted by the sup-based factor instead of
    stretching space. Radii whose cylinder leaves the domain or holds fewer
    than 8 points are dropped; at least 4 must survive. A zero oscillation
    anywhere reports the smoother-than-power sentinel (inf, 1.0).
    """
    radii = np.asarray(sorted(radii, reverse=True), dtype=float)
    if radii.size < 4:
        raise RangeError("need at least 4 radii")
    if np.any(radii <= 0.0) or radii[0] > rho0:
        raise RangeError("radii must be positive and at most rho0")
    if top_time is None:
        top_time = field.final_time

    seed = Cylinder(center, top_time, rho0, rho0 ** p)
    omega = ess_osc(field, seed)
    if omega == 0.0:
        return math.inf, 1.0
    if m is None:
        c0 = omega ** ((p - 2.0) / p)
        theta = 1.0
    else:
        c0 = 1.0
        theta = (2.0 * ess_sup(field, seed)) ** (3.0 - m - p)

    log_r, log_osc = [], []
    for r in radii:
        q = Cylinder(center, top_time, c0 * r, theta * r ** p)
        if not q.contained_in(field.grid, field.t_origin):
            continue
        try:
            if cylinder_node_count(field, q) < _MIN_NODES:
                continue
        except EmptyCylinder:
            continue
        osc = ess_osc(field, q)
        if osc == 0.0:
            return math.inf, 1.0
        log_r.append(math.log(r / rho0))
        log_osc.append(math.log(osc))
    if len(log_r) < 4:
        raise RangeError(f"only {len(log_r)} usable radii (< 4)")

    x = np.array(log_r)
    y = np.array(log_osc)
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(((y - fitted) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), r_squared
