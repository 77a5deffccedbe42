"""Empirical verification of the quantitative estimates behind the
oscillation-reduction argument, plus the closed-form constants ledger.

Every check measures the quantities entering one inequality on a discrete
field and reports a verdict: ``pass`` (hypothesis and conclusion hold),
``fail`` (hypothesis holds, conclusion does not) or ``hypothesis_not_met``.
Strict inequalities are kept strict; measures are node fractions; sup/inf
over time run over the discrete slices of the closed window, boundary
slices included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field, fields as dc_fields
from typing import Optional

import numpy as np

from .core_model import (DOUBLY_NONLINEAR, P_LAPLACIAN, Cylinder, Grid,
                         ProblemParams, SpaceTimeField, unit_ball_measure)
from .errors import DomainError, EmptyCylinder, PreconditionError, RangeError
from .geometry import (ABOVE, ball_mask, cylinder_points, ess_sup,
                       level_set_fraction, slice_level_fraction)

PASS = "pass"
FAIL = "fail"
HYPOTHESIS_NOT_MET = "hypothesis_not_met"

MOSTLY_ABOVE = "mostly_above"
MOSTLY_BELOW = "mostly_below"

_UNIT_INTERVAL_FIELDS = ("nu", "sigma", "alpha_measure", "delta_dnl",
                         "eps_dnl", "eta_dnl", "a_iter", "eps_star_iter")
_POSITIVE_FIELDS = ("gamma_harnack", "eta_small", "eps_paper", "eps_star",
                    "eps1", "level_count_l", "theta", "rho0", "eta1",
                    "eta_star", "eps0", "w_n")


@dataclass(frozen=True)
class ProofConstants:
    """Closed-form constants of the oscillation-reduction pipeline.

    Only the entries a ledger call actually produces are set; validation
    applies to set entries only. t0 is negative (it is a time level below
    the top of the cylinder); the window and reduction factors live in
    (0, 1); the iteration base and floor coefficient exceed 1.
    """

    gamma_harnack: Optional[float] = None
    t0: Optional[float] = None
    eta_small: Optional[float] = None
    eps_paper: Optional[float] = None
    eps_claimed: Optional[float] = None
    eps_ratio: Optional[float] = None
    eps_star: Optional[float] = None
    eps1: Optional[float] = None
    level_count_l: Optional[float] = None
    beta: Optional[float] = None
    theta: Optional[float] = None
    nu: Optional[float] = None
    rho0: Optional[float] = None
    eta1: Optional[float] = None
    eta_star: Optional[float] = None
    eps0: Optional[float] = None
    w_n: Optional[float] = None
    m_expand: Optional[int] = None
    sigma: Optional[float] = None
    alpha_measure: Optional[float] = None
    delta_dnl: Optional[float] = None
    eps_dnl: Optional[float] = None
    eta_dnl: Optional[float] = None
    a_iter: Optional[float] = None
    b_iter: Optional[float] = None
    Gamma_iter: Optional[float] = None
    eps_star_iter: Optional[float] = None

    def __post_init__(self):
        if self.t0 is not None and not self.t0 < 0.0:
            raise RangeError(f"t0 must be negative, got {self.t0}")
        for name in _UNIT_INTERVAL_FIELDS:
            val = getattr(self, name)
            if val is not None and not 0.0 < val < 1.0:
                raise RangeError(f"{name} must lie in (0,1), got {val}")
        for name in _POSITIVE_FIELDS:
            val = getattr(self, name)
            if val is not None and not val > 0.0:
                raise RangeError(f"{name} must be positive, got {val}")
        for name in ("b_iter", "Gamma_iter"):
            val = getattr(self, name)
            if val is not None and not val > 1.0:
                raise RangeError(f"{name} must exceed 1, got {val}")
        if self.m_expand is not None and self.m_expand < 1:
            raise RangeError("m_expand must be a positive integer")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dc_fields(self)
                if getattr(self, f.name) is not None}


@dataclass(frozen=True)
class CheckReport:
    check_name: str
    hypothesis_satisfied: bool
    conclusion_satisfied: bool
    measured_constants: dict = dc_field(default_factory=dict)
    refinement_stability: Optional[float] = None
    verdict: str = ""

    def __post_init__(self):
        expected = (HYPOTHESIS_NOT_MET if not self.hypothesis_satisfied
                    else PASS if self.conclusion_satisfied else FAIL)
        if self.verdict == "":
            object.__setattr__(self, "verdict", expected)
        elif self.verdict != expected:
            raise RangeError(f"verdict {self.verdict!r} inconsistent with flags")


def p_constants_ledger(dim_n: int, p: float, gamma: float,
                       eps_star: Optional[float] = None) -> ProofConstants:
    """Closed-form constants of the gradient-equation pipeline.

    t0 is the intrinsic time depth making the comparison remainder small,
    eta_small the resulting integral lower-bound level. The window length
    has two written forms that do not agree algebraically: the literal
    |t0| / eta^(2-p) and the simplified 2^p / 2^((N+2)/(2-p)); both are
    returned together with their ratio, and eps1/level_count_l follow the
    simplified form (with |t0| in the logarithm so it is defined).
    """
    if not 1.0 < p < 2.0:
        raise RangeError(f"p in (1,2) required, got {p}")
    if gamma < 1.0:
        raise RangeError(f"gamma >= 1 required, got {gamma}")
    if dim_n < 1:
        raise RangeError("dim_n must be positive")
    t0 = -((1.0 / (gamma * 2.0 ** (3.0 + p / (2.0 - p)))) ** (2.0 - p))
    abs_t0 = abs(t0)
    eta = (2.0 ** (p / (2.0 - p)) / 2.0 ** (dim_n + 2.0)) * abs_t0 ** (1.0 / (2.0 - p))
    eps_literal = abs_t0 / eta ** (2.0 - p)
    eps_claimed = 2.0 ** p / 2.0 ** ((dim_n + 2.0) / (2.0 - p))
    if eps_star is None:
        eps_star = 0.5 * eps_claimed
    if not eps_star > 0.0:
        raise RangeError("eps_star must be positive")
    eps1 = eps_star * eps_claimed
    level_count_l = math.log2(1.0 / (eps1 * abs_t0)) / p
    return ProofConstants(gamma_harnack=gamma, t0=t0, eta_small=eta,
                          eps_paper=eps_literal, eps_claimed=eps_claimed,
                          eps_ratio=eps_literal / eps_claimed,
                          eps_star=eps_star, eps1=eps1,
                          level_count_l=level_count_l,
                          w_n=unit_ball_measure(dim_n))


def dnl_constants_ledger(dim_n: int, p: float, m: float, gamma: float,
                         nu: float, eta_dnl: float) -> ProofConstants:
    """Closed-form constants of the doubly nonlinear pipeline at level 1/2."""
    ProblemParams(dim_n=dim_n, p=p, m=m, equation=DOUBLY_NONLINEAR)
    if gamma < 1.0:
        raise RangeError(f"gamma >= 1 required, got {gamma}")
    if not 0.0 < nu < 1.0 or not 0.0 < eta_dnl < 1.0:
        raise RangeError("nu and eta_dnl must lie in (0,1)")
    denom = p - dim_n * (3.0 - m - p)
    if denom <= 0.0:
        raise RangeError(
            f"p - N(3-m-p) = {denom} <= 0: window exponents blow up (subcritical)")
    beta = (p + m - 2.0) / (p - 1.0)
    theta = (2.0 * 0.5) ** (3.0 - m - p)
    w_n = unit_ball_measure(dim_n)
    base = nu * w_n / (4.0 * gamma)
    rho0 = base ** ((3.0 - m - p) / denom)
    eta1 = base ** (p / denom)
    eta_star = eta_dnl * eta1
    return ProofConstants(gamma_harnack=gamma, beta=beta, theta=theta, nu=nu,
                          rho0=rho0, eta1=eta1, eta_star=eta_star,
                          eps0=eta_star / 2.0, eta_dnl=eta_dnl, w_n=w_n)


def _require_nonnegative(field: SpaceTimeField):
    if field.values.min() < 0.0:
        raise PreconditionError("check requires a non-negative field")


def _require_ball_margin(grid: Grid, center, radius: float, what: str):
    center = np.atleast_1d(np.asarray(center, dtype=float))
    L = grid.domain_half_width
    if any(abs(c) + radius > L for c in center):
        raise DomainError(f"{what}: ball of radius {radius} around {tuple(center)} "
                          f"leaves the domain cube of half-width {L}")


def _snap_slice(field: SpaceTimeField, t: float, what: str) -> int:
    rel = (t - field.t_origin) / field.grid.dt
    idx = int(round(rel))
    if abs(rel - idx) > 1e-9 * max(1.0, abs(rel)):
        raise RangeError(f"{what}={t} is not on a grid time slice")
    if not 0 <= idx <= field.grid.n_steps:
        raise RangeError(f"{what}={t} lies outside the field's time range")
    return idx


def _ball_integrals(field: SpaceTimeField, center, radius: float,
                    k_lo: int, k_hi: int) -> np.ndarray:
    mask = ball_mask(field.grid, center, radius)
    if not mask.any():
        raise EmptyCylinder(f"ball of radius {radius} holds no grid node")
    vol = field.grid.cell_volume()
    return np.array([field.values[k][mask].sum() * vol for k in range(k_lo, k_hi + 1)])


def check_integral_harnack_p(field: SpaceTimeField, center, rho: float,
                             t0_time: float, t1_time: float,
                             gamma_cap: float = math.inf) -> CheckReport:
    """Sup-in-time mass on a ball against inf-in-time mass on the doubled
    ball plus the intrinsic remainder ((t1-t0)/rho^(N(p-2)+p))^(1/(2-p)).

    Reports the smallest constant gamma_min = S / (I + R) making the
    comparison true; passes while gamma_min stays at or below gamma_cap
    (infinite by default: report-only)."""
    _require_nonnegative(field)
    grid = field.grid
    _require_ball_margin(grid, center, 4.0 * rho, "integral comparison (gradient)")
    if not t1_time > t0_time:
        raise RangeError("t1_time must exceed t0_time")
    k0 = _snap_slice(field, t0_time, "t0_time")
    k1 = _snap_slice(field, t1_time, "t1_time")
    p, n = field.params.p, grid.dim_n
    sup_small = _ball_integrals(field, center, rho, k0, k1).max()
    inf_large = _ball_integrals(field, center, 2.0 * rho, k0, k1).min()
    remainder = ((t1_time - t0_time) / rho ** (n * (p - 2.0) + p)) ** (1.0 / (2.0 - p))
    gamma_min = _safe_ratio(sup_small, inf_large + remainder)
    return CheckReport(
        check_name="integral_harnack_p",
        hypothesis_satisfied=True,
        conclusion_satisfied=bool(gamma_min <= gamma_cap),
        measured_constants={"sup_int_small_ball": float(sup_small),
                            "inf_int_large_ball": float(inf_large),
                            "remainder": float(remainder),
                            "gamma_min": float(gamma_min),
                            "rho": rho, "t0_time": t0_time, "t1_time": t1_time})


def check_integral_harnack_dnl(field: SpaceTimeField, center, rho: float,
                               s_time: float, T_time: float,
                               gamma_cap: float = math.inf) -> CheckReport:
    """Doubly nonlinear integral comparison with remainder
    ((T-s)/rho^p)^(1/(3-m-p)) rho^N."""
    _require_nonnegative(field)
    grid = field.grid
    _require_ball_margin(grid, center, 2.0 * rho, "integral comparison (DNL)")
    if not T_time > s_time:
        raise RangeError("T_time must exceed s_time")
    k0 = _snap_slice(field, s_time, "s_time")
    k1 = _snap_slice(field, T_time, "T_time")
    p, m, n = field.params.p, field.params.m, grid.dim_n
    sup_small = _ball_integrals(field, center, rho, k0, k1).max()
    inf_large = _ball_integrals(field, center, 2.0 * rho, k0, k1).min()
    remainder = ((T_time - s_time) / rho ** p) ** (1.0 / (3.0 - m - p)) * rho ** n
    gamma_min = _safe_ratio(sup_small, inf_large + remainder)
    return CheckReport(
        check_name="integral_harnack_dnl",
        hypothesis_satisfied=True,
        conclusion_satisfied=bool(gamma_min <= gamma_cap),
        measured_constants={"sup_int_small_ball": float(sup_small),
                            "inf_int_large_ball": float(inf_large),
                            "remainder": float(remainder),
                            "gamma_min": float(gamma_min),
                            "rho": rho, "s_time": s_time, "T_time": T_time})


def _safe_ratio(num: float, den: float) -> float:
    if num == 0.0:
        return 0.0
    if den == 0.0:
        return math.inf
    return num / den


def check_expansion_positivity_p(field: SpaceTimeField, y, rho: float,
                                 s_time: float, M: float, alpha_measure: float,
                                 eps: float, m_expand: int = 1) -> CheckReport:
    """Measure-to-pointwise positivity expansion for the gradient equation.

    Hypothesis: on every slice of the closed window of intrinsic depth
    eps M^(2-p) rho^p below s, the set {u(., t) > M} fills strictly more
    than alpha of the nodes of B_rho(y). Conclusion: the largest positive
    floor sigma_hat with u >= sigma_hat M on B_(m rho)(y) over the largest
    half-open discrete sub-window of depth at most half the hypothesis
    window; passes when sigma_hat > 0.
    """
    _require_nonnegative(field)
    if M <= 0.0:
        raise RangeError("M must be positive")
    grid = field.grid
    p = field.params.p
    window = eps * M ** (2.0 - p) * rho ** p
    _require_ball_margin(grid, y, 8.0 * m_expand * rho, "positivity expansion")
    if s_time - window < field.t_origin or s_time > field.final_time:
        raise DomainError("hypothesis window leaves the field's time range")

    times = field.slice_times()
    hyp_idx = np.nonzero((times >= s_time - window) & (times <= s_time))[0]
    if hyp_idx.size == 0:
        raise EmptyCylinder("hypothesis window covers no slice")
    fractions = np.array([slice_level_fraction(field, y, rho, times[k], M)
                          for k in hyp_idx])
    hyp_ok = bool((fractions > alpha_measure).all())
    constants = {"min_slice_fraction": float(fractions.min()),
                 "alpha_measure": alpha_measure, "M": M, "eps": eps,
                 "m_expand": m_expand, "rho": rho}
    if not hyp_ok:
        return CheckReport("expansion_positivity_p", False, False, constants)

    half = 0.5 * window
    concl_idx = hyp_idx[times[hyp_idx] > s_time - half]
    if concl_idx.size == 0:
        raise EmptyCylinder("conclusion half-window covers no slice")
    mask = ball_mask(grid, y, m_expand * rho)
    if not mask.any():
        raise EmptyCylinder("conclusion ball holds no grid node")
    mins = np.array([field.values[k][mask].min() for k in concl_idx])
    sigma_hat, eps_star_hat = 0.0, 0.0
    for j in range(mins.size, 0, -1):
        floor = mins[-j:].min()
        if floor > 0.0:
            sigma_hat = floor / M
            eps_star_hat = min(0.5 * eps,
                               (s_time - times[concl_idx[-j]] + grid.dt)
                               / (M ** (2.0 - p) * rho ** p))
            break
    constants.update({"sigma_hat": float(sigma_hat),
                      "eps_star_hat": float(eps_star_hat)})
    return CheckReport("expansion_positivity_p", True, bool(sigma_hat > 0.0),
                       constants)


def check_expansion_positivity_dnl(field: SpaceTimeField, x0, rho: float,
                                   s_time: float, M: float,
                                   alpha_measure: float, delta: float,
                                   eps: float) -> CheckReport:
    """Forward-in-time positivity expansion for the doubly nonlinear equation.

    Hypothesis: at the single slice s, {u(., s) >= M} fills at least alpha
    of B_rho(x0). Conclusion: the largest floor eta_hat with u >= eta_hat M
    on B_(2 rho)(x0) over the trailing part of the forward window of length
    delta M^(3-m-p) rho^p; passes when eta_hat > 0.
    """
    _require_nonnegative(field)
    if M <= 0.0:
        raise RangeError("M must be positive")
    grid = field.grid
    m_exp = 3.0 - field.params.m - field.params.p
    window = delta * M ** m_exp * rho ** field.params.p
    _require_ball_margin(grid, x0, 16.0 * rho, "positivity expansion (DNL)")
    if s_time < field.t_origin or s_time + window > field.final_time:
        raise DomainError("forward window leaves the field's time range")
    k_s = _snap_slice(field, s_time, "s_time")

    mask_small = ball_mask(grid, x0, rho)
    if not mask_small.any():
        raise EmptyCylinder("hypothesis ball holds no grid node")
    fraction = int((field.values[k_s][mask_small] >= M).sum()) / int(mask_small.sum())
    hyp_ok = bool(fraction >= alpha_measure)
    constants = {"slice_fraction": float(fraction), "alpha_measure": alpha_measure,
                 "M": M, "delta": delta, "eps": eps, "rho": rho}
    if not hyp_ok:
        return CheckReport("expansion_positivity_dnl", False, False, constants)

    times = field.slice_times()
    t_lo = s_time + (1.0 - eps) * window
    t_hi = s_time + window
    concl_idx = np.nonzero((times > t_lo) & (times <= t_hi))[0]
    if concl_idx.size == 0:
        raise EmptyCylinder("conclusion window covers no slice")
    mask_big = ball_mask(grid, x0, 2.0 * rho)
    floor = min(field.values[k][mask_big].min() for k in concl_idx)
    eta_hat = max(0.0, floor / M)
    constants["eta_hat"] = float(eta_hat)
    return CheckReport("expansion_positivity_dnl", True, bool(eta_hat > 0.0),
                       constants)


def check_critical_mass_dnl(field: SpaceTimeField, center, top_time: float,
                            rho: float, theta: float, M: float,
                            nu: float) -> CheckReport:
    """Small-level-set implies strict sup bound on the half cylinder.

    Precondition: sup over Q_rho(theta) at most 2M. Hypothesis: the node
    fraction of {u > M} in Q_rho(theta) is at most nu / (theta M^(m+p-3)).
    Conclusion: sup over Q_(rho/2)(theta) at most (3/2)^(1/beta) M.
    """
    if M <= 0.0:
        raise RangeError("M must be positive")
    p, m = field.params.p, field.params.m
    beta = field.params.beta
    q_full = Cylinder(center, top_time, rho, theta * rho ** p)
    sup_full = ess_sup(field, q_full)
    if sup_full > 2.0 * M:
        raise PreconditionError(
            f"sup over the cylinder is {sup_full}, above the required 2M = {2.0 * M}")
    fraction = level_set_fraction(field, q_full, M, ABOVE)
    threshold = nu / (theta * M ** (m + p - 3.0))
    hyp_ok = bool(fraction <= threshold)
    q_half = Cylinder(center, top_time, 0.5 * rho, theta * (0.5 * rho) ** p)
    sup_half = ess_sup(field, q_half)
    bound = (1.5) ** (1.0 / beta) * M
    constants = {"level_fraction": float(fraction), "fraction_threshold": float(threshold),
                 "sup_full": float(sup_full), "sup_half": float(sup_half),
                 "conclusion_bound": float(bound), "M": M, "nu": nu, "theta": theta}
    if not hyp_ok:
        return CheckReport("critical_mass_dnl", False, False, constants)
    return CheckReport("critical_mass_dnl", True, bool(sup_half <= bound), constants)


def classify_alternative(field_normalized: SpaceTimeField, q: Cylinder,
                         threshold: float, nu: float) -> str:
    """Decide which side of the measure alternative a normalized field is on.

    Gradient equation: the top slice of q, on the ball of half its radius;
    mostly-above needs the node fraction of {v > threshold} to exceed 1/2
    strictly. Doubly nonlinear: the space-time fraction of {v >= threshold}
    over all of q, compared against nu (non-strict).
    """
    if field_normalized.params.equation == P_LAPLACIAN:
        frac = slice_level_fraction(field_normalized, q.center_x, 0.5 * q.radius,
                                    q.top_time, threshold)
        return MOSTLY_ABOVE if frac > 0.5 else MOSTLY_BELOW
    ks, mask = cylinder_points(field_normalized, q)
    vals = field_normalized.values[ks][:, mask]
    frac = int((vals >= threshold).sum()) / vals.size
    return MOSTLY_ABOVE if frac >= nu else MOSTLY_BELOW
