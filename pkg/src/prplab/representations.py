"""Assembly of the integral representations of Y^h and their residuals.

Y^h is the martingale E(h at the random time | enlarged filtration),
known in closed form as H*h_tau + (1-H)*X^h/Z.  Each formula rebuilds Y^h
as Y0 plus stochastic integrals against the compensated indicator, the
(stopped) compensated Poisson martingale and, where needed, the
h-dependent pure-jump martingale Mtilde.  Because the residual tolerance
is machine-level, every term is assembled with exact segment primitives:

* In both Cox models all integrands are functions of the pre-jump state,
  hence constant on open grid segments.
* In the independent-time model the integrand of the compensated-
  indicator term varies continuously between events; there its segment
  contribution equals the increment of X^h/Z, which the formulas'
  drift parts reproduce exactly (d(X/Z) = (h - X/Z) dMtau on continuous
  stretches when Z = 1 - Ap).

NAIVE is a deliberate negative control: the same assembly as EQC3 but
with the Z_-/(Z_- - dAp) jump factor dropped, which must fail on paths
where the time hits a distribution atom.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .path_engine import PwProcess, bracket, integrate_arrays, pw_constant, pw_from_increments
from .random_time import Scenario
from . import solvers
from .solvers import GAMMA, StateFunction, TimeFunction
from .models import (
    COX_INTENSITY,
    COX_POISSON,
    INDEPENDENT,
    FiltrationBundle,
    ModelSpec,
    build_bundle,
    make_scenario,
)

__all__ = [
    "FORMULAS",
    "ResidualReport",
    "PayoffBundle",
    "payoff_bundle",
    "closed_form_Y",
    "assemble",
    "residual",
    "residual_batch",
    "applicable",
    "applicability_reason",
    "orthogonality_check",
    "equa1_check",
    "equa1_sides",
    "j3_check",
    "mart_sign_check",
    "mtilde",
]

EQ3 = "EQ3"
EQC3 = "EQC3"
XEQ3 = "XEQ3"
XEQ3A = "XEQ3A"
AXX33 = "AXX33"
CXX33 = "CXX33"
REP1 = "REP1"
REP2 = "REP2"
REP3 = "REP3"
THM = "THM"
CORFIN = "CORFIN"
J3 = "J3"
NAIVE = "NAIVE"

FORMULAS = (EQ3, EQC3, XEQ3, XEQ3A, AXX33, CXX33, REP1, REP2, REP3, THM, CORFIN, J3, NAIVE)


def applicability_reason(formula: str, model: ModelSpec, h) -> str | None:
    """None when the formula applies; otherwise a short reason string."""
    if formula not in FORMULAS:
        return f"unknown formula {formula!r}"
    if not model.admissible_h(h):
        return "payoff type not admissible for this model"
    kind = model.kind
    if formula in (EQ3, EQC3, XEQ3, XEQ3A):
        if kind == COX_POISSON:
            return "needs a predictable survival process (martingale part of Z constant)"
    elif formula in (AXX33, CXX33, REP3):
        if kind != COX_POISSON:
            return "needs the counting-hazard model (time lands on Poisson jumps)"
    elif formula == REP1:
        if kind == COX_POISSON:
            return "needs a time avoiding all Poisson jumps"
        if kind == INDEPENDENT and model.cdf.atoms:
            return "needs a continuous compensator (no distribution atoms)"
    elif formula in (REP2, NAIVE):
        if kind != INDEPENDENT:
            return "needs a time independent of the Poisson path"
    return None


def applicable(formula: str, model: ModelSpec, h) -> bool:
    return applicability_reason(formula, model, h) is None


@dataclass
class PayoffBundle:
    """All h-dependent arrays and processes of one scenario.

    ``ratio_*`` are views of X^h/Z (segment constants, left limits at
    breakpoints, right values at breakpoints); ``psis_*`` is phi^h/Z_-,
    ``psi2_*`` is (phi^h - phi X_-/Z_-)/(Z_- + phi) and ``kappa_star_*``
    is kappa^h/Z_-, each in the algebraically cancelled form that stays
    piecewise constant in floating point.
    """

    h: object
    h_seg: np.ndarray
    h_jump: np.ndarray
    ratio_seg: np.ndarray
    ratio_left: np.ndarray
    ratio_vals: np.ndarray
    shift_seg: np.ndarray | None
    shift_jump: np.ndarray | None
    psis_seg: np.ndarray
    psis_jump: np.ndarray
    psi2_seg: np.ndarray
    psi2_jump: np.ndarray
    kappa_star_seg: np.ndarray
    kappa_star_jump: np.ndarray
    onezp_seg: np.ndarray
    onezp_jump: np.ndarray
    zfrac_jump: np.ndarray
    Xh: PwProcess
    mu_h: PwProcess
    Y0: float
    h_tau: float | None
    xi: float


def payoff_bundle(b: FiltrationBundle, h) -> PayoffBundle:
    scn = b.scenario
    model = b.model
    grid = scn.grid
    times = grid.times
    n_seg = scn.seg_state["N"]
    n_left = scn.jump_state["N"]
    zeros_seg = np.zeros(grid.n_seg)
    zeros_j = np.zeros_like(times)

    if model.kind == COX_POISSON:
        table = solvers.htilde_table(h)
        h_seg, h_jump = h(n_seg), h(n_left)
        ratio_seg, ratio_left, ratio_vals = table(n_seg), table(n_left), table(scn.N.vals)
        shift_seg, shift_jump = table(n_seg + 1.0), table(n_left + 1.0)
        z_seg = b.Z.vals[:-1]
        xh_vals = ratio_vals * b.Z.vals
        Xh = PwProcess(grid, xh_vals, xh_vals - ratio_left * b.Z_left)
        mu_h = Xh + pw_from_increments(grid, h_seg * b.Ap.drift_increments, zeros_j, 0.0)
        coef_seg = (1.0 - GAMMA) * shift_seg - ratio_seg
        coef_jump = (1.0 - GAMMA) * shift_jump - ratio_left
        psis_seg, psis_jump = coef_seg, coef_jump
        psi2_seg = (coef_seg + GAMMA * ratio_seg) / (1.0 - GAMMA)
        psi2_jump = (coef_jump + GAMMA * ratio_left) / (1.0 - GAMMA)
        kappa_star_seg = -GAMMA * ratio_seg - coef_seg
        kappa_star_jump = -GAMMA * ratio_left - coef_jump
        onezp_seg = np.exp(n_seg) / (1.0 - GAMMA)
        onezp_jump = np.exp(n_left) / (1.0 - GAMMA)
        zfrac_jump = np.full_like(times, 1.0 / (1.0 - GAMMA))
    elif model.kind == COX_INTENSITY:
        table = solvers.g_kernel(model.intensities, h, model.lam)
        h_seg, h_jump = h(n_seg), h(n_left)
        ratio_seg, ratio_left, ratio_vals = table(n_seg), table(n_left), table(scn.N.vals)
        shift_seg, shift_jump = table(n_seg + 1.0), table(n_left + 1.0)
        xh_vals = ratio_vals * b.Z.vals
        Xh = PwProcess(grid, xh_vals, xh_vals - ratio_left * b.Z_left)
        mu_h = Xh + pw_from_increments(grid, h_seg * b.Ap.drift_increments, zeros_j, 0.0)
        psis_seg = shift_seg - ratio_seg
        psis_jump = shift_jump - ratio_left
        psi2_seg, psi2_jump = psis_seg, psis_jump
        kappa_star_seg, kappa_star_jump = zeros_seg, zeros_j.copy()
        onezp_seg = np.exp(b.Lam.vals[:-1])
        onezp_jump = np.exp(b.Lam.left_limits)
        zfrac_jump = np.ones_like(times)
    else:
        curve = solvers.det_payoff_curve(h, model.cdf)
        h_seg = h.value_after(times[:-1])
        h_jump = h.value(times)
        x_right = curve.value(times, "right")
        x_left = curve.value(times, "left")
        ratio_vals = np.where(b.Z.vals > 0.0, x_right / np.where(b.Z.vals > 0.0, b.Z.vals, 1.0), 0.0)
        ratio_left = np.where(b.Z_left > 0.0, x_left / np.where(b.Z_left > 0.0, b.Z_left, 1.0), 0.0)
        ratio_seg = ratio_vals[:-1]
        shift_seg = shift_jump = None
        Xh = PwProcess(grid, x_right, x_right - x_left)
        mu_h = pw_constant(grid, float(curve.value(np.array(0.0), "right")))
        psis_seg, psis_jump = zeros_seg, zeros_j.copy()
        psi2_seg, psi2_jump = zeros_seg, zeros_j.copy()
        kappa_star_seg, kappa_star_jump = zeros_seg, zeros_j.copy()
        onezp_jump = np.where(b.Z_left > 0.0, 1.0 / np.where(b.Z_left > 0.0, b.Z_left, 1.0), 0.0)
        onezp_seg = onezp_jump[:-1]
        zfrac_jump = np.ones_like(times)

    idx = scn.tau_idx
    if idx is not None:
        if isinstance(h, TimeFunction):
            h_tau = float(h.value(times[idx]))
        else:
            h_tau = float(h(n_left[idx]))
        xi = float(b.mu.jumps[idx] * ratio_left[idx] - mu_h.jumps[idx])
    else:
        h_tau, xi = None, 0.0

    return PayoffBundle(
        h=h,
        h_seg=np.broadcast_to(np.asarray(h_seg, dtype=float), (grid.n_seg,)),
        h_jump=np.broadcast_to(np.asarray(h_jump, dtype=float), times.shape),
        ratio_seg=ratio_seg,
        ratio_left=ratio_left,
        ratio_vals=ratio_vals,
        shift_seg=shift_seg,
        shift_jump=shift_jump,
        psis_seg=psis_seg,
        psis_jump=psis_jump,
        psi2_seg=psi2_seg,
        psi2_jump=psi2_jump,
        kappa_star_seg=kappa_star_seg,
        kappa_star_jump=kappa_star_jump,
        onezp_seg=onezp_seg,
        onezp_jump=onezp_jump,
        zfrac_jump=zfrac_jump,
        Xh=Xh,
        mu_h=mu_h,
        Y0=float(ratio_vals[0]),
        h_tau=h_tau,
        xi=xi,
    )


def closed_form_Y(b: FiltrationBundle, pb: PayoffBundle) -> PwProcess:
    """Y^h = H*h_tau + (1-H)*X^h/Z, frozen at the random time."""
    grid = b.scenario.grid
    yvals = pb.ratio_vals.copy()
    ylefts = pb.ratio_left.copy()
    ylefts[0] = yvals[0]
    idx = b.scenario.tau_idx
    if idx is not None:
        yvals[idx:] = pb.h_tau
        ylefts[idx + 1 :] = pb.h_tau
    jumps = yvals - ylefts
    jumps[0] = 0.0
    return PwProcess(grid, yvals, jumps)


def _pre_masks(b: FiltrationBundle):
    scn = b.scenario
    return 1.0 - scn.H.vals[:-1], 1.0 - scn.H.left_limits


def _mtau_jump_psi(b: FiltrationBundle, pb: PayoffBundle, mode: str) -> np.ndarray:
    if mode == "factor":
        denom = b.Z_left - b.Ap.jumps
        fac = np.where(denom > 0.0, b.Z_left / np.where(denom > 0.0, denom, 1.0), 0.0)
        return fac * (pb.h_jump - pb.ratio_left)
    if mode == "right":
        return pb.h_jump - pb.ratio_vals
    if mode == "naive":
        return pb.h_jump - pb.ratio_left
    if mode == "shift":
        return pb.h_jump - pb.shift_jump
    raise ValueError(mode)


def _mtau_term(b: FiltrationBundle, pb: PayoffBundle, jump_mode: str,
               seg_extra: np.ndarray | None = None) -> PwProcess:
    """Integral of the formula's indicator-term against the compensated
    indicator, with exact segment primitives per model."""
    psi_jump = _mtau_jump_psi(b, pb, jump_mode)
    if seg_extra is not None:
        psi_jump = psi_jump + pb.kappa_star_jump * b.Z_left * pb.onezp_jump
    jumps = psi_jump * b.Mtau.jumps
    pre_seg, _ = _pre_masks(b)
    if b.model.kind == INDEPENDENT:
        drift = pre_seg * (pb.ratio_left[1:] - pb.ratio_vals[:-1])
    else:
        if jump_mode == "shift":
            psi_seg = pb.h_seg - pb.shift_seg
        else:
            psi_seg = pb.h_seg - pb.ratio_seg
        if seg_extra is not None:
            psi_seg = psi_seg + seg_extra
        drift = psi_seg * b.Mtau.drift_increments
    return pw_from_increments(b.scenario.grid, drift, jumps, 0.0)


def _pred_term(b: FiltrationBundle, psi_seg, psi_jump, X: PwProcess,
               premask: bool = True) -> PwProcess:
    pre_seg, pre_jump = _pre_masks(b)
    if premask:
        psi_seg = psi_seg * pre_seg
        psi_jump = psi_jump * pre_jump
    return integrate_arrays(psi_seg, psi_jump, X)


def mtilde(b: FiltrationBundle, pb: PayoffBundle) -> PwProcess:
    """Pure-jump martingale xi*H compensated through kappa against Ap."""
    grid = b.scenario.grid
    pre_seg, pre_jump = _pre_masks(b)
    drift = -pre_seg * pb.kappa_star_seg * b.Ap.drift_increments
    jumps = pb.xi * b.scenario.H.jumps - pre_jump * pb.kappa_star_jump * b.Ap.jumps
    return pw_from_increments(grid, drift, jumps, 0.0)


def _muh_term(b: FiltrationBundle, pb: PayoffBundle) -> PwProcess:
    """(1-H_-)/Z_- against d(mu^h), with exact cancelled segment values."""
    pre_seg, pre_jump = _pre_masks(b)
    grid = b.scenario.grid
    if b.model.kind == COX_INTENSITY:
        dt = np.diff(grid.times)
        a_seg = _a_of(b, b.scenario.seg_state["N"])
        drift = pre_seg * a_seg * (pb.h_seg - pb.ratio_seg) * dt
    elif b.model.kind == INDEPENDENT:
        drift = np.zeros(grid.n_seg)
    else:
        drift = pre_seg * pb.psis_seg * b.M.drift_increments
    jump_psi = np.where(b.Z_left > 0.0, 1.0 / np.where(b.Z_left > 0.0, b.Z_left, 1.0), 0.0)
    jumps = pre_jump * jump_psi * pb.mu_h.jumps
    return pw_from_increments(grid, drift, jumps, 0.0)


def _a_of(b: FiltrationBundle, x) -> np.ndarray:
    a = np.asarray(b.model.intensities, dtype=float)
    return a[np.minimum(np.asarray(x), a.size - 1).astype(int)]


def _thm_term3(b: FiltrationBundle, pb: PayoffBundle) -> PwProcess:
    mt = mtilde(b, pb)
    return integrate_arrays(pb.onezp_seg, pb.onezp_jump, mt)


def _corfin_optional_jump(b: FiltrationBundle, pb: PayoffBundle) -> PwProcess:
    """Single jump at tau carrying (xi - kappa_tau) with the optional-
    integral weight; identically zero in all supported models."""
    grid = b.scenario.grid
    jumps = np.zeros_like(grid.times)
    idx = b.scenario.tau_idx
    if idx is not None:
        dmt = b.Mtau.jumps[idx]
        zl = b.Z_left[idx]
        dap = b.Ap.jumps[idx]
        if dmt != 0.0:
            weight = (dmt * zl + dap) / (dmt * (zl + dap))
            kappa_tau = pb.kappa_star_jump[idx] * zl
            jumps[idx] = weight * (pb.xi - kappa_tau) * pb.onezp_jump[idx] * dmt
    return pw_from_increments(grid, np.zeros(grid.n_seg), jumps, 0.0)


def _assemble(formula: str, b: FiltrationBundle, pb: PayoffBundle) -> PwProcess:
    if formula == J3:
        corr_br = bracket(b.M, b.m)
        inv = np.where(b.Z_left > 0.0, 1.0 / np.where(b.Z_left > 0.0, b.Z_left, 1.0), 0.0)
        pre_seg, pre_jump = _pre_masks(b)
        corr = integrate_arrays(inv[:-1] * pre_seg, inv * pre_jump, corr_br)
        stopped = (
            b.M.stopped_at(b.scenario.tau_idx) if b.scenario.tau_idx is not None else b.M
        )
        return stopped - corr
    y0 = pb.Y0
    if formula == EQ3:
        return _mtau_term(b, pb, "right") + _muh_term(b, pb) + y0
    if formula == EQC3:
        return _mtau_term(b, pb, "factor") + _muh_term(b, pb) + y0
    if formula == XEQ3:
        t2 = _pred_term(b, pb.psis_seg, pb.psis_jump, b.M)
        return _mtau_term(b, pb, "right") + t2 + y0
    if formula == XEQ3A:
        t2 = _pred_term(b, pb.psis_seg, pb.psis_jump, b.M)
        return _mtau_term(b, pb, "factor") + t2 + y0
    if formula == AXX33:
        t1 = _mtau_term(b, pb, "shift")
        t2 = _pred_term(b, pb.shift_seg - pb.ratio_seg, pb.shift_jump - pb.ratio_left, b.M)
        return t1 + t2 + y0
    if formula == CXX33:
        t1 = _mtau_term(b, pb, "naive")
        t2 = _pred_term(
            b, pb.shift_seg - pb.ratio_seg, pb.shift_jump - pb.ratio_left, b.M - b.Mtau
        )
        return t1 + t2 + y0
    if formula == REP1:
        t1 = _mtau_term(b, pb, "naive")
        t2 = _pred_term(b, pb.psi2_seg, pb.psi2_jump, b.Mhat)
        return t1 + t2 + y0
    if formula == REP2:
        t1 = _mtau_term(b, pb, "factor")
        t2 = _pred_term(b, pb.psis_seg, pb.psis_jump, b.Mhat)
        return t1 + t2 + y0
    if formula == REP3:
        t1 = _mtau_term(b, pb, "factor")
        t2 = _pred_term(b, pb.psi2_seg, pb.psi2_jump, b.Mhat - b.Mtau)
        return t1 + t2 + y0
    if formula == THM:
        t1 = _mtau_term(b, pb, "factor")
        t2 = _pred_term(b, pb.psi2_seg, pb.psi2_jump, b.Mhat)
        t3 = _thm_term3(b, pb)
        return t1 + t2 + t3 + y0
    if formula == CORFIN:
        seg_extra = pb.kappa_star_seg * b.Z.vals[:-1] * pb.onezp_seg
        t1 = _mtau_term(b, pb, "factor", seg_extra=seg_extra)
        t2 = _pred_term(b, pb.psi2_seg, pb.psi2_jump, b.Mhat)
        return t1 + t2 + _corfin_optional_jump(b, pb) + y0
    if formula == NAIVE:
        return _mtau_term(b, pb, "naive") + _muh_term(b, pb) + y0
    raise ValueError(f"unknown formula {formula!r}")


def assemble(formula: str, model: ModelSpec, scn: Scenario, h) -> PwProcess:
    reason = applicability_reason(formula, model, h)
    if reason is not None:
        raise ValueError(f"{formula} not applicable: {reason}")
    b = build_bundle(model, scn)
    pb = payoff_bundle(b, h)
    return _assemble(formula, b, pb)


@dataclass
class ResidualReport:
    formula: str
    model: str
    h_name: str
    n_paths: int
    batch_max: float
    batch_mean: float
    tolerance: float
    passed: bool


def _target(formula: str, b: FiltrationBundle, pb: PayoffBundle, y: PwProcess) -> PwProcess:
    if formula == J3:
        return b.Mhat
    return y


def residual(formula: str, model: ModelSpec, scn: Scenario, h) -> float:
    """Per-path max absolute gap between the assembly and its target."""
    b = build_bundle(model, scn)
    pb = payoff_bundle(b, h)
    y = closed_form_Y(b, pb)
    assembled = _assemble(formula, b, pb)
    return (assembled - _target(formula, b, pb, y)).max_abs()


def residual_batch(
    model: ModelSpec,
    h,
    formulas,
    n_paths: int,
    horizon: float,
    master_seed: int,
    tolerance: float = 1e-9,
    extra_times=(),
) -> dict:
    """One sweep over scenarios accumulating residual statistics per formula."""
    formulas = [f for f in formulas]
    for f in formulas:
        reason = applicability_reason(f, model, h)
        if reason is not None:
            raise ValueError(f"{f} not applicable: {reason}")
    batch_max = {f: 0.0 for f in formulas}
    batch_sum = {f: 0.0 for f in formulas}
    for i in range(n_paths):
        scn = make_scenario(model, horizon, master_seed, i, extra_times)
        b = build_bundle(model, scn)
        pb = payoff_bundle(b, h)
        y = closed_form_Y(b, pb)
        for f in formulas:
            r = (_assemble(f, b, pb) - _target(f, b, pb, y)).max_abs()
            if r > batch_max[f]:
                batch_max[f] = r
            batch_sum[f] += r
    out = {}
    for f in formulas:
        out[f] = ResidualReport(
            formula=f,
            model=model.label,
            h_name=getattr(h, "name", "h"),
            n_paths=n_paths,
            batch_max=batch_max[f],
            batch_mean=batch_sum[f] / n_paths,
            tolerance=tolerance,
            passed=batch_max[f] <= tolerance,
        )
    return out


def orthogonality_check(b: FiltrationBundle) -> bool:
    """Jump products of the compensated indicator against Mhat - Mtau."""
    return bracket(b.Mtau, b.Mbar).max_abs() == 0.0


def equa1_check(b: FiltrationBundle, pb: PayoffBundle, which: str) -> float:
    """Residual of the projection identity for X in {M, mu^h}.

    Left side integrates the dual predictable projection of the jump of X
    at the random time (via its predictable density kappa_X against Ap);
    right side integrates the predictable bracket of X against the
    martingale part of Z.  Both vanish in avoidance models.
    """
    lhs, rhs = equa1_sides(b, pb, which)
    return (lhs - rhs).max_abs()


def equa1_sides(b: FiltrationBundle, pb: PayoffBundle, which: str):
    grid = b.scenario.grid
    pre_seg, _ = _pre_masks(b)
    z_seg = b.Z.vals[:-1]
    zinv = np.where(z_seg > 0.0, 1.0 / np.where(z_seg > 0.0, z_seg, 1.0), 0.0)
    overlap = b.model.has_jump_overlap
    if which == "M":
        kappa_x = np.ones(grid.n_seg) if overlap else np.zeros(grid.n_seg)
        phi_x = np.ones(grid.n_seg)
    elif which == "muh":
        kappa_x = pb.psis_seg * z_seg if overlap else np.zeros(grid.n_seg)
        phi_x = pb.psis_seg * z_seg
    else:
        raise ValueError(which)
    dt = np.diff(grid.times)
    zeros_j = np.zeros_like(grid.times)
    lhs = pw_from_increments(
        grid, pre_seg * zinv * kappa_x * b.Ap.drift_increments, zeros_j, 0.0
    )
    rhs = pw_from_increments(
        grid, -pre_seg * zinv * phi_x * b.phi_seg * b.model.lam * dt, zeros_j, 0.0
    )
    return lhs, rhs


def j3_check(b: FiltrationBundle) -> float:
    """Gap between the optional decomposition of the stopped compensated
    Poisson martingale and its predictable decomposition (both collapse
    to the plain stopped martingale here)."""
    pb = None
    j3 = _assemble(J3, b, pb)
    return (j3 - b.Mhat).max_abs()


def mart_sign_check(b: FiltrationBundle, pb: PayoffBundle):
    """Compare Mtilde from its definition against both signings of the
    regrouped form (xi - kappa_tau)*H +/- integral of kappa dMtau.

    Returns (residual_plus, residual_minus, resolved_sign).
    """
    grid = b.scenario.grid
    mdef = mtilde(b, pb)
    kappa_seg = pb.kappa_star_seg * b.Z.vals[:-1]
    kappa_jump = pb.kappa_star_jump * b.Z_left
    integral = integrate_arrays(kappa_seg, kappa_jump, b.Mtau)
    jumps = np.zeros_like(grid.times)
    idx = b.scenario.tau_idx
    if idx is not None:
        jumps[idx] = pb.xi - kappa_jump[idx]
    head = pw_from_increments(grid, np.zeros(grid.n_seg), jumps, 0.0)
    r_plus = (mdef - (head + integral)).max_abs()
    r_minus = (mdef - (head - integral)).max_abs()
    sign = "+" if r_plus <= r_minus else "-"
    return r_plus, r_minus, sign
