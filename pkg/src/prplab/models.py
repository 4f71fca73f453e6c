"""Model families and their filtration-theoretic processes.

Three families of random times over a Poisson reference filtration are
supported, each with every process built in closed form on the scenario
grid: the survival process Z, its predictable (Doob-Meyer) and optional
decompositions, the compensated indicator, the stopped compensated
Poisson martingale, and the representation integrands phi / phi^h.

* CoxPoisson: the cumulative hazard is the Poisson count itself, so the
  time always lands on a Poisson jump and Z = exp(-N) jumps with N.
* CoxIntensity: the hazard accrues at a state-dependent rate a(N), so Z
  is continuous (piecewise log-linear) and the time avoids all jumps.
* IndependentTau: the time is drawn from an explicit distribution
  independent of the path; Z is deterministic and may carry atoms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .path_engine import (
    EventGrid,
    JumpPath,
    PwProcess,
    pw_constant,
    pw_from_increments,
    sample_poisson_path,
)
from .random_time import (
    CdfSpec,
    RandomTimeSample,
    Scenario,
    cox_time,
    independent_time,
    scenario_streams,
)
from . import solvers
from .solvers import GAMMA, StateFunction, TimeFunction

__all__ = [
    "GAMMA",
    "ModelSpec",
    "FiltrationBundle",
    "make_scenario",
    "build_bundle",
    "azema_Z",
    "doob_meyer",
    "optional_parts",
    "compensated_indicator",
    "mhat",
    "phi_integrands",
]

COX_POISSON = "cox_poisson"
COX_INTENSITY = "cox_intensity"
INDEPENDENT = "independent"


@dataclass(frozen=True)
class ModelSpec:
    """Tagged random-time model over a rate-lam Poisson filtration."""

    kind: str
    lam: float = 1.0
    intensities: tuple = ()
    cdf: CdfSpec | None = None

    def __post_init__(self):
        if self.lam < 0.0 or not math.isfinite(self.lam):
            raise ValueError("lam must be finite and >= 0")
        if self.kind == COX_POISSON:
            pass
        elif self.kind == COX_INTENSITY:
            a = tuple(float(v) for v in self.intensities)
            if len(a) == 0 or any(v < 0.0 for v in a):
                raise ValueError("intensities must be a nonempty tuple of reals >= 0")
            object.__setattr__(self, "intensities", a)
        elif self.kind == INDEPENDENT:
            if self.cdf is None:
                raise ValueError("independent model needs a CdfSpec")
        else:
            raise ValueError(f"unknown model kind {self.kind!r}")

    @classmethod
    def cox_poisson(cls, lam: float = 1.0) -> "ModelSpec":
        return cls(COX_POISSON, lam)

    @classmethod
    def cox_intensity(cls, intensities, lam: float = 1.0) -> "ModelSpec":
        return cls(COX_INTENSITY, lam, tuple(intensities))

    @classmethod
    def independent(cls, cdf: CdfSpec, lam: float = 1.0) -> "ModelSpec":
        return cls(INDEPENDENT, lam, (), cdf)

    @property
    def has_jump_overlap(self) -> bool:
        """Whether the time can only land on Poisson jumps."""
        return self.kind == COX_POISSON

    @property
    def label(self) -> str:
        return self.kind

    def admissible_h(self, h) -> bool:
        if self.kind == INDEPENDENT:
            return isinstance(h, TimeFunction)
        return isinstance(h, StateFunction)

    def survival_beyond(self, horizon: float) -> float:
        """P(tau > horizon), used for truncation-bias bounds."""
        if self.kind == COX_POISSON:
            return math.exp(-GAMMA * self.lam * horizon)
        if self.kind == COX_INTENSITY:
            a_min = min(self.intensities)
            return math.exp(-a_min * horizon) if a_min > 0.0 else 1.0
        return float(1.0 - self.cdf.F(horizon))


def _intensity_of(model: ModelSpec, x) -> np.ndarray:
    a = np.asarray(model.intensities, dtype=float)
    return a[np.minimum(np.asarray(x), a.size - 1).astype(int)]


def make_scenario(
    model: ModelSpec,
    horizon: float,
    master_seed: int,
    path_index: int,
    extra_times=(),
) -> Scenario:
    """Draw one path and one random time and couple them on a shared grid."""
    rng_path, rng_time = scenario_streams(master_seed, path_index)
    path = sample_poisson_path(model.lam, horizon, rng_path)
    extra = list(np.asarray(extra_times, dtype=float))
    if model.kind == COX_POISSON:
        theta = rng_time.exponential(1.0)
        grid = EventGrid(np.concatenate([path.jump_times, [horizon]]), horizon)
        n_right = np.searchsorted(path.jump_times, grid.times, side="right").astype(float)
        n_left = np.searchsorted(path.jump_times, grid.times, side="left").astype(float)
        hazard = PwProcess(grid, n_right, n_right - n_left)
        sample = cox_time(path, hazard, theta)
    elif model.kind == COX_INTENSITY:
        theta = rng_time.exponential(1.0)
        grid = EventGrid(np.concatenate([path.jump_times, [horizon]]), horizon)
        n_seg = np.searchsorted(path.jump_times, grid.times[:-1], side="right")
        drift = _intensity_of(model, n_seg) * np.diff(grid.times)
        hazard = pw_from_increments(grid, drift, np.zeros_like(grid.times), 0.0)
        sample = cox_time(path, hazard, theta)
    else:
        u = rng_time.uniform()
        while not (0.0 < u < 1.0):
            u = rng_time.uniform()
        sample = independent_time(model.cdf, u)
        extra.extend(model.cdf.knot_times(horizon).tolist())
    return Scenario(path, sample, extra)


@dataclass
class FiltrationBundle:
    """Every h-independent process of one scenario, on the shared grid.

    Z_left duplicates Z.left_limits for convenience; phi_seg / phi_jump
    are the left-limit integrand arrays of the martingale part of Z
    against M (segment view / breakpoint view).
    """

    model: ModelSpec
    scenario: Scenario
    Z: PwProcess
    Z_left: np.ndarray
    mu: PwProcess
    Ap: PwProcess
    m: PwProcess
    Ao: PwProcess
    M: PwProcess
    Mtau: PwProcess
    Mhat: PwProcess
    Mbar: PwProcess
    Lam: PwProcess | None
    phi_seg: np.ndarray
    phi_jump: np.ndarray


def build_bundle(model: ModelSpec, scn: Scenario) -> FiltrationBundle:
    grid = scn.grid
    times = grid.times
    dt = np.diff(times)
    pre_seg = 1.0 - scn.H.vals[:-1]  # 1 on open segments strictly before tau
    lam = model.lam

    mvals = scn.N.vals - lam * times
    M = PwProcess(grid, mvals, scn.N.jumps.copy())

    if model.kind == COX_POISSON:
        zvals = np.exp(-scn.N.vals)
        zleft = np.exp(-scn.N.left_limits)
        Z = PwProcess(grid, zvals, zvals - zleft)
        ap_drift = GAMMA * lam * zvals[:-1] * dt
        Ap = pw_from_increments(grid, ap_drift, np.zeros_like(times), 0.0)
        mu = Z + Ap
        Lam = None
        mtau_drift = -GAMMA * lam * dt * pre_seg
        phi_seg = -GAMMA * zvals[:-1]
        phi_jump = -GAMMA * zleft
    elif model.kind == COX_INTENSITY:
        n_seg = scn.N.vals[:-1]
        lam_drift = _intensity_of(model, n_seg) * dt
        Lam = pw_from_increments(grid, lam_drift, np.zeros_like(times), 0.0)
        zvals = np.exp(-Lam.vals)
        Z = PwProcess(grid, zvals, np.zeros_like(times))
        Ap = PwProcess(grid, 1.0 - zvals, np.zeros_like(times))
        mu = pw_constant(grid, 1.0)
        mtau_drift = -lam_drift * pre_seg
        phi_seg = np.zeros(grid.n_seg)
        phi_jump = np.zeros_like(times)
    else:
        cdf = model.cdf
        f_right = cdf.F(times)
        f_left = cdf.F(times, side="left")
        zvals = 1.0 - f_right
        zleft = 1.0 - f_left
        Z = PwProcess(grid, zvals, zvals - zleft)
        Ap = PwProcess(grid, f_right, f_right - f_left)
        mu = pw_constant(grid, 1.0)
        Lam = None
        # segment drift of the compensated indicator: the continuous part
        # of dAp/Z equals -dlog(Z) between breakpoints
        safe_num = np.where(zleft[1:] > 0.0, zleft[1:], 1.0)
        safe_den = np.where(zvals[:-1] > 0.0, zvals[:-1], 1.0)
        mtau_drift = np.where(pre_seg > 0.0, np.log(safe_num) - np.log(safe_den), 0.0)
        phi_seg = np.zeros(grid.n_seg)
        phi_jump = np.zeros_like(times)

    zleft_all = Z.left_limits
    safe_zleft = np.where(zleft_all > 0.0, zleft_all, 1.0)
    comp_jumps = np.where(
        (1.0 - scn.H.left_limits) > 0.0, Ap.jumps / safe_zleft, 0.0
    )
    mtau_jumps = scn.H.jumps - comp_jumps
    Mtau = pw_from_increments(grid, mtau_drift, mtau_jumps, 0.0)

    Mhat = M.stopped_at(scn.tau_idx) if scn.tau_idx is not None else M
    Mbar = Mhat - Mtau
    m = pw_constant(grid, 1.0)
    Ao = pw_constant(grid, 1.0) - Z

    scn.register("Z", Z)
    scn.register("mu", mu)
    scn.register("Ap", Ap)

    return FiltrationBundle(
        model=model,
        scenario=scn,
        Z=Z,
        Z_left=zleft_all,
        mu=mu,
        Ap=Ap,
        m=m,
        Ao=Ao,
        M=M,
        Mtau=Mtau,
        Mhat=Mhat,
        Mbar=Mbar,
        Lam=Lam,
        phi_seg=phi_seg,
        phi_jump=phi_jump,
    )


# thin named views kept for direct use in tests and the CLI


def azema_Z(model: ModelSpec, scn: Scenario) -> PwProcess:
    """Survival process Z_t = P(tau > t | path up to t)."""
    return build_bundle(model, scn).Z


def doob_meyer(model: ModelSpec, scn: Scenario):
    """(mu, Ap) with Z = mu - Ap, Ap the predictable compensator of H."""
    b = build_bundle(model, scn)
    return b.mu, b.Ap


def optional_parts(model: ModelSpec, scn: Scenario):
    """(m, Ao) with Z = m - Ao; m is constant 1 in all supported models."""
    b = build_bundle(model, scn)
    return b.m, b.Ao


def compensated_indicator(model: ModelSpec, scn: Scenario) -> PwProcess:
    """H minus the integral of dAp/Z_left stopped at tau."""
    return build_bundle(model, scn).Mtau


def mhat(model: ModelSpec, scn: Scenario) -> PwProcess:
    """Stopped compensated Poisson martingale; the bracket correction
    against the constant optional martingale part vanishes identically."""
    return build_bundle(model, scn).Mhat


def phi_integrands(model: ModelSpec, scn: Scenario, h):
    """Left-limit integrand arrays (phi, phi_h), each as (segment, jump).

    phi reproduces the martingale part of Z against M; phi_h reproduces
    the payoff martingale mu^h against M.
    """
    if not model.admissible_h(h):
        raise ValueError("payoff type not admissible for this model")
    b = build_bundle(model, scn)
    n_seg = scn.seg_state["N"]
    n_left = scn.jump_state["N"]
    if model.kind == COX_POISSON:
        table = solvers.htilde_table(h)
        coef_seg = (1.0 - GAMMA) * table(n_seg + 1) - table(n_seg)
        coef_jump = (1.0 - GAMMA) * table(n_left + 1) - table(n_left)
        phi_h = (coef_seg * b.Z.vals[:-1], coef_jump * b.Z_left)
    elif model.kind == COX_INTENSITY:
        table = solvers.g_kernel(model.intensities, h, model.lam)
        phi_h = (
            (table(n_seg + 1) - table(n_seg)) * b.Z.vals[:-1],
            (table(n_left + 1) - table(n_left)) * b.Z_left,
        )
    else:
        phi_h = (np.zeros(scn.grid.n_seg), np.zeros_like(scn.grid.times))
    return (b.phi_seg, b.phi_jump), phi_h
