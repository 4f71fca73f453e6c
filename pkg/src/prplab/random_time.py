"""Random times, their sampling, and the per-path scenario container.

A scenario couples one Poisson path with one random time tau on a shared
event grid.  tau is produced either by a Cox first-passage construction
(threshold an F-adapted cumulative hazard at an independent unit
exponential) or by inverse-CDF sampling independent of the path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .path_engine import EventGrid, JumpPath, LeftState, PwProcess

__all__ = [
    "CdfSpec",
    "RandomTimeSample",
    "Scenario",
    "cox_time",
    "independent_time",
    "indicator",
    "jump_overlap",
    "scenario_streams",
]


@dataclass(frozen=True)
class CdfSpec:
    """Distribution of an independent random time.

    ``background`` is the continuous part: ``("exponential", rate)`` for a
    scaled exponential on [0, inf), or ``("pwlinear", times, masses)`` where
    ``masses`` is the cumulative continuous mass at each knot (starting at
    0).  ``atoms`` is a tuple of (time, probability) point masses.  The
    continuous part carries mass 1 - sum(p) so the total mass is 1.
    """

    background: tuple
    atoms: tuple = ()

    def __post_init__(self):
        kind = self.background[0]
        p_tot = sum(p for _, p in self.atoms)
        if p_tot < 0.0 or p_tot > 1.0:
            raise ValueError("atom probabilities must sum to a value in [0, 1]")
        ats = tuple((float(t), float(p)) for t, p in self.atoms)
        if any(p <= 0.0 or t <= 0.0 for t, p in ats):
            raise ValueError("atoms need strictly positive times and masses")
        if any(ats[i + 1][0] <= ats[i][0] for i in range(len(ats) - 1)):
            raise ValueError("atom times must be strictly increasing")
        object.__setattr__(self, "atoms", ats)
        if kind == "exponential":
            rate = float(self.background[1])
            if not (rate > 0.0):
                raise ValueError("exponential background rate must be > 0")
            object.__setattr__(self, "background", ("exponential", rate))
        elif kind == "pwlinear":
            ts = np.asarray(self.background[1], dtype=float)
            ms = np.asarray(self.background[2], dtype=float)
            if ts.ndim != 1 or ts.shape != ms.shape or ts.size < 2:
                raise ValueError("pwlinear background needs matching knot arrays")
            if ts[0] != 0.0 or ms[0] != 0.0:
                raise ValueError("pwlinear background must start at (0, 0)")
            if np.any(np.diff(ts) <= 0.0) or np.any(np.diff(ms) < 0.0):
                raise ValueError("pwlinear knots must increase, masses non-decrease")
            if not math.isclose(ms[-1], 1.0 - p_tot, rel_tol=0.0, abs_tol=1e-12):
                raise ValueError("continuous mass must equal 1 - total atom mass")
            ms = ms.copy()
            ms[-1] = 1.0 - p_tot
            object.__setattr__(self, "background", ("pwlinear", ts, ms))
        else:
            raise ValueError(f"unknown background kind {kind!r}")

    @property
    def continuous_mass(self) -> float:
        return 1.0 - sum(p for _, p in self.atoms)

    def cont(self, t) -> np.ndarray:
        """Continuous part of the CDF at t (vectorized)."""
        t = np.asarray(t, dtype=float)
        if self.background[0] == "exponential":
            rate = self.background[1]
            return self.continuous_mass * -np.expm1(-rate * np.maximum(t, 0.0))
        ts, ms = self.background[1], self.background[2]
        return np.interp(t, ts, ms)

    def atom_mass(self, t, side: str = "right") -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if not self.atoms:
            return np.zeros_like(t)
        at = np.array([a for a, _ in self.atoms])
        ap = np.array([p for _, p in self.atoms])
        cum = np.cumsum(ap)
        idx = np.searchsorted(at, t, side="right" if side == "right" else "left")
        return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)

    def F(self, t, side: str = "right") -> np.ndarray:
        return self.cont(t) + self.atom_mass(t, side)

    def jump(self, t: float) -> float:
        for a, p in self.atoms:
            if a == t:
                return p
        return 0.0

    def sample(self, u: float) -> float:
        """Inverse CDF; returns inf if u exceeds the mass on [0, inf)."""
        prev = 0.0
        for a, p in self.atoms:
            f_left = float(self.cont(a)) + prev
            if u <= f_left:
                return self._invert_cont(u - prev)
            if u <= f_left + p:
                return float(a)
            prev += p
        return self._invert_cont(u - prev)

    def _invert_cont(self, mass: float) -> float:
        if self.background[0] == "exponential":
            rate = self.background[1]
            frac = mass / self.continuous_mass
            if frac >= 1.0:
                return math.inf
            return -math.log1p(-frac) / rate
        ts, ms = self.background[1], self.background[2]
        if mass >= ms[-1]:
            return float(ts[-1]) if mass <= ms[-1] else math.inf
        return float(np.interp(mass, ms, ts))

    def knot_times(self, horizon: float) -> np.ndarray:
        """Times in (0, horizon] where the CDF changes regime."""
        knots = [a for a, _ in self.atoms]
        if self.background[0] == "pwlinear":
            knots.extend(self.background[1][1:])
        knots = [k for k in knots if 0.0 < k <= horizon]
        return np.unique(np.asarray(knots, dtype=float))


@dataclass(frozen=True)
class RandomTimeSample:
    """One draw of tau; ``tau`` is inf when the time falls past the horizon."""

    tau: float
    theta: float | None = None
    coincides_with_jump: bool = False


def cox_time(path: JumpPath, cum_hazard: PwProcess, theta: float) -> RandomTimeSample:
    """First passage of a non-decreasing cumulative hazard over ``theta``.

    When the crossing happens by a jump of the hazard (counting-process
    hazard) tau is returned bit-identical to the stored grid time, and the
    coincidence flag is set.  A crossing inside a segment is solved
    linearly.  If the hazard never reaches theta on the grid, tau is inf.
    """
    if theta <= 0.0:
        raise ValueError("theta must be > 0")
    if cum_hazard.grid.horizon != path.horizon:
        raise ValueError("cum_hazard horizon must match the path")
    vals = cum_hazard.vals
    if vals[0] != 0.0:
        raise ValueError("cum_hazard must start at 0")
    if np.any(cum_hazard.drift_increments < 0.0) or np.any(cum_hazard.jumps < 0.0):
        raise ValueError("cum_hazard must be nondecreasing")
    lefts = cum_hazard.left_limits
    times = cum_hazard.grid.times
    hit = np.nonzero(vals >= theta)[0]
    if hit.size == 0:
        return RandomTimeSample(math.inf, theta, False)
    i = int(hit[0])
    if lefts[i] < theta:
        # crossed by the jump at breakpoint i (or started at/above theta)
        return RandomTimeSample(float(times[i]), theta, cum_hazard.jumps[i] > 0.0)
    # crossed inside segment i-1: left limit already >= theta there
    v0 = vals[i - 1]
    dt = times[i] - times[i - 1]
    slope = (lefts[i] - v0) / dt
    tau = times[i - 1] + (theta - v0) / slope
    return RandomTimeSample(float(tau), theta, False)


def independent_time(cdf: CdfSpec, u: float) -> RandomTimeSample:
    if not (0.0 < u < 1.0):
        raise ValueError("u must lie in (0, 1)")
    return RandomTimeSample(cdf.sample(u), None, False)


def indicator(sample: RandomTimeSample, grid) -> PwProcess:
    """H_t = 1_{tau <= t}; ``grid`` is an EventGrid or a bare horizon.

    When tau is finite and within the window it must be one of the grid
    times (scenario grids always inject it).
    """
    tau = sample.tau
    if not isinstance(grid, EventGrid):
        horizon = float(grid)
        pts = [0.0, horizon]
        if math.isfinite(tau) and 0.0 < tau <= horizon:
            pts.append(tau)
        grid = EventGrid(np.asarray(pts), horizon)
    if not math.isfinite(tau) or tau > grid.horizon:
        z = np.zeros_like(grid.times)
        return PwProcess(grid, z, z.copy())
    i = grid.index_of(tau)
    vals = (grid.times >= tau).astype(float)
    jumps = np.zeros_like(grid.times)
    jumps[i] = 1.0
    return PwProcess(grid, vals, jumps)


class Scenario:
    """One Poisson path with one random time on a shared event grid.

    Exposes the counting process N, the indicator H and two left-limit
    state views used by predictable integrands: ``seg_state`` (one entry
    per open grid segment) and ``jump_state`` (one entry per breakpoint).
    Model processes register themselves into both views by name.
    """

    def __init__(
        self,
        path: JumpPath,
        sample: RandomTimeSample,
        extra_times=(),
    ):
        self.path = path
        self.sample = sample
        tau = sample.tau
        pieces = [path.jump_times, np.asarray(extra_times, dtype=float)]
        if math.isfinite(tau) and tau <= path.horizon:
            pieces.append(np.array([tau]))
        self.grid = EventGrid(np.concatenate(pieces), path.horizon)
        times = self.grid.times
        n_right = np.searchsorted(path.jump_times, times, side="right").astype(float)
        n_left = np.searchsorted(path.jump_times, times, side="left").astype(float)
        self.N = PwProcess(self.grid, n_right, n_right - n_left)
        self.H = indicator(sample, self.grid)
        self.tau_idx = (
            self.grid.index_of(tau)
            if math.isfinite(tau) and tau <= path.horizon
            else None
        )
        self.seg_state = LeftState(
            times[:-1], {"N": self.N.vals[:-1], "H": self.H.vals[:-1]}
        )
        self.jump_state = LeftState(
            times, {"N": self.N.left_limits, "H": self.H.left_limits}
        )

    @property
    def tau(self) -> float:
        return self.sample.tau

    @property
    def horizon(self) -> float:
        return self.path.horizon

    def register(self, name: str, proc: PwProcess):
        """Expose a process's left limits to predictable integrands."""
        self.seg_state.fields[name] = proc.vals[:-1]
        self.jump_state.fields[name] = proc.left_limits


def jump_overlap(scenario: Scenario) -> bool:
    """True when the random time lands on a Poisson jump of this path
    (false when the time lies beyond the horizon)."""
    mask = scenario.H.jumps > 0.0
    if not mask.any():
        return False
    return bool(np.all(scenario.N.jumps[mask] > 0.0))


def scenario_streams(master_seed: int, path_index: int):
    """Two independent generators (path, time) for one scenario.

    Derived from SeedSequence([master_seed, path_index]) so every path is
    reproducible in isolation regardless of execution order or threading.
    """
    ss = np.random.SeedSequence([int(master_seed), int(path_index)])
    child_path, child_time = ss.spawn(2)
    return np.random.default_rng(child_path), np.random.default_rng(child_time)
