"""Event-grid representation of piecewise-linear-with-jumps processes.

Every process handled by this package is a finite-variation functional of a
Poisson path, an indicator process and calendar time, so it is carried
exactly by its values at the breakpoints of a shared event grid.  There is
no time discretization anywhere: integrals are segment sums, with segment
drift increments taken from exact breakpoint values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "JumpPath",
    "EventGrid",
    "PwProcess",
    "LeftState",
    "sample_poisson_path",
    "pw_constant",
    "pw_from_increments",
    "integrate_predictable",
    "integrate_arrays",
    "bracket",
]


@dataclass(frozen=True)
class JumpPath:
    """A simulated Poisson trajectory on [0, horizon]."""

    rate: float
    horizon: float
    jump_times: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.rate) and self.rate >= 0.0):
            raise ValueError("rate must be finite and >= 0")
        if not (np.isfinite(self.horizon) and self.horizon > 0.0):
            raise ValueError("horizon must be finite and > 0")
        jt = np.asarray(self.jump_times, dtype=float)
        object.__setattr__(self, "jump_times", jt)
        if jt.size:
            if np.any(np.diff(jt) <= 0.0):
                raise ValueError("jump_times must be strictly increasing")
            if jt[0] <= 0.0 or jt[-1] > self.horizon:
                raise ValueError("jump_times must lie in (0, horizon]")

    def count_at(self, t: float) -> int:
        """N_t = number of jumps in (0, t]."""
        return int(np.searchsorted(self.jump_times, t, side="right"))


def sample_poisson_path(rate: float, horizon: float, seed) -> JumpPath:
    """Sample a Poisson path by exponential inter-arrival times.

    ``seed`` may be anything accepted by ``np.random.default_rng`` or an
    existing Generator.  Deterministic given (rate, horizon, seed).
    """
    if not (np.isfinite(rate) and rate >= 0.0):
        raise ValueError("rate must be finite and >= 0")
    if not (np.isfinite(horizon) and horizon > 0.0):
        raise ValueError("horizon must be finite and > 0")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if rate == 0.0:
        return JumpPath(rate, horizon, np.empty(0))
    scale = 1.0 / rate
    # draw gaps in blocks until the cumulative sum clears the horizon
    block = max(8, int(rate * horizon + 4.0 * np.sqrt(rate * horizon) + 8))
    gaps = rng.exponential(scale, size=block)
    total = gaps.sum()
    while total <= horizon:
        extra = rng.exponential(scale, size=block)
        gaps = np.concatenate([gaps, extra])
        total += extra.sum()
    times = np.cumsum(gaps)
    times = times[times <= horizon]
    return JumpPath(rate, horizon, times)


class EventGrid:
    """Merged, deduplicated sorted event times covering [0, horizon]."""

    __slots__ = ("times", "horizon")

    def __init__(self, times: np.ndarray, horizon: float):
        t = np.unique(np.asarray(times, dtype=float))
        if t.size and (t[0] < 0.0 or t[-1] > horizon):
            raise ValueError("grid times must lie in [0, horizon]")
        if t.size == 0 or t[0] != 0.0:
            t = np.concatenate([[0.0], t])
        if t[-1] != horizon:
            t = np.concatenate([t, [horizon]])
        self.times = t
        self.horizon = float(horizon)

    def __len__(self):
        return self.times.size

    @property
    def n_seg(self) -> int:
        return self.times.size - 1

    def index_of(self, t: float) -> int:
        i = int(np.searchsorted(self.times, t))
        if i >= self.times.size or self.times[i] != t:
            raise KeyError(f"{t} is not a grid time")
        return i

    def segment_of(self, t: float, side: str = "right") -> int:
        """Index i of the segment [t_i, t_{i+1}) containing t."""
        if side == "right":
            i = int(np.searchsorted(self.times, t, side="right")) - 1
        else:
            i = int(np.searchsorted(self.times, t, side="left")) - 1
        return min(max(i, 0), self.n_seg - 1)


class PwProcess:
    """Cadlag piecewise-affine process on an event grid.

    Stored as right values ``vals`` and jump sizes ``jumps`` at each grid
    breakpoint; the left limit at a breakpoint is ``vals - jumps`` and the
    value is affine in between.  For processes whose true path between
    events is not affine (e.g. exponential survival curves) the breakpoint
    values are still exact and so are all segment drift increments, which
    is all the integral calculus here uses.
    """

    __slots__ = ("grid", "vals", "jumps")

    def __init__(self, grid: EventGrid, vals: np.ndarray, jumps: np.ndarray):
        vals = np.asarray(vals, dtype=float)
        jumps = np.asarray(jumps, dtype=float)
        if vals.shape != grid.times.shape or jumps.shape != grid.times.shape:
            raise ValueError("vals/jumps must match grid shape")
        if jumps[0] != 0.0:
            raise ValueError("no jump at t=0: left limit at 0 is the initial value")
        self.grid = grid
        self.vals = vals
        self.jumps = jumps

    # -- basic views --------------------------------------------------
    @property
    def left_limits(self) -> np.ndarray:
        return self.vals - self.jumps

    @property
    def drift_increments(self) -> np.ndarray:
        """Continuous-part increment over each segment (exact)."""
        return self.left_limits[1:] - self.vals[:-1]

    @property
    def initial(self) -> float:
        return float(self.vals[0])

    @property
    def terminal(self) -> float:
        return float(self.vals[-1])

    def value(self, t: float, side: str = "right") -> float:
        """Evaluate at t; side='left' returns the left limit."""
        times = self.grid.times
        if t < times[0] or t > times[-1]:
            raise ValueError(f"t={t} outside [0, {times[-1]}]")
        i = int(np.searchsorted(times, t))
        if i < times.size and times[i] == t:
            if side == "left":
                return float(self.vals[0]) if i == 0 else float(self.left_limits[i])
            return float(self.vals[i])
        # strictly inside segment i-1
        i -= 1
        dt = times[i + 1] - times[i]
        slope = (self.left_limits[i + 1] - self.vals[i]) / dt
        return float(self.vals[i] + slope * (t - times[i]))

    # -- algebra -------------------------------------------------------
    def _check(self, other: "PwProcess"):
        if other.grid is not self.grid and not np.array_equal(
            other.grid.times, self.grid.times
        ):
            raise ValueError("processes live on different grids")

    def __add__(self, other):
        if isinstance(other, PwProcess):
            self._check(other)
            return PwProcess(self.grid, self.vals + other.vals, self.jumps + other.jumps)
        return PwProcess(self.grid, self.vals + other, self.jumps)

    def __sub__(self, other):
        if isinstance(other, PwProcess):
            self._check(other)
            return PwProcess(self.grid, self.vals - other.vals, self.jumps - other.jumps)
        return PwProcess(self.grid, self.vals - other, self.jumps)

    def __mul__(self, c: float):
        if isinstance(c, PwProcess):
            raise TypeError("pointwise products of processes are not defined; "
                            "use bracket() or integrate_arrays()")
        return PwProcess(self.grid, self.vals * c, self.jumps * c)

    __rmul__ = __mul__

    def stopped_at(self, idx: int) -> "PwProcess":
        """Freeze the process at grid breakpoint ``idx`` (inclusive)."""
        vals = self.vals.copy()
        jumps = self.jumps.copy()
        vals[idx + 1 :] = vals[idx]
        jumps[idx + 1 :] = 0.0
        return PwProcess(self.grid, vals, jumps)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.vals))) if self.vals.size else 0.0


def pw_constant(grid: EventGrid, c: float) -> PwProcess:
    z = np.zeros_like(grid.times)
    return PwProcess(grid, np.full_like(grid.times, float(c)), z)


def pw_from_increments(
    grid: EventGrid, drift_inc: np.ndarray, jumps: np.ndarray, init: float = 0.0
) -> PwProcess:
    """Assemble a PwProcess from exact per-segment drift increments and jumps."""
    n = grid.times.size
    vals = np.empty(n)
    vals[0] = init
    j = np.zeros(n)
    j[1:] = jumps[1:]
    np.cumsum(drift_inc + jumps[1:], out=vals[1:])
    vals[1:] += init
    return PwProcess(grid, vals, j)


@dataclass
class LeftState:
    """Left-limit view of scenario state used by predictable integrands.

    ``t`` is the segment start time (segment view) or the breakpoint time
    (jump view); every field is the value just before the breakpoint, or
    equivalently the constant state on the open segment.  Integrands only
    ever see this view, which makes predictability structural: a functional
    of ``LeftState`` is automatically constant between grid events.
    """

    t: np.ndarray
    fields: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.fields[name]

    def __contains__(self, name: str) -> bool:
        return name in self.fields


def integrate_predictable(integrand, X: PwProcess, seg_state: LeftState, jump_state: LeftState) -> PwProcess:
    """Exact Lebesgue-Stieltjes integral of a predictable integrand against X.

    ``integrand(state)`` must return an array of integrand values given a
    left-limit state view; it is evaluated once on the segment view and once
    on the jump view.  The result is  int_(0,t] phi_{s-} dX_s  with jump
    contributions phi(b-) * dX_b and segment contributions equal to the
    integrand value times the exact drift increment of X.
    """
    phi_seg = np.asarray(integrand(seg_state), dtype=float)
    phi_jump = np.asarray(integrand(jump_state), dtype=float)
    if phi_seg.shape != (X.grid.n_seg,):
        phi_seg = np.broadcast_to(phi_seg, (X.grid.n_seg,)).astype(float)
    if phi_jump.shape != X.grid.times.shape:
        phi_jump = np.broadcast_to(phi_jump, X.grid.times.shape).astype(float)
    return integrate_arrays(phi_seg, phi_jump, X)


def integrate_arrays(phi_seg: np.ndarray, phi_jump: np.ndarray, X: PwProcess) -> PwProcess:
    """Low-level integral with explicit per-segment / per-breakpoint arrays."""
    drift = phi_seg * X.drift_increments
    jumps = phi_jump * X.jumps
    return pw_from_increments(X.grid, drift, jumps, 0.0)


def bracket(X: PwProcess, Y: PwProcess) -> PwProcess:
    """Raw covariation [X, Y]: pure-jump process with jumps dX * dY."""
    if X.grid.horizon != Y.grid.horizon:
        raise ValueError("mismatched horizons")
    X._check(Y)
    jumps = X.jumps * Y.jumps
    return pw_from_increments(X.grid, np.zeros(X.grid.n_seg), jumps, 0.0)
