"""Payoff kernels.

For state payoffs h(N) the conditional value of h at the random time is a
function of the current Poisson state only.  The counting-hazard model uses

    htilde(x) = gamma * sum_{k>=0} (1-gamma)^k h(x+k),

which satisfies the downward recursion

    htilde(x) = gamma*h(x) + (1-gamma)*htilde(x+1),

and the state-intensity model uses the first-jump fixed point

    g(x) = (a(x)*h(x) + lam*g(x+1)) / (a(x) + lam).

Both recursions close in elementary form beyond the last explicit value of
h (constant or geometric tail), so the tables carry no truncation error.
Monte Carlo oracles for both kernels simulate the defining expectations
directly and report standard errors and horizon-truncation bounds.

For an independent time with a known distribution the payoff curve
X^h(t) = integral of h over (t, inf) against dF is deterministic; it is
precomputed per regime with exact primitives (affine-times-exponential or
affine-times-constant densities plus atom sums).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .random_time import CdfSpec

__all__ = [
    "GAMMA",
    "StateFunction",
    "TimeFunction",
    "KernelTable",
    "htilde",
    "htilde_table",
    "htilde_mc_oracle",
    "g_kernel",
    "g_mc_oracle",
    "DetPayoffCurve",
    "det_payoff_curve",
]

GAMMA = 1.0 - math.exp(-1.0)


@dataclass(frozen=True)
class StateFunction:
    """Payoff h(x) on integer Poisson states with a closed tail.

    ``values`` lists h(0..K); beyond K the tail is ("const", c) giving
    h(x) = c, or ("geom", r) giving h(x) = values[K] * r^(x-K).  Geometric
    tails need r < e so the htilde series converges.
    """

    values: tuple
    tail: tuple = ("const", 0.0)
    name: str = "state"

    def __post_init__(self):
        if len(self.values) == 0:
            raise ValueError("need at least one explicit value")
        kind = self.tail[0]
        if kind == "const":
            pass
        elif kind == "geom":
            r = float(self.tail[1])
            if not (0.0 < r < math.e):
                raise ValueError("geometric tail ratio must lie in (0, e)")
        else:
            raise ValueError(f"unknown tail kind {kind!r}")

    @classmethod
    def indicator(cls, k: int) -> "StateFunction":
        vals = tuple(0.0 if i != k else 1.0 for i in range(k + 1))
        return cls(vals, ("const", 0.0), name=f"indicator{k}")

    @classmethod
    def constant(cls, c: float) -> "StateFunction":
        return cls((float(c),), ("const", float(c)), name=f"const{c:g}")

    @classmethod
    def exponential(cls, beta: float) -> "StateFunction":
        if beta <= 0.0:
            raise ValueError("beta must be > 0")
        return cls((1.0,), ("geom", math.exp(-beta)), name=f"exp{beta:g}")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x)
        k_last = len(self.values) - 1
        base = np.asarray(self.values, dtype=float)
        inside = base[np.minimum(x, k_last).astype(int)]
        if self.tail[0] == "const":
            outside = np.full(x.shape, float(self.tail[1]))
        else:
            r = float(self.tail[1])
            outside = self.values[-1] * r ** (x - k_last)
        return np.where(x <= k_last, inside, outside)

    def bound(self) -> float:
        """sup |h| over all states (finite for const and r <= 1 tails)."""
        m = max(abs(v) for v in self.values)
        if self.tail[0] == "const":
            return max(m, abs(self.tail[1]))
        r = float(self.tail[1])
        if r <= 1.0:
            return m
        raise ValueError("no uniform bound for a growing geometric tail")


@dataclass(frozen=True)
class TimeFunction:
    """Deterministic payoff h(t), affine on pieces (breaks[j], breaks[j+1]].

    Piece j starts at breaks[j] with value consts[j] and slope slopes[j];
    the first piece includes t = 0 and the last extends to infinity.  A
    boundary point belongs to the piece on its left, so an indicator cut
    at c means h(t) = 1 for t <= c and 0 after.
    """

    breaks: tuple
    consts: tuple
    slopes: tuple
    name: str = "time"

    def __post_init__(self):
        b = tuple(float(x) for x in self.breaks)
        if len(b) == 0 or b[0] != 0.0 or any(b[i + 1] <= b[i] for i in range(len(b) - 1)):
            raise ValueError("breaks must start at 0 and strictly increase")
        if not (len(b) == len(self.consts) == len(self.slopes)):
            raise ValueError("breaks/consts/slopes must have equal length")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "consts", tuple(float(x) for x in self.consts))
        object.__setattr__(self, "slopes", tuple(float(x) for x in self.slopes))

    @classmethod
    def indicator_until(cls, cut: float) -> "TimeFunction":
        return cls((0.0, float(cut)), (1.0, 0.0), (0.0, 0.0), name=f"until{cut:g}")

    @classmethod
    def constant(cls, c: float) -> "TimeFunction":
        return cls((0.0,), (float(c),), (0.0,), name=f"const{c:g}")

    def _piece(self, t, side: str) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.breaks, t, side="left" if side == "value" else "right") - 1
        return np.maximum(idx, 0)

    def value(self, t) -> np.ndarray:
        """h(t), boundary points taken from the left piece."""
        t = np.asarray(t, dtype=float)
        j = self._piece(t, "value")
        b = np.asarray(self.breaks)[j]
        return np.asarray(self.consts)[j] + np.asarray(self.slopes)[j] * (t - b)

    def value_after(self, t) -> np.ndarray:
        """Right limit h(t+); the constant state on an open segment start."""
        t = np.asarray(t, dtype=float)
        j = self._piece(t, "after")
        b = np.asarray(self.breaks)[j]
        return np.asarray(self.consts)[j] + np.asarray(self.slopes)[j] * (t - b)

    def knot_times(self, horizon: float) -> np.ndarray:
        ks = [b for b in self.breaks if 0.0 < b <= horizon]
        return np.asarray(ks, dtype=float)

    def bound(self, horizon: float) -> float:
        pts = list(self.breaks) + [horizon]
        return max(abs(float(self.value(min(p, horizon)))) for p in pts)


@dataclass(frozen=True)
class KernelTable:
    """Tabulated kernel values with an exact closed-form tail.

    ``values[x]`` covers x = 0..anchor; beyond the anchor the tail closure
    applies (the recursion is in its fixed-point regime there).
    """

    values: np.ndarray
    anchor: int
    tail_kind: str
    tail_coef: float
    tail_ratio: float

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x)
        xi = np.minimum(x, self.anchor).astype(int)
        inside = self.values[xi]
        if self.tail_kind == "const":
            outside = np.full(x.shape, self.tail_coef)
        else:
            outside = self.tail_coef * self.tail_ratio ** (x - self.anchor)
        return np.where(x <= self.anchor, inside, outside)


def _htilde_tail(h: StateFunction):
    """Closed form of htilde(x) for x past the last explicit value of h."""
    k_last = len(h.values) - 1
    if h.tail[0] == "const":
        return "const", float(h.tail[1]), 1.0
    r = float(h.tail[1])
    # sum of gamma*(1-gamma)^k * v_K * r^(x-K+k) closes geometrically
    coef_at = GAMMA * h.values[-1] * r / (1.0 - (1.0 - GAMMA) * r)
    return "geom", coef_at, r  # value at x = k_last + 1, ratio r


@lru_cache(maxsize=None)
def htilde_table(h: StateFunction) -> KernelTable:
    anchor = len(h.values)  # first state fully inside the tail of h
    kind, coef, ratio = _htilde_tail(h)
    vals = np.empty(anchor + 1)
    vals[anchor] = coef
    hx = h(np.arange(anchor))
    for x in range(anchor - 1, -1, -1):
        vals[x] = GAMMA * hx[x] + (1.0 - GAMMA) * vals[x + 1]
    return KernelTable(vals, anchor, kind, coef, ratio)


def htilde(h: StateFunction, x: int) -> float:
    return float(htilde_table(h)(x))


def htilde_mc_oracle(h: StateFunction, x: int, n_paths: int, seed, lam: float = 1.0,
                     horizon: float = 25.0):
    """Simulate E h(x + N at the time the count first reaches the threshold).

    Draws the unit-exponential threshold and the terminal Poisson count
    directly; paths whose crossing falls past the horizon contribute zero,
    with the reported bias bound sup|h| * exp(-gamma*lam*horizon).

    Returns (estimate, standard_error, truncation_bound).
    """
    if n_paths < 1000:
        raise ValueError("n_paths must be at least 1000")
    rng = np.random.default_rng(seed)
    theta = rng.exponential(1.0, n_paths)
    k = np.ceil(theta)
    n_t = rng.poisson(lam * horizon, n_paths)
    vals = np.where(k <= n_t, h(x + k - 1.0), 0.0)
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(n_paths))
    bound = h.bound() * math.exp(-GAMMA * lam * horizon)
    return est, se, bound


def _intensity(a: tuple, x) -> np.ndarray:
    a_arr = np.asarray(a, dtype=float)
    return a_arr[np.minimum(np.asarray(x), len(a) - 1).astype(int)]


@lru_cache(maxsize=None)
def g_kernel(a: tuple, h: StateFunction, lam: float) -> KernelTable:
    """Fixed point of g(x) = (a(x)h(x) + lam*g(x+1)) / (a(x) + lam).

    ``a`` lists the intensity per state, constant beyond its last entry.
    The tail closes exactly: constant-tail h gives g = h there; geometric
    tails give g(x) = a*h(x) / (a + lam - lam*r).
    """
    a = tuple(float(v) for v in a)
    if any(v < 0.0 for v in a):
        raise ValueError("intensities must be >= 0")
    a_star = a[-1]
    anchor = max(len(h.values), len(a))
    if h.tail[0] == "const":
        kind, ratio = "const", 1.0
        coef = float(h.tail[1]) if a_star > 0.0 else 0.0
        tail_at_anchor = coef
    else:
        r = float(h.tail[1])
        if lam * r >= a_star + lam:
            raise ValueError("geometric tail too heavy for this intensity")
        kind, ratio = "geom", r
        scale = a_star / (a_star + lam - lam * r)
        tail_at_anchor = scale * float(h(anchor))
        coef = tail_at_anchor
    vals = np.empty(anchor + 1)
    vals[anchor] = tail_at_anchor
    hx = h(np.arange(anchor))
    ax = _intensity(a, np.arange(anchor))
    for x in range(anchor - 1, -1, -1):
        vals[x] = (ax[x] * hx[x] + lam * vals[x + 1]) / (ax[x] + lam)
    return KernelTable(vals, anchor, kind, coef, ratio)


def g_mc_oracle(a: tuple, h: StateFunction, lam: float, x: int, n_paths: int, seed,
                horizon: float = 60.0):
    """Simulate the state-intensity kernel by racing exponential clocks.

    From state y the hazard accrues at rate a(y) until either the
    threshold is crossed (absorb with payoff h(y)) or the next Poisson
    jump moves to y+1.  Truncated at ``horizon``; the bias bound uses the
    smallest intensity along the visited range.

    Returns (estimate, standard_error, truncation_bound).
    """
    if n_paths < 1000:
        raise ValueError("n_paths must be at least 1000")
    rng = np.random.default_rng(seed)
    theta = rng.exponential(1.0, n_paths)
    state = np.full(n_paths, int(x))
    t = np.zeros(n_paths)
    payoff = np.zeros(n_paths)
    alive = np.ones(n_paths, dtype=bool)
    while alive.any():
        idx = np.nonzero(alive)[0]
        ai = _intensity(a, state[idx])
        gap = rng.exponential(1.0 / lam, idx.size)
        with np.errstate(divide="ignore"):
            cross = np.where(ai > 0.0, theta[idx] / np.where(ai > 0.0, ai, 1.0), np.inf)
        absorbed = cross <= gap
        hit = idx[absorbed]
        in_window = t[hit] + cross[absorbed] <= horizon
        payoff[hit[in_window]] = h(state[hit[in_window]])
        alive[hit] = False
        move = idx[~absorbed]
        theta[move] -= ai[~absorbed] * gap[~absorbed]
        t[move] += gap[~absorbed]
        state[move] += 1
        timed_out = move[t[move] > horizon]
        alive[timed_out] = False
    est = float(payoff.mean())
    se = float(payoff.std(ddof=1) / math.sqrt(n_paths))
    a_min = min(v for v in a)
    bound = h.bound() * (math.exp(-a_min * horizon) if a_min > 0.0 else 1.0)
    return est, se, bound


class DetPayoffCurve:
    """Deterministic tail payoff X(t) = integral of h over (t, inf) wrt dF.

    Precomputes, per regime between consecutive knots of (h, F), the exact
    primitive of the continuous part, and adds the atom tail on the right
    of t.  ``value(t, side)`` includes an atom sitting exactly at t only
    for the left limit.
    """

    def __init__(self, h: TimeFunction, cdf: CdfSpec):
        self.h = h
        self.cdf = cdf
        bkg = cdf.background
        knots = set(h.breaks)
        if bkg[0] == "pwlinear":
            knots.update(bkg[1].tolist())
        self.bounds = np.array(sorted(knots))
        # continuous tail value at each regime start, accumulated right to left
        n = self.bounds.size
        self.cont_at = np.zeros(n)
        acc = 0.0
        for j in range(n - 1, -1, -1):
            lo = self.bounds[j]
            hi = self.bounds[j + 1] if j + 1 < n else math.inf
            acc += self._cont_piece(lo, hi)
            self.cont_at[j] = acc
        ats = cdf.atoms
        self.atom_times = np.array([at for at, _ in ats])
        hp = [float(h.value(at)) * p for at, p in ats]
        self.atom_tail = np.concatenate([np.cumsum(hp[::-1])[::-1], [0.0]]) if ats else np.array([0.0])

    def _cont_piece(self, lo: float, hi: float) -> float:
        """Exact integral of h against the continuous density over (lo, hi)."""
        h = self.h
        j = int(h._piece(np.array(lo), "after"))
        alpha = h.consts[j] - h.slopes[j] * h.breaks[j]
        beta = h.slopes[j]
        bkg = self.cdf.background
        if bkg[0] == "exponential":
            r = bkg[1]
            mass = self.cdf.continuous_mass

            def prim(s):
                if math.isinf(s):
                    return 0.0
                return (alpha + beta * s + beta / r) * math.exp(-r * s)

            return mass * (prim(lo) - prim(hi))
        ts, ms = bkg[1], bkg[2]
        k = int(np.searchsorted(ts, lo, side="right")) - 1
        if k >= ts.size - 1:
            return 0.0
        dens = (ms[k + 1] - ms[k]) / (ts[k + 1] - ts[k])
        hi = min(hi, float(ts[-1]))
        if hi <= lo:
            return 0.0
        return dens * (alpha * (hi - lo) + beta * (hi * hi - lo * lo) / 2.0)

    def _cont_value(self, t: np.ndarray) -> np.ndarray:
        j = np.minimum(
            np.maximum(np.searchsorted(self.bounds, t, side="right") - 1, 0),
            self.bounds.size - 1,
        )
        out = np.empty(t.shape)
        for i in np.ndindex(t.shape):
            lo = float(t[i])
            jj = int(j[i])
            hi = self.bounds[jj + 1] if jj + 1 < self.bounds.size else math.inf
            rest = self.cont_at[jj + 1] if jj + 1 < self.bounds.size else 0.0
            out[i] = self._cont_piece(lo, min(hi, math.inf)) + rest if lo < hi else rest
        return out

    def value(self, t, side: str = "right") -> np.ndarray:
        t = np.asarray(t, dtype=float)
        cont = self._cont_value(t)
        if self.atom_times.size:
            side_arg = "right" if side == "right" else "left"
            idx = np.searchsorted(self.atom_times, t, side=side_arg)
            cont = cont + self.atom_tail[idx]
        return cont


_CURVES: dict = {}


def det_payoff_curve(h: TimeFunction, cdf: CdfSpec) -> DetPayoffCurve:
    key = (h, cdf.background[0], tuple(np.ravel(cdf.background[1]).tolist()) if cdf.background[0] == "pwlinear" else cdf.background[1], cdf.atoms)
    curve = _CURVES.get(key)
    if curve is None:
        curve = DetPayoffCurve(h, cdf)
        _CURVES[key] = curve
    return curve
