import math

import numpy as np
import pytest

from prplab.path_engine import EventGrid, JumpPath, pw_from_increments
from prplab.random_time import (
    CdfSpec,
    Scenario,
    cox_time,
    independent_time,
    indicator,
    jump_overlap,
    scenario_streams,
)


def step_hazard(path, horizon):
    """Counting-process hazard: cumulative hazard equals N."""
    grid = EventGrid(np.concatenate([path.jump_times, [horizon]]), horizon)
    jumps = np.zeros_like(grid.times)
    jumps[np.searchsorted(grid.times, path.jump_times)] = 1.0
    return pw_from_increments(grid, np.zeros(grid.n_seg), jumps, 0.0)


def test_cox_time_snaps_to_jump():
    path = JumpPath(rate=1.0, horizon=10.0, jump_times=(1.0, 3.0, 7.0))
    hz = step_hazard(path, 10.0)
    s = cox_time(path, hz, theta=2.5)
    # hazard reaches 2.5 only at the third jump: tau is bit-identical to it
    assert s.tau == 7.0
    assert s.coincides_with_jump


def test_cox_time_linear_crossing():
    path = JumpPath(rate=1.0, horizon=10.0, jump_times=(2.0,))
    grid = EventGrid(np.array([2.0, 10.0]), 10.0)
    # continuous hazard with slope 1: crossing solved linearly
    hz = pw_from_increments(grid, np.diff(grid.times), np.zeros_like(grid.times), 0.0)
    s = cox_time(path, hz, theta=3.5)
    assert s.tau == pytest.approx(3.5)
    assert not s.coincides_with_jump


def test_cox_time_beyond_horizon():
    path = JumpPath(rate=1.0, horizon=5.0, jump_times=(1.0,))
    hz = step_hazard(path, 5.0)
    s = cox_time(path, hz, theta=4.0)
    assert math.isinf(s.tau)


def test_indicator_from_horizon():
    path = JumpPath(rate=1.0, horizon=5.0, jump_times=(1.0,))
    hz = step_hazard(path, 5.0)
    s = cox_time(path, hz, theta=0.5)
    h = indicator(s, 5.0)
    assert h.value(s.tau, "left") == 0.0
    assert h.value(s.tau, "right") == 1.0
    assert h.terminal == 1.0


def test_cdf_spec_validation():
    with pytest.raises(ValueError):
        CdfSpec(background=("exponential", -1.0), atoms=())
    with pytest.raises(ValueError):
        CdfSpec(background=("exponential", 1.0), atoms=((1.0, 0.3), (0.5, 0.1)))
    with pytest.raises(ValueError):
        # continuous mass must complement the atom mass
        CdfSpec(background=("pwlinear", (0.0, 1.0), (0.0, 0.5)), atoms=((0.5, 0.3),))


def test_cdf_exponential_with_atom():
    cdf = CdfSpec(background=("exponential", 1.0), atoms=((1.0, 0.3),))
    # right-continuous CDF with a 0.3 jump at t=1
    assert cdf.F(1.0, "right") - cdf.F(1.0, "left") == pytest.approx(0.3)
    assert cdf.jump(1.0) == pytest.approx(0.3)
    assert cdf.F(0.0, "right") == 0.0
    big = cdf.F(50.0, "right")
    assert big == pytest.approx(1.0, abs=1e-12)


def test_cdf_sampling_inverts():
    cdf = CdfSpec(background=("exponential", 1.0), atoms=((1.0, 0.3),))
    rng = np.random.default_rng(0)
    us = rng.uniform(size=4000)
    taus = np.array([independent_time(cdf, u).tau for u in us])
    # P(tau = 1) approx 0.3 and the continuous part matches the CDF
    frac_atom = np.mean(taus == 1.0)
    assert abs(frac_atom - 0.3) < 0.03
    assert abs(np.mean(taus <= 0.5) - cdf.F(0.5, "right")) < 0.03


def test_scenario_grid_and_views():
    path = JumpPath(rate=1.0, horizon=5.0, jump_times=(1.0, 4.0))
    hz = step_hazard(path, 5.0)
    s = cox_time(path, hz, theta=0.5)
    scn = Scenario(path, s, extra_times=(2.5,))
    assert 2.5 in scn.grid.times
    assert scn.tau == 1.0
    assert scn.tau_idx == scn.grid.index_of(1.0)
    # N left limits lag the right values by the jump
    assert scn.N.vals[scn.tau_idx] == 1.0
    assert scn.jump_state["N"][scn.tau_idx] == 0.0
    assert scn.H.vals[-1] == 1.0


def test_jump_overlap_flags():
    path = JumpPath(rate=1.0, horizon=5.0, jump_times=(1.0, 4.0))
    hz = step_hazard(path, 5.0)
    scn_hit = Scenario(path, cox_time(path, hz, theta=0.5))
    assert jump_overlap(scn_hit)
    scn_miss = Scenario(path, cox_time(path, hz, theta=5.0))  # tau beyond horizon
    assert not jump_overlap(scn_miss)


def test_scenario_streams_reproducible_and_split():
    a1, a2 = scenario_streams(9, 4)
    b1, b2 = scenario_streams(9, 4)
    assert a1.uniform() == b1.uniform()
    assert a2.uniform() == b2.uniform()
    c1, _ = scenario_streams(9, 5)
    assert a1.uniform() != c1.uniform()
