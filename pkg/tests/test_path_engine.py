import numpy as np
import pytest

from prplab.path_engine import (
    EventGrid,
    JumpPath,
    LeftState,
    PwProcess,
    bracket,
    integrate_arrays,
    integrate_predictable,
    pw_constant,
    pw_from_increments,
    sample_poisson_path,
)


def grid3():
    return EventGrid(np.array([1.0, 2.5, 4.0]), 4.0)


def test_event_grid_contains_endpoints():
    g = grid3()
    assert g.times[0] == 0.0
    assert g.times[-1] == 4.0
    assert g.n_seg == len(g.times) - 1


def test_event_grid_sorts_and_dedups():
    g = EventGrid(np.array([2.0, 1.0, 2.0]), 4.0)
    assert np.array_equal(g.times, np.array([0.0, 1.0, 2.0, 4.0]))
    with pytest.raises(ValueError):
        EventGrid(np.array([5.0]), 4.0)


def test_jump_path_count_at():
    p = JumpPath(rate=1.0, horizon=10.0, jump_times=(1.0, 3.0, 7.0))
    assert p.count_at(0.5) == 0
    assert p.count_at(3.0) == 2
    assert p.count_at(9.9) == 3


def test_sample_poisson_path_reproducible():
    a = sample_poisson_path(2.0, 10.0, 123)
    b = sample_poisson_path(2.0, 10.0, 123)
    assert np.array_equal(a.jump_times, b.jump_times)
    assert np.all(a.jump_times > 0.0) and np.all(a.jump_times <= 10.0)
    assert np.all(np.diff(a.jump_times) > 0.0)


def test_pw_process_left_limits_and_drift():
    g = grid3()
    vals = np.array([0.0, 2.0, 1.5, 3.0])
    jumps = np.array([0.0, 1.0, 0.0, 0.5])
    x = PwProcess(g, vals, jumps)
    # left limit = right value minus the jump at the same breakpoint
    assert np.array_equal(x.left_limits, vals - jumps)
    # drift over a segment connects the previous right value to the next left limit
    assert np.array_equal(x.drift_increments, x.left_limits[1:] - vals[:-1])
    assert x.initial == 0.0
    assert x.terminal == 3.0


def test_pw_process_value_sides():
    g = grid3()
    x = PwProcess(g, np.array([0.0, 2.0, 2.0, 2.0]), np.array([0.0, 2.0, 0.0, 0.0]))
    assert x.value(1.0, "right") == 2.0
    assert x.value(1.0, "left") == 0.0
    assert x.value(0.5, "right") == pytest.approx(0.0)


def test_pw_from_increments_roundtrip():
    g = grid3()
    drift = np.array([0.5, -1.0, 2.0])
    jumps = np.array([0.0, 1.0, 0.0, -0.5])
    x = pw_from_increments(g, drift, jumps, 3.0)
    assert x.initial == 3.0
    assert np.allclose(x.drift_increments, drift)
    assert np.array_equal(x.jumps, jumps)
    assert x.terminal == 3.0 + drift.sum() + jumps[1:].sum()


def test_algebra_matches_pointwise():
    g = grid3()
    x = pw_from_increments(g, np.array([1.0, 0.0, 2.0]), np.array([0.0, 1.0, 0.0, 0.0]), 0.0)
    y = pw_constant(g, 2.0)
    assert np.array_equal((x + y).vals, x.vals + 2.0)
    assert np.array_equal((x - y).vals, x.vals - 2.0)
    assert np.array_equal((x * 2.0).vals, x.vals * 2.0)
    assert (x + 1.0).initial == 1.0
    with pytest.raises(TypeError):
        x * y


def test_stopped_at_freezes():
    g = grid3()
    x = pw_from_increments(g, np.array([1.0, 1.0, 1.0]), np.array([0.0, 0.0, 1.0, 0.0]), 0.0)
    s = x.stopped_at(1)
    assert np.array_equal(s.vals[1:], np.full(3, x.vals[1]))
    assert np.array_equal(s.jumps[2:], np.zeros(2))


def test_integrate_predictable_hand_case():
    # integral of a left-continuous step integrand against a jump + drift process
    g = grid3()
    x = pw_from_increments(g, np.array([1.0, 1.0, 1.0]), np.array([0.0, 2.0, 0.0, 0.0]), 0.0)
    seg_state = LeftState(t=g.times[:-1], fields={"w": np.array([1.0, 2.0, 3.0])})
    jump_state = LeftState(t=g.times, fields={"w": np.array([1.0, 1.0, 2.0, 3.0])})
    out = integrate_predictable(lambda s: s["w"], x, seg_state, jump_state)
    # segments contribute w * drift, the jump at t=1 contributes w(1-) * 2
    assert out.terminal == pytest.approx(1.0 * 1.0 + 2.0 * 1.0 + 3.0 * 1.0 + 1.0 * 2.0)
    assert out.jumps[1] == pytest.approx(2.0)


def test_integrate_arrays_matches_predictable():
    g = grid3()
    x = pw_from_increments(g, np.array([0.5, 0.5, 0.5]), np.array([0.0, 1.0, 1.0, 0.0]), 0.0)
    phi_seg = np.array([2.0, 0.0, 1.0])
    phi_jump = np.array([2.0, 2.0, 0.0, 1.0])
    a = integrate_arrays(phi_seg, phi_jump, x)
    assert a.terminal == pytest.approx(2.0 * 0.5 + 0.0 + 1.0 * 0.5 + 2.0 * 1.0 + 0.0)


def test_bracket_pure_jump():
    g = grid3()
    x = pw_from_increments(g, np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0, 2.0]), 0.0)
    y = pw_from_increments(g, np.array([0.0, 3.0, 0.0]), np.array([0.0, 2.0, 1.0, 1.0]), 0.0)
    br = bracket(x, y)
    assert np.array_equal(br.jumps, x.jumps * y.jumps)
    assert np.allclose(br.drift_increments, 0.0)
    assert br.terminal == pytest.approx(1.0 * 2.0 + 0.0 + 2.0 * 1.0)


def test_first_jump_must_be_zero():
    g = grid3()
    with pytest.raises(ValueError):
        PwProcess(g, np.zeros(4), np.array([1.0, 0.0, 0.0, 0.0]))
