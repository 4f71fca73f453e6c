import math

import numpy as np
import pytest

from prplab.random_time import CdfSpec
from prplab.solvers import (
    GAMMA,
    StateFunction,
    TimeFunction,
    det_payoff_curve,
    g_kernel,
    g_mc_oracle,
    htilde,
    htilde_mc_oracle,
    htilde_table,
)

PAYOFFS = [
    StateFunction.indicator(0),
    StateFunction.indicator(2),
    StateFunction.exponential(1.0),
    StateFunction.constant(1.0),
]


def test_gamma_value():
    assert GAMMA == pytest.approx(1.0 - math.exp(-1.0), abs=1e-16)


def test_htilde_recursion_all_payoffs():
    for h in PAYOFFS:
        for x in range(21):
            lhs = htilde(h, x)
            rhs = GAMMA * float(h(np.array(float(x)))) + (1.0 - GAMMA) * htilde(h, x + 1)
            assert abs(lhs - rhs) <= 1e-12, (h.name, x)


def test_htilde_closed_forms():
    assert htilde(StateFunction.indicator(0), 0) == pytest.approx(GAMMA, abs=1e-12)
    assert htilde(StateFunction.indicator(0), 1) == 0.0
    assert htilde(StateFunction.constant(1.0), 7) == 1.0
    # geometric series: htilde(x) = gamma * sum (1-gamma)^k e^{-(x+k)}
    h = StateFunction.exponential(1.0)
    x = 3
    series = GAMMA * sum(
        (1.0 - GAMMA) ** k * math.exp(-(x + k)) for k in range(2000)
    )
    assert htilde(h, x) == pytest.approx(series, abs=1e-14)


def test_htilde_direct_series_indicator2():
    # htilde(0) for indicator(2): only the k=2 term survives
    target = GAMMA * (1.0 - GAMMA) ** 2
    assert htilde(StateFunction.indicator(2), 0) == pytest.approx(target, abs=1e-14)


def test_htilde_mc_oracle_within_3se():
    for h in PAYOFFS:
        est, se, bound = htilde_mc_oracle(h, 0, 40_000, seed=5)
        target = htilde(h, 0)
        assert bound < 1e-6
        if se == 0.0:
            assert est == pytest.approx(target, abs=1e-12)
        else:
            assert abs(est - target) <= 3.0 * se + bound, h.name


def test_g_kernel_fixed_point():
    a = (1.0, 2.0)
    lam = 1.0
    for h in PAYOFFS:
        tab = g_kernel(a, h, lam)
        for x in range(21):
            ax = a[min(x, len(a) - 1)]
            lhs = float(tab(np.array(float(x))))
            rhs = (ax * float(h(np.array(float(x)))) + lam * float(tab(np.array(float(x + 1))))) / (ax + lam)
            assert abs(lhs - rhs) <= 1e-12, (h.name, x)


def test_g_kernel_constant_payoff():
    tab = g_kernel((0.5, 1.5, 3.0), StateFunction.constant(2.0), 2.0)
    for x in range(10):
        assert float(tab(np.array(float(x)))) == pytest.approx(2.0, abs=1e-12)


def test_g_mc_oracle_within_3se():
    cases = [
        ((1.0, 2.0), StateFunction.indicator(0), 1.0, 0),
        ((1.0, 2.0), StateFunction.exponential(1.0), 1.0, 1),
        ((0.5, 1.5, 3.0), StateFunction.indicator(2), 2.0, 0),
    ]
    for a, h, lam, x in cases:
        tab = g_kernel(a, h, lam)
        target = float(tab(np.array(float(x))))
        est, se, bound = g_mc_oracle(a, h, lam, x, 40_000, seed=6)
        assert abs(est - target) <= 3.0 * se + bound, (a, h.name)


def test_time_function_conventions():
    h = TimeFunction.indicator_until(2.0)
    # the boundary belongs to the left piece: h(2) = 1, right limit 0
    assert h.value(np.array(2.0)) == 1.0
    assert h.value_after(np.array(2.0)) == 0.0
    assert h.value(np.array(2.5)) == 0.0
    assert h.value(np.array(0.5)) == 1.0


def test_det_payoff_curve_matches_quadrature():
    cdf = CdfSpec(background=("exponential", 1.0), atoms=((1.0, 0.3),))
    h = TimeFunction.indicator_until(2.0)
    curve = det_payoff_curve(h, cdf)
    # X(t) = E[h(tau) 1_{tau > t}]: continuous density 0.7 e^{-s} up to the
    # payoff cut at 2, plus the atom contribution at 1
    for t in (0.0, 0.5, 1.0, 1.5, 2.5):
        expected = 0.7 * max(math.exp(-t) - math.exp(-2.0), 0.0)
        if t < 1.0:
            expected += 0.3
        assert float(curve.value(np.array(t), "right")) == pytest.approx(expected, abs=1e-12)


def test_state_function_tail_bounds():
    h = StateFunction.exponential(1.0)
    assert h.bound() == pytest.approx(1.0)
    assert float(h(np.array(4.0))) == pytest.approx(math.exp(-4.0))
    ind = StateFunction.indicator(2)
    assert float(ind(np.array(2.0))) == 1.0
    assert float(ind(np.array(3.0))) == 0.0
