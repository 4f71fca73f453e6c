import numpy as np
import pytest

from prplab.models import ModelSpec
from prplab.random_time import CdfSpec
from prplab.solvers import GAMMA, StateFunction, TimeFunction
from prplab import mc_verify as mc

COX_P = ModelSpec.cox_poisson(1.0)
COX_I = ModelSpec.cox_intensity((1.0, 2.0), 1.0)
IND = ModelSpec.independent(
    CdfSpec(background=("exponential", 1.0), atoms=((1.0, 0.3),)), 1.0
)


def test_mean_zero_all_selectors_cox_poisson():
    h = StateFunction.exponential(1.0)
    for sel in mc.PROCESS_SELECTORS:
        r = mc.mean_zero_test(sel, COX_P, h, 3000, 10.0, 101)
        assert r.passed, (sel, r.estimate, r.se, r.z)
        assert r.n_paths == 3000


def test_mean_zero_other_models():
    r = mc.mean_zero_test("Yh", COX_I, StateFunction.indicator(0), 2000, 10.0, 103)
    assert r.passed
    r = mc.mean_zero_test("Yh", IND, TimeFunction.indicator_until(2.0), 2000, 10.0, 105)
    assert r.passed


def test_conditional_increment_test():
    h = StateFunction.exponential(1.0)
    r = mc.conditional_increment_test("Yh", COX_P, h, 3000, 10.0, 107, s=2.0)
    assert r.passed, (r.estimate, r.se, r.z)
    with pytest.raises(ValueError):
        mc.conditional_increment_test("Yh", COX_P, h, 10, 10.0, 107, s=11.0)


def test_pseudo_stopping_check():
    r = mc.pseudo_stopping_check(COX_P, 3000, 10.0, 109)
    assert r.passed
    assert 0.0 < r.bias_bound <= 1e-2


def test_expectation_at_tau_hits_gamma():
    r = mc.expectation_at_tau(COX_P, StateFunction.indicator(0), 5000, 20.0, 111, GAMMA)
    assert r.passed, (r.estimate, r.se, r.z)
    assert r.bias_bound < 1e-4


def test_martingale_panel_matches_individual():
    h = StateFunction.exponential(1.0)
    panel = mc.martingale_panel(COX_P, h, 500, 10.0, 113)
    single = mc.mean_zero_test("Mtau", COX_P, h, 500, 10.0, 113)
    assert panel["Mtau"].estimate == single.estimate
    assert panel["Mtau"].se == single.se
    assert set(panel) == set(mc.PROCESS_SELECTORS) | {"cond[Yh]", "cond[Mtau]"}


def test_broken_martingale_is_detected():
    # shifting the compensator rate must blow the z-test: use a wrong-rate
    # compensated process built from the same paths
    h = StateFunction.indicator(0)
    from prplab.models import build_bundle, make_scenario

    samples = np.empty(2000)
    for i in range(2000):
        scn = make_scenario(COX_P, 10.0, 115, i)
        b = build_bundle(COX_P, scn)
        samples[i] = b.M.terminal + 0.5  # deliberate drift
    z = samples.mean() / (samples.std(ddof=1) / np.sqrt(samples.size))
    assert abs(z) > 3.0
