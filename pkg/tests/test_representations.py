import numpy as np
import pytest

from prplab.models import ModelSpec, build_bundle, make_scenario
from prplab.path_engine import bracket
from prplab.random_time import CdfSpec
from prplab.solvers import GAMMA, StateFunction, TimeFunction
from prplab import representations as rep

CDF_ATOM = CdfSpec(background=("exponential", 1.0), atoms=((1.0, 0.3),))
CDF_SMOOTH = CdfSpec(background=("exponential", 1.0), atoms=())

COX_P = ModelSpec.cox_poisson(1.0)
COX_I = ModelSpec.cox_intensity((1.0, 2.0), 1.0)
IND_ATOM = ModelSpec.independent(CDF_ATOM, 1.0)
IND_SMOOTH = ModelSpec.independent(CDF_SMOOTH, 1.0)

STATE_HS = [
    StateFunction.indicator(0),
    StateFunction.indicator(2),
    StateFunction.exponential(1.0),
    StateFunction.constant(1.0),
]
TIME_H = TimeFunction.indicator_until(2.0)


def test_cox_poisson_formulas_exact():
    for h in STATE_HS:
        reports = rep.residual_batch(
            COX_P, h, ["AXX33", "CXX33", "REP3", "THM", "CORFIN", "J3"], 150, 10.0, 2
        )
        for f, r in reports.items():
            assert r.batch_max <= 1e-9, (f, h.name, r.batch_max)


def test_cox_intensity_formulas_exact():
    for h in STATE_HS:
        reports = rep.residual_batch(
            COX_I, h, ["EQ3", "EQC3", "XEQ3", "XEQ3A", "REP1", "THM", "CORFIN", "J3"],
            150, 10.0, 2,
        )
        for f, r in reports.items():
            assert r.batch_max <= 1e-9, (f, h.name, r.batch_max)


def test_independent_formulas_exact_and_naive_fails():
    reports = rep.residual_batch(
        IND_ATOM, TIME_H,
        ["REP2", "XEQ3A", "EQC3", "EQ3", "XEQ3", "THM", "CORFIN", "J3", "NAIVE"],
        300, 10.0, 2,
    )
    for f, r in reports.items():
        if f == "NAIVE":
            assert r.batch_max > 1e-3
            assert not r.passed
        else:
            assert r.batch_max <= 1e-9, (f, r.batch_max)


def test_rep1_needs_smooth_compensator():
    assert not rep.applicable("REP1", IND_ATOM, TIME_H)
    assert rep.applicable("REP1", IND_SMOOTH, TIME_H)
    reports = rep.residual_batch(IND_SMOOTH, TIME_H, ["REP1"], 150, 10.0, 2)
    assert reports["REP1"].batch_max <= 1e-9


def test_applicability_matrix():
    h = StateFunction.indicator(0)
    assert not rep.applicable("EQ3", COX_P, h)
    assert not rep.applicable("AXX33", COX_I, h)
    assert not rep.applicable("REP2", COX_I, h)
    assert rep.applicable("THM", COX_P, h)
    assert rep.applicable("J3", IND_ATOM, TIME_H)
    with pytest.raises(ValueError):
        rep.assemble("EQ3", COX_P, make_scenario(COX_P, 10.0, 1, 0), h)
    # payoff type mismatch is also rejected
    assert not rep.applicable("THM", COX_P, TIME_H)


def test_closed_form_Y_structure():
    h = StateFunction.exponential(1.0)
    found = False
    for i in range(40):
        scn = make_scenario(COX_P, 10.0, 5, i)
        b = build_bundle(COX_P, scn)
        pb = rep.payoff_bundle(b, h)
        y = rep.closed_form_Y(b, pb)
        if scn.tau_idx is not None:
            found = True
            # frozen at the payoff evaluated on the pre-jump state
            assert y.terminal == pb.h_tau
            assert np.all(y.vals[scn.tau_idx:] == pb.h_tau)
        assert y.initial == pb.Y0
    assert found


def test_thm_equals_rep3_pathwise():
    h = StateFunction.exponential(1.0)
    for i in range(150):
        b = build_bundle(COX_P, make_scenario(COX_P, 10.0, 7, i))
        pb = rep.payoff_bundle(b, h)
        gap = (rep._assemble("THM", b, pb) - rep._assemble("REP3", b, pb)).max_abs()
        assert gap <= 1e-12


def test_orthogonality_and_negative_control():
    hit = False
    for i in range(100):
        scn = make_scenario(COX_P, 10.0, 9, i)
        b = build_bundle(COX_P, scn)
        assert rep.orthogonality_check(b)
        if scn.tau_idx is not None:
            hit = True
            # against the unstopped compensated Poisson martingale the
            # covariation jump at tau equals 1: the pair is NOT orthogonal
            assert bracket(b.Mtau, b.Mhat).jumps[scn.tau_idx] == pytest.approx(1.0)
    assert hit


def test_equa1_identity_and_value():
    h = StateFunction.exponential(1.0)
    for i in range(100):
        scn = make_scenario(COX_P, 10.0, 13, i)
        b = build_bundle(COX_P, scn)
        pb = rep.payoff_bundle(b, h)
        assert rep.equa1_check(b, pb, "M") <= 1e-9
        assert rep.equa1_check(b, pb, "muh") <= 1e-9
        lhs, _ = rep.equa1_sides(b, pb, "M")
        tau_t = min(scn.tau, 10.0)
        assert abs(lhs.terminal - GAMMA * 1.0 * tau_t) <= 1e-9


def test_equa1_vanishes_in_avoidance():
    h = StateFunction.exponential(1.0)
    for i in range(40):
        b = build_bundle(COX_I, make_scenario(COX_I, 10.0, 15, i))
        pb = rep.payoff_bundle(b, h)
        lhs, rhs = rep.equa1_sides(b, pb, "M")
        assert lhs.max_abs() == 0.0
        assert rhs.max_abs() == 0.0


def test_mtilde_sign_resolution():
    h = StateFunction.exponential(1.0)
    plus_worst = 0.0
    minus_best = np.inf
    for i in range(150):
        scn = make_scenario(COX_P, 10.0, 17, i)
        b = build_bundle(COX_P, scn)
        pb = rep.payoff_bundle(b, h)
        r_plus, r_minus, sign = rep.mart_sign_check(b, pb)
        plus_worst = max(plus_worst, r_plus)
        minus_best = min(minus_best, r_minus)
        assert sign == "+"
    assert plus_worst <= 1e-12
    assert minus_best > 1e-6  # the opposite sign visibly breaks the identity


def test_mtilde_vanishes_without_overlap():
    h = StateFunction.exponential(1.0)
    for i in range(40):
        b = build_bundle(COX_I, make_scenario(COX_I, 10.0, 19, i))
        pb = rep.payoff_bundle(b, h)
        assert rep.mtilde(b, pb).max_abs() == 0.0


def test_mtilde_is_closed_by_thm():
    # THM minus its first two terms must equal the scaled Mtilde integral
    h = StateFunction.indicator(2)
    for i in range(60):
        b = build_bundle(COX_P, make_scenario(COX_P, 10.0, 21, i))
        pb = rep.payoff_bundle(b, h)
        thm = rep._assemble("THM", b, pb)
        rep3 = rep._assemble("REP3", b, pb)
        # collapse: the Mtilde term plus the Mtau part of term2 cancel
        assert (thm - rep3).max_abs() <= 1e-12


def test_residual_report_fields():
    reports = rep.residual_batch(COX_P, StateFunction.indicator(0), ["THM"], 25, 10.0, 23)
    r = reports["THM"]
    assert r.formula == "THM"
    assert r.model == "cox_poisson"
    assert r.n_paths == 25
    assert r.batch_mean <= r.batch_max
    assert r.passed
