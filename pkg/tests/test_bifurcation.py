from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numba import njit

from tipkit import bifurcation as bif
from tipkit import ecosystem as eco
from tipkit.ode import IntegratorConfig, integrate

P = eco.ModelParams(r=1.0, m=0.075, b=0.025, b_c=0.025)


def nontrivial(params):
    return sum(e.kind in ("e3", "e4") for e in eco.equilibria(params))


def test_transcritical_values():
    p = eco.ModelParams(r=1, m=0.1, b=0.025, b_c=0.025)
    assert bif.transcritical_m(1.0, p) == pytest.approx(0.031571153316884155, abs=1e-6)
    flat = eco.ModelParams(r=1, m=0.1)
    assert bif.transcritical_m(1e4, flat) == pytest.approx(0.4, abs=1e-6)
    assert bif.transcritical_m(1e-6, flat) < 1e-9
    with pytest.raises(ValueError):
        bif.transcritical_m(0.0, flat)


def test_saddle_node_halfline_against_cubic_bisection():
    k, a = 0.05, 10.0
    lo, hi = 0.0, 100.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if k * mid ** 3 + a * a * k * mid - 2 * a * a > 0:
            hi = mid
        else:
            lo = mid
    P_sn, m_sn, r_min = bif.saddle_node_halfline(P)
    assert P_sn == pytest.approx(lo, abs=1e-10)
    assert P_sn == pytest.approx(13.789, abs=0.01)
    assert m_sn == pytest.approx(0.4 * math.exp(-k * lo) / ((a / lo) ** 2 + 1), abs=1e-14)
    assert m_sn == pytest.approx(0.13156, abs=5e-4)
    assert r_min == pytest.approx(0.2758, abs=5e-4)
    assert bif.transcritical_m(r_min, P) == pytest.approx(m_sn, abs=1e-9)
    # the fold sits at the maximiser of h
    assert P_sn == pytest.approx(eco.p_opt(P), rel=1e-12)


def test_saddle_node_needs_nonlinearity():
    with pytest.raises(ValueError, match="no saddle-node"):
        bif.saddle_node_halfline(eco.ModelParams(r=1, m=0.1))


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_equilibria_straddle_fold(r):
    _, m_sn, _ = bif.saddle_node_halfline(P)
    above = {e.kind for e in eco.equilibria(P.at(r=r, m=m_sn + 1e-4))}
    below = {e.kind for e in eco.equilibria(P.at(r=r, m=m_sn - 1e-4))}
    assert not {"e3", "e4"} & above
    assert {"e3", "e4"} <= below


@given(r=st.floats(0.3, 3.0), k=st.floats(0.005, 0.06), side=st.floats(1e-6, 1e-4))
@settings(max_examples=20, deadline=None)
def test_equilibrium_count_jumps(r, k, side):
    p = eco.ModelParams(r=r, m=0.1, b=k / 2, b_c=k / 2)
    m_t = bif.transcritical_m(r, p)
    assert abs(nontrivial(p.at(m=m_t * (1 + side))) - nontrivial(p.at(m=m_t * (1 - side)))) == 1
    _, m_sn, r_min = bif.saddle_node_halfline(p)
    if r > r_min * 1.01 and abs(m_sn - m_t) > 1e-3:
        assert nontrivial(p.at(m=m_sn * (1 - side))) - nontrivial(p.at(m=m_sn * (1 + side))) == 2


def test_fold_is_flat_in_r():
    curve = bif.saddle_node_curve(P, 3.0, 25)
    assert np.ptp(curve.points[:, 1]) == 0.0
    assert curve.points[0, 0] == pytest.approx(bif.saddle_node_halfline(P)[2])


def test_hopf_anchor_and_residuals():
    curve = bif.hopf_curve(P, (0.75, 2.5), 8)
    assert curve.label == "H_e" and len(curve.points) == 8
    for r, m in curve.points:
        e3 = eco.equilibrium(P.at(r=r, m=m), "e3")
        J = eco.jacobian(e3.state, P.at(r=r, m=m))
        assert abs(np.trace(J)) < 1e-9
        assert np.linalg.det(J) > 0
        assert r > 0 and m > 0
    (m1,) = bif.hopf_m(1.0, P)
    assert m1 == pytest.approx(0.12130613194252667, abs=1e-10)


def test_hopf_separates_focus_types():
    (m1,) = bif.hopf_m(1.0, P)
    below = eco.equilibrium(P.at(m=m1 - 1e-4), "e3")
    above = eco.equilibrium(P.at(m=m1 + 1e-4), "e3")
    assert below.stability == "stable focus"
    assert above.stability == "unstable focus"


def test_first_lyapunov_normal_form():
    """w' = (i omega + |w|^2) w has l1 = 2/omega with unit-norm eigenvector scaling."""
    for omega in (0.5, 1.0, 3.0):
        def jac(s, om=omega):
            x, y = s
            return np.array([[3 * x * x + y * y, -om + 2 * x * y],
                             [om + 2 * x * y, x * x + 3 * y * y]])
        assert bif.first_lyapunov(jac, (0.0, 0.0), h=1e-2) == pytest.approx(2 / omega, rel=1e-6)
        neg = lambda s, j=jac: -j(s) @ np.diag([1, 1]) + 2 * np.array([[0, -omega], [omega, 0]])
        assert bif.first_lyapunov(neg, (0.0, 0.0), h=1e-2) == pytest.approx(-2 / omega, rel=1e-6)


@njit(cache=True)
def frozen(t, y, p):
    return eco.rhs(t, y, p)


def test_criticality_agrees_with_simulation():
    """Subcritical: inside the stable region an escaping orbit exists near e3.

    Supercritical: just past the Hopf point the orbit from e3 + 1e-3 settles
    on a small cycle whose amplitude grows like a square root.
    """
    m1 = bif.hopf_m(1.0, P)[0]
    assert bif.hopf_criticality(1.0, m1, P) == "subcritical"
    cfg = IntegratorConfig(1e-9, 1e-9, nonnegative=True)

    def escapes(dm, kick):
        p = P.at(m=m1 - dm)
        e3 = np.array(eco.equilibrium(p, "e3").state)
        y = integrate(eco.rhs, e3 + [kick, 0.0], 0.0, 4000.0, cfg, eco.pack(p)).y_final
        if y[1] < 1e-3:
            return True
        assert np.linalg.norm(y - e3) < 1e-3
        return False

    # e3 is stable but a repelling cycle bounds its basin; the cycle
    # shrinks onto e3 as m approaches the Hopf point
    assert not escapes(0.0005, 2.0) and escapes(0.0005, 4.0)
    assert not escapes(0.002, 4.0) and escapes(0.002, 6.0)

    weak = eco.ModelParams(r=2.0, m=0.2, b=0.0, b_c=0.0)
    m_sup = min(bif.hopf_m(2.0, weak))
    assert bif.hopf_criticality(2.0, m_sup, weak) == "supercritical"
    amps = []
    for f in (1.001, 1.004):
        p = weak.at(m=m_sup * f)
        e3 = np.array(eco.equilibrium(p, "e3").state)
        tr = integrate(eco.rhs, e3 + [1e-3, 0.0], 0.0, 30000.0, cfg, eco.pack(p))
        late = tr.states[tr.times > 20000.0]
        amps.append(np.linalg.norm(late - e3, axis=1).max())
    # a small stable cycle born at the Hopf point, amplitude ~ sqrt(m - m_H)
    assert 1e-2 < amps[0] < amps[1] < 0.5 * e3[0]
    assert amps[1] / amps[0] == pytest.approx(2.0, rel=0.25)


def test_bt_point():
    bt = bif.bt_point(P)
    r, m = bt.location
    P_sn, m_sn, _ = bif.saddle_node_halfline(P)
    assert abs(m - m_sn) < 1e-12
    pp = P.at(r=r, m=m)
    lam = np.linalg.eigvals(eco.jacobian((P_sn, eco.herbivore_level(P_sn, pp)), pp))
    assert np.abs(lam).sum() < 1e-6
    assert r == pytest.approx(0.69657, abs=1e-4)
    assert bt.bt_type == "II"
    st_pt = bif.st_point(P)
    assert st_pt.location == pytest.approx((bif.saddle_node_halfline(P)[2], m_sn))


def test_bt_type_one_for_weak_nonlinearity():
    p = eco.ModelParams(r=1, m=0.1, b=0.005, b_c=0.01)
    assert bif.bt_point(p).bt_type == "I"


def test_bt_out_of_range():
    with pytest.raises(ValueError, match="no BT in range"):
        bif.bt_point(P, r_hi=0.5)


def test_hopf_curve_ends_at_bt():
    bt_r, bt_m = bif.bt_point(P).location
    rs = bt_r + np.array([0.04, 0.02, 0.01, 0.005])
    ms = np.array([max(bif.hopf_m(r, P)) for r in rs])
    # linear extrapolation of the last two samples toward r_BT
    slope = (ms[-1] - ms[-2]) / (rs[-1] - rs[-2])
    assert ms[-1] + slope * (bt_r - rs[-1]) == pytest.approx(bt_m, abs=2e-4)
    assert np.all(np.diff(np.abs(ms - bt_m)) < 0)


def test_one_parameter_event_order():
    """r = 1, b = b_c = 0.02, m from 0.05 to 0.2: T, then Hopf, then the fold."""
    p = eco.ModelParams(r=1.0, m=0.05, b=0.02, b_c=0.02)
    events = []
    prev = None
    for m in np.linspace(0.05, 0.2, 3001):
        eqs = {e.kind: e for e in eco.equilibria(p.at(m=m))}
        state = (eco.equilibrium(p.at(m=m), "e2").stable, "e4" in eqs,
                 eqs["e3"].stable if "e3" in eqs else None, "e3" in eqs)
        if prev is not None:
            if state[0] != prev[0]:
                events.append(("T", m))
            if state[2] != prev[2] and state[3] and prev[3]:
                events.append(("H", m))
            if state[3] != prev[3]:
                events.append(("S", m))
        prev = state
    assert [e[0] for e in events] == ["T", "H", "S"]
    assert events[0][1] == pytest.approx(bif.transcritical_m(1.0, p), abs=1e-4)
    assert events[1][1] == pytest.approx(bif.hopf_m(1.0, p)[0], abs=1e-4)
    assert events[2][1] == pytest.approx(bif.saddle_node_halfline(p)[1], abs=1e-4)
    assert bif.hopf_criticality(1.0, bif.hopf_m(1.0, p)[0], p) == "subcritical"
