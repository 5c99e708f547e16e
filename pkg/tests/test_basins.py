from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tipkit import basins as bs
from tipkit import ecosystem as eco

B = eco.ModelParams(r=1.0, m=0.075, b=0.025, b_c=0.025)
E2 = bs.AttractorLabel.CONVERGED_E2
E3 = bs.AttractorLabel.CONVERGED_E3


def e3_of(r, m):
    return np.array(eco.equilibrium(B.at(r=r, m=m), "e3").state)


def test_classify_examples():
    assert bs.classify(e3_of(1.0, 0.075) + 1e-3, B) is E3
    rep = bs.classify_report((50.0, 0.01), B)
    assert rep.label is E2
    assert np.linalg.norm(rep.state - (50.0, 0.0)) < 1e-5
    assert bs.classify(e3_of(0.75, 0.075), B.at(r=1.25)) is E2


def test_classify_rejects_bad_start():
    with pytest.raises(ValueError):
        bs.classify((-1.0, 2.0), B)
    with pytest.raises(ValueError):
        bs.classify((np.nan, 2.0), B)


def test_classify_budget_gives_undecided():
    from tipkit.ode import IntegratorConfig
    rep = bs.classify_report((40.0, 5.0), B, cfg=IntegratorConfig(1e-8, 1e-8, max_steps=5))
    assert rep.label is bs.AttractorLabel.UNDECIDED
    assert rep.diagnostic


def test_classify_cycle_past_hopf():
    # b = 0, past a supercritical Hopf point with e2 a saddle: a stable cycle
    p = eco.ModelParams(r=2.0, m=0.24)
    eqs = {e.kind: e for e in eco.equilibria(p)}
    assert not eqs["e2"].stable and not eqs["e3"].stable
    assert bs.classify(np.array(eqs["e3"].state) + 0.5, p) is bs.AttractorLabel.CYCLE


def test_in_basin_examples():
    assert bs.in_basin_of_e3(e3_of(1.0, 0.075), B)
    start = e3_of(0.75, 0.075)
    assert bs.in_basin_of_e3(start, B.at(r=1.0))
    assert not bs.in_basin_of_e3(start, B.at(r=1.25))


def test_in_basin_undefined():
    _, m_sn, _ = __import__("tipkit.bifurcation", fromlist=["x"]).saddle_node_halfline(B)
    with pytest.raises(bs.BasinUndefinedError, match="basin undefined"):
        bs.in_basin_of_e3((10.0, 10.0), B.at(m=m_sn + 0.01))


def test_straddle_stable_manifold_of_saddle():
    # separatrix on the line P = 20, located once by bisection between seeds
    h_star = 21.775408596731722
    assert bs.in_basin_of_e3((20.0, h_star + 1e-3), B)
    assert not bs.in_basin_of_e3((20.0, h_star - 1e-3), B)


def test_boundary_on_path():
    r_star = bs.bi_boundary_on_path((0.75, 0.075), "r", (0.8, 1.25), B)
    assert r_star == pytest.approx(1.07672, abs=0.005)


def test_boundary_on_path_degenerate_bracket():
    with pytest.raises(ValueError, match="no basin-membership change"):
        bs.bi_boundary_on_path((0.75, 0.075), "r", (0.8, 1.0), B)
    with pytest.raises(ValueError):
        bs.bi_boundary_on_path((0.75, 0.075), "x", (0.8, 1.25), B)


def test_membership_flips_once_on_dense_scan():
    start = e3_of(0.75, 0.075)
    flags = [bs.in_basin_of_e3(start, B.at(r=r)) for r in np.linspace(0.8, 1.25, 100)]
    assert flags[0] and not flags[-1]
    assert sum(a != b for a, b in zip(flags, flags[1:])) == 1


def test_bi_region_examples():
    m = bs.bi_region((0.75, 0.075), [0.75, 0.9, 1.25], [0.075], B)
    cells = {r: (mask, mem) for r, _, mask, mem in m.rows()}
    assert cells[0.75] == (True, False)
    assert cells[0.9] == (True, False)
    assert cells[1.25] == (True, True)
    assert not np.any(m.membership & ~m.mask)


def test_bi_region_direction():
    rs = np.linspace(0.05, 2.0, 40)
    m = bs.bi_region((0.5, 0.12), rs, [0.12], B)
    member = m.membership[0]
    assert member[rs > 0.5].sum() >= 5
    assert member[rs < 0.5].sum() == 0
    assert m.r_values.min() > 0 and m.m_values.min() > 0


def test_bi_region_rejects_p1_outside_bistability():
    with pytest.raises(ValueError):
        bs.bi_region((0.2, 0.05), [1.0], [0.075], B)


def test_basin_map_csv():
    m = bs.bi_region((0.75, 0.075), [1.0, 1.25], [0.07, 0.075], B)
    text = m.to_csv()
    lines = text.splitlines()
    assert lines[0] == "# p1_r=0.75 p1_m=0.075"
    header = lines.index("r,m,mask,member")
    body = [l.split(",") for l in lines[header + 1:]]
    assert len(body) == 4
    assert [float(b[1]) for b in body] == [0.07, 0.07, 0.075, 0.075]


@given(r=st.floats(0.5, 1.5), m=st.floats(0.04, 0.125))
@settings(max_examples=50, deadline=None)
def test_classification_stable_under_tolerance_halving(r, m):
    p = B.at(r=r, m=m)
    if eco.equilibrium(p, "e3") is None:
        return
    start = e3_of(0.75, 0.075)
    coarse = bs.classify(start, p)
    fine = bs.classify(start, p, cfg=bs.SWEEP.tightened(0.5))
    assert coarse == fine


@given(r=st.floats(0.6, 1.6), m=st.floats(0.05, 0.13))
@settings(max_examples=30, deadline=None)
def test_bi_cells_never_converge_to_e3(r, m):
    start = e3_of(0.75, 0.075)
    mask, member = bs.bi_cell(start, B.at(r=r, m=m))
    if member:
        assert mask
        assert bs.classify(start, B.at(r=r, m=m)) in (E2, bs.AttractorLabel.CYCLE,
                                                       bs.AttractorLabel.DIVERGENT)


@pytest.mark.parametrize("angle", [0.0, 1.3, 2.6, 4.0, 5.2])
def test_repelling_cycle_bounds_basin(angle):
    p = B.at(r=1.0, m=0.12)
    e3 = eco.equilibrium(p, "e3")
    assert e3.stable and eco.equilibrium(p, "e2").stable
    u = np.array([np.cos(angle), np.sin(angle)])
    centre = np.array(e3.state)

    def inside(rad):
        return bs.classify(centre + rad * u, p) is E3

    lo, hi = 1e-3, 9.0
    assert inside(lo) and not inside(hi)
    while hi - lo > 1e-4:
        mid = 0.5 * (lo + hi)
        if inside(mid):
            lo = mid
        else:
            hi = mid
    assert lo > 0.5
    assert inside(lo - 1e-4) and not inside(hi + 1e-4)


def test_repelling_cycle_radius_value():
    p = B.at(r=1.0, m=0.12)
    centre = np.array(eco.equilibrium(p, "e3").state)
    assert bs.classify(centre + [3.4545, 0.0], p) is E3
    assert bs.classify(centre + [3.4547, 0.0], p) is not E3


def test_horizon_stretches_near_hopf():
    from tipkit.bifurcation import hopf_m
    (mh,) = hopf_m(1.0, B)
    assert bs.default_horizon(B) == bs.BASE_HORIZON
    assert bs.default_horizon(B.at(m=mh - 1e-6)) > bs.BASE_HORIZON
