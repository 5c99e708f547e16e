from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tipkit import normal_forms as nf
from tipkit import tipping as tp
from tipkit.shifts import ShiftSpec

SECH = ShiftSpec("sech", 0.0, 0.0, 1.0)
TANH = ShiftSpec("tanh", 0.0, 0.0, 1.0)


@given(mu=st.floats(-3, 3), s=st.floats(-4, 4))
def test_hopf_equilibrium_branch(mu, s):
    f = nf.hopf_nf_field((mu * s, 0.0), nf.HopfNFParams(mu, s))
    assert np.abs(f).max() < 1e-12


@given(theta=st.floats(0, 2 * math.pi))
def test_hopf_cycle_radius(theta):
    # on |w| = 1 at mu = -1 the radial velocity vanishes
    x, y = math.cos(theta), math.sin(theta)
    f = nf.hopf_nf_field((x, y), nf.HopfNFParams(-1.0, 0.0))
    assert x * f[0] + y * f[1] == pytest.approx(0.0, abs=1e-12)
    # inside the cycle the flow points inward, outside it points outward
    g = nf.hopf_nf_field((0.5 * x, 0.5 * y), nf.HopfNFParams(-1.0, 0.0))
    h = nf.hopf_nf_field((1.5 * x, 1.5 * y), nf.HopfNFParams(-1.0, 0.0))
    assert x * g[0] + y * g[1] < 0 < x * h[0] + y * h[1]


def test_hopf_cycle_extent():
    assert nf.hopf_cycle_extent(-1.0, 2.0) == (-3.0, -1.0)
    with pytest.raises(ValueError):
        nf.hopf_cycle_extent(0.5, 1.0)


def test_hopf_bi_boundaries_values():
    lo, hi = nf.hopf_bi_boundaries(-1.0, 0.5)
    assert hi == pytest.approx(2 * math.sqrt(2) - 3, abs=1e-12)
    assert lo < -1.0 < hi
    _, hi = nf.hopf_bi_boundaries(-1.0, 2.0)
    assert hi == pytest.approx(-1 + (math.sqrt(17) - 1) / 8, abs=1e-12)
    assert hi == pytest.approx(-0.609612, abs=1e-6)
    assert nf.hopf_bi_boundaries(-1.0, 1e-4)[1] == pytest.approx(0.0, abs=1e-6)
    with pytest.raises(ValueError, match="no basin instability"):
        nf.hopf_bi_boundaries(-1.0, 0.0)


@given(mu=st.floats(-5, -0.01), s=st.floats(0.01, 5))
def test_hopf_bi_symmetric_and_on_cycle(mu, s):
    lo, hi = nf.hopf_bi_boundaries(mu, s)
    assert (lo, hi) == nf.hopf_bi_boundaries(mu, -s)
    assert lo < mu < hi
    # e(mu_minus) sits on the cycle of e(mu*): s^2 (mu_minus - mu*)^2 = -mu*
    for star in (lo, hi):
        assert s * s * (mu - star) ** 2 == pytest.approx(-star, rel=1e-9, abs=1e-15)
    if hi < 0:
        lx = nf.hopf_cycle_extent(hi, s)
        assert min(abs(mu * s - x) for x in lx) < 1e-6


def test_sn_field_and_equilibria():
    assert nf.sn_nf_field(-1.0, nf.SaddleNodeNFParams(-1.0, 2.0)) == 0.0
    assert nf.sn_equilibria(-1.0, 2.0) == (-3.0, -1.0)
    for x in (-1.0, 1.0):
        assert nf.sn_nf_field(x, nf.SaddleNodeNFParams(-1.0, 0.0)) == 0.0
    assert nf.sn_equilibria(0.1, 1.0) is None


def _sn_slope(mu, s, h=1e-7):
    ep = nf.sn_equilibria(mu, s)[1]
    p = nf.SaddleNodeNFParams(mu, s)
    return (nf.sn_nf_field(ep + h, p) - nf.sn_nf_field(ep - h, p)) / (2 * h)


def test_sn_eigenvalue_and_db():
    assert _sn_slope(-1.0, 0.7) == pytest.approx(-2.0, abs=1e-7)
    mu = -1e-6
    assert _sn_slope(mu, 0.7, 1e-9) ** 2 / (-mu) == pytest.approx(4.0, rel=1e-4)
    assert nf.sn_db() == 4.0


def test_sn_bi_boundary_values():
    assert nf.sn_bi_boundary(-1.0, 2.0) == pytest.approx(-0.25, abs=1e-15)
    assert nf.sn_bi_boundary(-1.0, 3.0) == pytest.approx(-4 / 9, abs=1e-15)
    with pytest.raises(ValueError, match="no basin instability"):
        nf.sn_bi_boundary(-1.0, 1.0)
    with pytest.raises(ValueError, match="no basin instability"):
        nf.sn_bi_boundary(-1.0, 0.5)


@given(mu=st.floats(-5, -0.01), s=st.one_of(st.floats(-5, -0.01), st.floats(0.01, 5)))
def test_sn_bi_boundary_definition(mu, s):
    root = math.sqrt(-mu)
    if 0 < s and s * root <= 1.0:
        with pytest.raises(ValueError):
            nf.sn_bi_boundary(mu, s)
        return
    star = nf.sn_bi_boundary(mu, s)
    # e^+(mu_minus) coincides with e^-(mu*)
    assert nf.sn_equilibria(mu, s)[1] == pytest.approx(nf.sn_equilibria(star, s)[0], abs=1e-9 * (1 + abs(mu * s)))


def test_ritchie_curve():
    assert nf.ritchie_curve(2.0, -1.0) == pytest.approx(math.log(2 + math.sqrt(3)), abs=1e-12)
    assert nf.ritchie_curve(2.0, -1.0) == pytest.approx(1.316958, abs=1e-5)
    assert nf.ritchie_curve(1.0 + 1e-10, -1.0) < 1e-4
    with pytest.raises(ValueError):
        nf.ritchie_curve(1.0, -1.0)


@pytest.mark.parametrize("kind, s, bracket", [
    ("hopf", 0.5, (-0.99, -0.001)),
    ("hopf", 2.0, (-0.99, -0.001)),
    ("sn", 2.0, (-0.99, -0.01)),
    ("sn", 3.0, (-0.99, -0.01)),
    ("sn", -3.0, (-2.5, -1.01)),
])
def test_bi_boundary_by_simulation(kind, s, bracket):
    if kind == "hopf":
        model, exact = nf.HopfNF(-1.0, s), nf.hopf_bi_boundaries(-1.0, s)[1]
    else:
        model, exact = nf.SaddleNodeNF(-1.0, s), nf.sn_bi_boundary(-1.0, s)
    found = nf.bi_boundary_by_simulation(model, bracket, width=1e-7)
    assert found == pytest.approx(exact, rel=0.01)


def test_bi_boundary_needs_change():
    with pytest.raises(ValueError):
        nf.bi_boundary_by_simulation(nf.SaddleNodeNF(-1.0, 2.0), (-0.9, -0.5))


@pytest.mark.parametrize("template", [SECH, TANH])
@pytest.mark.parametrize("eps", [1e-2, 0.3, 3.0])
def test_untilted_hopf_branch_is_invariant(template, eps):
    model = nf.HopfNF(-1.0, 0.0)
    for d in (0.5, 1.5, 3.0):
        assert tp.classify_run(model, template, d, eps) == tp.TRACKING


@given(x=st.floats(-50, 50), mu=st.floats(-3, 3), s=st.floats(-3, 3))
def test_sn_escape_is_monotone(x, mu, s):
    d = x - mu * s
    if d < -10.0:
        assert nf.sn_nf_field(x, nf.SaddleNodeNFParams(mu, s)) < 0
        assert nf.sn_escaped(0.0, np.array([x]), nf.SaddleNodeNF(mu, s).args(None, mu))
    if d > 0:
        assert not nf.sn_escaped(0.0, np.array([x]), nf.SaddleNodeNF(mu, s).args(None, mu))


def test_hopf_tilt_sign_symmetry():
    deltas = np.linspace(0.4, 1.6, 5)
    epss = tp.log_grid(1e-2, 3.0, 2)
    for template in (SECH, ShiftSpec("plateau", 0.0, 0.0, 1.0, tau=math.inf)):
        a = tp.tipping_diagram(nf.HopfNF(-1.0, 2.0), template, deltas, epss)
        b = tp.tipping_diagram(nf.HopfNF(-1.0, -2.0), template, deltas, epss)
        assert np.array_equal(a.cells, b.cells)
        assert {tp.TRACKING, tp.TIPPED} <= set(a.cells.ravel())


def test_sn_model_end_classification():
    m = nf.SaddleNodeNF(-1.0, 0.0)
    assert m.classify_end([0.0], -1.0, False) == tp.TRACKING
    assert m.classify_end([-1.5], -1.0, False) == tp.TIPPED
    assert m.classify_end([0.0], 0.5, False) == tp.TIPPED
    assert m.classify_end([0.0], -1.0, True) == tp.TIPPED
    with pytest.raises(ValueError):
        m.initial_state(0.5)


def test_hopf_model_end_classification():
    m = nf.HopfNF(-1.0, 1.0)
    assert m.classify_end([-1.0 + 0.5, 0.0], -1.0, False) == tp.TRACKING
    assert m.classify_end([-1.0 + 1.5, 0.0], -1.0, False) == tp.TIPPED
    assert m.classify_end([0.0, 0.0], 0.0, False) == tp.TRACKING
    assert m.classify_end([0.1, 0.0], 0.5, False) == tp.TIPPED


def test_sn_ritchie_agreement_small_shift():
    # the inverse-square law is asymptotic in the excursion past the fold
    model = nf.SaddleNodeNF(-1.0, 0.0)
    d = 1.2
    rates = tp.critical_rate(model, SECH, d, (0.05, 20.0), per_decade=10, tol=1e-6)
    assert len(rates) == 1
    assert rates[0] == pytest.approx(nf.ritchie_curve(d, -1.0), rel=0.05)
