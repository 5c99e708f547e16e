"""Bifurcation structure of the plant-herbivore model in the (r, m) plane.

Curves: transcritical T (exact), saddle-node half-line S_e (exact up to a
cubic root), Hopf H_e (per-r root finding on the trace of J at e3).
Codimension-two points: ST (end of S_e on T) and BT (trace zero on S_e).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import ecosystem as eco

__all__ = [
    "BifurcationCurve",
    "CodimTwoPoint",
    "transcritical_m",
    "saddle_node_halfline",
    "transcritical_curve",
    "saddle_node_curve",
    "hopf_m",
    "hopf_curve",
    "hopf_criticality",
    "first_lyapunov",
    "st_point",
    "bt_point",
]


@dataclass
class BifurcationCurve:
    label: str
    points: np.ndarray  # shape (n, 2): columns r, m
    criticality: list = field(default_factory=list)

    def to_rows(self):
        for k, (r, m) in enumerate(self.points):
            crit = self.criticality[k] if k < len(self.criticality) else ""
            yield self.label, float(r), float(m), crit


@dataclass
class CodimTwoPoint:
    label: str
    location: tuple[float, float]
    bt_type: str | None = None


def transcritical_m(r: float, params: eco.ModelParams) -> float:
    """m on T: the herbivore growth rate at e2 = (r/C, 0) vanishes."""
    if r <= 0:
        raise ValueError("r must be positive")
    k = params.nonlinearity
    return (params.E * params.c_max * math.exp(-k * r / params.C)
            / ((params.a * params.C / r) ** 2 + 1.0))


def _fold_root(params: eco.ModelParams) -> float:
    """Positive root of k P^3 + a^2 k P - 2 a^2 (Newton on a monotone cubic)."""
    k = params.nonlinearity
    a2 = params.a ** 2
    P = (2.0 * a2 / k) ** (1.0 / 3.0)
    for _ in range(100):
        f = k * P ** 3 + a2 * k * P - 2.0 * a2
        step = f / (3.0 * k * P * P + a2 * k)
        P -= step
        if abs(step) <= 4e-16 * P:
            break
    return P


def saddle_node_halfline(params: eco.ModelParams) -> tuple[float, float, float]:
    """(P_sn, m_sn, r_min): S_e = {(r, m_sn): r >= r_min}."""
    if params.nonlinearity <= 0:
        raise ValueError("no saddle-node: b + b_c = 0")
    P = _fold_root(params)
    m = params.E * params.c_max * math.exp(-params.nonlinearity * P) / ((params.a / P) ** 2 + 1.0)
    return P, m, params.C * P


def transcritical_curve(params: eco.ModelParams, r_values) -> BifurcationCurve:
    pts = np.array([[r, transcritical_m(r, params)] for r in r_values])
    crit = []
    if params.nonlinearity > 0:
        r_min = saddle_node_halfline(params)[2]
        crit = ["subcritical" if r > r_min else "supercritical" for r in pts[:, 0]]
    else:
        crit = ["supercritical"] * len(pts)
    return BifurcationCurve("T", pts, crit)


def saddle_node_curve(params: eco.ModelParams, r_max: float, n: int = 50) -> BifurcationCurve:
    _, m_sn, r_min = saddle_node_halfline(params)
    rs = np.linspace(r_min, r_max, n)
    return BifurcationCurve("S_e", np.column_stack([rs, np.full(n, m_sn)]), [""] * n)


def st_point(params: eco.ModelParams) -> CodimTwoPoint:
    _, m_sn, r_min = saddle_node_halfline(params)
    return CodimTwoPoint("ST", (r_min, m_sn))


def _e3_trace_det(params: eco.ModelParams) -> tuple[float, float] | None:
    e3 = eco.equilibrium(params, "e3")
    if e3 is None:
        return None
    J = eco.jacobian(e3.state, params)
    return float(J[0, 0] + J[1, 1]), float(np.linalg.det(J))


def hopf_m(r: float, params: eco.ModelParams, n_scan: int = 400) -> list[float]:
    """All m at fixed r where trace J(e3) changes sign with det J(e3) > 0."""
    ec = params.E * params.c_max
    if params.nonlinearity > 0:
        m_hi = saddle_node_halfline(params)[1] * (1.0 - 1e-9)
    else:
        m_hi = ec * (1.0 - 1e-9)
    ms = np.linspace(m_hi * 1e-3, m_hi, n_scan)

    def trace(m):
        td = _e3_trace_det(params.at(r=r, m=m))
        return math.nan if td is None else td[0]

    vals = np.array([trace(m) for m in ms])
    out = []
    for i in range(n_scan - 1):
        a, b = vals[i], vals[i + 1]
        if not (np.isfinite(a) and np.isfinite(b)) or a * b > 0 or a == b:
            continue
        m = brentq(trace, ms[i], ms[i + 1], xtol=1e-15, rtol=1e-14, maxiter=200)
        td = _e3_trace_det(params.at(r=r, m=m))
        if td is not None and td[1] > 0 and abs(td[0]) < 1e-9:
            out.append(m)
    return out


def first_lyapunov(jac, x, h: float = 1e-3) -> float:
    """First Lyapunov coefficient of a planar field at a Hopf point.

    ``jac(x)`` is the Jacobian; the second and third derivative forms come from
    central differences of it. Positive means subcritical, negative supercritical.
    """
    x = np.asarray(x, dtype=float)
    A = jac(x)
    omega = math.sqrt(np.linalg.det(A))
    w, V = np.linalg.eig(A)
    q = V[:, int(np.argmin(abs(w - 1j * omega)))]
    wt, U = np.linalg.eig(A.T)
    p = U[:, int(np.argmin(abs(wt + 1j * omega)))]
    p = p / np.conj(np.vdot(p, q))  # normalise so that <p, q> = conj(p) . q = 1
    I = np.eye(2)
    scale = h * max(1.0, float(np.abs(x).max()))

    def dJ(u):
        # directional derivative of the Jacobian along a real vector
        return (jac(x + scale * u) - jac(x - scale * u)) / (2.0 * scale)

    def d2J(u, v):
        s = scale
        return (jac(x + s * u + s * v) - jac(x + s * u - s * v)
                - jac(x - s * u + s * v) + jac(x - s * u - s * v)) / (4.0 * s * s)

    def B(u, v):
        # bilinear in complex u through its real and imaginary parts
        return dJ(u.real) @ v + 1j * (dJ(u.imag) @ v)

    def C(u, v, w):
        out = np.zeros(2, dtype=complex)
        for cu, ur in ((1.0, u.real), (1j, u.imag)):
            for cw, wr in ((1.0, w.real), (1j, w.imag)):
                out += cu * cw * (d2J(ur, wr) @ v)
        return out

    qb = np.conj(q)
    term = (np.vdot(p, C(q, q, qb))
            - 2.0 * np.vdot(p, B(q, np.linalg.solve(A, B(q, qb))))
            + np.vdot(p, B(qb, np.linalg.solve(2j * omega * I - A, B(q, q)))))
    return float(term.real / (2.0 * omega))


def hopf_criticality(r: float, m: float, params: eco.ModelParams) -> str:
    """'subcritical' or 'supercritical' from the sign of the first Lyapunov coefficient."""
    p = params.at(r=r, m=m)
    e3 = eco.equilibrium(p, "e3")
    l1 = first_lyapunov(lambda s: eco.jacobian(s, p), e3.state)
    return "subcritical" if l1 > 0 else "supercritical"


def hopf_curve(params: eco.ModelParams, r_range, n_samples: int = 40,
               criticality: bool = True) -> BifurcationCurve:
    """H_e sampled on ``n_samples`` r-slices; each slice may contribute several points."""
    pts, crit = [], []
    for r in np.linspace(r_range[0], r_range[1], n_samples):
        for m in hopf_m(float(r), params):
            pts.append((float(r), m))
            crit.append(hopf_criticality(float(r), m, params) if criticality else "")
    return BifurcationCurve("H_e", np.array(pts).reshape(-1, 2), crit)


def bt_point(params: eco.ModelParams, r_hi: float = 20.0) -> CodimTwoPoint:
    """Point on S_e where the degenerate equilibrium has trace J = 0."""
    P, m_sn, r_min = saddle_node_halfline(params)
    base = params.at(m=m_sn)

    def trace(r):
        p = base.at(r=r)
        H = eco.herbivore_level(P, p)
        J = eco.jacobian((P, H), p)
        return J[0, 0] + J[1, 1]

    lo = r_min * (1.0 + 1e-12)
    if trace(lo) * trace(r_hi) > 0:
        raise ValueError("no BT in range")
    r = brentq(trace, lo, r_hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    bt = CodimTwoPoint("BT", (r, m_sn))
    bt.bt_type = _bt_type(params, bt)
    return bt


def _bt_type(params: eco.ModelParams, bt: CodimTwoPoint) -> str | None:
    """Type from the criticality of the Hopf branch leaving BT (subcritical -> II)."""
    r_bt, _ = bt.location
    for dr in (0.02, 0.05, 0.1):
        for r in (r_bt * (1 + dr), r_bt * (1 - dr)):
            ms = hopf_m(r, params)
            if ms:
                m = max(ms)
                return "II" if hopf_criticality(r, m, params) == "subcritical" else "I"
    return None
