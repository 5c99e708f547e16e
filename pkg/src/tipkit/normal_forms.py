"""Tilted subcritical-Hopf and saddle-node normal forms.

Both systems carry a tilt ``s`` that makes the equilibrium branch move with
the bifurcation parameter: ``e(mu) = mu*s`` for the Hopf form and
``e+-(mu) = mu*s +- sqrt(-mu)`` for the saddle-node form. The bifurcation sits
at ``mu_b = 0`` in both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .ode import BISECTION, IntegratorConfig, integrate
from .shifts import CODE_FROZEN, ShiftSpec, asech, shift_value

__all__ = [
    "HopfNFParams",
    "SaddleNodeNFParams",
    "hopf_nf_field",
    "hopf_bi_boundaries",
    "hopf_cycle_extent",
    "sn_nf_field",
    "sn_equilibria",
    "sn_bi_boundary",
    "ritchie_curve",
    "HopfNF",
    "SaddleNodeNF",
    "bi_boundary_by_simulation",
]

SN_ESCAPE = 10.0
HOPF_ESCAPE = 10.0


@dataclass(frozen=True)
class HopfNFParams:
    mu: float
    s: float = 0.0
    omega: float = 1.0
    alpha: float = 1.0


@dataclass(frozen=True)
class SaddleNodeNFParams:
    mu: float
    s: float = 0.0


def hopf_nf_field(state, params: HopfNFParams) -> np.ndarray:
    return _hopf_eval(float(state[0]), float(state[1]), params.mu, params.omega,
                      params.alpha, params.s)


@njit(cache=True)
def _hopf_eval(x, y, mu, omega, alpha, s):
    wr = x - mu * s
    wi = y
    rho = wr * wr + wi * wi
    om = omega + alpha * rho
    out = np.empty(2)
    out[0] = mu * wr - om * wi + rho * wr
    out[1] = mu * wi + om * wr + rho * wi
    return out


def hopf_cycle_extent(mu: float, s: float) -> tuple[float, float]:
    """x-range (l_x^-, l_x^+) of the unstable cycle, mu < 0."""
    if mu >= 0:
        raise ValueError("the unstable cycle exists only for mu < 0")
    r = math.sqrt(-mu)
    return mu * s - r, mu * s + r


def hopf_bi_boundaries(mu_minus: float, s: float) -> tuple[float, float]:
    """(mu*^-, mu*^+): where e(mu_minus) sits on the cycle of e(mu*)."""
    if s == 0:
        raise ValueError("no basin instability for s = 0")
    disc = 1.0 - 4.0 * s * s * mu_minus
    if disc < 0:
        raise ValueError("no basin instability: 1 - 4 s^2 mu_minus < 0")
    root = math.sqrt(disc)
    # upper root written without the 1 - root cancellation
    return mu_minus - (1.0 + root) / (2.0 * s * s), mu_minus - 2.0 * mu_minus / (1.0 + root)


def sn_nf_field(x: float, params: SaddleNodeNFParams) -> float:
    d = x - params.mu * params.s
    return -d * d - params.mu


def sn_equilibria(mu: float, s: float) -> tuple[float, float] | None:
    """(e^-, e^+) for mu <= 0, None otherwise."""
    if mu > 0:
        return None
    r = math.sqrt(-mu)
    return mu * s - r, mu * s + r


def sn_bi_boundary(mu_minus: float, s: float) -> float:
    """mu* with e^+(mu_minus) = e^-(mu*); needs s < 0 or s > 1/sqrt(-mu_minus)."""
    if mu_minus >= 0:
        raise ValueError("mu_minus must be negative")
    root = math.sqrt(-mu_minus)
    if not (s < 0 or s * root > 1.0):
        raise ValueError("no basin instability for this tilt")
    return -(root - 1.0 / s) ** 2


def ritchie_curve(delta_mu: float, mu_minus: float) -> float:
    """Critical rate from the inverse-square exceedance law (c=1, tau=0)."""
    if not delta_mu > -mu_minus:
        raise ValueError("shift must cross the bifurcation: need delta_mu > -mu_minus")
    return math.sqrt(delta_mu + mu_minus) * asech(-mu_minus / delta_mu)


def sn_db() -> float:
    """d^b = lim lambda(mu)^2 / (-mu) for the saddle-node form (lambda = -2 sqrt(-mu))."""
    return 4.0


# --- non-autonomous jitted fields ------------------------------------------
# Hopf args: [mu, omega, alpha, s, code, base, delta, eps, c, tau]
# SN args:   [mu, s, code, base, delta, eps, c, tau]

@njit(cache=True)
def _hopf_mu(t, p):
    code = int(p[4])
    if code == CODE_FROZEN:
        return p[0]
    return shift_value(code, p[5], p[6], p[7], p[8], p[9], t)


@njit(cache=True)
def hopf_rhs(t, y, p):
    return _hopf_eval(y[0], y[1], _hopf_mu(t, p), p[1], p[2], p[3])


@njit(cache=True)
def hopf_escaped(t, y, p):
    mu = _hopf_mu(t, p)
    wr = y[0] - mu * p[3]
    return math.sqrt(wr * wr + y[1] * y[1]) > 10.0 * math.sqrt(max(1.0, abs(mu)))


@njit(cache=True)
def hopf_settled(t, y, p):
    if hopf_escaped(t, y, p):
        return True
    mu = _hopf_mu(t, p)
    wr = y[0] - mu * p[3]
    return math.sqrt(wr * wr + y[1] * y[1]) < 1e-9


@njit(cache=True)
def _sn_mu(t, p):
    code = int(p[2])
    if code == CODE_FROZEN:
        return p[0]
    return shift_value(code, p[3], p[4], p[5], p[6], p[7], t)


@njit(cache=True)
def sn_rhs(t, y, p):
    mu = _sn_mu(t, p)
    d = y[0] - mu * p[1]
    out = np.empty(1)
    out[0] = -d * d - mu
    return out


@njit(cache=True)
def sn_escaped(t, y, p):
    # below e^- by more than the escape radius the field is negative and stays so;
    # the upper side is attracted back to e^+ and is not an escape
    mu = _sn_mu(t, p)
    return y[0] - mu * p[1] < -10.0


def _shift_tail(shift: ShiftSpec | None) -> list[float]:
    if shift is None:
        return [CODE_FROZEN, 0.0, 0.0, 0.0, 0.0, 0.0]
    return list(shift.packed())


class HopfNF:
    """Non-autonomous tilted Hopf form as a tipping model (shifted parameter: mu)."""

    name = "hopf_nf"
    target = "mu"
    field = staticmethod(hopf_rhs)
    event = staticmethod(hopf_escaped)

    def __init__(self, mu_minus: float = -1.0, s: float = 0.0, omega: float = 1.0,
                 alpha: float = 1.0, cfg: IntegratorConfig = BISECTION):
        self.mu_minus = float(mu_minus)
        self.s = float(s)
        self.omega = float(omega)
        self.alpha = float(alpha)
        self.cfg = cfg

    @property
    def base_value(self) -> float:
        return self.mu_minus

    def describe(self) -> dict:
        return {"model": self.name, "mu_minus": self.mu_minus, "s": self.s,
                "omega": self.omega, "alpha": self.alpha}

    def args(self, shift: ShiftSpec | None = None, mu: float | None = None) -> np.ndarray:
        mu = self.mu_minus if mu is None else mu
        return np.array([mu, self.omega, self.alpha, self.s, *_shift_tail(shift)])

    def initial_state(self, mu: float) -> np.ndarray:
        return np.array([mu * self.s, 0.0])

    def classify_end(self, state, mu_end: float, escaped: bool) -> str | None:
        """Frozen-system verdict at ``mu_end``: inside the unstable cycle tracks."""
        if escaped:
            return "tipped"
        w = math.hypot(state[0] - mu_end * self.s, state[1])
        if mu_end < 0:
            return "tracking" if w < math.sqrt(-mu_end) else "tipped"
        # past the bifurcation the equilibrium repels; only an exact start on it stays
        return "tracking" if w == 0.0 else "tipped"

    def moving_reference(self, mu: float) -> np.ndarray:
        """The equilibrium branch e(mu) (repelling once mu > 0)."""
        return np.array([mu * self.s, 0.0])

    def frozen_in_basin(self, state, mu: float, t_max: float = 1e4) -> bool:
        """Forward-integration membership test for the basin of e(mu)."""
        args = self.args(None, mu)
        tr = integrate(hopf_rhs, state, 0.0, t_max, self.cfg, args,
                       event=hopf_settled, record=False)
        y = tr.y_final
        return math.hypot(y[0] - mu * self.s, y[1]) < 1e-6


class SaddleNodeNF:
    """Non-autonomous tilted saddle-node form as a tipping model."""

    name = "sn_nf"
    target = "mu"
    field = staticmethod(sn_rhs)
    event = staticmethod(sn_escaped)

    def __init__(self, mu_minus: float = -1.0, s: float = 0.0,
                 cfg: IntegratorConfig = BISECTION):
        self.mu_minus = float(mu_minus)
        self.s = float(s)
        self.cfg = cfg

    @property
    def base_value(self) -> float:
        return self.mu_minus

    def describe(self) -> dict:
        return {"model": self.name, "mu_minus": self.mu_minus, "s": self.s}

    def args(self, shift: ShiftSpec | None = None, mu: float | None = None) -> np.ndarray:
        mu = self.mu_minus if mu is None else mu
        return np.array([mu, self.s, *_shift_tail(shift)])

    def initial_state(self, mu: float) -> np.ndarray:
        eq = sn_equilibria(mu, self.s)
        if eq is None:
            raise ValueError("no stable equilibrium at the start of the shift")
        return np.array([eq[1]])

    def classify_end(self, state, mu_end: float, escaped: bool) -> str | None:
        """Frozen verdict: the basin of e^+ is the half-line x > e^-."""
        if escaped:
            return "tipped"
        eq = sn_equilibria(mu_end, self.s)
        if eq is None or mu_end == 0.0:
            return "tipped"
        return "tracking" if float(state[0]) > eq[0] else "tipped"

    def moving_reference(self, mu: float) -> np.ndarray:
        """The unstable branch e^- (NaN where it does not exist)."""
        eq = sn_equilibria(mu, self.s)
        return np.array([eq[0] if eq is not None else np.nan])

    def frozen_in_basin(self, state, mu: float, t_max: float = 1e4) -> bool:
        args = self.args(None, mu)
        tr = integrate(sn_rhs, state, 0.0, t_max, self.cfg, args,
                       event=sn_escaped, record=False)
        eq = sn_equilibria(mu, self.s)
        return eq is not None and abs(tr.y_final[0] - eq[1]) < 1e-4


def bi_boundary_by_simulation(model, bracket, width: float = 1e-9) -> float:
    """Bisect on mu for the first value where e(mu_minus) leaves the basin of e(mu).

    Membership comes from forward integration of the frozen system, not from
    the closed-form branches.
    """
    start = model.initial_state(model.mu_minus)
    lo, hi = float(bracket[0]), float(bracket[1])
    f_lo = model.frozen_in_basin(start, lo)
    f_hi = model.frozen_in_basin(start, hi)
    if f_lo == f_hi:
        raise ValueError(f"no basin-membership change on [{lo}, {hi}]")
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if model.frozen_in_basin(start, mid) == f_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
