"""Plant-herbivore model: vector field, equilibria and their stability."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit
from scipy.optimize import brentq

from .shifts import CODE_FROZEN, shift_value

__all__ = [
    "ModelParams",
    "Equilibrium",
    "functional_response",
    "functional_response_prime",
    "herbivore_growth",
    "herbivore_growth_prime",
    "vector_field",
    "jacobian",
    "equilibria",
    "equilibrium",
    "p_opt",
    "p_opt_expansion",
    "asymptotic_p3",
    "asymptotic_p4",
    "classify_eigenvalues",
    "rhs",
    "pack",
    "herbivore_level",
    "interior_roots",
]

MARGINAL_TOL = 1e-9


@dataclass(frozen=True)
class ModelParams:
    r: float
    m: float
    C: float = 0.02
    a: float = 10.0
    b: float = 0.0
    b_c: float = 0.0
    E: float = 0.4
    c_max: float = 1.0

    def __post_init__(self):
        if min(self.C, self.a, self.E, self.c_max) <= 0:
            raise ValueError("C, a, E and c_max must be positive")
        if self.b < 0 or self.b_c < 0:
            raise ValueError("b and b_c must be non-negative")
        if self.r <= 0 or self.m <= 0:
            raise ValueError("r and m must be positive")

    @property
    def nonlinearity(self) -> float:
        """The combined exponent b + b_c."""
        return self.b + self.b_c

    def at(self, r: float | None = None, m: float | None = None) -> "ModelParams":
        return replace(self, r=self.r if r is None else r, m=self.m if m is None else m)

    def packed(self) -> np.ndarray:
        return np.array([self.r, self.m, self.C, self.a, self.b, self.b_c, self.E, self.c_max])


@dataclass(frozen=True)
class Equilibrium:
    kind: str
    state: tuple[float, float]
    eigenvalues: tuple[complex, complex]
    stability: str

    @property
    def P(self) -> float:
        return self.state[0]

    @property
    def H(self) -> float:
        return self.state[1]

    @property
    def stable(self) -> bool:
        return self.stability in ("stable node", "stable focus")

    @property
    def max_real_part(self) -> float:
        return max(ev.real for ev in self.eigenvalues)


def functional_response(P: float, params: ModelParams) -> float:
    """Grazing rate g(P), a type-III response damped by exp(-b_c P)."""
    if P == 0.0:
        return 0.0
    return params.c_max * math.exp(-params.b_c * P) / (1.0 + (params.a / P) ** 2)


def functional_response_prime(P: float, params: ModelParams) -> float:
    # same as -g(P) (2P/(P^2+a^2) - 2/P + b_c) but without the removable 2/P singularity
    return params.c_max * math.exp(-params.b_c * P) * _ratio_prime(P, params.a, params.b_c)


def herbivore_growth(P: float, params: ModelParams) -> float:
    """Net per-capita herbivore growth h(P) = (dH/dt)/H."""
    if P == 0.0:
        return -params.m
    return (params.E * params.c_max * math.exp(-params.nonlinearity * P) / (1.0 + (params.a / P) ** 2)
            - params.m)


def herbivore_growth_prime(P: float, params: ModelParams) -> float:
    k = params.nonlinearity
    return params.E * params.c_max * math.exp(-k * P) * _ratio_prime(P, params.a, k)


def _ratio_prime(P: float, a: float, k: float) -> float:
    """d/dP [P^2/(P^2+a^2)] - k P^2/(P^2+a^2), written to avoid overflow at large P."""
    if P == 0.0:
        return 0.0
    if P <= a:
        d = P * P + a * a
        return 2.0 * P * a * a / (d * d) - k * P * P / d
    q = 1.0 / (1.0 + (a / P) ** 2)  # P^2/(P^2+a^2)
    return 2.0 * (a / P) ** 2 * q * q / P - k * q


def vector_field(s, params: ModelParams) -> tuple[float, float]:
    P, H = float(s[0]), float(s[1])
    g = functional_response(P, params)
    dP = params.r * P - params.C * P * P - H * g
    dH = (params.E * math.exp(-params.b * P) * g - params.m) * H
    return dP, dH


def jacobian(s, params: ModelParams) -> np.ndarray:
    P, H = float(s[0]), float(s[1])
    g = functional_response(P, params)
    gp = functional_response_prime(P, params)
    eb = math.exp(-params.b * P)
    return np.array([
        [params.r - 2.0 * params.C * P - H * gp, -g],
        [params.E * eb * (gp - params.b * g) * H, params.E * g * eb - params.m],
    ])


def classify_eigenvalues(eigs) -> str:
    l1, l2 = eigs
    re = (l1.real, l2.real)
    if min(abs(x) for x in re) < MARGINAL_TOL:
        return "marginal"
    if abs(l1.imag) > 0.0:
        return "stable focus" if re[0] < 0 else "unstable focus"
    if re[0] < 0 and re[1] < 0:
        return "stable node"
    if re[0] > 0 and re[1] > 0:
        return "unstable node"
    return "saddle"


def _eigs(J: np.ndarray) -> tuple[complex, complex]:
    tr = J[0, 0] + J[1, 1]
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    disc = tr * tr - 4.0 * det
    if disc >= 0:
        sq = math.sqrt(disc)
        # roots of x^2 - tr x + det, computed without cancellation
        q = 0.5 * (tr + math.copysign(sq, tr))
        if q == 0.0:
            return complex(0.0), complex(0.0)
        l1, l2 = sorted((q, det / q))
        return complex(l1), complex(l2)
    sq = math.sqrt(-disc)
    return complex(0.5 * tr, -0.5 * sq), complex(0.5 * tr, 0.5 * sq)


def _make(kind: str, P: float, H: float, params: ModelParams) -> Equilibrium:
    eigs = _eigs(jacobian((P, H), params))
    return Equilibrium(kind, (P, H), eigs, classify_eigenvalues(eigs))


def herbivore_level(P: float, params: ModelParams) -> float:
    """H on the nullcline branch H != 0 for a given plant level P."""
    return ((params.r - params.C * P) * (P * P + params.a ** 2)
            / (params.c_max * P * math.exp(-params.b_c * P)))


def p_opt_expansion(params: ModelParams, terms: int = 3) -> float:
    """Asymptotic series for the maximiser of h(P) in e = (b + b_c)/2.

    Stretching P = e^(-1/3) Q turns the cubic into Q^3 + e^(2/3) a^2 Q - a^2 = 0,
    whose regular series is Q = a^(2/3) - e^(2/3) a^(4/3)/3 + e^2 a^(8/3)/81 + ...
    """
    e = 0.5 * params.nonlinearity
    a = params.a
    parts = [
        (2.0 * a * a / params.nonlinearity) ** (1.0 / 3.0),
        -((e * a ** 4) ** (1.0 / 3.0)) / 3.0,
        (e ** 5 * a ** 8) ** (1.0 / 3.0) / 81.0,
    ]
    return sum(parts[:terms])


def p_opt(params: ModelParams) -> float:
    """Exact positive root of k/2 P^3 + k/2 a^2 P - a^2 = 0 (k = b + b_c)."""
    k = params.nonlinearity
    if k <= 0:
        raise ValueError("no interior maximum: b + b_c = 0")
    e = 0.5 * k
    a2 = params.a ** 2
    P = p_opt_expansion(params, terms=1)
    if not math.isfinite(P):
        return math.inf
    for _ in range(100):
        f = e * P ** 3 + e * a2 * P - a2
        step = f / (3.0 * e * P * P + e * a2)
        P -= step
        if abs(step) <= 1e-15 * P:
            break
    return P


def asymptotic_p3(params: ModelParams) -> float:
    ec = params.E * params.c_max
    m = params.m
    if not 0 < m < ec:
        raise ValueError("no positive root: need 0 < m < E*c_max")
    a2 = params.a ** 2
    return math.sqrt(a2 * m / (ec - m)) + a2 * m * ec * params.nonlinearity / (2.0 * (ec - m) ** 2)


def asymptotic_p4(params: ModelParams) -> float:
    ec = params.E * params.c_max
    m = params.m
    k = params.nonlinearity
    if not 0 < m < ec:
        raise ValueError("no positive root: need 0 < m < E*c_max")
    if k <= 0:
        raise ValueError("no plant-dominated root for b + b_c = 0")
    L = math.log(ec / m)
    return L / k - params.a ** 2 * k / (L * L)


def _root(lo: float, hi: float, params: ModelParams) -> float:
    P = brentq(herbivore_growth, lo, hi, args=(params,), xtol=1e-15, rtol=1e-15, maxiter=2000)
    # one Newton polish step, kept only if it improves the residual
    d = herbivore_growth_prime(P, params)
    if d != 0.0:
        Q = P - herbivore_growth(P, params) / d
        if lo <= Q <= hi and abs(herbivore_growth(Q, params)) < abs(herbivore_growth(P, params)):
            P = Q
    return P


def interior_roots(params: ModelParams) -> list[float]:
    """Positive roots of h(P), ascending (zero, one or two of them)."""
    ec = params.E * params.c_max
    if params.m >= ec:
        return []
    k = params.nonlinearity
    tiny = 1e-12
    # a nonlinearity so weak that P_opt overflows behaves as b + b_c = 0
    if k <= 0 or not math.isfinite(p_opt_expansion(params, 1)):
        hi = params.a
        while herbivore_growth(hi, params) <= 0:
            hi *= 2.0
        return [_root(tiny, hi, params)]
    Popt = p_opt(params)
    hmax = herbivore_growth(Popt, params)
    if hmax < 0:
        return []
    if hmax == 0:
        return [Popt]
    roots = [_root(tiny, Popt, params)]
    hi = min(10.0 * math.log(ec / params.m) / k, 1e300)
    while herbivore_growth(hi, params) >= 0:
        if hi >= 1e300:
            return roots  # b + b_c so small that e4 lies beyond floating range
        hi = min(2.0 * hi, 1e300)
    roots.append(_root(Popt, hi, params))
    return roots


def equilibria(params: ModelParams) -> list[Equilibrium]:
    """All non-negative equilibria, each with eigenvalues and stability."""
    out = [_make("e1", 0.0, 0.0, params), _make("e2", params.r / params.C, 0.0, params)]
    roots = interior_roots(params)
    if params.nonlinearity <= 0:
        kinds = ["e3"]
    else:
        kinds = ["e3", "e4"] if len(roots) == 2 else []
        if len(roots) == 1:
            # double root on the saddle-node line
            kinds = ["e3"]
    for kind, P in zip(kinds, roots):
        H = herbivore_level(P, params)
        if H > 0:
            out.append(_make(kind, P, H, params))
    return out


def equilibrium(params: ModelParams, kind: str) -> Equilibrium | None:
    for e in equilibria(params):
        if e.kind == kind:
            return e
    return None


@njit(cache=True)
def _g(P, a, bc, cmax):
    return cmax * P * P / (P * P + a * a) * math.exp(-bc * P)


@njit(cache=True)
def rhs(t, y, p):
    """Jitted field. ``p`` = packed ModelParams (8) + target index + packed shift (6).

    Target index 0 shifts r, 1 shifts m.
    """
    r = p[0]
    m = p[1]
    code = int(p[9])
    if code != CODE_FROZEN:
        v = shift_value(code, p[10], p[11], p[12], p[13], p[14], t)
        if p[8] == 0.0:
            r = v
        else:
            m = v
    C = p[2]
    a = p[3]
    b = p[4]
    bc = p[5]
    E = p[6]
    cmax = p[7]
    P = y[0]
    H = y[1]
    g = _g(P, a, bc, cmax)
    out = np.empty(2)
    out[0] = r * P - C * P * P - H * g
    out[1] = (E * math.exp(-b * P) * g - m) * H
    return out


def pack(params: ModelParams, shift=None) -> np.ndarray:
    """Parameter array for :func:`rhs`; ``shift`` is a ShiftSpec or None."""
    if shift is None:
        tail = [0.0, CODE_FROZEN, 0.0, 0.0, 0.0, 0.0, 0.0]
    else:
        if shift.target not in ("r", "m"):
            raise ValueError(f"ecosystem shifts target r or m, not {shift.target!r}")
        tail = [0.0 if shift.target == "r" else 1.0, *shift.packed()]
    return np.concatenate([params.packed(), np.array(tail, dtype=float)])
