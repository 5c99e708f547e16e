"""Time profiles for the shifted input parameter.

Three shapes are supported:

* ``tanh``    -- monotone shift ``base + delta/2 * (tanh(eps t) + 1)``
* ``sech``    -- symmetric pulse ``base + delta * sech(eps t)``
* ``plateau`` -- sech rise, hold for ``tau``, sech return at rate ``c*eps``.
  ``tau = inf`` gives the rise-and-hold monotone shift.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

__all__ = [
    "Shape",
    "ShiftSpec",
    "ShiftDerived",
    "asech",
    "evaluate",
    "start_time",
    "exceedance_time",
    "derived",
]

DEFAULT_DELTA_REL = 1e-3


class Shape(str, enum.Enum):
    TANH = "tanh"
    SECH = "sech"
    PLATEAU = "plateau"

    @property
    def code(self) -> int:
        return {"tanh": 1, "sech": 2, "plateau": 3}[self.value]


# shape code 0 means "no shift": the parameter keeps its base value
CODE_FROZEN = 0


def asech(x: float) -> float:
    """Inverse hyperbolic secant, non-negative branch, for 0 < x <= 1."""
    if not 0.0 < x <= 1.0:
        raise ValueError(f"asech defined on (0, 1], got {x!r}")
    return math.log((1.0 + math.sqrt(1.0 - x * x)) / x)


def _sech(x):
    ax = abs(x)
    e = math.exp(-ax)
    return 2.0 * e / (1.0 + e * e)


_sech_jit = njit(cache=True)(_sech)


@njit(cache=True)
def shift_value(code, base, delta, eps, c, tau, t):
    """Jitted profile evaluation; ``code`` is :attr:`Shape.code` or 0."""
    if code == 1:
        return base + 0.5 * delta * (math.tanh(eps * t) + 1.0)
    if code == 2:
        return base + delta * _sech_jit(eps * t)
    if code == 3:
        if t <= 0.0:
            return base + delta * _sech_jit(eps * t)
        if t < tau:
            return base + delta
        return base + delta * _sech_jit(c * eps * (t - tau))
    return base


@dataclass(frozen=True)
class ShiftSpec:
    shape: Shape
    base: float
    delta: float
    eps: float
    c: float = 1.0
    tau: float = 0.0
    target: str = "r"

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape(self.shape))
        if self.delta < 0:
            raise ValueError("shift magnitude must be >= 0")
        if not self.eps > 0:
            raise ValueError("shift rate must be > 0")
        if not self.c > 0:
            raise ValueError("return-rate ratio c must be > 0")
        if self.tau < 0:
            raise ValueError("plateau duration tau must be >= 0")

    def with_(self, **changes) -> "ShiftSpec":
        return replace(self, **changes)

    @property
    def monotone(self) -> bool:
        return self.shape is Shape.TANH or (self.shape is Shape.PLATEAU and math.isinf(self.tau))

    @property
    def end_value(self) -> float:
        """Parameter value as t -> +inf."""
        return self.base + self.delta if self.monotone else self.base

    @property
    def peak_value(self) -> float:
        return self.base + self.delta

    def packed(self) -> np.ndarray:
        return np.array([self.shape.code, self.base, self.delta, self.eps, self.c, self.tau])

    def __call__(self, t):
        return evaluate(self, t)


@dataclass(frozen=True)
class ShiftDerived:
    r_dot_max: float
    t0: float
    t_end: float


def evaluate(spec: ShiftSpec, t):
    """Parameter value at time(s) ``t``."""
    if np.ndim(t):
        return np.array([evaluate(spec, float(x)) for x in np.ravel(t)]).reshape(np.shape(t))
    return float(shift_value(spec.shape.code, spec.base, spec.delta, spec.eps, spec.c, spec.tau, float(t)))


def start_time(spec: ShiftSpec, delta_rel: float = DEFAULT_DELTA_REL) -> float:
    """Negative time at which the shift has covered ``delta_rel`` of its magnitude."""
    if not 0.0 < delta_rel < 1.0:
        raise ValueError("delta_rel must lie in (0, 1)")
    if spec.shape is Shape.TANH:
        return math.atanh(2.0 * delta_rel - 1.0) / spec.eps
    return -asech(delta_rel) / spec.eps


def end_time(spec: ShiftSpec, delta_rel: float = DEFAULT_DELTA_REL) -> float:
    """Time after which the parameter is taken as settled at ``end_value``."""
    t0 = start_time(spec, delta_rel)
    margin = 20.0 / spec.eps
    if spec.shape is Shape.PLATEAU:
        if math.isinf(spec.tau):
            return 0.0
        return spec.tau + (-t0 + margin) / spec.c
    return -t0 + margin


def exceedance_time(spec: ShiftSpec, mu_b: float) -> float:
    """Time the shifted parameter spends beyond ``mu_b``."""
    if spec.shape not in (Shape.PLATEAU, Shape.SECH):
        raise ValueError("exceedance time is defined for sech-type shifts")
    lo, hi = spec.base, spec.base + spec.delta
    if not lo < mu_b < hi:
        if mu_b == hi:
            return 0.0 if spec.shape is Shape.SECH else spec.tau
        raise ValueError("no exceedance: shift never passes mu_b")
    c = spec.c if spec.shape is Shape.PLATEAU else 1.0
    tau = spec.tau if spec.shape is Shape.PLATEAU else 0.0
    return (c + 1.0) / (c * spec.eps) * asech((mu_b - lo) / spec.delta) + tau


def derived(spec: ShiftSpec, delta_rel: float = DEFAULT_DELTA_REL) -> ShiftDerived:
    return ShiftDerived(r_dot_max=spec.eps * spec.delta / 2.0,
                        t0=start_time(spec, delta_rel),
                        t_end=end_time(spec, delta_rel))


def from_mapping(d: dict) -> ShiftSpec:
    """Build a spec from config-style keys (``shape, base, delta, eps, c, tau, target``)."""
    known = {"shape", "base", "delta", "eps", "c", "tau", "target", "delta_rel"}
    unknown = set(d) - known
    if unknown:
        raise KeyError(f"unknown shift key(s): {', '.join(sorted(unknown))}")
    return ShiftSpec(
        shape=Shape(str(d["shape"]).strip().lower()),
        base=float(d["base"]),
        delta=float(d["delta"]),
        eps=float(d["eps"]),
        c=float(d.get("c", 1.0)),
        tau=float(d.get("tau", 0.0)),
        target=str(d.get("target", "r")).strip(),
    )
