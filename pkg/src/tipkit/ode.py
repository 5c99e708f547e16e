"""Adaptive Dormand-Prince 5(4) integrator with quartic dense output.

The stepping loop is written once, in a numba-compatible subset of Python.
When the vector field is a numba-jitted function the loop runs compiled;
for any other callable the very same loop runs as ordinary Python.

Fields take ``(t, y, p)`` where ``p`` is a float64 parameter array. Plain
two-argument callables ``f(t, y)`` are accepted by :func:`integrate` and
:func:`integrate_until` when ``args`` is omitted.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numba import njit
from numba.core.registry import CPUDispatcher

__all__ = [
    "IntegratorConfig",
    "IntegrationError",
    "Termination",
    "Trajectory",
    "integrate",
    "integrate_until",
    "never",
]


class IntegrationError(RuntimeError):
    """Raised when the state stops being finite (or goes clearly negative
    under the non-negativity guard)."""

    def __init__(self, message: str, t_last: float):
        super().__init__(f"{message} (last valid t={t_last!r})")
        self.t_last = t_last


class Termination(str, enum.Enum):
    END = "end"
    EVENT = "event"
    BUDGET = "budget"


@dataclass(frozen=True)
class IntegratorConfig:
    abs_tol: float = 1e-8
    rel_tol: float = 1e-8
    h_init: float = 1e-2
    h_max: float = math.inf
    max_steps: int = 2_000_000
    # clamp components in (-abs_tol, 0) to 0, abort below -abs_tol
    nonnegative: bool = False

    def __post_init__(self):
        if not self.abs_tol > 0 or not self.rel_tol > 0:
            raise ValueError("abs_tol and rel_tol must be positive")
        if not 0 < self.h_init <= self.h_max:
            raise ValueError("need 0 < h_init <= h_max")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    def tightened(self, factor: float) -> "IntegratorConfig":
        return IntegratorConfig(self.abs_tol * factor, self.rel_tol * factor,
                                self.h_init, self.h_max, self.max_steps, self.nonnegative)


# Tolerance presets used across the package.
SWEEP = IntegratorConfig(abs_tol=1e-8, rel_tol=1e-8)
BISECTION = IntegratorConfig(abs_tol=1e-10, rel_tol=1e-10)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    flag: Termination
    h_last: float = field(default=math.nan, repr=False)
    n_steps: int = field(default=0, repr=False)

    @property
    def t_final(self) -> float:
        return float(self.times[-1])

    @property
    def y_final(self) -> np.ndarray:
        return self.states[-1]

    def __len__(self):
        return len(self.times)


# Dormand-Prince tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1 / 5, 0.0, 0.0, 0.0, 0.0],
    [3 / 40, 9 / 40, 0.0, 0.0, 0.0],
    [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
])
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# Shampine's quartic continuous extension: y(t + th*h) = y + h * K^T (P @ [th, th^2, th^3, th^4])
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

STATUS_END = 0
STATUS_EVENT = 1
STATUS_BUDGET = 2
STATUS_NONFINITE = 3
STATUS_NEGATIVE = 4


def _never(t, y, p):
    return False


never = njit(cache=True)(_never)


@njit(cache=True)
def _dense(y, K, h, theta):
    n = y.shape[0]
    out = y.copy()
    q0 = theta
    q1 = theta * theta
    q2 = q1 * theta
    q3 = q2 * theta
    for s in range(7):
        w = _P[s, 0] * q0 + _P[s, 1] * q1 + _P[s, 2] * q2 + _P[s, 3] * q3
        if w != 0.0:
            for i in range(n):
                out[i] += h * w * K[s, i]
    return out


def _drive(f, event, p, t0, y0, t1, atol, rtol, h, hmax, max_steps, nonneg, record):
    n = y0.shape[0]
    cap = 256 if record else 2
    ts = np.empty(cap)
    ys = np.empty((cap, n))
    ts[0] = t0
    ys[0, :] = y0
    count = 1

    t = t0
    y = y0.copy()
    K = np.empty((7, n))
    K[0, :] = f(t, y, p)
    status = STATUS_END
    steps = 0

    if event(t, y, p):
        return ts[:1], ys[:1], STATUS_EVENT, h, 0

    while t < t1:
        if steps >= max_steps:
            status = STATUS_BUDGET
            break
        if h > hmax:
            h = hmax
        last = False
        if t + h >= t1:
            h = t1 - t
            last = True

        for s in range(1, 6):
            ytmp = y.copy()
            for j in range(s):
                a = _A[s, j]
                if a != 0.0:
                    for i in range(n):
                        ytmp[i] += h * a * K[j, i]
            K[s, :] = f(t + _C[s] * h, ytmp, p)
        ynew = y.copy()
        for j in range(6):
            b = _B[j]
            if b != 0.0:
                for i in range(n):
                    ynew[i] += h * b * K[j, i]
        K[6, :] = f(t + h, ynew, p)

        err = 0.0
        finite = True
        for i in range(n):
            e = 0.0
            for j in range(7):
                e += _E[j] * K[j, i]
            e *= h
            sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
            err += (e / sc) ** 2
            if not math.isfinite(ynew[i]):
                finite = False
        err = math.sqrt(err / n)

        if not finite or not math.isfinite(err):
            if h < 1e-14 * max(1.0, abs(t)):
                status = STATUS_NONFINITE
                break
            h *= 0.2
            continue

        if err <= 1.0:
            steps += 1
            if nonneg:
                bad = False
                for i in range(n):
                    if ynew[i] < 0.0:
                        if ynew[i] > -atol:
                            ynew[i] = 0.0
                        else:
                            bad = True
                if bad:
                    status = STATUS_NEGATIVE
                    break
            tnew = t1 if last else t + h
            fired = event(tnew, ynew, p)
            if fired:
                lo = 0.0
                hi = 1.0
                while (hi - lo) > 1e-9:
                    mid = 0.5 * (lo + hi)
                    if event(t + mid * h, _dense(y, K, h, mid), p):
                        hi = mid
                    else:
                        lo = mid
                if hi < 1.0:
                    tnew = t + hi * h
                    ynew = _dense(y, K, h, hi)
            if count >= cap:
                cap *= 2
                ts2 = np.empty(cap)
                ys2 = np.empty((cap, n))
                ts2[:count] = ts[:count]
                ys2[:count, :] = ys[:count, :]
                ts = ts2
                ys = ys2
            if record:
                ts[count] = tnew
                ys[count, :] = ynew
                count += 1
            else:
                ts[1] = tnew
                ys[1, :] = ynew
                count = 2
            t = tnew
            y = ynew
            K[0, :] = K[6, :]
            if err == 0.0:
                fac = 10.0
            else:
                fac = min(10.0, 0.9 * err ** -0.2)
            if not last:
                h = h * fac
            if fired:
                status = STATUS_EVENT
                break
        else:
            h = h * max(0.2, 0.9 * err ** -0.2)
            if h < 1e-14 * max(1.0, abs(t)):
                status = STATUS_NONFINITE
                break

    return ts[:count], ys[:count], status, h, steps


# Not cached: the signature includes the field and event dispatchers, which
# numba cannot key its on-disk cache on reliably.
_drive_jit = njit(cache=False)(_drive)


def _is_jitted(fn) -> bool:
    return isinstance(fn, CPUDispatcher)


def _run(field, event, args, y0, t0, t1, cfg, record):
    y0 = np.array(y0, dtype=float).ravel()
    if not np.all(np.isfinite(y0)):
        raise ValueError("initial state must be finite")
    if not t1 > t0:
        raise ValueError("need t1 > t0")
    if args is None:
        if _is_jitted(field):
            raise TypeError("jitted fields must be called with an args array")
        user_f = field
        field = lambda t, y, p: np.asarray(user_f(t, y), dtype=float)  # noqa: E731
        args = np.empty(0)
    else:
        args = np.asarray(args, dtype=float)
    if event is None:
        event = never if _is_jitted(field) else _never
    driver = _drive_jit if (_is_jitted(field) and _is_jitted(event)) else _drive
    ts, ys, status, h_last, steps = driver(
        field, event, args, float(t0), y0, float(t1),
        cfg.abs_tol, cfg.rel_tol, cfg.h_init, cfg.h_max, cfg.max_steps,
        cfg.nonnegative, record)
    if status == STATUS_NONFINITE:
        raise IntegrationError("non-finite state", float(ts[-1]))
    if status == STATUS_NEGATIVE:
        raise IntegrationError("state component fell below -abs_tol", float(ts[-1]))
    flag = {STATUS_END: Termination.END, STATUS_EVENT: Termination.EVENT,
            STATUS_BUDGET: Termination.BUDGET}[status]
    return Trajectory(np.array(ts), np.array(ys), flag, float(h_last), int(steps))


def integrate(field: Callable, y0, t0: float, t1: float,
              cfg: IntegratorConfig = SWEEP, args=None, *,
              event: Callable | None = None, record: bool = True) -> Trajectory:
    """Integrate ``y' = field(t, y[, args])`` from ``t0`` to ``t1``.

    With ``record=False`` only the initial and final samples are kept, which
    is what the sweeps use. ``event`` (jitted fields only, signature
    ``event(t, y, p) -> bool``) stops the run at the first step where it
    holds, localized on the dense output.
    """
    return _run(field, event, args, y0, t0, t1, cfg, record)


def integrate_until(field: Callable, y0, t0: float, predicate: Callable, t_max: float,
                    cfg: IntegratorConfig = SWEEP, args=None) -> tuple[float, np.ndarray, bool]:
    """Integrate until ``predicate(state, time)`` first holds or ``t_max``.

    The firing time is bisected on the dense output to 1e-9 of the step.
    For jitted fields pass a jitted ``predicate(t, y, p)`` instead.
    """
    if not _is_jitted(predicate):
        user_pred = predicate
        predicate = lambda t, y, p: bool(user_pred(y, t))  # noqa: E731
    traj = _run(field, predicate, args, y0, t0, t_max, cfg, False)
    if traj.flag is Termination.BUDGET:
        raise IntegrationError("step budget exhausted", traj.t_final)
    return traj.t_final, traj.y_final.copy(), traj.flag is Termination.EVENT
