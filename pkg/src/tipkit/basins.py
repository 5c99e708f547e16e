"""Attractor classification by forward integration and basin-instability maps."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import ecosystem as eco
from .ode import SWEEP, IntegrationError, IntegratorConfig, Termination, integrate

__all__ = [
    "AttractorLabel",
    "BasinMap",
    "BasinUndefinedError",
    "classify",
    "classify_report",
    "in_basin_of_e3",
    "bi_boundary_on_path",
    "bi_region",
    "default_horizon",
]

ATTRACT_DIST = 1e-5
ATTRACT_SPEED = 1e-7
DIVERGENCE_NORM = 1e7
BASE_HORIZON = 1e5
# length of the first event-driven leg before the recurrence test runs
RECURRENCE_CHECK = 4000.0
CLOSURE_MARGIN = 1e-4


class AttractorLabel(str, enum.Enum):
    CONVERGED_E2 = "converged_e2"
    CONVERGED_E3 = "converged_e3"
    CYCLE = "cycle"
    DIVERGENT = "divergent"
    UNDECIDED = "undecided"


class BasinUndefinedError(ValueError):
    pass


@dataclass
class Classification:
    label: AttractorLabel
    t_final: float
    state: np.ndarray
    diagnostic: str = ""


# Extra slots appended to the packed ecosystem parameters for the settle event.
_N_MODEL = 15
_SLOT_E3 = _N_MODEL          # flag, P, H
_SLOT_E2 = _N_MODEL + 3      # flag, P, H


@njit(cache=True)
def _settled(t, y, p):
    if abs(y[0]) + abs(y[1]) > 1e7:
        return True
    f = eco.rhs(t, y, p)
    if math.sqrt(f[0] * f[0] + f[1] * f[1]) >= 1e-7:
        return False
    for k in (_SLOT_E3, _SLOT_E2):
        if p[k] > 0.0:
            dx = y[0] - p[k + 1]
            dy = y[1] - p[k + 2]
            if math.sqrt(dx * dx + dy * dy) < 1e-5:
                return True
    return False


def default_horizon(params: eco.ModelParams) -> float:
    """1e5 days, stretched to 25/|Re lambda| near a Hopf point of e3 or e2."""
    horizon = BASE_HORIZON
    for e in eco.equilibria(params):
        if e.kind in ("e2", "e3") and e.stable:
            horizon = max(horizon, 25.0 / abs(e.max_real_part))
    return horizon


def _frozen_args(params: eco.ModelParams, targets) -> np.ndarray:
    extra = np.zeros(6)
    for kind, slot in (("e3", 0), ("e2", 3)):
        e = targets.get(kind)
        if e is not None:
            extra[slot:slot + 3] = (1.0, e.P, e.H)
    return np.concatenate([eco.pack(params), extra])


def _hermite(y0, y1, f0, f1, h, th):
    h00 = (1 + 2 * th) * (1 - th) ** 2
    h10 = th * (1 - th) ** 2
    h01 = th * th * (3 - 2 * th)
    h11 = th * th * (th - 1)
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def _recurrent(times: np.ndarray, states: np.ndarray, center: tuple[float, float],
               args: np.ndarray) -> bool:
    """Poincare-return test: upward crossings of P = center_P with stable H values.

    Crossings are located on the cubic Hermite interpolant of each step so the
    return map is resolved well below the step size.
    """
    P = states[:, 0] - center[0]
    idx = np.nonzero((P[:-1] < 0) & (P[1:] >= 0))[0]
    if len(idx) < 4:
        return False
    if np.ptp(states[:, 1]) < 1e-4:
        return False
    H = []
    for i in idx[-4:]:
        y0, y1 = states[i], states[i + 1]
        h = times[i + 1] - times[i]
        f0, f1 = eco.rhs(times[i], y0, args), eco.rhs(times[i + 1], y1, args)
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if _hermite(y0[0], y1[0], f0[0], f1[0], h, mid) < center[0]:
                lo = mid
            else:
                hi = mid
        H.append(_hermite(y0[1], y1[1], f0[1], f1[1], h, 0.5 * (lo + hi)))
    H = np.array(H)
    return bool(np.ptp(H) <= 1e-4 * max(1.0, abs(H).max()))


def classify_report(start, params: eco.ModelParams, horizon: float | None = None,
                    cfg: IntegratorConfig = SWEEP) -> Classification:
    """Forward-integrate ``start`` under frozen ``params`` and name the attractor reached."""
    y0 = np.asarray(start, dtype=float)
    if not np.all(np.isfinite(y0)) or np.any(y0 < 0):
        raise ValueError("start state must be finite and non-negative")
    eqs = {e.kind: e for e in eco.equilibria(params)}
    targets = {k: e for k, e in eqs.items() if k in ("e2", "e3") and e.stable}
    args = _frozen_args(params, targets)
    horizon = default_horizon(params) if horizon is None else horizon
    # Near a stable node the step controller otherwise settles at the stability
    # limit, where the error offset stops decaying and the speed test never passes.
    fastest = max([abs(ev) for e in targets.values() for ev in e.eigenvalues], default=1.0)
    h_max = min(cfg.h_max, max(1e-2, 1.0 / fastest))
    cfg = IntegratorConfig(cfg.abs_tol, cfg.rel_tol, min(cfg.h_init, h_max), h_max,
                           cfg.max_steps, nonnegative=True)

    def verdict(y, t, flag):
        if np.abs(y).sum() > DIVERGENCE_NORM:
            return Classification(AttractorLabel.DIVERGENT, t, y)
        if flag is Termination.EVENT:
            for kind in ("e3", "e2"):
                e = targets.get(kind)
                if e is not None and math.dist(y, e.state) < ATTRACT_DIST * 1.0001:
                    return Classification(AttractorLabel(f"converged_{kind}"), t, y)
        return None

    t, y = 0.0, y0
    try:
        leg = min(horizon, RECURRENCE_CHECK)
        tr = integrate(eco.rhs, y, t, t + leg, cfg, args, event=_settled, record=False)
        t, y = tr.t_final, tr.y_final
        out = verdict(y, t, tr.flag)
        if out is not None:
            return out
        while t < horizon:
            if tr.flag is Termination.BUDGET:
                return Classification(AttractorLabel.UNDECIDED, t, y, "step budget exhausted")
            # recorded window for the recurrence test
            window = min(2000.0, horizon - t)
            rec = integrate(eco.rhs, y, t, t + window, cfg, args, event=_settled, record=True)
            t, y = rec.t_final, rec.y_final
            out = verdict(y, t, rec.flag)
            if out is not None:
                return out
            center = eqs["e3"].state if "e3" in eqs else (float(np.mean(rec.states[:, 0])), 0.0)
            if _recurrent(rec.times, rec.states, center, args) and all(
                    math.dist(y, e.state) > 1e-3 for e in eqs.values()):
                return Classification(AttractorLabel.CYCLE, t, y)
            if t >= horizon:
                break
            leg = min(horizon - t, max(RECURRENCE_CHECK, t))
            tr = integrate(eco.rhs, y, t, t + leg, cfg, args, event=_settled, record=False)
            t, y = tr.t_final, tr.y_final
            out = verdict(y, t, tr.flag)
            if out is not None:
                return out
    except IntegrationError as exc:
        return Classification(AttractorLabel.UNDECIDED, exc.t_last, y, str(exc))
    return Classification(AttractorLabel.UNDECIDED, t, y, "horizon reached")


def classify(start, params: eco.ModelParams, horizon: float | None = None,
             cfg: IntegratorConfig = SWEEP) -> AttractorLabel:
    return classify_report(start, params, horizon, cfg).label


def _require_stable_e3(params: eco.ModelParams) -> eco.Equilibrium:
    e3 = eco.equilibrium(params, "e3")
    if e3 is None or not e3.stable:
        raise BasinUndefinedError(
            f"basin undefined: e3 absent or not stable at r={params.r}, m={params.m}")
    return e3


def in_basin_of_e3(point, params: eco.ModelParams, cfg: IntegratorConfig = SWEEP) -> bool:
    _require_stable_e3(params)
    return classify(point, params, cfg=cfg) is AttractorLabel.CONVERGED_E3


def _on_path(p1, coord: str, value: float, base: eco.ModelParams) -> eco.ModelParams:
    if coord == "r":
        return base.at(r=value, m=p1[1])
    if coord == "m":
        return base.at(r=p1[0], m=value)
    raise ValueError(f"path coordinate must be 'r' or 'm', not {coord!r}")


def bi_boundary_on_path(p1, coord: str, bracket, base: eco.ModelParams,
                        cfg: IntegratorConfig = SWEEP, width: float = 1e-6) -> float:
    """Path value where e3(p1) leaves the basin of e3 at the moving parameter.

    ``coord`` is the varying parameter ('r' or 'm'); the other stays at p1's value.
    """
    start = _require_stable_e3(base.at(r=p1[0], m=p1[1])).state
    lo, hi = float(bracket[0]), float(bracket[1])

    def inside(v):
        return in_basin_of_e3(start, _on_path(p1, coord, v, base), cfg)

    f_lo, f_hi = inside(lo), inside(hi)
    if f_lo == f_hi:
        raise ValueError(
            f"no basin-membership change on [{lo}, {hi}] (both {'inside' if f_lo else 'outside'})")
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if inside(mid) == f_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class BasinMap:
    p1: tuple[float, float]
    r_values: np.ndarray
    m_values: np.ndarray
    mask: np.ndarray
    membership: np.ndarray
    meta: dict = field(default_factory=dict)

    def rows(self):
        for j, m in enumerate(self.m_values):
            for i, r in enumerate(self.r_values):
                yield float(r), float(m), bool(self.mask[j, i]), bool(self.membership[j, i])

    def to_csv(self) -> str:
        lines = [f"# p1_r={self.p1[0]!r} p1_m={self.p1[1]!r}"]
        lines += [f"# {k}={v}" for k, v in sorted(self.meta.items())]
        lines.append("r,m,mask,member")
        for r, m, mask, mem in self.rows():
            lines.append(f"{r!r},{m!r},{int(mask)},{int(mem)}")
        return "\n".join(lines) + "\n"


def bi_cell(start, params: eco.ModelParams, cfg: IntegratorConfig = SWEEP) -> tuple[bool, bool]:
    """(mask, member) for one parameter point p2 and start state e3(p1)."""
    eqs = {e.kind: e for e in eco.equilibria(params)}
    e3, e2 = eqs.get("e3"), eqs.get("e2")
    if e3 is None or not e3.stable or not e2.stable:
        return False, False
    if classify(start, params, cfg=cfg) is AttractorLabel.CONVERGED_E3:
        return True, False
    # require a margin: a point 1e-4 closer to e3(p2) must also lie outside
    d = np.asarray(e3.state) - np.asarray(start)
    n = np.linalg.norm(d)
    if n > CLOSURE_MARGIN:
        probe = np.asarray(start) + CLOSURE_MARGIN * d / n
        if classify(probe, params, cfg=cfg) is AttractorLabel.CONVERGED_E3:
            return True, False
    return True, True


def bi_region(p1, r_values, m_values, base: eco.ModelParams,
              cfg: IntegratorConfig = SWEEP) -> BasinMap:
    """BI(e3, p1) on the lattice ``r_values`` x ``m_values``."""
    p1_params = base.at(r=p1[0], m=p1[1])
    eqs = {e.kind: e for e in eco.equilibria(p1_params)}
    if "e3" not in eqs or not eqs["e3"].stable or not eqs["e2"].stable:
        raise ValueError("p1 must lie where e3 and e2 are both stable")
    start = eqs["e3"].state
    r_values = np.asarray(r_values, dtype=float)
    m_values = np.asarray(m_values, dtype=float)
    mask = np.zeros((len(m_values), len(r_values)), dtype=bool)
    member = np.zeros_like(mask)
    for j, m in enumerate(m_values):
        for i, r in enumerate(r_values):
            mask[j, i], member[j, i] = bi_cell(start, base.at(r=float(r), m=float(m)), cfg)
    return BasinMap((float(p1[0]), float(p1[1])), r_values, m_values, mask, member,
                    {"mask": "e3 and e2 stable", "abs_tol": cfg.abs_tol, "rel_tol": cfg.rel_tol})
