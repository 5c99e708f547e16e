"""Shifted-parameter runs, critical rates, tipping diagrams and return partitions.

A *model* here is any object with the small interface used below:
``field``/``event`` (jitted), ``args(shift)``, ``initial_state(value)``,
``classify_end(state, value, escaped)``, ``base_value``, ``target``,
``cfg`` and ``describe()``. :class:`EcosystemModel` wraps the plant-herbivore
system; the normal-form classes live in :mod:`tipkit.normal_forms`.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import basins
from . import ecosystem as eco
from .ode import SWEEP, IntegrationError, IntegratorConfig, Termination, Trajectory, integrate
from .shifts import DEFAULT_DELTA_REL, ShiftSpec, end_time, start_time

__all__ = [
    "EcosystemModel",
    "RunOutcome",
    "TippingDiagram",
    "ReturnPartition",
    "UnclassifiableError",
    "Witness",
    "simulate_shift",
    "classify_run",
    "critical_rate",
    "critical_magnitude",
    "tipping_diagram",
    "return_partition",
    "canard_witness",
    "log_grid",
    "REGIONS",
    "TRACKING",
    "TIPPED",
    "UNCLASSIFIABLE",
]

TRACKING = "tracking"
TIPPED = "tipped"
UNCLASSIFIABLE = "unclassifiable"


class UnclassifiableError(RuntimeError):
    pass


class EcosystemModel:
    """Plant-herbivore system shifted along r or m from the point ``params``."""

    name = "ecosystem"
    field = staticmethod(eco.rhs)
    event = None

    def __init__(self, params: eco.ModelParams, target: str = "r",
                 cfg: IntegratorConfig = SWEEP, horizon: float | None = None):
        if target not in ("r", "m"):
            raise ValueError("ecosystem shifts act on 'r' or 'm'")
        self.params = params
        self.target = target
        self.cfg = IntegratorConfig(cfg.abs_tol, cfg.rel_tol, cfg.h_init, cfg.h_max,
                                    cfg.max_steps, nonnegative=True)
        self.horizon = horizon

    @property
    def base_value(self) -> float:
        return getattr(self.params, self.target)

    def describe(self) -> dict:
        p = self.params
        return {"model": self.name, "p1_r": p.r, "p1_m": p.m, "target": self.target,
                "b": p.b, "b_c": p.b_c, "C": p.C, "a": p.a, "E": p.E, "c_max": p.c_max}

    def at(self, value: float) -> eco.ModelParams:
        return self.params.at(**{self.target: value})

    def args(self, shift: ShiftSpec | None = None) -> np.ndarray:
        return eco.pack(self.params, shift)

    def initial_state(self, value: float) -> np.ndarray:
        e3 = eco.equilibrium(self.at(value), "e3")
        if e3 is None or not e3.stable:
            raise ValueError(f"e3 absent or unstable at {self.target}={value}")
        return np.array(e3.state)

    def classify_end(self, state, value: float, escaped: bool) -> str | None:
        y = np.clip(np.asarray(state, dtype=float), 0.0, None)
        label = basins.classify(y, self.at(value), self.horizon, self.cfg)
        if label is basins.AttractorLabel.CONVERGED_E3:
            return TRACKING
        if label is basins.AttractorLabel.UNDECIDED:
            return None
        return TIPPED

    def moving_reference(self, value: float) -> np.ndarray:
        """The moving saddle e4 (NaN where it does not exist)."""
        e4 = eco.equilibrium(self.at(value), "e4")
        return np.array(e4.state) if e4 is not None else np.full(2, np.nan)


@dataclass
class RunOutcome:
    classification: str
    state: np.ndarray
    t_final: float
    escaped: bool
    trajectory: Trajectory | None = None


def _shift_for(model, template: ShiftSpec, delta: float, eps: float) -> ShiftSpec:
    return template.with_(base=model.base_value, delta=float(delta), eps=float(eps),
                          target=model.target)


def simulate_shift(model, shift: ShiftSpec, cfg: IntegratorConfig | None = None,
                   delta_rel: float = DEFAULT_DELTA_REL, record: bool = False) -> RunOutcome:
    """Start on the stable state at mu(t0), run through the shift, then classify.

    The final verdict is taken against the frozen end-of-shift parameter
    value. Raises :class:`UnclassifiableError` when that verdict cannot be made.
    """
    cfg = model.cfg if cfg is None else cfg
    if getattr(model.cfg, "nonnegative", False) and not cfg.nonnegative:
        cfg = IntegratorConfig(cfg.abs_tol, cfg.rel_tol, cfg.h_init, cfg.h_max,
                               cfg.max_steps, nonnegative=True)
    t0 = start_time(shift, delta_rel)
    t1 = end_time(shift, delta_rel)
    y0 = model.initial_state(shift(t0))
    try:
        tr = integrate(model.field, y0, t0, t1, cfg, model.args(shift),
                       event=model.event, record=record)
    except IntegrationError as exc:
        raise UnclassifiableError(f"integration failed: {exc}") from exc
    if tr.flag is Termination.BUDGET:
        raise UnclassifiableError("step budget exhausted during the shift")
    escaped = tr.flag is Termination.EVENT
    verdict = model.classify_end(tr.y_final, shift.end_value, escaped)
    if verdict is None:
        raise UnclassifiableError(
            f"unclassifiable: delta={shift.delta!r} eps={shift.eps!r}")
    return RunOutcome(verdict, tr.y_final.copy(), tr.t_final, escaped,
                      tr if record else None)


def classify_run(model, template: ShiftSpec, delta: float, eps: float,
                 cfg: IntegratorConfig | None = None) -> str:
    """Classification string for one (delta, eps) cell; never raises on numerics."""
    try:
        return simulate_shift(model, _shift_for(model, template, delta, eps), cfg).classification
    except UnclassifiableError:
        return UNCLASSIFIABLE


def log_grid(lo: float, hi: float, per_decade: int = 40) -> np.ndarray:
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    n = max(2, int(math.ceil(per_decade * math.log10(hi / lo))) + 1)
    return np.logspace(math.log10(lo), math.log10(hi), n)


def _bisect(classify: Callable[[float], str], lo: float, hi: float, c_lo: str,
            tol: float, log: bool) -> float:
    while (hi / lo - 1.0 if log else hi - lo) > tol:
        mid = math.sqrt(lo * hi) if log else 0.5 * (lo + hi)
        c = classify(mid)
        if c == UNCLASSIFIABLE:
            break
        if c == c_lo:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi) if log else 0.5 * (lo + hi)


def _crossings(values: np.ndarray, classes: list[str]) -> list[tuple[int, int]]:
    """Index pairs of consecutive classified samples with different classes."""
    known = [i for i, c in enumerate(classes) if c != UNCLASSIFIABLE]
    return [(i, j) for i, j in zip(known, known[1:]) if classes[i] != classes[j]]


def critical_rate(model, template: ShiftSpec, delta: float, eps_range=(1e-4, 10.0),
                  per_decade: int = 40, tol: float = 1e-6,
                  cfg: IntegratorConfig | None = None) -> list[float]:
    """All tracking/tipping switches in eps at fixed delta, sorted ascending."""
    grid = log_grid(eps_range[0], eps_range[1], per_decade)

    def cls(e):
        return classify_run(model, template, delta, e, cfg)

    classes = [cls(e) for e in grid]
    out = []
    for i, j in _crossings(grid, classes):
        out.append(_bisect(cls, grid[i], grid[j], classes[i], tol, log=True))
    return sorted(out)


def critical_magnitude(model, template: ShiftSpec, eps: float, delta_range,
                       n: int = 60, tol: float = 1e-6,
                       cfg: IntegratorConfig | None = None) -> list[float]:
    """All tracking/tipping switches in delta at fixed eps (linear pre-scan)."""
    grid = np.linspace(delta_range[0], delta_range[1], n)

    def cls(d):
        return classify_run(model, template, d, eps, cfg)

    classes = [cls(d) for d in grid]
    return sorted(_bisect(cls, grid[i], grid[j], classes[i], tol, log=False)
                  for i, j in _crossings(grid, classes))


@dataclass
class TippingDiagram:
    deltas: np.ndarray
    epss: np.ndarray
    cells: np.ndarray  # object array [n_delta, n_eps] of class strings
    transitions: dict = field(default_factory=dict)  # delta index -> sorted eps list
    meta: dict = field(default_factory=dict)

    @property
    def rdot_max(self) -> np.ndarray:
        return 0.5 * self.deltas[:, None] * self.epss[None, :]

    def count(self, cls: str) -> int:
        return int(np.sum(self.cells == cls))

    def to_csv(self) -> str:
        lines = [_meta_line(self.meta), "delta,eps,rdot_max,class"]
        for i, d in enumerate(map(float, self.deltas)):
            for j, e in enumerate(map(float, self.epss)):
                lines.append(f"{d!r},{e!r},{0.5 * d * e!r},{self.cells[i, j]}")
        return "\n".join(lines) + "\n"

    def transitions_csv(self) -> str:
        lines = [_meta_line(self.meta), "delta,eps_crossing,index"]
        for i in sorted(self.transitions):
            for k, e in enumerate(self.transitions[i]):
                lines.append(f"{float(self.deltas[i])!r},{float(e)!r},{k}")
        return "\n".join(lines) + "\n"


def _meta_line(meta: dict) -> str:
    keys = ["model", "shape", "p1_r", "p1_m", "delta_rel"]
    head = [f"{k}={meta[k]}" for k in keys if k in meta]
    rest = [f"{k}={meta[k]}" for k in sorted(meta) if k not in keys]
    return "# " + " ".join(head + rest)


def _row_task(payload):
    model, template, delta, epss, cfg = payload
    return [classify_run(model, template, delta, e, cfg) for e in epss]


def diagram_rows(model, template: ShiftSpec, deltas, epss, jobs: int = 1,
                 cfg: IntegratorConfig | None = None, skip: Iterable[int] = ()):
    """Yield ``(delta_index, classes)`` rows in index order.

    Rows are independent; with ``jobs > 1`` they run in worker processes and
    are still yielded in index order.
    """
    skip = set(skip)
    todo = [i for i in range(len(deltas)) if i not in skip]
    payloads = [(model, template, float(deltas[i]), [float(e) for e in epss], cfg) for i in todo]
    if jobs <= 1:
        for i, p in zip(todo, payloads):
            yield i, _row_task(p)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for i, row in zip(todo, pool.map(_row_task, payloads)):
            yield i, row


def extract_transitions(model, template: ShiftSpec, deltas, epss, cells,
                        refine_tol: float | None = None,
                        cfg: IntegratorConfig | None = None) -> dict:
    """Per-delta eps crossings; midpoints in log-eps, or bisected when ``refine_tol``."""
    out = {}
    for i, d in enumerate(deltas):
        row = list(cells[i])
        found = []
        for a, b in _crossings(np.asarray(epss), row):
            if refine_tol is None:
                found.append(math.sqrt(epss[a] * epss[b]))
            else:
                found.append(_bisect(lambda e: classify_run(model, template, d, e, cfg),
                                     float(epss[a]), float(epss[b]), row[a], refine_tol, True))
        if found:
            out[i] = sorted(found)
    return out


def tipping_diagram(model, template: ShiftSpec, deltas, epss, jobs: int = 1,
                    refine_tol: float | None = None,
                    cfg: IntegratorConfig | None = None) -> TippingDiagram:
    """Classify every (delta, eps) cell and extract the per-delta transitions."""
    deltas = np.asarray(deltas, dtype=float)
    epss = np.asarray(epss, dtype=float)
    if deltas.size == 0 or epss.size == 0:
        raise ValueError("empty grid")
    cells = np.empty((len(deltas), len(epss)), dtype=object)
    for i, row in diagram_rows(model, template, deltas, epss, jobs, cfg):
        cells[i, :] = row
    meta = diagram_meta(model, template)
    trans = extract_transitions(model, template, deltas, epss, cells, refine_tol, cfg)
    return TippingDiagram(deltas, epss, cells, trans, meta)


def diagram_meta(model, template: ShiftSpec, delta_rel: float = DEFAULT_DELTA_REL) -> dict:
    meta = dict(model.describe())
    meta.update(shape=template.shape.value, delta_rel=delta_rel, c=template.c,
                tau=template.tau)
    if getattr(model, "horizon", None) is not None:
        meta["horizon"] = model.horizon
    return meta


REGIONS = ("track", "return", "no_return", "return_tipping")


@dataclass
class ReturnPartition:
    deltas: np.ndarray
    epss: np.ndarray
    regions: np.ndarray
    meta: dict = field(default_factory=dict)

    def count(self, region: str) -> int:
        return int(np.sum(self.regions == region))

    def to_csv(self) -> str:
        lines = [_meta_line(self.meta), "delta,eps,region"]
        for i, d in enumerate(map(float, self.deltas)):
            for j, e in enumerate(map(float, self.epss)):
                lines.append(f"{d!r},{e!r},{self.regions[i, j]}")
        return "\n".join(lines) + "\n"


def partition_cell(mono: str, nonmono: str) -> str:
    if UNCLASSIFIABLE in (mono, nonmono):
        return UNCLASSIFIABLE
    return {
        (TRACKING, TRACKING): "track",
        (TIPPED, TRACKING): "return",
        (TIPPED, TIPPED): "no_return",
        (TRACKING, TIPPED): "return_tipping",
    }[(mono, nonmono)]


def return_partition(mono: TippingDiagram, nonmono: TippingDiagram) -> ReturnPartition:
    if (mono.cells.shape != nonmono.cells.shape
            or not np.array_equal(mono.deltas, nonmono.deltas)
            or not np.array_equal(mono.epss, nonmono.epss)):
        raise ValueError("grid mismatch between monotone and non-monotone diagrams")
    regions = np.empty(mono.cells.shape, dtype=object)
    for idx in np.ndindex(mono.cells.shape):
        regions[idx] = partition_cell(mono.cells[idx], nonmono.cells[idx])
    meta = {k: v for k, v in nonmono.meta.items() if k not in ("shape",)}
    meta["shape"] = f"{mono.meta.get('shape')}|{nonmono.meta.get('shape')}"
    return ReturnPartition(mono.deltas, mono.epss, regions, meta)


@dataclass
class Witness:
    eps: float
    bracket: tuple[float, float]
    classification: str
    trajectory: Trajectory
    distance: np.ndarray  # distance to the moving reference object at trajectory times

    def longest_window(self, radius: float) -> float:
        """Longest contiguous time span with ``distance < radius``."""
        inside = np.nan_to_num(self.distance, nan=np.inf) < radius
        best, start = 0.0, None
        t = self.trajectory.times
        for k, flag in enumerate(inside):
            if flag and start is None:
                start = t[k]
            if start is not None and (not flag or k == len(inside) - 1):
                end = t[k] if flag else t[k - 1]
                best = max(best, end - start)
                start = None
        return best


def canard_witness(model, template: ShiftSpec, delta: float, eps_bracket,
                   width: float = 1e-10, scan: int = 24,
                   cfg: IntegratorConfig | None = None) -> Witness:
    """Bisect onto the critical rate inside ``eps_bracket`` and return the threshold run."""
    lo, hi = float(eps_bracket[0]), float(eps_bracket[1])
    grid = np.geomspace(lo, hi, scan)

    def cls(e):
        return classify_run(model, template, delta, e, cfg)

    classes = [cls(e) for e in grid]
    cross = _crossings(grid, classes)
    if len(cross) != 1 or UNCLASSIFIABLE in (classes[0], classes[-1]):
        raise ValueError(f"bracket must contain exactly one critical rate, found {len(cross)}")
    a, b = cross[0]
    lo, hi, c_lo = float(grid[a]), float(grid[b]), classes[a]
    while hi / lo - 1.0 > width:
        mid = math.sqrt(lo * hi)
        if mid <= lo or mid >= hi:
            break
        if cls(mid) == c_lo:
            lo = mid
        else:
            hi = mid
    eps = math.sqrt(lo * hi)
    shift = _shift_for(model, template, delta, eps)
    out = simulate_shift(model, shift, cfg, record=True)
    tr = out.trajectory
    ref = np.array([model.moving_reference(shift(t)) for t in tr.times])
    dist = np.linalg.norm(tr.states - ref.reshape(tr.states.shape), axis=1)
    return Witness(eps, (lo, hi), out.classification, tr, dist)
