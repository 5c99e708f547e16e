"""Command-line frontend: ``tipkit <subcommand> --config FILE --out DIR``.

Every artifact is plain CSV (or JSON with ``--format json``) headed by a
provenance line carrying the config hash and solver tolerances. Grid sweeps
(``tipdiag``, ``partition``, ``nf``) checkpoint after every Delta row and can be
resumed with ``--resume``.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from . import basins, bifurcation as bif, ecosystem as eco, normal_forms as nf, tipping
from .ode import SWEEP, IntegratorConfig, integrate
from .shifts import DEFAULT_DELTA_REL, Shape, ShiftSpec, end_time, start_time

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
UNCLASSIFIABLE_LIMIT = 0.01
NF_SOLVER = IntegratorConfig(abs_tol=1e-10, rel_tol=1e-10)

_NUMERIC = object()
_TEXT = object()

SCHEMA = {
    "model": {
        "kind": _TEXT, "r": _NUMERIC, "m": _NUMERIC, "C": _NUMERIC, "a": _NUMERIC,
        "b": _NUMERIC, "b_c": _NUMERIC, "E": _NUMERIC, "c_max": _NUMERIC,
        "mu_minus": _NUMERIC, "s": _NUMERIC, "omega": _NUMERIC, "alpha": _NUMERIC,
    },
    "path": {
        "p1_r": _NUMERIC, "p1_m": _NUMERIC, "target": _TEXT, "direction": _TEXT,
        "coord": _TEXT, "lo": _NUMERIC, "hi": _NUMERIC, "width": _NUMERIC,
    },
    "shift": {
        "shape": _TEXT, "mono_shape": _TEXT, "delta": _NUMERIC, "eps": _NUMERIC,
        "c": _NUMERIC, "tau": _NUMERIC, "delta_rel": _NUMERIC,
    },
    "grid": {
        "delta_min": _NUMERIC, "delta_max": _NUMERIC, "delta_n": _NUMERIC,
        "eps_min": _NUMERIC, "eps_max": _NUMERIC, "eps_n": _NUMERIC,
        "eps_per_decade": _NUMERIC, "eps_scale": _TEXT, "refine_tol": _NUMERIC,
        "r_min": _NUMERIC, "r_max": _NUMERIC, "r_n": _NUMERIC,
        "m_min": _NUMERIC, "m_max": _NUMERIC, "m_n": _NUMERIC,
    },
    "solver": {
        "abs_tol": _NUMERIC, "rel_tol": _NUMERIC, "h_init": _NUMERIC,
        "h_max": _NUMERIC, "max_steps": _NUMERIC,
    },
    "output": {"dir": _TEXT, "format": _TEXT},
}


class ConfigError(ValueError):
    pass


# --- configuration ----------------------------------------------------------

def load_config(path: str | os.PathLike | None) -> dict:
    """Parse an INI file into ``{section: {key: float|str}}``; unknown keys are errors."""
    if path is None:
        return {}
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep C and E upper-case
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    out = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        values = {}
        for key, raw in parser.items(section):
            kind = SCHEMA[section].get(key)
            if kind is None:
                raise ConfigError(f"unknown key {section}.{key}")
            if kind is _NUMERIC:
                try:
                    values[key] = float(raw)
                except ValueError:
                    raise ConfigError(f"{section}.{key} must be a number, got {raw!r}") from None
                if not math.isfinite(values[key]) and key not in ("tau", "h_max"):
                    raise ConfigError(f"{section}.{key} must be finite")
            else:
                values[key] = raw.strip()
        out[section] = values
    return out


def config_hash(cfg: dict, extra: dict | None = None) -> str:
    """SHA-256 over the parsed config (output section excluded) and command options."""
    body = {k: v for k, v in cfg.items() if k != "output"}
    payload = json.dumps({"config": body, "extra": extra or {}}, sort_keys=True, default=repr)
    return hashlib.sha256(payload.encode()).hexdigest()


def _get(cfg, section, key, default=None, required=False):
    val = cfg.get(section, {}).get(key, default)
    if val is None and required:
        raise ConfigError(f"missing key {section}.{key}")
    return val


def _count(cfg, section, key, default):
    v = _get(cfg, section, key, default)
    if v != int(v) or v < 1:
        raise ConfigError(f"{section}.{key} must be a positive integer")
    return int(v)


def solver_config(cfg: dict, default: IntegratorConfig = SWEEP) -> IntegratorConfig:
    s = cfg.get("solver", {})
    try:
        return IntegratorConfig(
            abs_tol=s.get("abs_tol", default.abs_tol),
            rel_tol=s.get("rel_tol", default.rel_tol),
            h_init=s.get("h_init", default.h_init),
            h_max=s.get("h_max", default.h_max),
            max_steps=int(s.get("max_steps", default.max_steps)),
        )
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from exc


def model_params(cfg: dict) -> eco.ModelParams:
    m = dict(cfg.get("model", {}))
    kind = m.pop("kind", "ecosystem")
    if kind != "ecosystem":
        raise ConfigError(f"model.kind must be 'ecosystem' for this subcommand, got {kind!r}")
    for key in ("mu_minus", "s", "omega", "alpha"):
        if key in m:
            raise ConfigError(f"model.{key} applies to normal forms only")
    path = cfg.get("path", {})
    r = path.get("p1_r", m.pop("r", None))
    mm = path.get("p1_m", m.pop("m", None))
    if r is None or mm is None:
        raise ConfigError("missing key model.r / model.m (or path.p1_r / path.p1_m)")
    try:
        return eco.ModelParams(r=r, m=mm, **m)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model: {exc}") from exc


def build_model(cfg: dict, solver: IntegratorConfig, kind: str | None = None, s: float | None = None):
    """Tipping model from the [model] and [path] sections."""
    m = cfg.get("model", {})
    kind = kind or m.get("kind", "ecosystem")
    direction = _get(cfg, "path", "direction", "increasing")
    if direction != "increasing":
        raise ConfigError("path.direction: only 'increasing' shifts are supported")
    if kind == "ecosystem":
        target = _get(cfg, "path", "target", "r")
        if target not in ("r", "m"):
            raise ConfigError(f"path.target must be 'r' or 'm', got {target!r}")
        return tipping.EcosystemModel(model_params(cfg), target=target, cfg=solver)
    s = m.get("s", 0.0) if s is None else s
    mu_minus = m.get("mu_minus", -1.0)
    if mu_minus >= 0:
        raise ConfigError("model.mu_minus must be negative")
    if kind in ("hopf", "hopf_nf"):
        return nf.HopfNF(mu_minus, s, m.get("omega", 1.0), m.get("alpha", 1.0), cfg=solver)
    if kind in ("sn", "sn_nf"):
        return nf.SaddleNodeNF(mu_minus, s, cfg=solver)
    raise ConfigError(f"model.kind must be ecosystem, hopf or sn, got {kind!r}")


def _shape(name: str, key: str) -> Shape:
    try:
        return Shape(name.lower())
    except ValueError:
        raise ConfigError(f"shift.{key} must be tanh, sech or plateau, got {name!r}") from None


def shift_template(cfg: dict, model, shape_key: str = "shape", default_shape: str = "tanh") -> ShiftSpec:
    sh = cfg.get("shift", {})
    shape = _shape(sh.get(shape_key, default_shape), shape_key)
    tau = sh.get("tau", 0.0)
    if shape_key == "mono_shape" and shape is Shape.PLATEAU:
        tau = math.inf  # rise and hold
    try:
        return ShiftSpec(shape, model.base_value, sh.get("delta", 0.0), sh.get("eps", 1.0),
                         sh.get("c", 1.0), tau, model.target)
    except ValueError as exc:
        raise ConfigError(f"shift: {exc}") from exc


def grid_axes(cfg: dict, delta_default=None, eps_default=None):
    g = cfg.get("grid", {})
    lo = g.get("delta_min", delta_default[0] if delta_default else None)
    hi = g.get("delta_max", delta_default[1] if delta_default else None)
    if lo is None or hi is None:
        raise ConfigError("missing key grid.delta_min / grid.delta_max")
    deltas = np.linspace(lo, hi, _count(cfg, "grid", "delta_n", 60))
    e_lo = g.get("eps_min", eps_default[0] if eps_default else None)
    e_hi = g.get("eps_max", eps_default[1] if eps_default else None)
    if e_lo is None or e_hi is None:
        raise ConfigError("missing key grid.eps_min / grid.eps_max")
    if not 0 < e_lo < e_hi:
        raise ConfigError("grid: need 0 < eps_min < eps_max")
    scale = g.get("eps_scale", "log")
    if scale == "log":
        epss = tipping.log_grid(e_lo, e_hi, _count(cfg, "grid", "eps_per_decade", 40))
    elif scale == "linear":
        epss = np.linspace(e_lo, e_hi, _count(cfg, "grid", "eps_n", 60))
    else:
        raise ConfigError(f"grid.eps_scale must be log or linear, got {scale!r}")
    if np.any(deltas < 0):
        raise ConfigError("grid: shift magnitudes must be non-negative")
    return deltas, epss


# --- artifact writing -------------------------------------------------------

def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


class Run:
    """Per-invocation context: output dir, format, provenance and manifest."""

    def __init__(self, command: str, args, cfg: dict, solver: IntegratorConfig, extra=None):
        self.command = command
        self.cfg = cfg
        self.solver = solver
        self.extra = extra or {}
        out = args.out or _get(cfg, "output", "dir", ".")
        self.out = Path(out)
        self.format = args.format or _get(cfg, "output", "format", "csv")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"output.format must be csv or json, got {self.format!r}")
        self.jobs = max(1, int(args.jobs or 1))
        self.resume = bool(args.resume)
        self.hash = config_hash(cfg, {"command": command, **self.extra})
        self.started = time.perf_counter()
        self.artifacts: list[str] = []
        self.summary: dict = {}
        self.grid: dict = {}

    @property
    def provenance(self) -> str:
        return (f"# tipkit={__version__} command={self.command} config_hash={self.hash} "
                f"abs_tol={self.solver.abs_tol!r} rel_tol={self.solver.rel_tol!r}")

    def emit(self, stem: str, header: list[str], rows, meta: dict | None = None,
             body: str | None = None) -> Path:
        """Write one table; ``body`` (pre-rendered CSV with its own meta line) wins for csv."""
        if self.format == "json":
            path = self.out / f"{stem}.json"
            doc = {"provenance": self.provenance[2:], "meta": meta or {},
                   "columns": header, "rows": [list(r) for r in rows]}
            write_atomic(path, json.dumps(doc, indent=1, default=_json_default) + "\n")
        else:
            path = self.out / f"{stem}.csv"
            if body is None:
                lines = [",".join(header)] + [",".join(_fmt(v) for v in r) for r in rows]
                if meta:
                    lines.insert(0, "# " + " ".join(f"{k}={v}" for k, v in sorted(meta.items())))
                body = "\n".join(lines) + "\n"
            write_atomic(path, self.provenance + "\n" + body)
        self.artifacts.append(path.name)
        return path

    def manifest(self) -> Path:
        doc = {
            "command": self.command,
            "version": __version__,
            "config_hash": self.hash,
            "config": self.cfg,
            "options": self.extra,
            "grid": self.grid,
            "solver": {k: (repr(v) if isinstance(v, float) and not math.isfinite(v) else v)
                       for k, v in asdict(self.solver).items()},
            "wall_time_s": round(time.perf_counter() - self.started, 3),
            "artifacts": self.artifacts,
            "summary": self.summary,
        }
        path = self.out / f"{self.command}.manifest.json"
        write_atomic(path, json.dumps(doc, indent=1, sort_keys=True, default=_json_default) + "\n")
        return path


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _json_default(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return repr(v)


# --- checkpointed sweeps ----------------------------------------------------

def checkpointed_cells(run: Run, name: str, model, template: ShiftSpec, deltas, epss) -> np.ndarray:
    """Classify the grid row by row, persisting each finished Delta row.

    The checkpoint uses the diagram CSV row format and is rewritten via
    temp-file-and-rename after every row, so a crash leaves either the old or
    the new file and a row is either fully recorded or absent.
    """
    ckpt = run.out / f"{name}.checkpoint.csv"
    grid_key = {"deltas": [repr(float(d)) for d in deltas], "epss": [repr(float(e)) for e in epss],
                "shape": template.shape.value, "c": template.c, "tau": repr(template.tau)}
    key = hashlib.sha256(json.dumps([run.hash, grid_key], sort_keys=True).encode()).hexdigest()
    head = f"# checkpoint key={key} config_hash={run.hash}"
    done: dict[int, list[str]] = {}
    if run.resume and ckpt.exists():
        done = _read_checkpoint(ckpt, head, run.hash, deltas, epss)

    cells = np.empty((len(deltas), len(epss)), dtype=object)
    for i, row in done.items():
        cells[i, :] = row

    def flush():
        lines = [head, "delta,eps,rdot_max,class"]
        for i in sorted(done):
            d = float(deltas[i])
            lines += [f"{d!r},{float(e)!r},{0.5 * d * float(e)!r},{c}" for e, c in zip(epss, done[i])]
        write_atomic(ckpt, "\n".join(lines) + "\n")

    for i, row in tipping.diagram_rows(model, template, deltas, epss, run.jobs,
                                       skip=done.keys()):
        cells[i, :] = row
        done[i] = list(row)
        flush()
    return cells


def _read_checkpoint(path: Path, head: str, current_hash: str, deltas, epss) -> dict[int, list[str]]:
    lines = path.read_text().splitlines()
    if not lines or lines[0] != head:
        found = lines[0].rsplit("config_hash=", 1)[-1] if lines else "?"
        raise ConfigError(f"cannot resume {path.name}: it was written for config hash "
                          f"{found}, current hash is {current_hash}")
    d_index = {repr(float(d)): i for i, d in enumerate(deltas)}
    e_index = {repr(float(e)): j for j, e in enumerate(epss)}
    rows: dict[int, dict[int, str]] = {}
    for line in lines[2:]:
        d, e, _, cls = line.split(",")
        rows.setdefault(d_index[d], {})[e_index[e]] = cls
    # only complete rows count; a partial row cannot occur with atomic rewrites
    return {i: [r[j] for j in range(len(epss))] for i, r in rows.items() if len(r) == len(epss)}


def _diagram(run: Run, name: str, model, template: ShiftSpec, deltas, epss) -> tipping.TippingDiagram:
    cells = checkpointed_cells(run, name, model, template, deltas, epss)
    refine = _get(run.cfg, "grid", "refine_tol")
    trans = tipping.extract_transitions(model, template, deltas, epss, cells, refine)
    meta = tipping.diagram_meta(model, template, _get(run.cfg, "shift", "delta_rel", DEFAULT_DELTA_REL))
    return tipping.TippingDiagram(deltas, epss, cells, trans, meta)


def _emit_diagram(run: Run, stem: str, diag: tipping.TippingDiagram) -> None:
    rows = [(float(d), float(e), 0.5 * float(d) * float(e), diag.cells[i, j])
            for i, d in enumerate(diag.deltas) for j, e in enumerate(diag.epss)]
    run.emit(stem, ["delta", "eps", "rdot_max", "class"], rows, diag.meta, diag.to_csv())
    trows = [(float(diag.deltas[i]), e, k) for i in sorted(diag.transitions)
             for k, e in enumerate(diag.transitions[i])]
    run.emit(f"{stem}_transitions", ["delta", "eps_crossing", "index"], trows, diag.meta,
             diag.transitions_csv())


def _unclassified_share(*grids) -> float:
    total = sum(g.size for g in grids)
    bad = sum(int(np.sum(g == tipping.UNCLASSIFIABLE)) for g in grids)
    return bad / total if total else 0.0


# --- subcommands ------------------------------------------------------------

def cmd_equilibria(args, cfg) -> int:
    params = model_params(cfg)
    run = Run("equilibria", args, cfg, solver_config(cfg))
    rows = []
    for e in eco.equilibria(params):
        l1, l2 = e.eigenvalues
        rows.append((e.kind, e.P, e.H, l1.real, l1.imag, l2.real, l2.imag, e.stability))
    run.emit("equilibria", ["kind", "P", "H", "eig1_re", "eig1_im", "eig2_re", "eig2_im", "stability"],
             rows, {"r": params.r, "m": params.m, "b": params.b, "b_c": params.b_c})
    run.summary = {"count": len(rows)}
    run.manifest()
    _report(run)
    return EXIT_OK


def cmd_bifdiag(args, cfg) -> int:
    params = model_params(cfg)
    run = Run("bifdiag", args, cfg, solver_config(cfg))
    r_lo = _get(cfg, "grid", "r_min", 0.05)
    r_hi = _get(cfg, "grid", "r_max", 3.0)
    n = _count(cfg, "grid", "r_n", 60)
    if not 0 < r_lo < r_hi:
        raise ConfigError("grid: need 0 < r_min < r_max")
    rs = np.linspace(r_lo, r_hi, n)
    rows = list(bif.transcritical_curve(params, rs).to_rows())
    if params.nonlinearity > 0:
        rows += list(bif.saddle_node_curve(params, r_hi, n).to_rows())
    rows += list(bif.hopf_curve(params, (r_lo, r_hi), n).to_rows())
    if params.nonlinearity > 0:
        st = bif.st_point(params)
        rows.append(("ST", *st.location, ""))
        try:
            bt = bif.bt_point(params)
            rows.append(("BT", *bt.location, bt.bt_type or ""))
        except ValueError:
            pass
    run.emit("bifurcation", ["label", "r", "m", "tag"], rows,
             {"b": params.b, "b_c": params.b_c, "r_min": r_lo, "r_max": r_hi, "n": n})
    run.grid = {"r": [r_lo, r_hi, n]}
    run.summary = {lab: sum(1 for r in rows if r[0] == lab) for lab in ("T", "S_e", "H_e", "ST", "BT")}
    run.manifest()
    _report(run)
    return EXIT_OK


def cmd_basin(args, cfg) -> int:
    params = model_params(cfg)
    solver = solver_config(cfg)
    run = Run("basin", args, cfg, solver)
    p1 = (params.r, params.m)
    g = cfg.get("grid", {})
    did = False
    if "coord" in cfg.get("path", {}):
        coord = cfg["path"]["coord"]
        lo, hi = _get(cfg, "path", "lo", required=True), _get(cfg, "path", "hi", required=True)
        try:
            value = basins.bi_boundary_on_path(p1, coord, (lo, hi), params, solver,
                                               _get(cfg, "path", "width", 1e-6))
        except basins.BasinUndefinedError as exc:
            raise ConfigError(str(exc)) from exc
        run.emit("basin_boundary", ["coord", "p1_r", "p1_m", "boundary"], [(coord, *p1, value)])
        run.summary["boundary"] = value
        did = True
    if "r_min" in g or "m_min" in g:
        rs = np.linspace(_get(cfg, "grid", "r_min", required=True),
                         _get(cfg, "grid", "r_max", required=True), _count(cfg, "grid", "r_n", 40))
        ms = np.linspace(_get(cfg, "grid", "m_min", required=True),
                         _get(cfg, "grid", "m_max", required=True), _count(cfg, "grid", "m_n", 40))
        try:
            bmap = basins.bi_region(p1, rs, ms, params, solver)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        run.emit("basin", ["r", "m", "mask", "member"], list(bmap.rows()),
                 {"p1_r": p1[0], "p1_m": p1[1]}, bmap.to_csv())
        run.grid = {"r": [float(rs[0]), float(rs[-1]), len(rs)], "m": [float(ms[0]), float(ms[-1]), len(ms)]}
        run.summary["member_cells"] = int(bmap.membership.sum())
        did = True
    if not did:
        raise ConfigError("basin needs path.coord/lo/hi or grid.r_min..m_max")
    run.manifest()
    _report(run)
    return EXIT_OK


def cmd_simulate(args, cfg) -> int:
    solver = solver_config(cfg)
    model = build_model(cfg, solver)
    run = Run("simulate", args, cfg, solver)
    sh = cfg.get("shift", {})
    if "delta" not in sh or "eps" not in sh:
        raise ConfigError("missing key shift.delta / shift.eps")
    spec = shift_template(cfg, model)
    delta_rel = sh.get("delta_rel", DEFAULT_DELTA_REL)
    try:
        out = tipping.simulate_shift(model, spec, delta_rel=delta_rel, record=True)
        verdict = out.classification
        tr = out.trajectory
    except tipping.UnclassifiableError:
        verdict = tipping.UNCLASSIFIABLE
        t0, t1 = start_time(spec, delta_rel), end_time(spec, delta_rel)
        tr = integrate(model.field, model.initial_state(spec(t0)), t0, t1, model.cfg,
                       model.args(spec), event=model.event)
    names = ["P", "H"] if isinstance(model, tipping.EcosystemModel) else \
        (["x", "y"] if isinstance(model, nf.HopfNF) else ["x"])
    rows = [(float(t), *map(float, y), float(spec(t))) for t, y in zip(tr.times, tr.states)]
    meta = {**model.describe(), "shape": spec.shape.value, "delta": spec.delta, "eps": spec.eps,
            "c": spec.c, "tau": spec.tau, "classification": verdict}
    run.emit("trajectory", ["t", *names, model.target], rows, meta)
    run.summary = {"classification": verdict, "points": len(rows)}
    run.manifest()
    _report(run)
    return EXIT_NUMERICAL if verdict == tipping.UNCLASSIFIABLE else EXIT_OK


def cmd_tipdiag(args, cfg) -> int:
    solver = solver_config(cfg)
    model = build_model(cfg, solver)
    run = Run("tipdiag", args, cfg, solver)
    template = shift_template(cfg, model)
    deltas, epss = grid_axes(cfg)
    run.grid = _grid_doc(deltas, epss)
    diag = _diagram(run, "tipdiag", model, template, deltas, epss)
    _emit_diagram(run, "tipdiag", diag)
    share = _unclassified_share(diag.cells)
    run.summary = {"tracking": diag.count(tipping.TRACKING), "tipped": diag.count(tipping.TIPPED),
                   "unclassifiable": diag.count(tipping.UNCLASSIFIABLE)}
    run.manifest()
    _report(run)
    return EXIT_NUMERICAL if share > UNCLASSIFIABLE_LIMIT else EXIT_OK


def _partition(run: Run, model, mono_t: ShiftSpec, non_t: ShiftSpec, deltas, epss, prefix: str) -> int:
    run.grid = _grid_doc(deltas, epss)
    mono = _diagram(run, f"{prefix}_mono", model, mono_t, deltas, epss)
    non = _diagram(run, f"{prefix}_nonmono", model, non_t, deltas, epss)
    _emit_diagram(run, f"{prefix}_mono", mono)
    _emit_diagram(run, f"{prefix}_nonmono", non)
    part = tipping.return_partition(mono, non)
    rows = [(float(d), float(e), part.regions[i, j])
            for i, d in enumerate(part.deltas) for j, e in enumerate(part.epss)]
    run.emit(prefix, ["delta", "eps", "region"], rows, part.meta, part.to_csv())
    run.summary = {r: part.count(r) for r in (*tipping.REGIONS, tipping.UNCLASSIFIABLE)}
    run.manifest()
    _report(run)
    share = _unclassified_share(mono.cells, non.cells)
    return EXIT_NUMERICAL if share > UNCLASSIFIABLE_LIMIT else EXIT_OK


def cmd_partition(args, cfg) -> int:
    solver = solver_config(cfg)
    model = build_model(cfg, solver)
    run = Run("partition", args, cfg, solver)
    is_nf = not isinstance(model, tipping.EcosystemModel)
    mono_t = shift_template(cfg, model, "mono_shape", "plateau" if is_nf else "tanh")
    non_t = shift_template(cfg, model, "shape", "sech")
    if not mono_t.monotone or non_t.monotone:
        raise ConfigError("partition needs a monotone mono_shape and a non-monotone shape")
    deltas, epss = grid_axes(cfg)
    return _partition(run, model, mono_t, non_t, deltas, epss, "partition")


def cmd_nf(args, cfg) -> int:
    if args.model is None or args.s is None:
        raise ConfigError("nf needs --model {hopf,sn} and --s")
    solver = solver_config(cfg, NF_SOLVER)
    cfg = {k: dict(v) for k, v in cfg.items()}
    cfg.setdefault("model", {})["kind"] = args.model
    model = build_model(cfg, solver, kind=args.model, s=args.s)
    run = Run("nf", args, cfg, solver, {"model": args.model, "s": args.s})
    mono_t = shift_template(cfg, model, "mono_shape", "plateau")
    non_t = shift_template(cfg, model, "shape", "sech")
    if not mono_t.monotone or non_t.monotone:
        raise ConfigError("nf needs a monotone mono_shape and a non-monotone shape")
    deltas, epss = grid_axes(cfg, (0.05, 2.0), (1e-3, 10.0))
    rows = []
    try:
        if args.model == "hopf":
            lo, hi = nf.hopf_bi_boundaries(model.mu_minus, model.s)
            rows = [("mu_star_minus", lo), ("mu_star_plus", hi)]
        else:
            rows = [("mu_star", nf.sn_bi_boundary(model.mu_minus, model.s))]
    except ValueError:
        rows = []
    run.emit("nf_boundaries", ["name", "mu"], rows, model.describe())
    return _partition(run, model, mono_t, non_t, deltas, epss, f"nf_{args.model}")


def _grid_doc(deltas, epss) -> dict:
    return {"delta": [float(deltas[0]), float(deltas[-1]), len(deltas)],
            "eps": [float(epss[0]), float(epss[-1]), len(epss)]}


def _report(run: Run) -> None:
    for name in run.artifacts:
        print(run.out / name)
    print(run.out / f"{run.command}.manifest.json")


COMMANDS = {
    "equilibria": cmd_equilibria,
    "bifdiag": cmd_bifdiag,
    "basin": cmd_basin,
    "simulate": cmd_simulate,
    "tipdiag": cmd_tipdiag,
    "partition": cmd_partition,
    "nf": cmd_nf,
}


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="INI config file")
    p.add_argument("--out", default=d, help="output directory (overrides output.dir)")
    p.add_argument("--jobs", type=int, default=argparse.SUPPRESS if suppress else 1,
                   help="worker processes for grid sweeps")
    p.add_argument("--resume", action="store_true", default=argparse.SUPPRESS if suppress else False,
                   help="continue an interrupted sweep from its checkpoint")
    p.add_argument("--format", choices=("csv", "json"), default=d)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tipkit", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        _global_flags(sp, suppress=True)
        if name == "nf":
            sp.add_argument("--model", choices=("hopf", "sn"))
            sp.add_argument("--s", type=float, help="tilt")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command != "nf" and args.config is None:
            raise ConfigError(f"{args.command} needs --config")
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
