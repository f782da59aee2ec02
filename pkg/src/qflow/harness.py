"""Experiment drivers: configuration files, initial data, refinement and
stability studies, tactoid runs, and all CSV output.

Experiments are described by TOML files with sections [model], [solver],
[mesh], [experiment], and [output].  Any section may carry a `paper`
subtable ([experiment.paper], ...) whose entries replace the base values
when the run is invoked with paper-scale settings; the defaults are sized
so every study finishes on a desk machine.
"""

from __future__ import annotations

import csv
import importlib.resources
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .assembly import NodalField, interpolate_field, l2_error, total_energy
from .mesh import Mesh, load_mesh, structured_rect_mesh
from .qtensor import ModelParams, SymTraceless, make_basis, order_parameter_2d
from .solver import FixedPointError, RunReport, SolverConfig, run_flow

EXPERIMENT_KINDS = ("run", "converge-space", "converge-time", "cfl", "tactoid")
TACTOID_KINDS = ("deg1", "degm1", "deg0")
IC_NAMES = ("convtest",) + tuple(f"tactoid-{k}" for k in TACTOID_KINDS)

_BUILTIN_MESHES = {
    "disk-desk": "disk_desk.txt",
    "disk-paper": "disk_paper.txt",
}


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    """Everything one experiment needs: mesh source, physics, stepping,
    initial condition, schedule, and output location."""

    kind: str
    mesh: dict
    params: ModelParams
    solver: SolverConfig
    ic: str
    out_dir: str
    final_time: float | None = None
    n_steps: int | None = None
    snapshot_times: tuple = ()
    # refinement studies
    h_values: tuple = ()
    h_ref: float | None = None
    dt_ref: float | None = None
    dt_values: tuple = ()
    ref_steps: int | None = None
    # stability search
    dt_bracket: tuple | None = None
    probe_steps: int = 100
    probe_fp_max_iters: int | None = None

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(
                f"unknown experiment kind {self.kind!r}; expected one of {EXPERIMENT_KINDS}")
        if self.ic not in IC_NAMES:
            raise ValueError(
                f"unknown initial condition {self.ic!r}; expected one of {IC_NAMES}")
        if self.final_time is not None and self.snapshot_times:
            late = [t for t in self.snapshot_times if t > self.final_time + 1e-12]
            if late:
                raise ValueError(
                    f"snapshot times {late} exceed final_time {self.final_time}")
        self.snapshot_times = tuple(float(t) for t in self.snapshot_times)
        self.h_values = tuple(float(h) for h in self.h_values)
        self.dt_values = tuple(float(dt) for dt in self.dt_values)
        if self.dt_bracket is not None:
            lo, hi = (float(v) for v in self.dt_bracket)
            if lo <= 0 or hi < lo:
                raise ValueError(f"dt_bracket must satisfy 0 < lo <= hi, got {self.dt_bracket}")
            self.dt_bracket = (lo, hi)


def _merge_paper(table: dict, paper_scale: bool) -> dict:
    """Base entries of one config section, with the `paper` subtable
    layered on top when paper-scale is requested."""
    out = {k: v for k, v in table.items() if k != "paper"}
    if paper_scale and "paper" in table:
        overlay = table["paper"]
        if not isinstance(overlay, dict):
            raise ValueError("the `paper` entry of a config section must be a table")
        out.update(overlay)
    return out


def load_config(path: str, paper_scale: bool = False,
                kind: str | None = None, out_dir: str | None = None) -> ExperimentConfig:
    """Parse a TOML experiment file into an ExperimentConfig.

    kind (from the CLI subcommand) must agree with the file's
    experiment.kind when both are given; out_dir overrides [output] dir.
    """
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    with open(p, "rb") as f:
        raw = tomllib.load(f)
    known_sections = {"model", "solver", "mesh", "experiment", "output"}
    extra = set(raw) - known_sections
    if extra:
        raise ValueError(f"{path}: unknown config sections {sorted(extra)}")

    model = _merge_paper(raw.get("model", {}), paper_scale)
    solver = _merge_paper(raw.get("solver", {}), paper_scale)
    mesh = _merge_paper(raw.get("mesh", {}), paper_scale)
    exp = _merge_paper(raw.get("experiment", {}), paper_scale)
    output = _merge_paper(raw.get("output", {}), paper_scale)

    try:
        params = ModelParams(**model)
    except TypeError as err:
        raise ValueError(f"{path}: bad [model] section: {err}") from None
    try:
        scfg = SolverConfig(**solver)
    except TypeError as err:
        raise ValueError(f"{path}: bad [solver] section: {err}") from None

    file_kind = exp.pop("kind", None)
    if kind is not None and file_kind is not None and kind != file_kind:
        raise ValueError(
            f"{path}: experiment.kind is {file_kind!r} but the command asked for {kind!r}")
    resolved_kind = kind or file_kind
    if resolved_kind is None:
        raise ValueError(f"{path}: experiment.kind missing and no command given")

    resolved_out = out_dir if out_dir is not None else output.get("dir", "out")

    allowed = {f.name for f in fields(ExperimentConfig)} - {"kind", "mesh", "params", "solver", "out_dir"}
    unknown = set(exp) - allowed
    if unknown:
        raise ValueError(f"{path}: unknown [experiment] keys {sorted(unknown)}")

    cfg = ExperimentConfig(kind=resolved_kind, mesh=mesh, params=params,
                           solver=scfg, out_dir=str(resolved_out),
                           ic=exp.pop("ic", "convtest"), **exp)
    if cfg.mesh.get("kind", "rect") == "file":
        mesh_path = cfg.mesh.get("path", "")
        if not mesh_path.startswith("builtin:") and not Path(mesh_path).is_file():
            raise FileNotFoundError(f"{path}: mesh file not found: {mesh_path}")
    return cfg


def builtin_mesh_path(name: str) -> str:
    """Filesystem path of a mesh shipped with the package ('disk-desk', ...)."""
    if name not in _BUILTIN_MESHES:
        raise ValueError(
            f"unknown builtin mesh {name!r}; available: {sorted(_BUILTIN_MESHES)}")
    return str(importlib.resources.files("qflow").joinpath("data", _BUILTIN_MESHES[name]))


def build_mesh(spec: dict, h: float | None = None) -> Mesh:
    """Realize a [mesh] config section; h overrides the section's width."""
    kind = spec.get("kind", "rect")
    if kind == "rect":
        width = float(spec.get("width", 2.0))
        height = float(spec.get("height", width))
        hh = h if h is not None else spec.get("h")
        if hh is None:
            raise ValueError("rect mesh needs an element width h")
        return structured_rect_mesh(width, height, float(hh))
    if kind == "file":
        path = spec["path"]
        if path.startswith("builtin:"):
            path = builtin_mesh_path(path[len("builtin:"):])
        return load_mesh(path)
    raise ValueError(f"unknown mesh kind {kind!r}; expected 'rect' or 'file'")


def _steps_for(final_time: float, dt: float) -> int:
    n = round(final_time / dt)
    if n < 1 or abs(n * dt - final_time) > 1e-9 * max(final_time, 1.0):
        raise ValueError(f"final_time {final_time} is not a positive multiple of dt {dt}")
    return n


# ---------------------------------------------------------------------------
# initial / boundary data


def ic_convtest(x) -> SymTraceless:
    """Smooth director-derived field on [0, 2]^2, zero on the boundary.

    n = (x(2-x) y(2-y), sin(pi x) sin(pi y / 2)) and Q = n n^T - |n|^2/2 I.
    """
    x0, x1 = float(x[0]), float(x[1])
    n1 = x0 * (2.0 - x0) * x1 * (2.0 - x1)
    n2 = math.sin(math.pi * x0) * math.sin(math.pi * x1 / 2.0)
    coeffs = np.array([0.5 * (n1 * n1 - n2 * n2), n1 * n2])
    return SymTraceless(coeffs=coeffs, basis=make_basis(2))


def nematic_amplitude(p: ModelParams) -> float:
    """Frobenius norm sqrt(-2a/c) of the preferred uniaxial state in 2D."""
    val = -2.0 * p.a / p.c
    if val <= 0.0:
        raise ValueError(f"no nematic state for a={p.a}, c={p.c} (need a < 0)")
    return math.sqrt(val)


def ic_tactoid(kind: str, x, amplitude: float) -> SymTraceless:
    """Isotropic core r^2 < 0.3 inside a uniaxial ring of winding `kind`.

    Outside the core, Q = amplitude * (n n^T - I/2) with the director n
    determined by the polar angle: deg1 winds with the boundary, degm1
    against it, deg0 is constant.
    """
    if kind not in TACTOID_KINDS:
        raise ValueError(f"unknown tactoid kind {kind!r}; expected one of {TACTOID_KINDS}")
    basis = make_basis(2)
    x0, x1 = float(x[0]), float(x[1])
    if x0 * x0 + x1 * x1 < 0.3:
        return SymTraceless(coeffs=np.zeros(2), basis=basis)
    th = math.atan2(x1, x0)
    if kind == "deg1":
        n1, n2 = -math.sin(th), math.cos(th)
    elif kind == "degm1":
        n1, n2 = -math.cos(th), math.sin(th)
    else:
        n1, n2 = 1.0, 0.0
    coeffs = amplitude * np.array([0.5 * (n1 * n1 - n2 * n2), n1 * n2])
    return SymTraceless(coeffs=coeffs, basis=basis)


def initial_field(ic: str, mesh: Mesh, params: ModelParams) -> NodalField:
    """Nodal interpolant of a named initial condition (boundary data included)."""
    basis = make_basis(2)
    if ic == "convtest":
        f = lambda x: ic_convtest(x).matrix
    elif ic.startswith("tactoid-"):
        amp = nematic_amplitude(params)
        kind = ic[len("tactoid-"):]
        f = lambda x: ic_tactoid(kind, x, amp).matrix
    else:
        raise ValueError(f"unknown initial condition {ic!r}; expected one of {IC_NAMES}")
    return interpolate_field(f, mesh, basis)


# ---------------------------------------------------------------------------
# CSV output


def _fmt(x: float) -> str:
    return repr(float(x))


def write_energy_csv(path, report: RunReport) -> None:
    """Per-step energy breakdown and solver statistics.

    Columns: step, time, f1..f6, total, diss_residual, fp_iters,
    update_norm; the step-0 row has no solver statistics.
    """
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["step", "time", "f1", "f2", "f3", "f4", "f5", "f6",
                    "total", "diss_residual", "fp_iters", "update_norm"])
        for i, (t, e) in enumerate(zip(report.times, report.energies)):
            row = [str(i), _fmt(t)] + [_fmt(v) for v in e.as_tuple()]
            if i == 0:
                row += ["", "", ""]
            else:
                st = report.stats[i - 1]
                row += [_fmt(st.dissipation_residual), str(st.fp_iters),
                        _fmt(st.last_update_norm)]
            w.writerow(row)


def write_snapshot_csv(path, q: NodalField) -> None:
    """Nodal field dump: node_id, x, y, q1, q2, lambda_plus, dir_x, dir_y,
    boundary_flag, one row per mesh node."""
    mesh = q.mesh
    flags = np.zeros(mesh.n_nodes, dtype=int)
    flags[mesh.boundary_ids] = 1
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["node_id", "x", "y", "q1", "q2", "lambda_plus",
                    "dir_x", "dir_y", "boundary_flag"])
        for i in range(mesh.n_nodes):
            lam, v, _ = order_parameter_2d(q.coeffs[i])
            x, y = mesh.nodes[i]
            w.writerow([str(i), _fmt(x), _fmt(y), _fmt(q.coeffs[i, 0]),
                        _fmt(q.coeffs[i, 1]), _fmt(lam), _fmt(v[0]), _fmt(v[1]),
                        str(flags[i])])


@dataclass
class ConvergenceRow:
    """One line of a refinement table; orders are None on the first row."""

    param: float
    field_error: float
    field_order: float | None
    energy_error: float
    energy_order: float | None


def _order(e_prev: float, e_this: float, p_prev: float, p_this: float) -> float | None:
    if e_prev <= 0.0 or e_this <= 0.0:
        return None
    return math.log(e_prev / e_this) / math.log(p_prev / p_this)


def write_convergence_csv(path, rows: list[ConvergenceRow]) -> None:
    """Columns: param, field_error, field_order, energy_error, energy_order."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["param", "field_error", "field_order", "energy_error", "energy_order"])
        for r in rows:
            w.writerow([_fmt(r.param), _fmt(r.field_error),
                        "" if r.field_order is None else _fmt(r.field_order),
                        _fmt(r.energy_error),
                        "" if r.energy_order is None else _fmt(r.energy_order)])


def write_cfl_csv(path, rows: list[tuple]) -> None:
    """Columns: h, dt_max, order (order empty on the first row)."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["h", "dt_max", "order"])
        for h, dt_max, order in rows:
            w.writerow([_fmt(h), _fmt(dt_max), "" if order is None else _fmt(order)])


# ---------------------------------------------------------------------------
# experiment drivers


def _snapshot_writer(out: Path, prefix: str, collect: list | None = None):
    def on_snapshot(step, t, q):
        write_snapshot_csv(out / f"{prefix}_t{t:g}.csv", q)
        if collect is not None:
            collect.append((t, q))
    return on_snapshot


def run_single(cfg: ExperimentConfig, verbose: bool = False) -> RunReport:
    """One flow on one mesh; writes energy.csv and scheduled snapshots."""
    mesh = build_mesh(cfg.mesh)
    q0 = initial_field(cfg.ic, mesh, cfg.params)
    n_steps = cfg.n_steps if cfg.n_steps is not None else _steps_for(cfg.final_time, cfg.solver.dt)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = run_flow(q0, cfg.params, cfg.solver, n_steps,
                      snapshot_times=cfg.snapshot_times,
                      on_snapshot=_snapshot_writer(out, "snapshot"))
    write_energy_csv(out / "energy.csv", report)
    if verbose:
        print(f"[run] {n_steps} steps, F {report.energies[0].total:.6g} -> "
              f"{report.energies[-1].total:.6g}, {report.wall_time_s:.1f}s", flush=True)
    return report


def _flow_final(mesh: Mesh, cfg: ExperimentConfig, dt: float, n_steps: int):
    """Run the configured IC on a mesh with a given step; final field and energy."""
    scfg = SolverConfig(dt=dt, fp_tol=cfg.solver.fp_tol,
                        fp_max_iters=cfg.solver.fp_max_iters,
                        divergence_norm=cfg.solver.divergence_norm,
                        quad_degree=cfg.solver.quad_degree)
    q0 = initial_field(cfg.ic, mesh, cfg.params)
    report = run_flow(q0, cfg.params, scfg, n_steps)
    return report.final, report.energies[-1].total, report.wall_time_s


def converge_space(cfg: ExperimentConfig, verbose: bool = False) -> list[ConvergenceRow]:
    """Spatial refinement table at fixed dt against a fine reference mesh.

    Coarse runs use solver.dt; the reference (h_ref) uses dt_ref, which may
    be smaller since fine meshes tolerate shorter steps only.  A failed run
    aborts after writing the rows already computed.
    """
    if not cfg.h_values or cfg.h_ref is None:
        raise ValueError("converge-space needs experiment.h_values and h_ref")
    if cfg.final_time is None:
        raise ValueError("converge-space needs experiment.final_time")
    dt_ref = cfg.dt_ref if cfg.dt_ref is not None else cfg.solver.dt
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "convergence_space.csv"

    ref_mesh = build_mesh(cfg.mesh, h=cfg.h_ref)
    if verbose:
        print(f"[space] reference h={cfg.h_ref:g} dt={dt_ref:g} "
              f"({_steps_for(cfg.final_time, dt_ref)} steps)...", flush=True)
    rows: list[ConvergenceRow] = []
    try:
        q_ref, e_ref, wall = _flow_final(ref_mesh, cfg, dt_ref,
                                         _steps_for(cfg.final_time, dt_ref))
        if verbose:
            print(f"[space] reference done in {wall:.1f}s", flush=True)
        for h in cfg.h_values:
            mesh = ref_mesh if h == cfg.h_ref else build_mesh(cfg.mesh, h=h)
            q_h, e_h, wall = _flow_final(mesh, cfg, cfg.solver.dt,
                                         _steps_for(cfg.final_time, cfg.solver.dt))
            fe = l2_error(q_h, q_ref)
            ee = abs(e_h - e_ref)
            fo = eo = None
            if rows:
                fo = _order(rows[-1].field_error, fe, rows[-1].param, h)
                eo = _order(rows[-1].energy_error, ee, rows[-1].param, h)
            rows.append(ConvergenceRow(h, fe, fo, ee, eo))
            if verbose:
                print(f"[space] h={h:g} field_err={fe:.4e} order={fo if fo is None else round(fo, 4)} "
                      f"energy_err={ee:.4e} ({wall:.1f}s)", flush=True)
    except FixedPointError as err:
        write_convergence_csv(csv_path, rows)
        err.partial_rows = rows
        raise
    write_convergence_csv(csv_path, rows)
    return rows


def converge_time(cfg: ExperimentConfig, verbose: bool = False) -> list[ConvergenceRow]:
    """Temporal refinement table on a fixed mesh against a small-dt reference."""
    if not cfg.dt_values or cfg.ref_steps is None:
        raise ValueError("converge-time needs experiment.dt_values and ref_steps")
    if cfg.final_time is None:
        raise ValueError("converge-time needs experiment.final_time")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "convergence_time.csv"

    mesh = build_mesh(cfg.mesh)
    dt_ref = cfg.final_time / cfg.ref_steps
    if verbose:
        print(f"[time] reference dt={dt_ref:g} ({cfg.ref_steps} steps)...", flush=True)
    rows: list[ConvergenceRow] = []
    try:
        q_ref, e_ref, wall = _flow_final(mesh, cfg, dt_ref, cfg.ref_steps)
        if verbose:
            print(f"[time] reference done in {wall:.1f}s", flush=True)
        for dt in cfg.dt_values:
            q_h, e_h, wall = _flow_final(mesh, cfg, dt, _steps_for(cfg.final_time, dt))
            fe = l2_error(q_h, q_ref)
            ee = abs(e_h - e_ref)
            fo = eo = None
            if rows:
                fo = _order(rows[-1].field_error, fe, rows[-1].param, dt)
                eo = _order(rows[-1].energy_error, ee, rows[-1].param, dt)
            rows.append(ConvergenceRow(dt, fe, fo, ee, eo))
            if verbose:
                print(f"[time] dt={dt:g} field_err={fe:.4e} order={fo if fo is None else round(fo, 4)} "
                      f"energy_err={ee:.4e} ({wall:.1f}s)", flush=True)
    except FixedPointError as err:
        write_convergence_csv(csv_path, rows)
        err.partial_rows = rows
        raise
    write_convergence_csv(csv_path, rows)
    return rows


class BracketError(ValueError):
    """The stability search bracket does not straddle the threshold."""


def probe_stability(mesh: Mesh, q0: NodalField, cfg: ExperimentConfig, dt: float) -> bool:
    """True when probe_steps steps at dt all converge within the probe cap."""
    cap = cfg.probe_fp_max_iters if cfg.probe_fp_max_iters is not None else cfg.solver.fp_max_iters
    scfg = SolverConfig(dt=dt, fp_tol=cfg.solver.fp_tol, fp_max_iters=cap,
                        divergence_norm=cfg.solver.divergence_norm,
                        quad_degree=cfg.solver.quad_degree)
    try:
        run_flow(q0, cfg.params, scfg, cfg.probe_steps)
    except FixedPointError:
        return False
    return True


def cfl_search(cfg: ExperimentConfig, verbose: bool = False) -> list[tuple]:
    """Largest stable dt per mesh width, by bisection to 1e-3 relative width.

    For each h the bracket's lower end must converge and the upper end must
    fail; a degenerate bracket [dt, dt] returns dt when it converges.
    Returns (h, dt_max, order) rows, order from successive h pairs.
    """
    if not cfg.h_values or cfg.dt_bracket is None:
        raise ValueError("cfl needs experiment.h_values and dt_bracket")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows: list[tuple] = []
    for h in cfg.h_values:
        mesh = build_mesh(cfg.mesh, h=h)
        q0 = initial_field(cfg.ic, mesh, cfg.params)
        lo, hi = cfg.dt_bracket
        probes = 0

        def probe(dt):
            nonlocal probes
            probes += 1
            return probe_stability(mesh, q0, cfg, dt)

        if lo == hi:
            if not probe(lo):
                raise BracketError(
                    f"h={h:g}: degenerate bracket dt={lo:g} does not converge; widen it")
            dt_max = lo
        else:
            if not probe(lo):
                raise BracketError(
                    f"h={h:g}: lower bracket end dt={lo:g} fails; widen the bracket downward")
            if probe(hi):
                raise BracketError(
                    f"h={h:g}: upper bracket end dt={hi:g} converges; widen the bracket upward")
            while hi - lo > 1e-3 * lo:
                mid = 0.5 * (lo + hi)
                if probe(mid):
                    lo = mid
                else:
                    hi = mid
            dt_max = lo
        order = None
        if rows:
            order = _order(rows[-1][1], dt_max, rows[-1][0], h)
        rows.append((h, dt_max, order))
        if verbose:
            print(f"[cfl] h={h:g} dt_max={dt_max:.6g} "
                  f"order={order if order is None else round(order, 4)} ({probes} probes)",
                  flush=True)
    write_cfl_csv(out / "cfl.csv", rows)
    return rows


def tactoid_run(cfg: ExperimentConfig, verbose: bool = False):
    """Disk-domain relaxation of one tactoid; returns (report, snapshots).

    snapshots is the in-memory list of (time, field) pairs mirroring the
    snapshot CSVs, so defect counts can be taken without re-reading files.
    """
    if not cfg.ic.startswith("tactoid-"):
        raise ValueError(f"tactoid experiment needs a tactoid-* initial condition, got {cfg.ic!r}")
    kind = cfg.ic[len("tactoid-"):]
    mesh = build_mesh(cfg.mesh)
    q0 = initial_field(cfg.ic, mesh, cfg.params)
    n_steps = cfg.n_steps if cfg.n_steps is not None else _steps_for(cfg.final_time, cfg.solver.dt)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    snaps: list = []

    def progress(n, total, stats):
        if verbose and (n % max(1, total // 10) == 0):
            print(f"[tactoid-{kind}] step {n}/{total} F={stats.energy.total:.6g} "
                  f"iters={stats.fp_iters}", flush=True)

    report = run_flow(q0, cfg.params, cfg.solver, n_steps,
                      snapshot_times=cfg.snapshot_times,
                      on_snapshot=_snapshot_writer(out, f"snapshot_{kind}", snaps),
                      progress=progress)
    write_energy_csv(out / f"energy_{kind}.csv", report)
    return report, snaps


# ---------------------------------------------------------------------------
# defect detection


def defect_threshold(p: ModelParams) -> float:
    """Half the bulk scalar order parameter: lambda_+ below this marks a defect core."""
    return 0.25 * nematic_amplitude(p)


def count_defects(q: NodalField, threshold: float,
                  merge_radius: float | None = None) -> np.ndarray:
    """Interior nodes that are merged sub-threshold local minima of lambda_+.

    A node qualifies when its lambda_+ is below threshold and no neighbor
    is smaller; qualifying nodes closer than merge_radius (default three
    mean edge lengths) collapse into the one with the smallest lambda_+.
    Returns the surviving node ids, sorted by lambda_+.
    """
    mesh = q.mesh
    if merge_radius is None:
        merge_radius = 3.0 * mesh.mean_edge_length()
    lam = np.hypot(q.coeffs[:, 0], q.coeffs[:, 1])
    neighbors = mesh.node_neighbors()
    interior = set(int(i) for i in mesh.interior_ids)
    candidates = [i for i in range(mesh.n_nodes)
                  if i in interior and lam[i] < threshold
                  and (neighbors[i].size == 0 or lam[i] <= lam[neighbors[i]].min())]
    candidates.sort(key=lambda i: lam[i])
    kept: list[int] = []
    for i in candidates:
        x = mesh.nodes[i]
        if all(np.hypot(*(x - mesh.nodes[j])) > merge_radius for j in kept):
            kept.append(i)
    return np.array(kept, dtype=int)
