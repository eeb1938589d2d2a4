"""Scenario files, the end-to-end pipeline and artifact export.

Scenarios are strict JSON (see ``scenario.schema.json``). Plans export as
JSON, traces and error series as CSV. Floats are written with ``repr`` so
they round-trip exactly and identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .actions import (
    ActionParams,
    PlanningError,
    WaypointPlan,
    compose,
    plan_adjust_cable,
    plan_form,
    plan_move_edge,
    plan_move_vertex,
    robot_ids,
)
from .geometry import Polygon, WorkPlane, validate_polygon
from .hitch import CableSpec, HitchConfiguration, InfeasibleCableError, balanced_configuration
from .metrics import ErrorSeries, VertexStats, stats_to_csv, summary_stats, vertex_error_series
from .simulator import InfeasiblePlanError, SimTrace, simulate

ACTION_TYPES = ("form", "move_vertex", "move_edge", "adjust_cable")


class ScenarioError(ValueError):
    """Invalid scenario file.

    ``pointer`` is a JSON pointer for schema violations, ``line``/``column``
    locate parse errors and ``cable`` names the offending cable.
    """

    def __init__(self, message: str, pointer: str | None = None, line: int | None = None,
                 column: int | None = None, cable: int | None = None):
        super().__init__(message)
        self.pointer = pointer
        self.line = line
        self.column = column
        self.cable = cable


class PipelineError(RuntimeError):
    def __init__(self, message: str, action_index: int | None = None):
        super().__init__(message)
        self.action_index = action_index


def schema() -> dict:
    text = resources.files("polyhitch").joinpath("scenario.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def bundled_scenarios() -> list[str]:
    root = resources.files("polyhitch").joinpath("scenarios")
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def bundled_scenario_path(name: str) -> Path:
    if not name.endswith(".json"):
        name += ".json"
    return Path(str(resources.files("polyhitch").joinpath("scenarios").joinpath(name)))


@dataclass(frozen=True)
class ActionSpec:
    type: str
    k: int | None = None
    target: tuple | None = None
    trajectory: tuple | None = None
    s_k: float | None = None
    s_k1: float | None = None
    standoff: float | None = None

    def to_dict(self) -> dict:
        out = {"type": self.type}
        for f in fields(self)[1:]:
            v = getattr(self, f.name)
            if v is not None:
                out[f.name] = [list(r) for r in v] if f.name == "trajectory" else (list(v) if f.name == "target" else v)
        return out


@dataclass(frozen=True)
class Scenario:
    polygon: tuple
    cable_lengths: tuple
    plane_origin: tuple = (0.0, 0.0, 0.0)
    plane_basis: tuple = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0))
    actions: tuple = ()
    params: ActionParams = field(default_factory=ActionParams)
    marker_noise: float = 0.0
    seed: int = 0
    name: str = ""

    @property
    def n(self) -> int:
        return len(self.polygon)

    def polygon_obj(self) -> Polygon:
        return Polygon(np.array(self.polygon))

    def cables(self) -> CableSpec:
        return CableSpec(np.array(self.cable_lengths))

    def plane(self) -> WorkPlane:
        return WorkPlane(np.array(self.plane_origin), np.array(self.plane_basis))

    def to_dict(self) -> dict:
        """Fully resolved form, with every default written out."""
        return {
            "name": self.name,
            "polygon": [list(p) for p in self.polygon],
            "cable_lengths": list(self.cable_lengths),
            "plane": {"origin": list(self.plane_origin), "basis": [list(b) for b in self.plane_basis]},
            "actions": [a.to_dict() for a in self.actions],
            "params": asdict(self.params),
            "metrics": {"marker_noise": self.marker_noise},
            "seed": self.seed,
        }


def _pointer(path) -> str:
    return "/" + "/".join(str(p) for p in path) if path else ""


def scenario_from_dict(data: dict) -> Scenario:
    """Validate a decoded scenario document and resolve its defaults."""
    validator = jsonschema.Draft202012Validator(schema())
    err = jsonschema.exceptions.best_match(validator.iter_errors(data))
    if err is not None:
        ptr = _pointer(err.absolute_path)
        raise ScenarioError(f"schema violation at {ptr or '/'}: {err.message}", pointer=ptr)

    polygon = tuple(tuple(float(c) for c in p) for p in data["polygon"])
    n = len(polygon)
    report = validate_polygon(polygon)
    if not report.ok:
        raise ScenarioError(f"polygon: {report.describe()}", pointer="/polygon")

    raw_L = data["cable_lengths"]
    if isinstance(raw_L, list):
        if len(raw_L) != n:
            raise ScenarioError(f"expected {n} cable lengths, got {len(raw_L)}", pointer="/cable_lengths")
        lengths = tuple(float(x) for x in raw_L)
    else:
        lengths = (float(raw_L),) * n
    edges = Polygon(np.array(polygon)).edge_lengths()
    for k, (L, l) in enumerate(zip(lengths, edges), start=1):
        if not L > l:
            raise ScenarioError(
                f"cable {k} (L={L}) is not longer than edge {k} (l={l:.6g})",
                pointer="/cable_lengths", cable=k,
            )

    plane = data["plane"]
    if "z" in plane:
        origin, basis = (0.0, 0.0, float(plane["z"])), ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0))
    else:
        origin = tuple(float(c) for c in plane["origin"])
        basis = tuple(tuple(float(c) for c in b) for b in plane["basis"])
        try:
            WorkPlane(np.array(origin), np.array(basis))
        except ValueError as exc:
            raise ScenarioError(str(exc), pointer="/plane/basis") from exc

    actions = []
    for i, a in enumerate(data.get("actions", [])):
        kind = a["type"]
        if kind == "form" and i != 0:
            raise ScenarioError("form must be the first action", pointer=f"/actions/{i}")
        k = a.get("k")
        if k is not None and k > n:
            raise ScenarioError(f"index {k} out of range for {n} vertices", pointer=f"/actions/{i}/k")
        spec = ActionSpec(
            type=kind,
            k=k,
            target=tuple(float(c) for c in a["target"]) if "target" in a else None,
            trajectory=tuple(tuple(float(c) for c in row) for row in a["trajectory"]) if "trajectory" in a else None,
            s_k=float(a["s_k"]) if "s_k" in a else None,
            s_k1=float(a["s_k1"]) if "s_k1" in a else None,
            standoff=float(a["standoff"]) if "standoff" in a else None,
        )
        if spec.trajectory is not None:
            t = [row[0] for row in spec.trajectory]
            if t[0] != 0.0 or any(b <= a_ for a_, b in zip(t, t[1:])):
                raise ScenarioError("trajectory times must start at 0 and increase", pointer=f"/actions/{i}/trajectory")
        actions.append(spec)

    params = ActionParams(**{k: (float(v) if k != "swap_plane" else v) for k, v in data.get("params", {}).items()})
    metrics = data.get("metrics", {})
    return Scenario(
        polygon=polygon,
        cable_lengths=lengths,
        plane_origin=origin,
        plane_basis=basis,
        actions=tuple(actions),
        params=params,
        marker_noise=float(metrics.get("marker_noise", 0.0)),
        seed=int(data.get("seed", 0)),
        name=data.get("name", ""),
    )


def load_scenario(path) -> Scenario:
    """Read and validate a UTF-8 JSON scenario file.

    Raises
    ------
    ScenarioError
        On malformed JSON (with line and column), schema violations (with a
        JSON pointer) or semantic problems such as a cable shorter than its edge.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}",
            line=exc.lineno, column=exc.colno,
        ) from exc
    return scenario_from_dict(data)


@dataclass(eq=False)
class PipelineResult:
    plan: WaypointPlan
    trace: SimTrace
    series: ErrorSeries
    stats: list
    final_config: HitchConfiguration


def _static_plan(config: HitchConfiguration, plane: WorkPlane) -> WaypointPlan:
    start = {rid: plane.embed(p) for rid, p in config.robot_positions().items()}
    return WaypointPlan(robot_ids(config.n), [], start, plane, config.cables, config, config)


def build_plan(scenario: Scenario) -> tuple[WaypointPlan, HitchConfiguration]:
    poly, cables, plane, params = scenario.polygon_obj(), scenario.cables(), scenario.plane(), scenario.params
    config = balanced_configuration(poly, cables)
    plans = []
    for i, a in enumerate(scenario.actions):
        try:
            if a.type == "form":
                kw = {} if a.standoff is None else {"standoff": a.standoff}
                p = plan_form(poly, cables, plane, params, **kw)
                config = p.end_config
            elif a.type == "move_vertex":
                p, config = plan_move_vertex(config, a.k, a.target, params, trajectory=a.trajectory, plane=plane)
            elif a.type == "move_edge":
                p, config = plan_move_edge(config, a.k, a.s_k, a.s_k1, params, plane=plane)
            elif a.type == "adjust_cable":
                p, config = plan_adjust_cable(config, a.k, params, plane=plane)
            else:  # pragma: no cover - schema rejects it
                raise PipelineError(f"unknown action {a.type}", i + 1)
        except (PlanningError, InfeasibleCableError, ValueError) as exc:
            raise PipelineError(f"action {i + 1} ({a.type}): {exc}", i + 1) from exc
        plans.append(p)
    if not plans:
        return _static_plan(config, plane), config
    return compose(plans), config


def run_pipeline(scenario: Scenario) -> PipelineResult:
    """Plan every scripted action, simulate the composed plan and score it.

    Vertex estimates go through the marker-fit pipeline; marker noise, when
    configured, is drawn from a generator seeded with ``scenario.seed``.
    """
    plan, config = build_plan(scenario)
    try:
        trace = simulate(plan)
    except InfeasiblePlanError as exc:
        raise PipelineError(f"simulation: {exc}") from exc
    rng = np.random.default_rng(scenario.seed)
    series = vertex_error_series(trace, via_markers=True, noise_std=scenario.marker_noise, rng=rng)
    stats = summary_stats(series) if len(series.times) else []
    return PipelineResult(plan, trace, series, stats, config)


def plan_to_dict(plan: WaypointPlan) -> dict:
    phases = []
    for ph in plan.phases:
        paths = {}
        for rid in plan.robots:
            paths[rid] = [
                {"t": float(row[0]), "x": float(row[1]), "y": float(row[2]), "z": float(row[3])}
                for row in ph.paths[rid]
            ]
        phases.append({"name": ph.name, "topology": ph.topology, "duration": float(ph.duration), "paths": paths})
    return {
        "robots": list(plan.robots),
        "cable_lengths": [float(x) for x in plan.cables.lengths],
        "start": {rid: [float(c) for c in plan.start_positions[rid]] for rid in plan.robots},
        "phases": phases,
        "warnings": list(plan.warnings),
    }


def write_plan(plan: WaypointPlan, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(plan_to_dict(plan), fh, indent=1)
        fh.write("\n")


def _fmt(x) -> str:
    return "" if x is None or (isinstance(x, float) and np.isnan(x)) else repr(float(x))


def trace_columns(trace: SimTrace) -> list[str]:
    cols = ["t", "phase", "topology", "status", "residual", "iterations", "min_distance"]
    for rid in trace.robots:
        cols += [f"{rid}_x", f"{rid}_y", f"{rid}_z"]
    for k in range(1, trace.n + 1):
        cols += [f"p{k}_x", f"p{k}_y"]
    for k in range(1, trace.n + 1):
        cols += [f"want_p{k}_x", f"want_p{k}_y"]
    cols += [f"T{k}" for k in range(1, trace.n + 1)]
    return cols


def write_trace(trace: SimTrace, path) -> None:
    n = trace.n
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_columns(trace))
        for s in trace.samples:
            row = [_fmt(s.t), s.phase + 1, s.topology, s.status, _fmt(s.residual), s.iterations, _fmt(s.min_distance)]
            row += [_fmt(c) for c in s.positions.reshape(-1)]
            row += [_fmt(c) for c in s.vertices.reshape(-1)] if s.vertices is not None else [""] * (2 * n)
            row += [_fmt(c) for c in s.desired.reshape(-1)] if s.desired is not None else [""] * (2 * n)
            row += [_fmt(c) for c in s.tensions] if s.tensions is not None else [""] * n
            w.writerow(row)


def write_tails(config: HitchConfiguration, path) -> None:
    l = config.polygon.edge_lengths()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cable", "d", "e", "l", "L", "d_minus_e"])
        for k in range(config.n):
            d, e = config.tails.d[k], config.tails.e[k]
            w.writerow([k + 1, repr(float(d)), repr(float(e)), repr(float(l[k])),
                        repr(float(config.cables.lengths[k])), repr(float(d - e))])


def export(obj, path, format: str | None = None) -> Path:
    """Write a plan (JSON), trace or error series (CSV), or stats list (CSV)."""
    path = Path(path)
    fmt = format or path.suffix.lstrip(".")
    if isinstance(obj, WaypointPlan):
        if fmt != "json":
            raise ValueError("plans export as json")
        write_plan(obj, path)
    elif isinstance(obj, SimTrace):
        write_trace(obj, path)
    elif isinstance(obj, ErrorSeries):
        obj.to_csv(path)
    elif isinstance(obj, HitchConfiguration):
        write_tails(obj, path)
    elif isinstance(obj, list) and all(isinstance(s, VertexStats) for s in obj):
        stats_to_csv(obj, path)
    else:
        raise TypeError(f"cannot export {type(obj).__name__}")
    return path


def write_outputs(result: PipelineResult, scenario: Scenario, out_dir, which=("plan", "trace", "metrics")) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "plan" in which:
        written.append(export(result.plan, out / "plan.json"))
    if "trace" in which:
        written.append(export(result.trace, out / "trace.csv"))
    if "metrics" in which:
        written.append(export(result.series, out / "errors.csv"))
        written.append(export(result.stats, out / "stats.csv"))
        written.append(export(result.final_config, out / "final_tails.csv"))
    if "scenario" in which:
        p = out / "scenario.resolved.json"
        p.write_text(json.dumps(scenario.to_dict(), indent=1) + "\n", encoding="utf-8")
        written.append(p)
    return written
