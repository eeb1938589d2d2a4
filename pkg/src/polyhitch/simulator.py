"""Quasi-static playback of waypoint plans."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .actions import WaypointPlan
from .solver import (
    DegenerateGeometryError,
    ForwardProblem,
    PhysicallyInvalidError,
    solve_forward,
)


class InfeasiblePlanError(RuntimeError):
    pass


@dataclass(eq=False)
class SimSample:
    t: float
    phase: int
    topology: str
    positions: np.ndarray  # (2n, 3), ordered as plan.robots
    vertices: np.ndarray | None = None  # (n, 2) solved crossings
    tensions: np.ndarray | None = None
    residual: float = float("nan")
    iterations: int = 0
    converged: bool = False
    min_distance: float = float("nan")
    desired: np.ndarray | None = None  # (n, 2) intended crossings

    @property
    def status(self) -> str:
        if self.topology != "interlaced":
            return "disjoint"
        return "ok" if self.converged else "failed"


@dataclass(eq=False)
class SimTrace:
    robots: list
    n: int
    plane: object
    samples: list = field(default_factory=list)
    phase_names: list = field(default_factory=list)
    swap_pairs: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def interlaced(self) -> list[SimSample]:
        return [s for s in self.samples if s.topology == "interlaced"]

    @property
    def failed(self) -> int:
        return sum(1 for s in self.samples if s.status == "failed")


def _pairwise_min(pos: np.ndarray) -> float:
    d = np.linalg.norm(pos[:, None] - pos[None], axis=-1)
    d[np.diag_indices(len(pos))] = np.inf
    return float(d.min())


def _sample_grid(plan: WaypointPlan, rate: float):
    """Yield ``(phase index, local t, global t, is phase end)``; boundaries belong to the ending phase."""
    t0 = 0.0
    for i, ph in enumerate(plan.phases):
        m = max(1, int(np.ceil(ph.duration * rate - 1e-9)))
        local = np.linspace(0.0, ph.duration, m + 1)
        start = 0 if i == 0 else 1
        for j in range(start, m + 1):
            yield i, float(local[j]), t0 + float(local[j]), j == m
        t0 += ph.duration


def simulate(
    plan: WaypointPlan,
    sim_rate: float | None = None,
    topology_hint: str = "auto",
    tolerance: float = 1e-10,
    max_iterations: int = 100,
) -> SimTrace:
    """Step through ``plan`` and solve the crossings at every interlaced sample.

    ``topology_hint`` is ``"auto"`` (read from the phases), ``"interlaced"``
    (solve everywhere) or ``"disjoint"`` (never solve). ``sim_rate`` defaults
    to the densest sampling found in the plan.

    Raises
    ------
    InfeasiblePlanError
        If the first interlaced sample cannot be solved from the plan's
        intended polygon.
    """
    if topology_hint not in ("auto", "interlaced", "disjoint"):
        raise ValueError(f"unknown topology hint {topology_hint!r}")
    if sim_rate is None:
        sim_rate = _plan_rate(plan)
    n = len(plan.cables)
    trace = SimTrace(list(plan.robots), n, plan.plane, phase_names=[ph.name for ph in plan.phases])
    for i, ph in enumerate(plan.phases):
        if ph.pairs:
            trace.swap_pairs[i] = ph.pairs
    L = plan.cables.lengths
    q_idx = [plan.robots.index(f"q{k}") for k in range(1, n + 1)]
    r_idx = [plan.robots.index(f"r{k}") for k in range(1, n + 1)]

    def topology_of(phase, at_end):
        if topology_hint != "auto":
            return topology_hint
        if phase is None:
            return "interlaced" if plan.start_config is not None else "disjoint"
        if phase.topology == "forming":
            return "interlaced" if at_end else "disjoint"
        return phase.topology

    if not plan.phases:
        grid = [(None, 0.0, 0.0, True)]
    else:
        grid = _sample_grid(plan, sim_rate)

    guess = None
    have_solution = False
    for i, tl, tg, at_end in grid:
        phase = None if i is None else plan.phases[i]
        if phase is None:
            pos = np.array([plan.start_positions[r] for r in plan.robots], dtype=float)
            desired = plan.start_config.polygon.vertices.copy() if plan.start_config is not None else None
        else:
            pos = np.array([phase.position(r, tl) for r in plan.robots])
            desired = phase.target_at(tl)
        sample = SimSample(
            t=tg,
            phase=-1 if i is None else i,
            topology=topology_of(phase, at_end),
            positions=pos,
            min_distance=_pairwise_min(pos),
            desired=desired,
        )
        if sample.topology == "interlaced":
            plane_pts = plan.plane.project(pos)
            start_guess = guess if have_solution else desired
            if start_guess is None:
                raise InfeasiblePlanError("no intended polygon to start the solver from")
            sol = None
            try:
                problem = ForwardProblem(
                    plane_pts[q_idx], plane_pts[r_idx], L, start_guess,
                    tolerance=tolerance, max_iterations=max_iterations,
                )
                sol = solve_forward(problem)
            except (DegenerateGeometryError, PhysicallyInvalidError):
                sol = None
            if sol is not None and sol.converged:
                sample.vertices = sol.vertices
                sample.tensions = sol.tensions.tensions
                sample.residual = sol.residual_norm
                sample.iterations = sol.iterations
                sample.converged = True
                guess = sol.vertices
                have_solution = True
            else:
                if sol is not None:
                    sample.residual = sol.residual_norm
                    sample.iterations = sol.iterations
                if not have_solution:
                    raise InfeasiblePlanError(
                        f"no taut equilibrium at t={tg:.6g} s from the intended polygon"
                    )
        trace.samples.append(sample)
    return trace


def _plan_rate(plan: WaypointPlan) -> float:
    rate = 0.0
    for ph in plan.phases:
        if ph.times is not None and len(ph.times) > 1:
            rate = max(rate, (len(ph.times) - 1) / ph.duration)
    return rate or 50.0


@dataclass(frozen=True)
class ClearanceReport:
    violations: tuple  # (t, robot_a, robot_b, distance)
    global_min: float
    global_min_at: tuple  # (t, robot_a, robot_b)
    swap_pair_separation: dict  # pair -> (min, max) 3-D separation during swaps
    swap_vertical_separation: dict  # pair -> (min, max) separation along the plane normal

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def swap_vertical_min(self) -> float:
        vals = [lo for lo, _ in self.swap_vertical_separation.values()]
        return min(vals) if vals else float("nan")


def clearance_report(trace: SimTrace, min_clearance: float = 0.15) -> ClearanceReport:
    """Every robot pair closer than ``min_clearance`` at any sample, plus swap-pair statistics."""
    robots = trace.robots
    R = len(robots)
    iu = np.triu_indices(R, 1)
    violations = []
    gmin, gat = np.inf, (float("nan"), "", "")
    for s in trace.samples:
        d = np.linalg.norm(s.positions[:, None] - s.positions[None], axis=-1)[iu]
        for idx in np.flatnonzero(d < min_clearance):
            violations.append((s.t, robots[iu[0][idx]], robots[iu[1][idx]], float(d[idx])))
        j = int(np.argmin(d))
        if d[j] < gmin:
            gmin, gat = float(d[j]), (s.t, robots[iu[0][j]], robots[iu[1][j]])

    normal = trace.plane.normal
    sep, vert = {}, {}
    for s in trace.samples:
        pairs = trace.swap_pairs.get(s.phase)
        if not pairs:
            continue
        for a, b in pairs:
            diff = s.positions[robots.index(a)] - s.positions[robots.index(b)]
            dist, v = float(np.linalg.norm(diff)), abs(float(diff @ normal))
            lo, hi = sep.get((a, b), (np.inf, -np.inf))
            sep[(a, b)] = (min(lo, dist), max(hi, dist))
            lo, hi = vert.get((a, b), (np.inf, -np.inf))
            vert[(a, b)] = (min(lo, v), max(hi, v))
    return ClearanceReport(tuple(violations), float(gmin), gat, sep, vert)
