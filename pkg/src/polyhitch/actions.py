"""Waypoint plans for forming a hitch and reshaping it.

A plan is a list of synchronized phases. Within a phase every moving robot
has a sampled path of ``(t, x, y, z)`` rows with ``t`` relative to the phase
start. A robot that holds still has a single row at ``t = 0``.

Robot ids are ``"q<k>"`` and ``"r<k>"`` for the two ends of cable ``k``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import EPS_GEOM, GeometryError, Polygon, WorkPlane, cyclic_index
from .hitch import (
    DEFAULT_MARGIN,
    CableSpec,
    HitchConfiguration,
    TailLengths,
    balanced_configuration,
    robot_positions,
)

SEAM_TOL = 1e-9
MOVE_TOL = 1e-12


class PlanningError(RuntimeError):
    pass


class InvalidTargetError(PlanningError):
    pass


class TailExhaustedError(PlanningError):
    def __init__(self, message: str, cable: int, tail: float):
        super().__init__(message)
        self.cable = cable
        self.tail = tail


class DegenerateSwapError(PlanningError):
    pass


class CompositionError(PlanningError):
    def __init__(self, message: str, robot: str, gap: float):
        super().__init__(message)
        self.robot = robot
        self.gap = gap


class ClearanceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ActionParams:
    phase_duration: float = 5.0
    sample_rate: float = 50.0
    swap_plane: str = "vertical"
    min_clearance: float = 0.15
    margin_min: float = DEFAULT_MARGIN

    def __post_init__(self):
        for name in ("phase_duration", "sample_rate", "min_clearance", "margin_min"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.swap_plane not in ("vertical", "horizontal"):
            raise ValueError("swap_plane must be 'vertical' or 'horizontal'")

    def sample_times(self, duration: float | None = None) -> np.ndarray:
        duration = self.phase_duration if duration is None else duration
        m = max(1, int(np.ceil(duration * self.sample_rate - 1e-9)))
        return np.linspace(0.0, duration, m + 1)


def robot_ids(n: int) -> list[str]:
    ids = []
    for k in range(1, n + 1):
        ids += [f"q{k}", f"r{k}"]
    return ids


@dataclass(eq=False)
class Phase:
    """One synchronized phase.

    ``topology`` is ``"disjoint"`` (cables not yet interlaced), ``"forming"``
    (interlaced once the phase completes) or ``"interlaced"``. ``targets``
    holds the intended polygon vertices at ``times`` when the hitch exists.
    """

    name: str
    duration: float
    paths: dict
    topology: str = "interlaced"
    times: np.ndarray | None = None
    targets: np.ndarray | None = None
    pairs: tuple = ()

    def position(self, robot: str, t) -> np.ndarray:
        path = self.paths[robot]
        if len(path) == 1:
            return np.broadcast_to(path[0, 1:], np.shape(t) + (3,)).copy()
        return np.stack([np.interp(t, path[:, 0], path[:, c]) for c in (1, 2, 3)], axis=-1)

    def target_at(self, t) -> np.ndarray | None:
        if self.targets is None:
            return None
        if len(self.times) == 1:
            return self.targets[0].copy()
        out = np.empty(self.targets.shape[1:])
        for i in range(out.shape[0]):
            for c in range(2):
                out[i, c] = np.interp(t, self.times, self.targets[:, i, c])
        return out

    def is_hold(self, robot: str) -> bool:
        return len(self.paths[robot]) == 1


@dataclass(eq=False)
class WaypointPlan:
    robots: list
    phases: list
    start_positions: dict
    plane: WorkPlane
    cables: CableSpec
    start_config: HitchConfiguration | None = None
    end_config: HitchConfiguration | None = None
    warnings: list = field(default_factory=list)

    @property
    def duration(self) -> float:
        return float(sum(ph.duration for ph in self.phases))

    def end_positions(self) -> dict:
        pos = {k: np.asarray(v, float).copy() for k, v in self.start_positions.items()}
        for ph in self.phases:
            for robot, path in ph.paths.items():
                pos[robot] = path[-1, 1:].copy()
        return pos

    def phase_start_positions(self, i: int) -> dict:
        return {robot: self.phases[i].paths[robot][0, 1:].copy() for robot in self.robots}

    def moved_robots(self, tol: float = MOVE_TOL) -> list[str]:
        """Robots whose last waypoint differs from their first one."""
        start, end = self.start_positions, self.end_positions()
        return [r for r in self.robots if np.linalg.norm(end[r] - start[r]) > tol]

    def path_length(self, robot: str) -> float:
        total = 0.0
        for ph in self.phases:
            p = ph.paths[robot][:, 1:]
            total += float(np.linalg.norm(np.diff(p, axis=0), axis=1).sum())
        return total


def _hold(pos) -> np.ndarray:
    return np.concatenate([[0.0], np.asarray(pos, float)])[None, :]


def _path(times, points) -> np.ndarray:
    return np.column_stack([times, points])


def _min_pair_distance(phase: Phase, robots) -> tuple[float, tuple]:
    times = phase.times if phase.times is not None else np.array([0.0, phase.duration])
    pos = np.stack([phase.position(r, times) for r in robots], axis=1)  # (m, R, 3)
    diff = pos[:, :, None, :] - pos[:, None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    R = len(robots)
    dist[:, np.arange(R), np.arange(R)] = np.inf
    flat = int(np.argmin(dist))
    ti, a, b = np.unravel_index(flat, dist.shape)
    return float(dist[ti, a, b]), (robots[a], robots[b])


def swap_trajectory(a, b, params: ActionParams, up=None, times=None, plane: WorkPlane | None = None):
    """Two antipodal semicircles exchanging the positions ``a`` and ``b``.

    The circle is centred at the midpoint with radius ``|a - b| / 2``. Robot
    ``a`` leaves towards ``up``; calling again with ``-up`` continues the
    rotation in the same sense. ``up`` defaults to the work-plane normal for
    ``swap_plane="vertical"`` and to the in-plane perpendicular otherwise.

    Returns ``(path_a, path_b)`` as ``(m, 4)`` arrays of ``(t, x, y, z)``.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    sep = np.linalg.norm(a - b)
    if sep <= EPS_GEOM:
        raise DegenerateSwapError("swap endpoints coincide")
    center = (a + b) / 2
    rho = sep / 2
    e1 = (a - center) / rho
    normal = (plane or WorkPlane()).normal
    if up is None:
        up = normal if params.swap_plane == "vertical" else np.cross(normal, e1)
    up = np.asarray(up, float)
    e2 = up - (up @ e1) * e1
    n2 = np.linalg.norm(e2)
    if n2 <= EPS_GEOM:
        raise DegenerateSwapError("swap direction is parallel to the swap axis")
    e2 = e2 / n2
    if times is None:
        times = params.sample_times()
    theta = np.pi * times / times[-1]
    offset = rho * (np.cos(theta)[:, None] * e1 + np.sin(theta)[:, None] * e2)
    path_a = _path(times, center + offset)
    path_b = _path(times, center - offset)
    # pin the exact endpoints
    path_a[-1, 1:] = b
    path_b[-1, 1:] = a
    return path_a, path_b


def default_start(poly: Polygon, config: HitchConfiguration, standoff: float) -> np.ndarray:
    """Disjoint start layout: each cable's balanced endpoints shifted outward from its edge."""
    u = poly.edge_directions()
    outward = np.column_stack([-u[:, 1], u[:, 0]])
    q = config.q + standoff * outward
    r = config.r + standoff * outward
    return q, r


def plan_form(
    poly: Polygon,
    cables: CableSpec,
    plane: WorkPlane,
    params: ActionParams = ActionParams(),
    start: dict | None = None,
    standoff: float = 0.5,
) -> WaypointPlan:
    """Three-phase plan interlacing ``n`` free cables into the balanced hitch.

    Phase 1 moves all robots in straight lines to the balanced endpoints.
    Phases 2 and 3 run the swaps of every pair ``(q_k, r_{k-1})`` in parallel;
    the second swap continues the rotation of the first, so each pair makes a
    full turn about its midpoint and ends where it started.

    ``start`` maps robot ids to 3-D start positions. Without it the robots
    start ``standoff`` meters outside their edges.
    """
    config = balanced_configuration(poly, cables)
    n = poly.n
    robots = robot_ids(n)
    goal2 = config.robot_positions()
    goal = {rid: plane.embed(p) for rid, p in goal2.items()}
    if start is None:
        q0, r0 = default_start(poly, config, standoff)
        start = {}
        for k in range(n):
            start[f"q{k + 1}"] = plane.embed(q0[k])
            start[f"r{k + 1}"] = plane.embed(r0[k])
    else:
        missing = set(robots) - set(start)
        if missing:
            raise PlanningError(f"missing start positions for {sorted(missing)}")
        start = {rid: np.asarray(start[rid], float) for rid in robots}

    times = params.sample_times()
    s = (times / times[-1])[:, None]
    phase1 = Phase(
        "form:approach",
        params.phase_duration,
        {rid: _path(times, start[rid] + s * (goal[rid] - start[rid])) for rid in robots},
        topology="disjoint",
        times=times,
    )

    pairs = tuple((f"q{k}", f"r{cyclic_index(k - 1, n)}") for k in range(1, n + 1))
    swaps2, swaps3 = {}, {}
    for qa, rb in pairs:
        a, b = goal[qa], goal[rb]
        sep = b - a
        if params.swap_plane == "vertical":
            up = plane.normal
        else:
            up = np.cross(plane.normal, sep / np.linalg.norm(sep))
        pa, pb = swap_trajectory(a, b, params, up=up, times=times, plane=plane)
        swaps2[qa], swaps2[rb] = pa, pb
        pa, pb = swap_trajectory(b, a, params, up=-up, times=times, plane=plane)
        swaps3[qa], swaps3[rb] = pa, pb
        swaps3[qa][-1, 1:] = a
        swaps3[rb][-1, 1:] = b

    target = np.broadcast_to(poly.vertices, (len(times),) + poly.vertices.shape).copy()
    phase2 = Phase("form:swap1", params.phase_duration, swaps2, "disjoint", times, None, pairs)
    phase3 = Phase("form:swap2", params.phase_duration, swaps3, "forming", times, target, pairs)

    plan = WaypointPlan(robots, [phase1, phase2, phase3], start, plane, cables, None, config)
    _check_clearance(plan, params)
    return plan


def _check_clearance(plan: WaypointPlan, params: ActionParams) -> None:
    for ph in plan.phases:
        d, pair = _min_pair_distance(ph, plan.robots)
        if d < params.min_clearance:
            msg = (
                f"{ph.name}: robots {pair[0]} and {pair[1]} come within {d:.4f} m "
                f"(min clearance {params.min_clearance} m)"
            )
            plan.warnings.append(msg)
            warnings.warn(msg, ClearanceWarning, stacklevel=3)


def _action_plan(
    name: str,
    config: HitchConfiguration,
    new_config: HitchConfiguration,
    moving: list[str],
    times: np.ndarray,
    snapshots: list[HitchConfiguration],
    plane: WorkPlane,
) -> WaypointPlan:
    robots = robot_ids(config.n)
    before = {rid: plane.embed(p) for rid, p in config.robot_positions().items()}
    paths = {}
    for rid in robots:
        if rid in moving:
            pts = np.array([plane.embed(c.robot_positions()[rid]) for c in snapshots])
            paths[rid] = _path(times, pts)
        else:
            paths[rid] = _hold(before[rid])
    targets = np.array([c.polygon.vertices for c in snapshots])
    phase = Phase(name, float(times[-1]), paths, "interlaced", times, targets)
    return WaypointPlan(robots, [phase], before, plane, config.cables, config, new_config)


def _keep_holders(old: HitchConfiguration, new: HitchConfiguration, moving: list[str]) -> HitchConfiguration:
    """Copy non-moving robots verbatim so holds are bitwise exact."""
    q, r = new.q.copy(), new.r.copy()
    for k in range(old.n):
        if f"q{k + 1}" not in moving:
            q[k] = old.q[k]
        if f"r{k + 1}" not in moving:
            r[k] = old.r[k]
    return HitchConfiguration(new.polygon, new.cables, q, r, new.tails)


def _check_tails(tails: TailLengths, cables_touched, margin: float) -> None:
    for k in cables_touched:
        for label, val in (("d", tails.d[k - 1]), ("e", tails.e[k - 1])):
            if not val > margin:
                raise TailExhaustedError(
                    f"cable {k}: tail {label} would shrink to {val:.4g} m "
                    f"(margin {margin} m); adjust the cable first",
                    k,
                    float(val),
                )


def _replace_raw(poly: Polygon, k: int, point) -> np.ndarray:
    pts = poly.vertices.copy()
    pts[cyclic_index(k, poly.n) - 1] = point
    return pts


def plan_move_vertex(
    config: HitchConfiguration,
    k: int,
    target=None,
    params: ActionParams = ActionParams(),
    trajectory=None,
    plane: WorkPlane | None = None,
) -> tuple[WaypointPlan, HitchConfiguration]:
    """Move vertex ``p_k`` while every other vertex stays put.

    Either ``target`` (straight line over one phase) or ``trajectory`` (rows
    of ``(t, x, y)`` starting at ``t = 0``, linearly interpolated) gives the
    vertex path. Tails ``d_{k-1}`` and ``e_k`` are held; ``e_{k-1}`` and
    ``d_k`` absorb the edge-length changes. Only ``q_k``, ``r_{k-1}``,
    ``q_{k+1}`` and ``r_{k-2}`` move.

    Raises
    ------
    InvalidTargetError
        If some point of the vertex path breaks convexity or orientation.
    TailExhaustedError
        If a tail would drop to ``params.margin_min`` or below.
    """
    plane = plane or WorkPlane()
    n = config.n
    k = cyclic_index(k, n)
    p0 = config.polygon.vertex(k)
    if (target is None) == (trajectory is None):
        raise ValueError("give exactly one of target or trajectory")
    if trajectory is None:
        target = np.asarray(target, float)
        times = params.sample_times()
        s = times / times[-1]
        vpath = p0 + s[:, None] * (target - p0)
    else:
        traj = np.asarray(trajectory, float)
        if traj.ndim != 2 or traj.shape[1] != 3 or traj[0, 0] != 0.0 or np.any(np.diff(traj[:, 0]) <= 0):
            raise ValueError("trajectory must be rows (t, x, y) with t strictly increasing from 0")
        if np.linalg.norm(traj[0, 1:] - p0) > SEAM_TOL:
            raise InvalidTargetError(f"trajectory starts at {traj[0, 1:]}, vertex {k} is at {p0}")
        times = params.sample_times(float(traj[-1, 0]))
        times = np.union1d(times, traj[:, 0])
        vpath = np.column_stack([np.interp(times, traj[:, 0], traj[:, c]) for c in (1, 2)])
        vpath[0] = p0

    moving = [f"q{k}", f"r{cyclic_index(k - 1, n)}", f"q{cyclic_index(k + 1, n)}", f"r{cyclic_index(k - 2, n)}"]
    snapshots = []
    for pt in vpath:
        if np.array_equal(pt, p0):
            snapshots.append(config)
            continue
        pts = _replace_raw(config.polygon, k, pt)
        try:
            poly = Polygon(pts)
        except GeometryError as exc:
            raise InvalidTargetError(f"vertex {k} at {pt}: {exc}") from exc
        L = config.cables.lengths
        l = poly.edge_lengths()
        km1 = cyclic_index(k - 1, n)
        d = config.tails.d.copy()
        e = config.tails.e.copy()
        e[km1 - 1] = L[km1 - 1] - l[km1 - 1] - d[km1 - 1]
        d[k - 1] = L[k - 1] - l[k - 1] - e[k - 1]
        tails = TailLengths(d, e)
        _check_tails(tails, (km1, k), params.margin_min)
        snapshots.append(_keep_holders(config, robot_positions(poly, config.cables, tails), moving))

    plan = _action_plan(f"move_vertex:{k}", config, snapshots[-1], moving, times, snapshots, plane)
    return plan, snapshots[-1]


def plan_move_edge(
    config: HitchConfiguration,
    k: int,
    s_k: float,
    s_k1: float,
    params: ActionParams = ActionParams(),
    plane: WorkPlane | None = None,
) -> tuple[WaypointPlan, HitchConfiguration]:
    """Slide edge ``k`` by moving its end vertices along the neighbouring cable lines.

    ``p_k`` moves by ``s_k * u_{k-1}`` and ``p_{k+1}`` by ``-s_k1 * u_{k+1}``,
    so positive slides push the edge away from its neighbours' far ends. The
    neighbouring cables absorb the change in ``e_{k-1}`` and ``d_{k+1}``; a
    change in the edge's own length is split evenly between ``d_k`` and ``e_k``.
    Only ``q_k``, ``r_k``, ``r_{k-1}`` and ``q_{k+1}`` move.
    """
    plane = plane or WorkPlane()
    n = config.n
    k = cyclic_index(k, n)
    km1, kp1 = cyclic_index(k - 1, n), cyclic_index(k + 1, n)
    poly0 = config.polygon
    u_prev = poly0.edge_direction(k - 1)
    u_next = poly0.edge_direction(k + 1)
    pk, pk1 = poly0.vertex(k), poly0.vertex(k + 1)
    L = config.cables.lengths
    l0 = poly0.edge_lengths()
    for cable, s in ((km1, s_k), (kp1, s_k1)):
        if not l0[cable - 1] + s > EPS_GEOM:
            raise InvalidTargetError(f"slide {s} collapses edge {cable}")

    times = params.sample_times()
    moving = [f"q{k}", f"r{k}", f"r{km1}", f"q{kp1}"]
    snapshots = []
    for lam in times / times[-1]:
        if lam == 0.0 or (s_k == 0.0 and s_k1 == 0.0):
            snapshots.append(config)
            continue
        pts = poly0.vertices.copy()
        pts[k - 1] = pk + lam * s_k * u_prev
        pts[kp1 - 1] = pk1 - lam * s_k1 * u_next
        try:
            poly = Polygon(pts)
        except GeometryError as exc:
            raise InvalidTargetError(f"edge {k} slide: {exc}") from exc
        l = poly.edge_lengths()
        d = config.tails.d.copy()
        e = config.tails.e.copy()
        e[km1 - 1] = L[km1 - 1] - l[km1 - 1] - d[km1 - 1]
        d[kp1 - 1] = L[kp1 - 1] - l[kp1 - 1] - e[kp1 - 1]
        d[k - 1] = config.tails.d[k - 1] - (l[k - 1] - l0[k - 1]) / 2
        e[k - 1] = L[k - 1] - l[k - 1] - d[k - 1]
        tails = TailLengths(d, e)
        _check_tails(tails, (km1, k, kp1), params.margin_min)
        snapshots.append(_keep_holders(config, robot_positions(poly, config.cables, tails), moving))

    plan = _action_plan(f"move_edge:{k}", config, snapshots[-1], moving, times, snapshots, plane)
    return plan, snapshots[-1]


def plan_adjust_cable(
    config: HitchConfiguration,
    k: int,
    params: ActionParams = ActionParams(),
    plane: WorkPlane | None = None,
) -> tuple[WaypointPlan, HitchConfiguration]:
    """Rebalance cable ``k`` so that ``d_k = e_k``; only ``q_k`` and ``r_k`` move."""
    plane = plane or WorkPlane()
    n = config.n
    k = cyclic_index(k, n)
    d0, e0 = config.tails.d[k - 1], config.tails.e[k - 1]
    L = config.cables.lengths[k - 1]
    l = config.polygon.edge_length(k)
    half = (L - l) / 2
    times = params.sample_times()
    moving = [f"q{k}", f"r{k}"]
    snapshots = []
    for lam in times / times[-1]:
        if lam == 0.0 or d0 == e0:
            snapshots.append(config)
            continue
        if lam == 1.0:
            d = half
        else:
            d = d0 + lam * (half - d0)
        e = L - l - d
        tails = config.tails.replace(k, d=d, e=e)
        snapshots.append(_keep_holders(config, robot_positions(config.polygon, config.cables, tails), moving))
    plan = _action_plan(f"adjust_cable:{k}", config, snapshots[-1], moving, times, snapshots, plane)
    return plan, snapshots[-1]


def hold_plan(config: HitchConfiguration, duration: float, plane: WorkPlane | None = None) -> WaypointPlan:
    """Single phase in which every robot holds its position."""
    plane = plane or WorkPlane()
    times = np.array([0.0, duration])
    return _action_plan("hold", config, config, [], times, [config, config], plane)


def compose(plans: list[WaypointPlan]) -> WaypointPlan:
    """Concatenate plans; each must start where the previous one ended."""
    if not plans:
        raise PlanningError("nothing to compose")
    first = plans[0]
    phases = list(first.phases)
    warns = list(first.warnings)
    for prev, nxt in zip(plans, plans[1:]):
        if list(nxt.robots) != list(prev.robots):
            raise CompositionError("plans drive different robot sets", "", float("nan"))
        end = prev.end_positions()
        worst, worst_gap = "", 0.0
        for rid in prev.robots:
            gap = float(np.linalg.norm(np.asarray(nxt.start_positions[rid]) - end[rid]))
            if gap > worst_gap:
                worst, worst_gap = rid, gap
        if worst_gap > SEAM_TOL:
            raise CompositionError(
                f"seam gap of {worst_gap:.6g} m at robot {worst}", worst, worst_gap
            )
        phases += nxt.phases
        warns += nxt.warnings
    return replace(
        first,
        phases=phases,
        end_config=plans[-1].end_config,
        warnings=warns,
    )
