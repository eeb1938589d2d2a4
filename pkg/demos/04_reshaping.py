"""
Reshaping a formed hitch
========================

A vertex is moved along a timed path, an edge is slid outward, and the
affected cables are rebalanced. Each action moves only the robots it needs.
"""

import warnings

import numpy as np

from polyhitch import (
    CableSpec,
    Polygon,
    WorkPlane,
    balanced_configuration,
    compose,
    plan_adjust_cable,
    plan_move_edge,
    plan_move_vertex,
    simulate,
)

warnings.simplefilter("ignore")
plane = WorkPlane.horizontal(0.5)
triangle = Polygon([(0.0, -1.0), (-0.4, 0.5), (0.4, 0.5)])
start = balanced_configuration(triangle, CableSpec.uniform(3, 2.0))

# hold 5 s, then raise p1 by 25 cm at 5 cm/s
mv, cfg = plan_move_vertex(start, 1, trajectory=[(0, 0, -1.0), (5, 0, -1.0), (10, 0, -0.75)], plane=plane)
print("move vertex 1 moved:", mv.moved_robots())
print("  tails after move  d-e:", np.round(cfg.tails.d - cfg.tails.e, 4))

ed, cfg = plan_move_edge(cfg, 2, 0.05, 0.05, plane=plane)
print("move edge 2 moved:", ed.moved_robots())

plans = [mv, ed]
for k in (1, 2, 3):
    adj, cfg = plan_adjust_cable(cfg, k, plane=plane)
    print(f"adjust cable {k} moved:", adj.moved_robots())
    plans.append(adj)
print("  tails after adjust d-e:", np.round(cfg.tails.d - cfg.tails.e, 12))

trace = simulate(compose(plans))
worst = max(np.max(np.linalg.norm(s.vertices - s.desired, axis=1)) for s in trace.interlaced())
print(f"{len(trace.samples)} samples, worst crossing error {worst:.2e} m")
print("final polygon:\n", np.round(trace.samples[-1].vertices, 6))
