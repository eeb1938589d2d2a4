"""
Where do the crossings settle?
==============================

Given only the robot positions and cable lengths, the crossings are found
by a damped Gauss-Newton solve. Starting from a deliberately wrong guess we
recover the polygon the robots were placed for.
"""

import numpy as np

from polyhitch import CableSpec, ForwardProblem, Polygon, TailLengths, robot_positions, solve_forward

square = Polygon([(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0)])
cables = CableSpec.uniform(4, 1.6)
# uneven tails: the robots are not at the balanced spots
tails = TailLengths([0.2, 0.35, 0.3, 0.25], [0.4, 0.25, 0.3, 0.35])
config = robot_positions(square, cables, tails)

rng = np.random.default_rng(0)
guess = square.vertices + rng.uniform(-0.08, 0.08, square.vertices.shape)
solution = solve_forward(ForwardProblem.from_configuration(config, guess=guess))

print(f"converged={solution.converged} after {solution.iterations} iterations, residual {solution.residual_norm:.1e}")
print("recovered vertices:\n", np.round(solution.vertices, 9))
print("relative tensions:", np.round(solution.tensions.tensions, 9))
