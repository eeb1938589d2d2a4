"""
Placing robots for a taut hitch
===============================

Three cables of length 2 m cross to form a triangle. Each cable's free
length is split equally between its two tails, which fixes where the six
robots must hover.
"""

import numpy as np

from polyhitch import CableSpec, Polygon, TensionState, balanced_configuration, configuration_residual

triangle = Polygon([(0.0, -1.0), (-0.9, 0.4), (0.9, 0.4)])
cables = CableSpec.uniform(triangle.n, 2.0)
config = balanced_configuration(triangle, cables)

print("edge lengths:", np.round(triangle.edge_lengths(), 4))
print("tails d:", np.round(config.tails.d, 4), " e:", np.round(config.tails.e, 4))
for name, xy in config.robot_positions().items():
    print(f"  {name}: ({xy[0]: .4f}, {xy[1]: .4f})")

# with equal tension in every cable the crossings are in force balance
_, norm = configuration_residual(config, TensionState.uniform(triangle.n))
print(f"force residual at uniform tension: {norm:.2e}")
