"""
Running a scripted scenario
===========================

Scenario files describe a polygon, cable lengths and a list of actions.
The pipeline plans, simulates and scores them, and writes CSV and JSON
outputs that are identical from run to run.
"""

import tempfile
import warnings
from pathlib import Path

from polyhitch.io import bundled_scenario_path, load_scenario, run_pipeline, write_outputs

warnings.simplefilter("ignore")
scenario = load_scenario(bundled_scenario_path("triangle_exp4.json"))
print(scenario.name)
for a in scenario.actions:
    print("  ", a.to_dict())

result = run_pipeline(scenario)
for s in result.stats:
    print(f"p{s.vertex}: mean error {s.mean:.2e} m over {s.count} samples")

with tempfile.TemporaryDirectory() as tmp:
    for path in write_outputs(result, scenario, tmp, ("plan", "trace", "metrics", "scenario")):
        print(Path(path).name, Path(path).stat().st_size, "bytes")
