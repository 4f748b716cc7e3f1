"""Locate the sphere-to-torus transition in B/A with a parameter sweep.

``python3 boundary_sweep.py`` takes about half a minute on one core and
writes ``demo_output/sweep.csv``.
"""
# %%
import os

from lvsurgery import SweepSpec, boundary_estimate, run_sweep
from lvsurgery.io import export_sweep_csv

os.makedirs("demo_output", exist_ok=True)

# %% [markdown]
# Nine starts (the shell and torus starts used elsewhere) on an 11-point
# grid of B/A around one, with A held at 3 and C = 3.

# %%
spec = SweepSpec(c_range=(3.0, 3.0, 1), ratio_range=(0.95, 1.05, 11))
result = run_sweep(spec)
export_sweep_csv(result, "demo_output/sweep.csv")

for cell in result.cells:
    runs = " ".join(r.verdict.value[0] for r in cell.runs)
    print(f"B/A = {cell.ratio:.2f}  majority {cell.majority.value:10s} [{runs}]")

# %% [markdown]
# Below one the shells either close on themselves or come to rest on an
# equilibrium; above one the majority becomes toroidal or chaotic.

# %%
print("regime boundary:", boundary_estimate(result))
print("every verdict change:", boundary_estimate(result, by="verdict"))
