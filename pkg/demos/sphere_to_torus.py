"""Spherical and toroidal nesting in the two-predator, one-prey system.

Run from any directory: ``python3 sphere_to_torus.py``.  Trajectory CSVs and
SVG projections are written to ``./demo_output``.
"""
# %%
import os

import numpy as np

from lvsurgery import IntegratorConfig, State, SystemParams, classify, fixed_points, integrate
from lvsurgery.io import export_projection_svg, export_trajectory_csv

OUT = "demo_output"
os.makedirs(OUT, exist_ok=True)
cfg = IntegratorConfig(t_end=500.0)

# %% [markdown]
# With A = B the interior equilibria fill a segment X = 1, Y + A Z = 1 + C.
# The point (1, 1, 1) sits on it, and orbits started nearby wrap around
# closed shells.

# %%
sphere = SystemParams(3.0, 3.0, 3.0)
for fp in fixed_points(sphere):
    print(f"{fp.state.xyz!s:40s} {fp.classification.value:12s} {fp.note}")

# %%
shells = []
for ic in [(1, 1.59, 0.81), (1, 1.3, 0.89), (1, 1.18, 0.95), (1, 1.08, 0.98)]:
    tr = integrate(sphere, State(*ic), cfg)
    rep = classify(tr)
    r = np.linalg.norm(tr.y - (1.0, 1.0, 1.0), axis=1)
    shells.append(tr)
    print(f"ic={ic}: {rep.verdict.value:10s} radius {r.min():.3f}..{r.max():.3f}")
    export_trajectory_csv(tr, os.path.join(OUT, f"sphere_{ic[1]:g}.csv"))

# %% [markdown]
# Lowering A slightly below B puts B/A just above one.  The same region
# now holds nested tori: the orbits drill through the slow segment and
# keep revolving around it.

# %%
torus = SystemParams(2.9851, 3.0, 3.0)
for ic in [(1.1075, 1, 1), (1, 1, 0.95), (1, 1, 0.9), (1.45, 1, 1.45)]:
    tr = integrate(torus, State(*ic), cfg)
    rep = classify(tr)
    print(f"ic={ic}: {rep.verdict.value:10s} winding {rep.winding_count:4d} "
          f"section gap {rep.section_gap_ratio:.3f} recurrence {rep.recurrence_distance:.2e}")
    export_projection_svg(tr, os.path.join(OUT, f"torus_{ic[0]:g}_{ic[2]:g}.svg"), axes="XZ")

# %% [markdown]
# The outermost start (1.45, 1, 1.45) never closes its section loop and
# does not return to itself: it is the fractal shell around the tori.
