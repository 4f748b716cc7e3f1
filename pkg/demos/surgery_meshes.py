"""Twisted 2-dimensional 0-surgery on a sphere and on nested spheres.

``python3 surgery_meshes.py`` writes OBJ files to ``demo_output/``.
"""
# %%
import os

import numpy as np

from lvsurgery import MorphParams, TwistSpec, euler_characteristic, limit_circle, morph_surface, solid_layers
from lvsurgery.surgery import count_intersections, write_obj

OUT = "demo_output"
os.makedirs(OUT, exist_ok=True)

# %% [markdown]
# The morph parameter s pulls two polar discs inward.  They touch at
# s = 1/2 and are replaced by a twisted cylinder afterwards.

# %%
for s in (0.0, 0.25, 0.45, 0.55, 0.75, 1.0):
    m = morph_surface(MorphParams(s=s))
    print(f"s = {s:.2f}: V={m.n_vertices:5d} F={m.n_faces:5d} chi={euler_characteristic(m)}")
    write_obj(m, OUT)

# %% [markdown]
# Doing the same on every concentric sphere of the ball gives nested tori.
# The centre point turns into a circle.

# %%
mp = MorphParams(s=1.0, twist=TwistSpec())
layers = solid_layers(mp, [1.0, 0.75, 0.5, 0.25])
for outer, inner in zip(layers, layers[1:]):
    print(f"r={outer.layer_r} vs r={inner.layer_r}: {count_intersections(outer, inner)} crossings")
core = limit_circle(mp)
print("core circle radius:", np.hypot(*core[0, :2]).round(4))
for m in layers:
    write_obj(m, OUT)
