"""End-to-end acceptance checks, one test per criterion.

Each test is timed without the session cache so runtime bounds are honest.
"""
import math
import time

import numpy as np
import pytest

from lvsurgery import IntegratorConfig, State, SystemParams, classify, integrate
from lvsurgery.dynamics import rhs
from lvsurgery.surgery import (
    MorphParams,
    count_intersections,
    euler_characteristic,
    is_closed_manifold,
    limit_circle,
    morph_surface,
    points_inside,
    solid_layers,
)
from lvsurgery.sweep import SweepSpec, boundary_estimate, run_sweep
from lvsurgery.topology import Verdict

from conftest import FRACTAL_IC, SPHERE, SPHERE_ICS, TORUS, TORUS_ICS


def _directional_bands(y, center, n_polar=12):
    """Per direction cell: (min, max) distance of the samples from ``center``."""
    v = y - center
    r = np.linalg.norm(v, axis=1)
    u = v / r[:, None]
    i = np.minimum((np.arccos(np.clip(u[:, 2], -1, 1)) / np.pi * n_polar).astype(int), n_polar - 1)
    j = ((np.arctan2(u[:, 1], u[:, 0]) + np.pi) / (2 * np.pi) * 2 * n_polar).astype(int) % (2 * n_polar)
    cell = i * 2 * n_polar + j
    lo = np.full(2 * n_polar**2, np.nan)
    hi = np.full(2 * n_polar**2, np.nan)
    counts = np.bincount(cell, minlength=len(lo))
    order = np.argsort(cell, kind="stable")
    starts = np.r_[0, np.cumsum(counts)[:-1]]
    for c in np.flatnonzero(counts > 5):
        rr = r[order[starts[c]:starts[c] + counts[c]]]
        lo[c], hi[c] = rr.min(), rr.max()
    return lo, hi


@pytest.mark.criterion(1, "fixed-point oracle")
def test_criterion_1_fixed_point(record_property):
    t0 = time.perf_counter()
    assert rhs(SystemParams(3, 3, 3), State(1, 1, 1)) == (0.0, 0.0, 0.0)
    tr = integrate(SystemParams(3, 3, 3), State(1, 1, 1), IntegratorConfig(t_end=100))
    drift = float(np.max(np.abs(tr.y - 1.0)))
    dt = time.perf_counter() - t0
    record_property("detail", f"max drift {drift:.1e}, {dt:.2f} s")
    assert drift <= 1e-6
    assert dt < 1.0


@pytest.mark.criterion(2, "spherical regime reproduction")
def test_criterion_2_spherical_nesting(record_property):
    t0 = time.perf_counter()
    trs = [integrate(SPHERE, State(*ic), IntegratorConfig(t_end=500)) for ic in SPHERE_ICS]
    verdicts = [classify(tr).verdict for tr in trs]
    dt = time.perf_counter() - t0
    # shells are ordered outermost first; the centre is the innermost orbit's centroid
    center = trs[-1].y.mean(axis=0)
    bands = [_directional_bands(tr.y, center) for tr in trs]
    gaps = []
    for (lo_out, _), (_, hi_in) in zip(bands, bands[1:]):
        both = ~np.isnan(lo_out) & ~np.isnan(hi_in)
        assert both.sum() >= 50
        gaps.append(float(np.min(lo_out[both] - hi_in[both])))
    radial = [np.linalg.norm(tr.y - center, axis=1) for tr in trs]
    lows, highs = [r.min() for r in radial], [r.max() for r in radial]
    record_property("detail", f"verdicts {[v.value for v in verdicts]}, min gaps {np.round(gaps, 3).tolist()}, {dt:.1f} s")
    assert verdicts == [Verdict.SPHERICAL] * 4
    assert min(gaps) > 0
    assert all(a > b for a, b in zip(lows, lows[1:])) and all(a > b for a, b in zip(highs, highs[1:]))
    assert dt < 30.0


@pytest.mark.criterion(3, "toroidal regime reproduction")
def test_criterion_3_toroidal(record_property):
    t0 = time.perf_counter()
    reps = [classify(integrate(TORUS, State(*ic), IntegratorConfig(t_end=500))) for ic in TORUS_ICS]
    dt = time.perf_counter() - t0
    record_property("detail", f"windings {[r.winding_count for r in reps]}, "
                              f"gaps {[round(r.section_gap_ratio, 3) for r in reps]}, {dt:.1f} s")
    for r in reps:
        assert r.verdict is Verdict.TOROIDAL
        assert r.winding_count >= 2 and r.section_gap_ratio <= 0.10
    assert dt < 30.0


@pytest.mark.criterion(4, "fractal-torus shell")
def test_criterion_4_fractal_shell(record_property):
    tr = integrate(TORUS, State(*FRACTAL_IC), IntegratorConfig(t_end=500))
    rep = classify(tr)
    tori = [classify(integrate(TORUS, State(*ic), IntegratorConfig(t_end=500))).recurrence_distance for ic in TORUS_ICS]
    ratio = rep.recurrence_distance / float(np.median(tori))
    record_property("detail", f"{rep.verdict.value}, max coordinate {tr.y.max():.3f}, recurrence ratio {ratio:.1f}")
    assert np.all(np.isfinite(tr.y)) and tr.y.max() < 10.0 and tr.t[-1] == pytest.approx(500.0)
    assert rep.verdict is Verdict.CHAOTIC or (rep.verdict is Verdict.TOROIDAL and ratio >= 10.0)
    assert ratio >= 10.0


@pytest.mark.criterion(5, "boundary bracketing")
def test_criterion_5_boundary(record_property):
    t0 = time.perf_counter()
    res = run_sweep(SweepSpec(c_range=(3.0, 3.0, 1), ratio_range=(0.95, 1.05, 11)))
    dt = time.perf_counter() - t0
    bounds = boundary_estimate(res)
    majority = [c.majority.value for c in res.cells]
    record_property("detail", f"boundary {bounds}, {dt:.0f} s")
    print("majority verdicts:", majority)
    assert len(bounds) >= 1
    step = 0.01
    assert all(abs(b[1] - 1.0) <= step + 1e-12 for b in bounds)
    assert dt < 300.0


@pytest.mark.criterion(6, "surgery topology flip")
def test_criterion_6_euler_flip(record_property):
    t0 = time.perf_counter()
    chis = {}
    for s in np.linspace(0.0, 1.0, 50):
        m = morph_surface(MorphParams(s=float(s)))
        assert is_closed_manifold(m)
        chis[float(s)] = euler_characteristic(m)
    dt = time.perf_counter() - t0
    record_property("detail", f"{len(chis)} meshes, {dt:.1f} s")
    assert all(chi == (2 if s < 0.5 else 0) for s, chi in chis.items())
    assert dt < 10.0


@pytest.mark.criterion(7, "solid surgery nesting")
def test_criterion_7_solid_nesting(record_property):
    t0 = time.perf_counter()
    mp = MorphParams(s=1.0)
    layers = solid_layers(mp, [1.0, 0.75, 0.5, 0.25])
    crossings = sum(count_intersections(a, b) for i, a in enumerate(layers) for b in layers[i + 1:])
    inside = all(np.all(points_inside(outer, inner.vertices[::97])) for outer, inner in zip(layers, layers[1:]))
    circle = limit_circle(mp)
    dt = time.perf_counter() - t0
    record_property("detail", f"{crossings} crossings, core radius {np.hypot(*circle[0, :2]):.4f}, {dt:.1f} s")
    assert all(euler_characteristic(m) == 0 for m in layers)
    assert crossings == 0 and inside
    np.testing.assert_array_equal(circle[0], circle[-1])
    # planar: the points span a plane (rank 2 after centring)
    sv = np.linalg.svd(circle[:-1] - circle[:-1].mean(axis=0), compute_uv=False)
    assert sv[2] <= 1e-12 * sv[0] and sv[1] > 0.1 * sv[0]
    assert dt < 10.0


@pytest.mark.criterion(8, "integrator order")
def test_criterion_8_order(record_property):
    def end(h):
        cfg = IntegratorConfig(t_end=10.0, sample_dt=10.0, fixed_step=h)
        return integrate(SPHERE, State(1, 1.59, 0.81), cfg).y[-1]

    y1, y2, y4 = end(0.02), end(0.01), end(0.005)
    order = math.log2(np.linalg.norm(y1 - y2) / np.linalg.norm(y2 - y4))
    record_property("detail", f"measured order {order:.2f}")
    assert 3.8 <= order <= 5.2
