"""Trajectory topology: slow-manifold fit, winding, recurrence and classification.

A shell orbit of the B/A = 1 regime leaves an unstable focus on the segment
of equilibria, spirals over a sphere-like surface and settles on a stable
focus of the same segment.  For B/A slightly above 1 the segment stops being
stationary, the two foci are connected through it and orbits live on nested
tori around it; far enough out the outermost shell becomes irregular.

:func:`classify` separates these cases with a short decision cascade whose
thresholds all live in :class:`ClassifierThresholds` and are copied into
every :class:`TopologyReport`.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Optional, Union

import numpy as np
from scipy.spatial.distance import pdist

from .integrator import Direction, Plane, Trajectory, section_crossings

__all__ = [
    "Verdict",
    "DegenerateCloud",
    "AxisPuncture",
    "Axis",
    "CoreSegment",
    "SectionLoop",
    "ClassifierThresholds",
    "TopologyReport",
    "estimate_core",
    "circulation_axis",
    "winding_number",
    "recurrence_distance",
    "section_loop",
    "tail_settling",
    "classify",
    "radial_interval",
]


class Verdict(str, Enum):
    FIXED_POINT = "FixedPoint"
    SPHERICAL = "Spherical"
    TOROIDAL = "Toroidal"
    CHAOTIC = "Chaotic"
    UNRESOLVED = "Unresolved"


class DegenerateCloud(ValueError):
    """The low-speed samples are too concentrated to define a line."""


class AxisPuncture(ValueError):
    """A sample lies on the winding axis, where the angle is undefined."""


@dataclass(frozen=True)
class Axis:
    """Oriented line through ``point`` along unit vector ``direction``."""

    point: tuple[float, float, float]
    direction: tuple[float, float, float]

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(d)
        if not np.isfinite(n) or n == 0:
            raise ValueError("axis direction must be a nonzero finite vector")
        object.__setattr__(self, "direction", tuple(float(v) for v in d / n))
        object.__setattr__(self, "point", tuple(float(v) for v in self.point))

    def frame(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Orthonormal ``(u, e1, e2)`` with ``u`` the axis and ``e1 x e2 = u``."""
        u = np.asarray(self.direction)
        helper = np.eye(3)[np.argmin(np.abs(u))]
        e1 = np.cross(u, helper)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(u, e1)
        return u, e1, e2


@dataclass(frozen=True)
class CoreSegment:
    """Slow-manifold estimate: a segment fitted to the slowest samples."""

    endpoint_a: tuple[float, float, float]
    endpoint_b: tuple[float, float, float]
    fit_rms: float
    speed_percentile_used: float

    def __post_init__(self):
        a = np.asarray(self.endpoint_a, dtype=float)
        b = np.asarray(self.endpoint_b, dtype=float)
        if np.linalg.norm(b - a) < 1e-6:
            raise ValueError("core segment endpoints must be at least 1e-6 apart")
        if not (0 < self.speed_percentile_used <= 50):
            raise ValueError("speed_percentile_used must lie in (0, 50]")
        if self.fit_rms < 0:
            raise ValueError("fit_rms must be nonnegative")
        object.__setattr__(self, "endpoint_a", tuple(float(v) for v in a))
        object.__setattr__(self, "endpoint_b", tuple(float(v) for v in b))

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.endpoint_a) + np.asarray(self.endpoint_b))

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.subtract(self.endpoint_b, self.endpoint_a)))

    @property
    def axis(self) -> Axis:
        return Axis(tuple(self.midpoint), tuple(np.subtract(self.endpoint_b, self.endpoint_a)))


@dataclass(frozen=True)
class SectionLoop:
    """One-sided crossings of a plane containing the axis, in plane coordinates."""

    points: np.ndarray = field(repr=False)
    gap: float
    extent: float
    closed: bool

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def gap_ratio(self) -> float:
        return self.gap / self.extent if self.extent > 0 else math.inf


@dataclass(frozen=True)
class ClassifierThresholds:
    fixed_point_diameter: float = 1e-5
    min_winding: int = 2
    loop_gap: float = 0.10
    recurrence_rel: float = 1e-3
    settle_fraction: float = 0.5
    guard_time: float = 5.0
    core_percentile: float = 5.0
    min_section_points: int = 16
    min_duration: float = 200.0
    settle_window: float = 0.25
    settle_speed_rel: float = 0.05
    settle_spread_rel: float = 0.04

    def __post_init__(self):
        positive = (
            "fixed_point_diameter", "loop_gap", "recurrence_rel", "guard_time", "min_duration",
            "settle_speed_rel", "settle_spread_rel",
        )
        for name in positive:
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v!r}")
        if not 0 <= self.settle_fraction < 1:
            raise ValueError("settle_fraction must lie in [0, 1)")
        if not 0 < self.settle_window < 1:
            raise ValueError("settle_window must lie in (0, 1)")
        if not 0 < self.core_percentile <= 50:
            raise ValueError("core_percentile must lie in (0, 50]")
        if self.min_winding < 1 or self.min_section_points < 3:
            raise ValueError("min_winding >= 1 and min_section_points >= 3 required")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TopologyReport:
    verdict: Verdict
    winding_count: int
    recurrence_distance: float
    min_speed: float
    core: Optional[CoreSegment]
    evidence_notes: str
    diameter: float = 0.0
    total_angle: float = 0.0
    section_points: int = 0
    section_gap_ratio: float = math.inf
    thresholds: ClassifierThresholds = field(default_factory=ClassifierThresholds)

    def as_dict(self) -> dict:
        d = {
            "verdict": self.verdict.value,
            "winding_count": self.winding_count,
            "total_angle": self.total_angle,
            "recurrence_distance": self.recurrence_distance,
            "min_speed": self.min_speed,
            "diameter": self.diameter,
            "section_points": self.section_points,
            "section_gap_ratio": self.section_gap_ratio if math.isfinite(self.section_gap_ratio) else None,
            "core": None,
            "evidence_notes": self.evidence_notes,
            "thresholds": self.thresholds.as_dict(),
        }
        if self.core is not None:
            d["core"] = {
                "endpoint_a": list(self.core.endpoint_a),
                "endpoint_b": list(self.core.endpoint_b),
                "fit_rms": self.core.fit_rms,
                "speed_percentile_used": self.core.speed_percentile_used,
            }
        return d


def estimate_core(traj: Trajectory, percentile: float = 5.0) -> CoreSegment:
    """Fit a segment to the slowest ``percentile`` percent of the samples.

    The line is the principal axis of the low-speed cloud (total least
    squares); the segment spans the extreme projections of the cloud.

    Raises
    ------
    DegenerateCloud
        If the low-speed samples span less than 1e-6 along the fitted line.
    """
    if not 0 < percentile <= 50:
        raise ValueError("percentile must lie in (0, 50]")
    if len(traj) < 1000:
        raise ValueError(f"need at least 1000 samples to estimate the core, got {len(traj)}")
    speed = traj.speeds()
    cloud = traj.y[speed <= np.percentile(speed, percentile)]
    center = cloud.mean(axis=0)
    centered = cloud - center
    if len(cloud) < 2 or np.ptp(cloud, axis=0).max() < 1e-6:
        raise DegenerateCloud("low-speed samples collapse onto a point")
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    direction = vt[0]
    # deterministic orientation: largest component positive
    if direction[np.argmax(np.abs(direction))] < 0:
        direction = -direction
    proj = centered @ direction
    lo, hi = proj.min(), proj.max()
    if hi - lo < 1e-6:
        raise DegenerateCloud(f"low-speed samples span only {hi - lo:.3e} along their principal axis")
    resid = centered - np.outer(proj, direction)
    rms = float(np.sqrt(np.mean(np.sum(resid ** 2, axis=1))))
    return CoreSegment(tuple(center + lo * direction), tuple(center + hi * direction), rms, float(percentile))


def circulation_axis(traj: Trajectory) -> Axis:
    """Axis through the orbit centroid along its mean angular momentum.

    For an orbit revolving around a hole (a torus) or around a line (a
    spiral shell) this axis threads the hole.
    """
    if traj.params is None:
        v = np.gradient(traj.y, traj.t, axis=0)
    else:
        from .dynamics import rhs_array

        v = rhs_array(traj.params, traj.y)
    c = traj.y.mean(axis=0)
    m = np.cross(traj.y - c, v).mean(axis=0)
    if np.linalg.norm(m) == 0:
        raise DegenerateCloud("orbit has no net circulation")
    return Axis(tuple(c), tuple(m))


def _as_axis(core: Union[CoreSegment, Axis]) -> Axis:
    return core.axis if isinstance(core, CoreSegment) else core


def winding_number(traj: Trajectory, core: Union[CoreSegment, Axis]) -> tuple[int, float]:
    """Revolutions of the orbit around the core line.

    Samples are projected on the plane orthogonal to the line through its
    midpoint and the signed swept angle is accumulated.  Returns
    ``(floor(|total| / 2 pi), total)``.
    """
    axis = _as_axis(core)
    u, e1, e2 = axis.frame()
    d = traj.y - np.asarray(axis.point)
    a, b = d @ e1, d @ e2
    r = np.hypot(a, b)
    if np.any(r < 1e-9):
        i = int(np.argmin(r))
        raise AxisPuncture(f"sample at t={traj.t[i]:.6g} lies {r[i]:.2e} from the axis")
    ang = np.arctan2(b, a)
    step = np.diff(ang)
    step = (step + np.pi) % (2 * np.pi) - np.pi
    total = float(step.sum())
    count = int(math.floor(abs(total) / (2 * math.pi) + 1e-9))
    return count, total


def recurrence_distance(traj: Trajectory, settle_fraction: float = 0.1, guard_time: float = 5.0) -> float:
    """Closest return of the settled orbit to its first settled sample.

    Samples within ``guard_time`` of the reference are excluded.  Returns
    ``inf`` when nothing remains after the guard window.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    if not 0 <= settle_fraction < 1:
        raise ValueError("settle_fraction must lie in [0, 1)")
    t0 = traj.t[0] + settle_fraction * traj.duration
    i0 = int(np.searchsorted(traj.t, t0 - 1e-12 * max(1.0, abs(t0))))
    ref = traj.y[i0]
    later = traj.y[traj.t > traj.t[i0] + guard_time]
    if len(later) == 0:
        return math.inf
    return float(np.sqrt(np.min(np.sum((later - ref) ** 2, axis=1))))


def section_loop(
    traj: Trajectory, axis: Axis, loop_gap: float = 0.10, min_points: int = 16
) -> SectionLoop:
    """Poincare section on a plane containing ``axis``, one crossing direction.

    The points are ordered by angle around their centroid; the loop counts
    as closed when the largest jump between angular neighbours (including the
    wrap-around) is at most ``loop_gap`` times the loop's diameter.  A thick
    band of points fails this test as well as an open arc does, and so does
    a section that collapses to one repeated point (a periodic orbit).
    """
    u, e1, e2 = axis.frame()
    p0 = np.asarray(axis.point)
    plane = Plane(tuple(e1), float(e1 @ p0))
    crossings = section_crossings(traj, plane, direction=Direction.UP)
    if not crossings:
        return SectionLoop(np.empty((0, 2)), math.inf, 0.0, False)
    pts3 = np.array([c.state.xyz for c in crossings]) - p0
    pts = np.column_stack([pts3 @ u, pts3 @ e2])
    if len(pts) < 3:
        return SectionLoop(pts, math.inf, 0.0, False)
    extent = float(pdist(pts).max())
    scale = float(np.linalg.norm(np.ptp(traj.y, axis=0)))
    if extent <= 1e-6 * scale:
        return SectionLoop(pts, math.inf, 0.0, False)
    c = pts.mean(axis=0)
    order = np.argsort(np.arctan2(pts[:, 1] - c[1], pts[:, 0] - c[0]), kind="stable")
    ring = pts[order]
    jumps = np.linalg.norm(np.diff(np.vstack([ring, ring[:1]]), axis=0), axis=1)
    gap = float(jumps.max())
    closed = len(pts) >= min_points and gap <= loop_gap * extent
    return SectionLoop(pts, gap, extent, closed)


def tail_settling(traj: Trajectory, window: float = 0.25) -> tuple[float, float]:
    """How far the last ``window`` of the orbit has come to rest.

    Returns ``(speed_rel, spread_rel)``: the largest speed in the window over
    the largest speed overall, and the RMS spread of the window's samples over
    the orbit diameter.  Both tend to zero for an orbit converging onto an
    equilibrium and stay of order one for an orbit that keeps circulating.
    """
    n = len(traj)
    tail = slice(min(n - 1, int(math.floor((1.0 - window) * n))), n)
    speed = traj.speeds()
    top = speed.max()
    speed_rel = float(speed[tail].max() / top) if top > 0 else 0.0
    y = traj.y[tail]
    spread = float(np.sqrt(np.mean(np.sum((y - y.mean(axis=0)) ** 2, axis=1))))
    diam = traj.diameter()
    return speed_rel, (spread / diam if diam > 0 else 0.0)


def classify(traj: Trajectory, thresholds: ClassifierThresholds = ClassifierThresholds()) -> TopologyReport:
    """Decide whether an orbit is a fixed point, a sphere-like or torus-like shell, or chaotic.

    Cascade:

    1. diameter <= ``fixed_point_diameter``: FixedPoint;
    2. winding around the circulation axis >= ``min_winding`` and a closed
       Poincare loop on a plane containing that axis: Toroidal;
    3. the tail of the orbit has come to rest (:func:`tail_settling` below
       ``settle_speed_rel`` and ``settle_spread_rel``), or the settled orbit
       recurs within ``recurrence_rel`` * diameter: Spherical -- the orbit
       has crossed its shell and landed on an equilibrium, or keeps
       returning along it;
    4. open section with sustained revolution and large recurrence: Chaotic;
    5. anything else: Unresolved.

    The slow-manifold segment is estimated along the way and reported in
    ``core`` but does not enter the decision.
    """
    th = thresholds
    if traj.duration < th.min_duration:
        raise ValueError(f"classification needs a horizon of at least {th.min_duration}, got {traj.duration}")
    diam = traj.diameter()
    speed = traj.speeds()
    min_speed = float(speed.min())
    notes = []

    if diam <= th.fixed_point_diameter:
        return TopologyReport(
            Verdict.FIXED_POINT, 0, 0.0, min_speed, None,
            f"orbit diameter {diam:.3e} <= {th.fixed_point_diameter:g}", diam, thresholds=th,
        )

    try:
        core = estimate_core(traj, th.core_percentile)
        notes.append(f"slow segment length {core.length:.4g}, fit rms {core.fit_rms:.3g}")
    except ValueError as exc:  # degenerate cloud or too few samples
        core = None
        notes.append(f"no slow segment ({exc})")

    winding, total = 0, 0.0
    loop = SectionLoop(np.empty((0, 2)), math.inf, 0.0, False)
    try:
        axis = circulation_axis(traj)
        try:
            winding, total = winding_number(traj, axis)
        except AxisPuncture as exc:
            notes.append(f"winding undefined ({exc})")
        loop = section_loop(traj, axis, th.loop_gap, th.min_section_points)
    except DegenerateCloud as exc:
        notes.append(str(exc))
    notes.append(f"winding {winding} ({total / (2 * math.pi):.2f} turns)")
    notes.append(f"section: {loop.n_points} points, gap/extent {loop.gap_ratio:.3g}")

    rec = recurrence_distance(traj, th.settle_fraction, th.guard_time)
    notes.append(f"recurrence {rec:.3e} = {rec / diam:.3e} x diameter")
    speed_rel, spread_rel = tail_settling(traj, th.settle_window)
    notes.append(f"tail speed {speed_rel:.2e} x max, tail spread {spread_rel:.2e} x diameter")

    def report(v: Verdict, why: str) -> TopologyReport:
        return TopologyReport(
            v, winding, rec, min_speed, core, "; ".join([why] + notes), diam, total,
            loop.n_points, loop.gap_ratio, th,
        )

    if winding >= th.min_winding and loop.closed:
        return report(Verdict.TOROIDAL, "closed section loop around a threaded axis")
    if speed_rel <= th.settle_speed_rel and spread_rel <= th.settle_spread_rel:
        return report(Verdict.SPHERICAL, "orbit comes to rest on an equilibrium after crossing its shell")
    if rec <= th.recurrence_rel * diam:
        return report(Verdict.SPHERICAL, "settled orbit recurs on its shell")
    if not loop.closed and winding >= th.min_winding and loop.n_points >= th.min_section_points:
        return report(Verdict.CHAOTIC, "sustained revolution without a closed section loop or recurrence")
    return report(Verdict.UNRESOLVED, "no criterion met")


def radial_interval(traj: Trajectory, center) -> tuple[float, float]:
    """``(min, max)`` distance of the samples from ``center``."""
    r = np.linalg.norm(traj.y - np.asarray(center, dtype=float), axis=1)
    return float(r.min()), float(r.max())
