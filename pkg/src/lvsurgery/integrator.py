"""Adaptive Dormand-Prince 5(4) integration with dense output and section events.

The stepping loop is written on plain Python floats, unrolled for the three
state components: for a 3-dimensional field this is several times faster than
going through small numpy arrays, and it keeps runs bit-reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .dynamics import State, SystemParams

__all__ = [
    "IntegratorConfig",
    "IntegrationError",
    "StepSizeUnderflow",
    "NonFiniteState",
    "Direction",
    "SectionCrossing",
    "Plane",
    "DenseOutput",
    "SplineDense",
    "Trajectory",
    "integrate",
    "section_crossings",
]


class IntegrationError(RuntimeError):
    """Numerical failure during integration; carries the last accepted state."""

    def __init__(self, message: str, last_state: Optional[State] = None):
        super().__init__(message)
        self.last_state = last_state


class StepSizeUnderflow(IntegrationError):
    pass


class NonFiniteState(IntegrationError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    t_end: float = 500.0
    sample_dt: float = 0.01
    rtol: float = 1e-9
    atol: float = 1e-12
    h_init: float = 1e-3
    h_max: float = 0.1
    # When set, take fixed steps of this size (no error control).  Used for
    # convergence-order studies.
    fixed_step: Optional[float] = None

    def __post_init__(self):
        for name in ("t_end", "sample_dt", "rtol", "atol", "h_init", "h_max"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a finite positive real, got {v!r}")
        if not self.atol <= self.rtol < 1:
            raise ValueError(f"need 0 < atol <= rtol < 1, got atol={self.atol}, rtol={self.rtol}")
        if self.h_init > self.h_max:
            raise ValueError(f"need h_init <= h_max, got {self.h_init} > {self.h_max}")
        if self.fixed_step is not None and not (math.isfinite(self.fixed_step) and self.fixed_step > 0):
            raise ValueError(f"fixed_step must be positive, got {self.fixed_step!r}")

    def replace(self, **changes) -> "IntegratorConfig":
        from dataclasses import replace

        return replace(self, **changes)


class Direction(str, Enum):
    UP = "Up"
    DOWN = "Down"


@dataclass(frozen=True)
class SectionCrossing:
    t: float
    state: State
    direction: Direction


@dataclass(frozen=True)
class Plane:
    """The plane ``normal . x = offset``."""

    normal: tuple[float, float, float]
    offset: float = 0.0

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if n.shape != (3,) or not np.all(np.isfinite(n)) or np.linalg.norm(n) == 0:
            raise ValueError(f"plane normal must be a nonzero finite 3-vector, got {self.normal!r}")
        object.__setattr__(self, "normal", tuple(float(v) for v in n))
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def axis(cls, name: str, value: float) -> "Plane":
        """Coordinate plane, e.g. ``Plane.axis("X", 1.0)`` for X = 1."""
        idx = "XYZ".index(name.upper())
        n = [0.0, 0.0, 0.0]
        n[idx] = 1.0
        return cls(tuple(n), value)

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y) @ np.asarray(self.normal) - self.offset


class DenseOutput:
    """Piecewise quartic interpolant assembled from Dormand-Prince steps."""

    def __init__(self, t_nodes: np.ndarray, coeffs: np.ndarray):
        self.t_nodes = t_nodes  # (m + 1,)
        self.coeffs = coeffs  # (m, 5, 3)
        self.t_nodes.setflags(write=False)
        self.coeffs.setflags(write=False)

    @property
    def breakpoints(self) -> np.ndarray:
        return self.t_nodes

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        idx = np.clip(np.searchsorted(self.t_nodes, t, side="right") - 1, 0, len(self.coeffs) - 1)
        t0 = self.t_nodes[idx]
        h = self.t_nodes[idx + 1] - t0
        theta = ((t - t0) / h)[:, None]
        theta1 = 1.0 - theta
        r = self.coeffs[idx]
        y = r[:, 0] + theta * (r[:, 1] + theta1 * (r[:, 2] + theta * (r[:, 3] + theta1 * r[:, 4])))
        return y[0] if scalar else y


class SplineDense:
    """Cubic-spline dense output for trajectories built from samples alone."""

    def __init__(self, t: np.ndarray, y: np.ndarray):
        self._spline = CubicSpline(t, y, axis=0)
        self.t_nodes = np.asarray(t, dtype=float)

    @property
    def breakpoints(self) -> np.ndarray:
        return self.t_nodes

    def __call__(self, t) -> np.ndarray:
        return self._spline(t)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniformly sampled orbit with the interpolant it was sampled from.

    ``t`` has shape ``(n,)`` and ``y`` has shape ``(n, 3)``; both are
    read-only.  ``params`` is ``None`` for synthetic trajectories.
    """

    params: Optional[SystemParams]
    ic: State
    t: np.ndarray
    y: np.ndarray
    events: tuple = ()
    dense: object = field(default=None, repr=False)
    config: Optional[IntegratorConfig] = None
    n_steps: int = 0

    def __post_init__(self):
        t = np.array(self.t, dtype=float)
        y = np.array(self.y, dtype=float)
        if t.ndim != 1 or y.shape != (len(t), 3) or len(t) == 0:
            raise ValueError("trajectory needs t of shape (n,) and y of shape (n, 3), n >= 1")
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        t.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "y", y)
        if self.dense is None and len(t) >= 2:
            object.__setattr__(self, "dense", SplineDense(t, y))

    @classmethod
    def from_samples(cls, t, y, params: Optional[SystemParams] = None) -> "Trajectory":
        """Wrap an arbitrary sampled curve (e.g. a synthetic test orbit)."""
        y = np.asarray(y, dtype=float)
        t = np.asarray(t, dtype=float)
        return cls(params=params, ic=State(*y[0], t=float(t[0])), t=t, y=y)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def samples(self) -> list[State]:
        return [State(*row, t=tt) for tt, row in zip(self.t, self.y)]

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    def diameter(self, max_points: int = 4000) -> float:
        """Largest pairwise distance between samples.

        Exact over the convex hull vertices when there are at most
        ``max_points`` of them, otherwise over an even subsample of them.
        """
        from scipy.spatial import ConvexHull
        from scipy.spatial.distance import pdist

        pts = self.y
        if len(pts) < 2 or np.ptp(pts, axis=0).max() == 0.0:
            return 0.0
        try:
            pts = pts[ConvexHull(pts).vertices]
        except Exception:  # flat or collinear sample sets
            pass
        if len(pts) > max_points:
            pts = pts[np.linspace(0, len(pts) - 1, max_points).astype(int)]
        return float(pdist(pts).max())

    def speeds(self) -> np.ndarray:
        from .dynamics import rhs_array

        if self.params is None:
            # finite-difference speed for synthetic curves
            v = np.gradient(self.y, self.t, axis=0)
        else:
            v = rhs_array(self.params, self.y)
        return np.linalg.norm(v, axis=1)

    def concatenate(self, other: "Trajectory") -> "Trajectory":
        """Append ``other`` shifted in time so that it starts one step after ``self`` ends."""
        dt = self.t[-1] - self.t[-2] if len(self.t) > 1 else 1.0
        shift = self.t[-1] + dt - other.t[0]
        return Trajectory.from_samples(
            np.concatenate([self.t, other.t + shift]), np.vstack([self.y, other.y]), self.params
        )


# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_A71, _A73, _A74, _A75, _A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40
# Dense output (Hairer, Norsett & Wanner, order 4)
_D1 = -12715105075 / 11282082432
_D3 = 87487479700 / 32700410799
_D4 = -10690763975 / 1880347072
_D5 = 701980252875 / 199316789632
_D6 = -1453857185 / 822651844
_D7 = 69997945 / 29380423

_SAFE = 0.9
_FAC_MIN, _FAC_MAX = 0.2, 10.0
_BETA = 0.04  # PI controller memory
_EXPO = 0.2 - _BETA * 0.75
H_UNDERFLOW = 1e-14


def _field(p: SystemParams, sign: float) -> Callable:
    A, B, C = p.A, p.B, p.C
    if sign > 0:
        def f(x, y, z):
            x2 = x * x
            return x - x * y + C * x2 - A * z * x2, -y + x * y, -B * z + A * z * x2
    else:
        def f(x, y, z):
            x2 = x * x
            return -(x - x * y + C * x2 - A * z * x2), y - x * y, B * z - A * z * x2
    return f


def _dopri5(f, t0: float, y0: tuple, cfg: IntegratorConfig):
    """Integrate ``f`` from ``t0`` to ``cfg.t_end``; return node times, dense coeffs, steps."""
    t_end = cfg.t_end
    rtol, atol = cfg.rtol, cfg.atol
    h_max = cfg.h_max
    fixed = cfg.fixed_step
    h = fixed if fixed is not None else min(cfg.h_init, h_max)

    x, y, z = y0
    k1x, k1y, k1z = f(x, y, z)
    t = t0
    nodes = [t0]
    coef: list[float] = []
    facold = 1e-4
    reject = False
    n_acc = 0
    sqrt = math.sqrt
    isfinite = math.isfinite

    while t < t_end:
        if t + h >= t_end or (t_end - t - h) < 1e-12 * max(1.0, abs(t_end)):
            h = t_end - t
        if fixed is None and h < max(H_UNDERFLOW, 4.0 * math.ulp(t)):
            raise StepSizeUnderflow(
                f"step size underflow (h={h:.3e}) at t={t:.6g}; the orbit is approaching a singularity",
                _safe_state(x, y, z, t),
            )
        # stages
        ax = x + h * _A21 * k1x
        ay = y + h * _A21 * k1y
        az = z + h * _A21 * k1z
        k2x, k2y, k2z = f(ax, ay, az)
        ax = x + h * (_A31 * k1x + _A32 * k2x)
        ay = y + h * (_A31 * k1y + _A32 * k2y)
        az = z + h * (_A31 * k1z + _A32 * k2z)
        k3x, k3y, k3z = f(ax, ay, az)
        ax = x + h * (_A41 * k1x + _A42 * k2x + _A43 * k3x)
        ay = y + h * (_A41 * k1y + _A42 * k2y + _A43 * k3y)
        az = z + h * (_A41 * k1z + _A42 * k2z + _A43 * k3z)
        k4x, k4y, k4z = f(ax, ay, az)
        ax = x + h * (_A51 * k1x + _A52 * k2x + _A53 * k3x + _A54 * k4x)
        ay = y + h * (_A51 * k1y + _A52 * k2y + _A53 * k3y + _A54 * k4y)
        az = z + h * (_A51 * k1z + _A52 * k2z + _A53 * k3z + _A54 * k4z)
        k5x, k5y, k5z = f(ax, ay, az)
        ax = x + h * (_A61 * k1x + _A62 * k2x + _A63 * k3x + _A64 * k4x + _A65 * k5x)
        ay = y + h * (_A61 * k1y + _A62 * k2y + _A63 * k3y + _A64 * k4y + _A65 * k5y)
        az = z + h * (_A61 * k1z + _A62 * k2z + _A63 * k3z + _A64 * k4z + _A65 * k5z)
        k6x, k6y, k6z = f(ax, ay, az)
        nx = x + h * (_A71 * k1x + _A73 * k3x + _A74 * k4x + _A75 * k5x + _A76 * k6x)
        ny = y + h * (_A71 * k1y + _A73 * k3y + _A74 * k4y + _A75 * k5y + _A76 * k6y)
        nz = z + h * (_A71 * k1z + _A73 * k3z + _A74 * k4z + _A75 * k5z + _A76 * k6z)
        if not (isfinite(nx) and isfinite(ny) and isfinite(nz)):
            if fixed is None and h > 1e-6:
                # overflow inside a too-large trial step: retry smaller before giving up
                h *= 0.1
                reject = True
                continue
            raise NonFiniteState(f"non-finite state after step from t={t:.6g}", _safe_state(x, y, z, t))
        k7x, k7y, k7z = f(nx, ny, nz)
        if not (isfinite(k7x) and isfinite(k7y) and isfinite(k7z)):
            raise NonFiniteState(f"non-finite velocity at t={t + h:.6g}", _safe_state(x, y, z, t))

        if fixed is None:
            ex = h * (_E1 * k1x + _E3 * k3x + _E4 * k4x + _E5 * k5x + _E6 * k6x + _E7 * k7x)
            ey = h * (_E1 * k1y + _E3 * k3y + _E4 * k4y + _E5 * k5y + _E6 * k6y + _E7 * k7y)
            ez = h * (_E1 * k1z + _E3 * k3z + _E4 * k4z + _E5 * k5z + _E6 * k6z + _E7 * k7z)
            sx = atol + rtol * max(abs(x), abs(nx))
            sy = atol + rtol * max(abs(y), abs(ny))
            sz = atol + rtol * max(abs(z), abs(nz))
            err = sqrt(((ex / sx) ** 2 + (ey / sy) ** 2 + (ez / sz) ** 2) / 3.0)
            if err > 1.0:
                fac = max(1.0 / _FAC_MAX, min(1.0 / _FAC_MIN, err ** 0.2 / _SAFE))
                h = h / fac
                reject = True
                continue
            fac11 = err ** _EXPO if err > 0 else 0.0
            fac = fac11 / facold ** _BETA
            fac = max(1.0 / _FAC_MAX, min(1.0 / _FAC_MIN, fac / _SAFE))
            h_new = min(h / fac, h_max)
            if reject:
                h_new = min(h_new, h)
            facold = max(err, 1e-4)
            reject = False
        else:
            h_new = fixed

        # positivity: clamp roundoff-level excursions, reject real ones
        if nx < 0.0 or ny < 0.0 or nz < 0.0:
            for v in (nx, ny, nz):
                if v <= -atol:
                    raise NonFiniteState(
                        f"state left the positive octant at t={t + h:.6g} ({nx:.3e}, {ny:.3e}, {nz:.3e})",
                        _safe_state(x, y, z, t),
                    )
            nx, ny, nz = max(nx, 0.0), max(ny, 0.0), max(nz, 0.0)
            k7x, k7y, k7z = f(nx, ny, nz)

        # dense output coefficients
        dx, dy, dz = nx - x, ny - y, nz - z
        bx, by, bz = h * k1x - dx, h * k1y - dy, h * k1z - dz
        coef.extend((
            x, y, z,
            dx, dy, dz,
            bx, by, bz,
            dx - h * k7x - bx, dy - h * k7y - by, dz - h * k7z - bz,
            h * (_D1 * k1x + _D3 * k3x + _D4 * k4x + _D5 * k5x + _D6 * k6x + _D7 * k7x),
            h * (_D1 * k1y + _D3 * k3y + _D4 * k4y + _D5 * k5y + _D6 * k6y + _D7 * k7y),
            h * (_D1 * k1z + _D3 * k3z + _D4 * k4z + _D5 * k5z + _D6 * k6z + _D7 * k7z),
        ))
        t = t_end if h == t_end - t else t + h
        nodes.append(t)
        x, y, z = nx, ny, nz
        k1x, k1y, k1z = k7x, k7y, k7z
        h = h_new
        n_acc += 1

    return np.array(nodes), np.array(coef).reshape(-1, 5, 3), n_acc


def _safe_state(x, y, z, t) -> Optional[State]:
    try:
        return State(max(x, 0.0), max(y, 0.0), max(z, 0.0), t)
    except ValueError:
        return None


def integrate(
    p: SystemParams,
    ic: State,
    cfg: IntegratorConfig = IntegratorConfig(),
    section: Optional[Plane] = None,
    reverse: bool = False,
) -> Trajectory:
    """Integrate the Lotka-Volterra field from ``ic`` up to time ``cfg.t_end``.

    Parameters
    ----------
    p, ic
        Parameters and initial state; integration starts at ``ic.t``.
    cfg
        Tolerances and sampling.  Samples are taken every ``cfg.sample_dt``
        from the dense output, starting with the initial condition itself.
    section
        Optional plane whose crossings are stored in ``Trajectory.events``.
    reverse
        Integrate the negated field (i.e. run time backwards).

    Raises
    ------
    StepSizeUnderflow, NonFiniteState
    """
    if not isinstance(ic, State):
        ic = State(*ic)
    if not ic.in_octant:
        raise ValueError(f"initial state must lie in the closed positive octant, got {ic.xyz}")
    if cfg.t_end <= ic.t:
        raise ValueError(f"t_end ({cfg.t_end}) must exceed the initial time ({ic.t})")
    f = _field(p, -1.0 if reverse else 1.0)
    nodes, coeffs, n_steps = _dopri5(f, ic.t, ic.xyz, cfg)
    dense = DenseOutput(nodes, coeffs)

    n = int(math.floor((cfg.t_end - ic.t) / cfg.sample_dt + 1e-9)) + 1
    ts = ic.t + cfg.sample_dt * np.arange(n)
    ys = dense(ts)
    ys[0] = ic.xyz
    np.maximum(ys, 0.0, out=ys)  # interpolant roundoff below zero
    traj = Trajectory(params=p, ic=ic, t=ts, y=ys, dense=dense, config=cfg, n_steps=n_steps)
    if section is not None:
        object.__setattr__(traj, "events", tuple(section_crossings(traj, section)))
    return traj


def section_crossings(
    traj: Trajectory,
    plane: Plane,
    direction: Optional[Direction] = None,
    tol: float = 1e-10,
) -> list[SectionCrossing]:
    """Crossings of ``plane`` along the trajectory's dense output.

    Sign changes are located on the union of sample times and interpolant
    breakpoints, then refined with Brent's method to ``|plane(state)| <= tol``.
    ``direction`` keeps only crossings of one orientation.
    """
    if len(traj) < 2:
        return []
    if not isinstance(plane, Plane):
        normal, offset = plane
        plane = Plane(tuple(normal), offset)
    dense = traj.dense
    t_lo, t_hi = traj.t[0], traj.t[-1]
    bp = np.asarray(dense.breakpoints)
    bp = bp[(bp > t_lo) & (bp < t_hi)]
    grid = np.union1d(traj.t, bp)
    ys = dense(grid)
    ys[np.searchsorted(grid, traj.t)] = traj.y
    g = plane(ys)
    nrm = np.asarray(plane.normal)
    off = plane.offset

    def gfun(tt):
        return float(np.dot(dense(tt), nrm) - off)

    pos = g >= 0.0
    idx = np.nonzero(pos[:-1] != pos[1:])[0]
    out = []
    for i in idx:
        a, b = grid[i], grid[i + 1]
        ga, gb = g[i], g[i + 1]
        if gb == 0.0:
            tc = b
        else:
            tc = brentq(gfun, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        yc = np.asarray(dense(tc), dtype=float)
        # project the residual onto the plane (sub-ulp correction along the normal)
        resid = float(yc @ nrm - off)
        if abs(resid) > tol:
            yc = yc - resid * nrm / float(nrm @ nrm)
        d = Direction.UP if gb > ga else Direction.DOWN
        if direction is not None and d != direction:
            continue
        out.append(SectionCrossing(float(tc), State(*yc, t=float(tc)), d))
    return out
