"""Vector field of the two-predator / one-prey generalized Lotka-Volterra system.

    dX/dt =  X - X*Y + C*X**2 - A*Z*X**2
    dY/dt = -Y + X*Y
    dZ/dt = -B*Z + A*Z*X**2

X is the prey, Y and Z are predators competing for X.  Everything else in
the package (integration, classification, sweeps) consumes the functions
defined here.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "SystemParams",
    "State",
    "StabilityClass",
    "FixedPoint",
    "rhs",
    "rhs_array",
    "jacobian",
    "char_poly",
    "cubic_roots",
    "eigenvalues",
    "newton_polish",
    "fixed_points",
]


@dataclass(frozen=True)
class SystemParams:
    """Positive parameter triple (A, B, C)."""

    A: float
    B: float
    C: float

    def __post_init__(self):
        for name in ("A", "B", "C"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float, np.floating, np.integer)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a finite positive real, got {v!r}")
            object.__setattr__(self, name, float(v))

    @property
    def ratio(self) -> float:
        """The control ratio B/A."""
        return self.B / self.A

    @classmethod
    def from_ratio(cls, ratio: float, C: float, A: float = 3.0) -> "SystemParams":
        return cls(A=A, B=ratio * A, C=C)


@dataclass(frozen=True)
class State:
    X: float
    Y: float
    Z: float
    t: float = 0.0

    def __post_init__(self):
        for name in ("X", "Y", "Z", "t"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)

    @property
    def xyz(self) -> tuple[float, float, float]:
        return (self.X, self.Y, self.Z)

    @property
    def in_octant(self) -> bool:
        """True when all three densities are nonnegative."""
        return self.X >= 0 and self.Y >= 0 and self.Z >= 0

    def as_array(self) -> np.ndarray:
        return np.array(self.xyz)

    @classmethod
    def parse(cls, text: str, t: float = 0.0) -> "State":
        """Build a state from ``"x,y,z"``."""
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"expected three comma-separated values, got {text!r}")
        return cls(*parts, t=t)


class StabilityClass(str, Enum):
    STABLE_NODE = "StableNode"
    SADDLE_FOCUS = "SaddleFocus"  # any mixed-sign spectrum, real or complex
    CENTER_LIKE = "Center-like"
    SOURCE = "Source"
    DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class FixedPoint:
    state: State
    eigenvalues: tuple[complex, complex, complex]
    classification: StabilityClass
    note: str = field(default="", compare=False)

    @property
    def xyz(self) -> np.ndarray:
        return self.state.as_array()


def rhs(p: SystemParams, s) -> tuple[float, float, float]:
    """Velocity at ``s`` (a :class:`State` or any length-3 sequence)."""
    if isinstance(s, State):
        x, y, z = s.X, s.Y, s.Z
    else:
        x, y, z = s
    x2 = x * x
    return (
        x - x * y + p.C * x2 - p.A * z * x2,
        -y + x * y,
        -p.B * z + p.A * z * x2,
    )


def rhs_array(p: SystemParams, y: np.ndarray) -> np.ndarray:
    """Vectorised field for an ``(n, 3)`` array of states."""
    y = np.asarray(y, dtype=float)
    x, yy, z = y[..., 0], y[..., 1], y[..., 2]
    x2 = x * x
    return np.stack(
        [x - x * yy + p.C * x2 - p.A * z * x2, -yy + x * yy, -p.B * z + p.A * z * x2],
        axis=-1,
    )


def jacobian(p: SystemParams, s) -> np.ndarray:
    if isinstance(s, State):
        x, y, z = s.X, s.Y, s.Z
    else:
        x, y, z = s
    A, B, C = p.A, p.B, p.C
    return np.array(
        [
            [1.0 - y + 2.0 * C * x - 2.0 * A * z * x, -x, -A * x * x],
            [y, -1.0 + x, 0.0],
            [2.0 * A * z * x, 0.0, -B + A * x * x],
        ]
    )


def char_poly(J: np.ndarray) -> tuple[float, float, float]:
    """Coefficients (c2, c1, c0) of det(lambda*I - J) = l^3 + c2 l^2 + c1 l + c0."""
    J = np.asarray(J, dtype=float)
    tr = J[0, 0] + J[1, 1] + J[2, 2]
    minors = (
        J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        + J[0, 0] * J[2, 2] - J[0, 2] * J[2, 0]
        + J[1, 1] * J[2, 2] - J[1, 2] * J[2, 1]
    )
    return (-tr, minors, -float(np.linalg.det(J)))


def _polish_root(c2, c1, c0, r: complex, iters: int = 3) -> complex:
    for _ in range(iters):
        f = ((r + c2) * r + c1) * r + c0
        df = (3 * r + 2 * c2) * r + c1
        if df == 0:
            break
        step = f / df
        r_new = r - step
        # Newton on a near-multiple root can wander; keep only improvements.
        f_new = ((r_new + c2) * r_new + c1) * r_new + c0
        if abs(f_new) > abs(f):
            break
        r = r_new
    return r


def cubic_roots(c2: float, c1: float, c0: float) -> tuple[complex, complex, complex]:
    """Roots of l^3 + c2 l^2 + c1 l + c0 by Cardano's formula plus Newton polish.

    Returned sorted by (real part, imaginary part).  Conjugate pairs are
    made exactly conjugate and near-real roots exactly real.
    """
    # depressed cubic t^3 + p t + q with l = t - c2/3
    shift = c2 / 3.0
    p = c1 - c2 * c2 / 3.0
    q = 2.0 * c2 ** 3 / 27.0 - c2 * c1 / 3.0 + c0
    if abs(p) < 1e-300 and abs(q) < 1e-300:
        ts = [0j, 0j, 0j]
    else:
        disc = cmath.sqrt((q / 2.0) ** 2 + (p / 3.0) ** 3)
        u3 = -q / 2.0 + disc
        if abs(u3) < abs(-q / 2.0 - disc):
            u3 = -q / 2.0 - disc
        u = u3 ** (1.0 / 3.0)
        omega = complex(-0.5, math.sqrt(3.0) / 2.0)
        ts = []
        for k in range(3):
            uk = u * omega ** k
            ts.append(uk - p / (3.0 * uk) if uk != 0 else 0j)
    roots = [_polish_root(c2, c1, c0, t - shift) for t in ts]

    scale = max(1.0, max(abs(r) for r in roots))
    cleaned = []
    for r in roots:
        if abs(r.imag) <= 1e-10 * scale:
            r = complex(r.real, 0.0)
        cleaned.append(r)
    complex_ones = [r for r in cleaned if r.imag != 0.0]
    if len(complex_ones) == 2:
        a, b = complex_ones
        re = 0.5 * (a.real + b.real)
        im = 0.5 * (abs(a.imag) + abs(b.imag))
        real_ones = [r for r in cleaned if r.imag == 0.0]
        cleaned = real_ones + [complex(re, -im), complex(re, im)]
    elif len(complex_ones) == 1:  # pragma: no cover - numerically impossible for real coefficients
        cleaned = [complex(r.real, 0.0) for r in cleaned]
    return tuple(sorted(cleaned, key=lambda z: (z.real, z.imag)))


def eigenvalues(J: np.ndarray) -> tuple[complex, complex, complex]:
    return cubic_roots(*char_poly(J))


def _classify(eigs, tol: float = 1e-9) -> StabilityClass:
    scale = max(1.0, max(abs(e) for e in eigs))
    if any(abs(e) <= tol * scale for e in eigs):
        return StabilityClass.DEGENERATE
    re = [e.real for e in eigs]
    has_complex = any(e.imag != 0.0 for e in eigs)
    if has_complex and any(abs(e.real) <= tol * scale for e in eigs if e.imag != 0.0):
        return StabilityClass.CENTER_LIKE
    if all(r < 0 for r in re):
        return StabilityClass.STABLE_NODE
    if all(r > 0 for r in re):
        return StabilityClass.SOURCE
    return StabilityClass.SADDLE_FOCUS


def newton_polish(p: SystemParams, xyz, iters: int = 8) -> np.ndarray:
    """Newton iterations on rhs = 0.

    Uses a least-squares step so that points on a curve of equilibria
    (singular Jacobian) are handled without blowing up.
    """
    x = np.array(xyz, dtype=float)
    for _ in range(iters):
        f = np.array(rhs(p, x))
        if np.max(np.abs(f)) == 0.0:
            break
        step, *_ = np.linalg.lstsq(jacobian(p, x), f, rcond=None)
        x_new = x - step
        if np.max(np.abs(rhs(p, x_new))) >= np.max(np.abs(f)):
            break
        x = x_new
    return x


def _make_fixed_point(p: SystemParams, xyz, note: str = "") -> FixedPoint:
    xyz = newton_polish(p, xyz)
    xyz = np.where(np.abs(xyz) < 1e-15, 0.0, xyz)
    eigs = eigenvalues(jacobian(p, xyz))
    return FixedPoint(State(*xyz), eigs, _classify(eigs), note)


def fixed_points(p: SystemParams) -> list[FixedPoint]:
    """All equilibria with nonnegative coordinates.

    The closed-form branches are: the origin, the Z-free point
    ``(1, 1 + C, 0)`` and the Y-free point ``(x*, 0, (1 + C x*) / (A x*))``
    with ``x* = sqrt(B/A)``.  There is no other equilibrium unless ``B == A``;
    then the whole segment ``X = 1, Y + A Z = 1 + C`` is stationary and is
    represented by its mid point ``(1, 1, C/A)``, where the rotation on the
    segment changes sense.
    """
    out = [
        _make_fixed_point(p, (0.0, 0.0, 0.0), "origin"),
        _make_fixed_point(p, (1.0, 1.0 + p.C, 0.0), "Z = 0 branch"),
    ]
    xs = math.sqrt(p.B / p.A)
    out.append(_make_fixed_point(p, (xs, 0.0, (1.0 + p.C * xs) / (p.A * xs)), "Y = 0 branch"))
    if math.isclose(p.A, p.B, rel_tol=1e-12, abs_tol=0.0):
        fp = _make_fixed_point(p, (1.0, 1.0, p.C / p.A), "interior segment X = 1, Y + A*Z = 1 + C")
        out.append(FixedPoint(fp.state, fp.eigenvalues, StabilityClass.DEGENERATE, fp.note))
    return out
