"""Grid scans of the (C, B/A) plane with per-cell topology verdicts."""
from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dynamics import State, SystemParams
from .integrator import IntegrationError, IntegratorConfig, integrate
from .topology import ClassifierThresholds, TopologyReport, Verdict, classify

__all__ = [
    "REFERENCE_ICS",
    "InvalidSpec",
    "SweepSpec",
    "RunRecord",
    "Cell",
    "SweepResult",
    "run_sweep",
    "boundary_estimate",
    "majority_verdict",
    "regime",
    "STABLE",
    "UNSTABLE",
]

# Nine initial conditions: five of the spherical nesting and four of the toroidal one.
REFERENCE_ICS: tuple[State, ...] = (
    State(1.0, 1.59, 0.81),
    State(1.0, 1.3, 0.89),
    State(1.0, 1.18, 0.95),
    State(1.0, 1.08, 0.98),
    State(1.0, 1.0, 1.0),
    State(1.1075, 1.0, 1.0),
    State(1.0, 1.0, 0.95),
    State(1.0, 1.0, 0.9),
    State(1.0, 1.0, 1.0),
)

# tie-break order: the less stable class wins
_INSTABILITY = {
    Verdict.CHAOTIC: 4,
    Verdict.TOROIDAL: 3,
    Verdict.SPHERICAL: 2,
    Verdict.FIXED_POINT: 1,
    Verdict.UNRESOLVED: 0,
}


class InvalidSpec(ValueError):
    pass


def _check_range(name, rng, min_n=2):
    try:
        lo, hi, n = rng
    except (TypeError, ValueError):
        raise InvalidSpec(f"{name} must be (lo, hi, n)") from None
    if not (math.isfinite(lo) and math.isfinite(hi) and lo > 0 and hi > 0):
        raise InvalidSpec(f"{name} bounds must be positive, got {rng}")
    if int(n) != n or n < min_n:
        raise InvalidSpec(f"{name} needs n >= {min_n} points, got {n}")
    if hi < lo or (n == 1 and hi != lo):
        raise InvalidSpec(f"{name} must have lo <= hi (lo == hi for a single point), got {rng}")
    return float(lo), float(hi), int(n)


@dataclass(frozen=True)
class SweepSpec:
    """Grid over C and B/A; ``B = ratio * fixed_A``.

    Ranges are ``(lo, hi, n)`` and expand with ``numpy.linspace``; explicit
    ``c_values`` / ``ratio_values`` override them.  The C axis may hold a
    single value (``(3, 3, 1)``), the ratio axis needs at least two.
    """

    c_range: tuple = (3.0, 3.0, 1)
    ratio_range: tuple = (0.95, 1.05, 11)
    fixed_A: float = 3.0
    ics: tuple = REFERENCE_ICS
    integrator: IntegratorConfig = IntegratorConfig()
    classifier_thresholds: ClassifierThresholds = ClassifierThresholds()
    c_values: Optional[tuple] = None
    ratio_values: Optional[tuple] = None

    def __post_init__(self):
        if not (math.isfinite(self.fixed_A) and self.fixed_A > 0):
            raise InvalidSpec("fixed_A must be positive")
        if self.integrator.t_end < self.classifier_thresholds.min_duration:
            raise InvalidSpec(
                f"integration horizon {self.integrator.t_end:g} is shorter than the classifier's "
                f"minimum {self.classifier_thresholds.min_duration:g}"
            )
        if len(self.ics) == 0:
            raise InvalidSpec("at least one initial condition is required")
        for ic in self.ics:
            if not isinstance(ic, State) or not ic.in_octant:
                raise InvalidSpec(f"initial conditions must be States in the positive octant, got {ic!r}")
        if self.c_values is None:
            _check_range("c_range", self.c_range, min_n=1)
        if self.ratio_values is None:
            _check_range("ratio_range", self.ratio_range)
        for name in ("c_values", "ratio_values"):
            vals = getattr(self, name)
            if vals is not None:
                min_len = 2 if name == "ratio_values" else 1
                if len(vals) < min_len or any(not (math.isfinite(v) and v > 0) for v in vals):
                    raise InvalidSpec(f"{name} needs at least {min_len} positive values")
                object.__setattr__(self, name, tuple(float(v) for v in vals))
        object.__setattr__(self, "ics", tuple(self.ics))

    @property
    def cs(self) -> np.ndarray:
        if self.c_values is not None:
            return np.array(self.c_values)
        lo, hi, n = _check_range("c_range", self.c_range, min_n=1)
        return np.linspace(lo, hi, n)

    @property
    def ratios(self) -> np.ndarray:
        if self.ratio_values is not None:
            return np.array(self.ratio_values)
        lo, hi, n = _check_range("ratio_range", self.ratio_range)
        return np.linspace(lo, hi, n)


@dataclass(frozen=True)
class RunRecord:
    ic_index: int
    verdict: Verdict
    report: Optional[TopologyReport] = None
    error: Optional[str] = None

    @property
    def winding(self) -> Optional[int]:
        return None if self.report is None else self.report.winding_count

    @property
    def recurrence(self) -> Optional[float]:
        return None if self.report is None else self.report.recurrence_distance


@dataclass(frozen=True)
class Cell:
    row: int
    col: int
    C: float
    ratio: float
    runs: tuple
    majority: Verdict


@dataclass(frozen=True)
class SweepResult:
    """Row-major grid of cells: rows follow C, columns follow B/A."""

    spec: SweepSpec
    cells: tuple = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.spec.cs), len(self.spec.ratios)

    def cell(self, row: int, col: int) -> Cell:
        return self.cells[row * self.shape[1] + col]

    def verdict_grid(self) -> np.ndarray:
        rows, cols = self.shape
        return np.array([[self.cell(r, c).majority.value for c in range(cols)] for r in range(rows)])

    def signature(self) -> tuple:
        """Hashable digest used to compare sweeps for equality."""
        return tuple(
            (c.C, c.ratio, c.majority.value)
            + tuple((r.ic_index, r.verdict.value, r.winding, r.recurrence, r.error) for r in c.runs)
            for c in self.cells
        )


def majority_verdict(verdicts: Sequence[Verdict]) -> Verdict:
    """Most frequent verdict; ties go to the less stable class."""
    counts = Counter(verdicts)
    return max(counts, key=lambda v: (counts[v], _INSTABILITY[v]))


def _run_task(args) -> RunRecord:
    params, ic_index, ic, cfg, th = args
    try:
        traj = integrate(params, ic, cfg)
        rep = classify(traj, th)
    except IntegrationError as exc:
        return RunRecord(ic_index, Verdict.UNRESOLVED, None, f"{type(exc).__name__}: {exc}")
    return RunRecord(ic_index, rep.verdict, rep)


def _tasks(spec: SweepSpec):
    out = []
    for i, C in enumerate(spec.cs):
        for j, ratio in enumerate(spec.ratios):
            params = SystemParams.from_ratio(float(ratio), float(C), spec.fixed_A)
            for k, ic in enumerate(spec.ics):
                out.append(((i, j, k), (params, k, ic, spec.integrator, spec.classifier_thresholds)))
    return out


def run_sweep(spec: SweepSpec, workers: int = 1, order: Optional[Sequence[int]] = None) -> SweepResult:
    """Integrate and classify every (cell, IC) pair.

    Tasks are independent; ``workers > 1`` spreads them over processes and
    ``order`` permutes the execution order.  Neither changes the result.
    Integrator failures are recorded per run and never abort the sweep.
    """
    tasks = _tasks(spec)
    seq = list(range(len(tasks))) if order is None else list(order)
    if sorted(seq) != list(range(len(tasks))):
        raise ValueError("order must be a permutation of the task indices")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_run_task, [tasks[i][1] for i in seq], chunksize=1))
    else:
        done = [_run_task(tasks[i][1]) for i in seq]
    by_key = {tasks[i][0]: rec for i, rec in zip(seq, done)}

    cells = []
    n_ic = len(spec.ics)
    for i, C in enumerate(spec.cs):
        for j, ratio in enumerate(spec.ratios):
            runs = tuple(by_key[(i, j, k)] for k in range(n_ic))
            cells.append(Cell(i, j, float(C), float(ratio), runs, majority_verdict([r.verdict for r in runs])))
    return SweepResult(spec, tuple(cells))


STABLE = frozenset({Verdict.FIXED_POINT, Verdict.SPHERICAL})
UNSTABLE = frozenset({Verdict.TOROIDAL, Verdict.CHAOTIC})


def regime(v: Verdict) -> Optional[str]:
    """``"stable"`` (orbits end on an equilibrium), ``"unstable"`` or None."""
    if v in STABLE:
        return "stable"
    if v in UNSTABLE:
        return "unstable"
    return None


def boundary_estimate(result: SweepResult, by: str = "regime") -> list[tuple[float, float]]:
    """Locate changes of behaviour along the ratio axis.

    With ``by="regime"`` (default) cells are grouped into stable
    (FixedPoint, Spherical) and unstable (Toroidal, Chaotic) and Unresolved
    cells are skipped, so a change is reported between the last cell of one
    regime and the first cell of the other.  ``by="verdict"`` reports every
    change of the majority verdict between neighbouring columns.  Each
    change is returned as ``(C, midpoint ratio)``.
    """
    if by not in ("regime", "verdict"):
        raise ValueError(f"by must be 'regime' or 'verdict', got {by!r}")
    rows, cols = result.shape
    if cols < 2:
        raise ValueError("boundary estimation needs at least two ratio columns")
    out = []
    for r in range(rows):
        if by == "verdict":
            for c in range(cols - 1):
                a, b = result.cell(r, c), result.cell(r, c + 1)
                if a.majority != b.majority:
                    out.append((a.C, 0.5 * (a.ratio + b.ratio)))
            continue
        prev = None
        for c in range(cols):
            cell = result.cell(r, c)
            g = regime(cell.majority)
            if g is None:
                continue
            if prev is not None and g != prev[0]:
                out.append((cell.C, 0.5 * (prev[1] + cell.ratio)))
            prev = (g, cell.ratio)
    return out
