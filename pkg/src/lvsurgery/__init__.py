"""Generalized Lotka-Volterra dynamics and 2-dimensional 0-surgery toolkit."""
from .dynamics import FixedPoint, StabilityClass, State, SystemParams, fixed_points, jacobian, rhs
from .integrator import (
    Direction,
    IntegrationError,
    IntegratorConfig,
    NonFiniteState,
    Plane,
    SectionCrossing,
    StepSizeUnderflow,
    Trajectory,
    integrate,
    section_crossings,
)
from .topology import ClassifierThresholds, TopologyReport, Verdict, classify
from .sweep import SweepSpec, SweepResult, boundary_estimate, run_sweep
from .surgery import (
    MorphParams,
    SurgeryMesh,
    TwistSpec,
    euler_characteristic,
    limit_circle,
    morph_surface,
    solid_layers,
)

__version__ = "0.1.0"
