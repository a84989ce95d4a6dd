"""Distributed equitable partitioning with power diagrams."""

from .density import GaussianDensity, GridDensity, QuadratureSpec, UniformDensity, density_from_spec, region_measure
from .dynamics import LawParams, StepControl, euler_step, evaluate, get_law
from .errors import (
    CoincidentGenerators,
    EmptyCell,
    EquipartError,
    InitFailed,
    InvalidParams,
    StepFailed,
    UnsupportedDensity,
    ZeroMassRegion,
)
from .geometry import ConvexPolygon, PowerDiagram, PowerGeneratorSet, power_diagram
from .metrics import PartitionMetrics, area_error, isoperimetric_ratio, partition_Q, voronoi_defect

__all__ = [
    "CoincidentGenerators",
    "ConvexPolygon",
    "EmptyCell",
    "EquipartError",
    "GaussianDensity",
    "GridDensity",
    "InitFailed",
    "InvalidParams",
    "LawParams",
    "PartitionMetrics",
    "PowerDiagram",
    "PowerGeneratorSet",
    "QuadratureSpec",
    "StepControl",
    "StepFailed",
    "UniformDensity",
    "UnsupportedDensity",
    "ZeroMassRegion",
    "area_error",
    "density_from_spec",
    "euler_step",
    "evaluate",
    "get_law",
    "isoperimetric_ratio",
    "partition_Q",
    "power_diagram",
    "region_measure",
    "voronoi_defect",
]
