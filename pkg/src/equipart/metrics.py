"""Partition quality measures: area error, Voronoi defect and isoperimetric ratio."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .density import DEFAULT_QUADRATURE, QuadratureSpec, polygon_moments
from .geometry import ConvexPolygon, PowerDiagram, PowerGeneratorSet, polygon_area, polygon_perimeter


def cell_measures(diagram: PowerDiagram, density, q: QuadratureSpec = DEFAULT_QUADRATURE) -> np.ndarray:
    mass, _ = polygon_moments(diagram.cells, density, q)
    return np.maximum(mass, 0.0)


def area_error(diagram: PowerDiagram, density, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Largest minus smallest cell measure. Empty cells count with measure 0."""
    mass = cell_measures(diagram, density, q)
    return float(mass.max() - mass.min())


def voronoi_defect(diagram: PowerDiagram, gens: PowerGeneratorSet | None = None) -> float:
    """Average displacement of the bisector crossings from the segment midpoints.

    For a neighbour pair the bisector crosses the line through ``g_i`` and
    ``g_j`` at distance ``|w_i - w_j| / (2 gamma)`` from the midpoint; the term
    divides this by ``gamma / 2``. Crossings outside the segment are kept as
    they are, so a term may exceed 1. Returns 0 when there are no neighbours.
    """
    gens = gens if gens is not None else diagram.generators
    if not diagram.faces:
        return 0.0
    g, w = gens.positions, gens.weights
    I = np.array([f.i for f in diagram.faces])
    J = np.array([f.j for f in diagram.faces])
    gamma2 = np.sum((g[J] - g[I]) ** 2, axis=1)
    # the double sum over ordered pairs counts each face twice, hence 1/(2N) * 2
    return float(np.mean(np.abs(w[I] - w[J]) / gamma2))


def isoperimetric_ratio(poly: ConvexPolygon) -> float:
    """``4 pi area / perimeter^2``; 1 for a disc, ``pi / (n tan(pi/n))`` for a regular n-gon."""
    if poly.is_empty:
        raise ValueError("isoperimetric ratio of an empty polygon")
    p = polygon_perimeter(poly)
    return 4.0 * math.pi * polygon_area(poly) / (p * p)


def regular_ngon_Q(n: int) -> float:
    return math.pi / (n * math.tan(math.pi / n))


def cell_Q(diagram: PowerDiagram) -> np.ndarray:
    """Per-cell ratios, NaN for empty cells."""
    return np.array([np.nan if c.is_empty else isoperimetric_ratio(c) for c in diagram.cells])


def partition_Q(diagram: PowerDiagram) -> float:
    """Mean isoperimetric ratio over the nonempty cells."""
    q = cell_Q(diagram)
    n_empty = int(np.isnan(q).sum())
    if n_empty:
        warnings.warn(f"{n_empty} empty cell(s) excluded from Q", RuntimeWarning, stacklevel=2)
    if n_empty == len(q):
        return float("nan")
    return float(np.nanmean(q))


@dataclass(frozen=True, eq=False)
class PartitionMetrics:
    area_error: float
    voronoi_defect: float
    Q: float
    HV: float
    measures: np.ndarray
    cell_Q: np.ndarray

    @classmethod
    def of(cls, diagram: PowerDiagram, density, q: QuadratureSpec = DEFAULT_QUADRATURE, measures=None):
        if measures is None:
            measures = cell_measures(diagram, density, q)
        measures = np.asarray(measures, dtype=float)
        cq = cell_Q(diagram)
        with np.errstate(divide="ignore"):
            hv = float(np.sum(1.0 / measures))
        return cls(
            area_error=float(measures.max() - measures.min()),
            voronoi_defect=voronoi_defect(diagram),
            Q=float(np.nanmean(cq)) if np.any(~np.isnan(cq)) else float("nan"),
            HV=hv,
            measures=measures,
            cell_Q=cq,
        )
