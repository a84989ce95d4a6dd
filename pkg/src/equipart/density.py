"""Density fields and integration of the density over polygons and segments.

Uniform and grid densities are integrated exactly (grid cells are clipped
against the polygon). Smooth densities use a fixed composite rule: each
fan triangle is split into ``s x s`` sub-triangles and a symmetric degree-6
rule is applied on each; segments use composite Gauss-Legendre.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np

from .errors import InvalidParams, ZeroMassRegion
from .geometry import ConvexPolygon, HalfPlane, clip_halfplane, polygon_area, polygon_centroid

ZERO_MASS = 1e-14


@dataclass(frozen=True)
class UniformDensity:
    value: float = 1.0

    def __post_init__(self):
        if not self.value >= 0:
            raise InvalidParams("uniform density must be non-negative")

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.full(pts.shape[:-1], float(self.value))


@dataclass(frozen=True)
class GaussianDensity:
    """``amplitude * exp(-rate * |x - center|^2)``."""

    center: tuple = (0.8, 0.8)
    rate: float = 5.0
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not (self.rate > 0 and self.amplitude > 0):
            raise InvalidParams("gaussian density needs rate > 0 and amplitude > 0")

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        dx = pts[..., 0] - self.center[0]
        dy = pts[..., 1] - self.center[1]
        return self.amplitude * np.exp(-self.rate * (dx * dx + dy * dy))


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Piecewise-constant density on an axis-aligned grid, zero outside it.

    ``values[r][c]`` covers ``[x0 + c*hx, x0 + (c+1)*hx] x [y0 + r*hy, y0 + (r+1)*hy]``.
    """

    origin: tuple
    cell_size: tuple
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 2 or np.any(vals < 0):
            raise InvalidParams("grid values must be a non-negative matrix")
        size = self.cell_size
        if np.isscalar(size):
            size = (size, size)
        size = tuple(float(s) for s in size)
        if min(size) <= 0:
            raise InvalidParams("grid cell size must be positive")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "cell_size", size)
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))

    @property
    def shape(self):
        return self.values.shape

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        c = np.floor((pts[..., 0] - self.origin[0]) / self.cell_size[0]).astype(int)
        r = np.floor((pts[..., 1] - self.origin[1]) / self.cell_size[1]).astype(int)
        rows, cols = self.values.shape
        ok = (r >= 0) & (r < rows) & (c >= 0) & (c < cols)
        out = np.zeros(pts.shape[:-1])
        out[ok] = self.values[r[ok], c[ok]]
        return out

    def cell_box(self, r, c) -> ConvexPolygon:
        x0 = self.origin[0] + c * self.cell_size[0]
        y0 = self.origin[1] + r * self.cell_size[1]
        return ConvexPolygon.box(x0, y0, x0 + self.cell_size[0], y0 + self.cell_size[1])


def density_from_spec(spec: dict):
    """Build a density from its JSON form (``{"type": "uniform" | "gaussian" | "grid", ...}``)."""
    kind = spec.get("type")
    if kind == "uniform":
        return UniformDensity(float(spec.get("value", 1.0)))
    if kind == "gaussian":
        return GaussianDensity(
            tuple(spec.get("center", (0.8, 0.8))),
            float(spec.get("rate", 5.0)),
            float(spec.get("amplitude", 1.0)),
        )
    if kind == "grid":
        return GridDensity(tuple(spec["origin"]), spec["cell_size"], np.asarray(spec["values"], dtype=float))
    raise InvalidParams(f"unknown density type {kind!r}")


def density_to_spec(density) -> dict:
    if isinstance(density, UniformDensity):
        return {"type": "uniform", "value": density.value}
    if isinstance(density, GaussianDensity):
        return {
            "type": "gaussian",
            "center": list(density.center),
            "rate": density.rate,
            "amplitude": density.amplitude,
        }
    if isinstance(density, GridDensity):
        return {
            "type": "grid",
            "origin": list(density.origin),
            "cell_size": list(density.cell_size),
            "values": density.values.tolist(),
        }
    raise InvalidParams(f"cannot serialise density {density!r}")


@dataclass(frozen=True)
class QuadratureSpec:
    """Fixed quadrature settings for smooth densities.

    ``triangle_degree`` is the polynomial exactness of the per-triangle rule and
    ``triangle_subdivisions`` splits every fan triangle into ``s*s`` pieces.
    """

    triangle_degree: int = 6
    triangle_subdivisions: int = 6
    segment_points: int = 8
    segment_subdivisions: int = 4

    def __post_init__(self):
        if self.triangle_degree < 2 or self.segment_points < 2:
            raise InvalidParams("quadrature needs degree >= 2 and at least 2 segment points")
        if self.triangle_subdivisions < 1 or self.segment_subdivisions < 1:
            raise InvalidParams("subdivision counts must be >= 1")


DEFAULT_QUADRATURE = QuadratureSpec()

# Dunavant's 12-point rule, exact for polynomials of degree 6.
_DUNAVANT6 = (
    (0.116786275726379, (0.501426509658179, 0.249286745170910, 0.249286745170910)),
    (0.050844906370207, (0.873821971016996, 0.063089014491502, 0.063089014491502)),
    (0.082851075618374, (0.053145049844817, 0.310352451033784, 0.636502499121399)),
)


def _base_triangle_rule(degree):
    """Barycentric points ``(k, 3)`` and weights summing to one."""
    if degree <= 6:
        bary, wts = [], []
        for w, orbit in _DUNAVANT6:
            for p in sorted(set(permutations(orbit))):
                bary.append(p)
                wts.append(w)
        wts = np.array(wts)
        return np.array(bary), wts / wts.sum()
    # collapsed (Duffy) Gauss product rule; n points per direction is exact to degree 2n - 2
    n = (degree + 3) // 2
    x, w = np.polynomial.legendre.leggauss(n)
    u, wu = (x + 1) / 2, w / 2
    U, V = np.meshgrid(u, u, indexing="ij")
    WU, WV = np.meshgrid(wu, wu, indexing="ij")
    px = U.ravel()
    py = (V * (1 - U)).ravel()
    wts = (2.0 * WU * WV * (1 - U)).ravel()
    bary = np.column_stack([1 - px - py, px, py])
    return bary, wts / wts.sum()


@lru_cache(maxsize=None)
def triangle_rule(degree=6, subdivisions=1):
    """Composite rule on the reference triangle as ``(coords (k, 2), weights (k,))``.

    ``coords`` are the coefficients ``(s, t)`` of the map ``a + s(b - a) + t(c - a)``;
    the weights sum to one (multiply by the triangle area).
    """
    bary, wts = _base_triangle_rule(degree)
    n = subdivisions
    subs = []
    for i in range(n):
        for j in range(n - i):
            subs.append(((i, j), (i + 1, j), (i, j + 1)))
            if i + j < n - 1:
                subs.append(((i + 1, j), (i + 1, j + 1), (i, j + 1)))
    coords, weights = [], []
    for tri in subs:
        corners = np.array(tri, dtype=float) / n
        coords.append(bary @ corners)
        weights.append(wts / (n * n))
    coords = np.concatenate(coords)
    weights = np.concatenate(weights)
    coords.setflags(write=False)
    weights.setflags(write=False)
    return coords, weights


@lru_cache(maxsize=None)
def segment_rule(points=8, subdivisions=1):
    """Composite Gauss-Legendre on ``[0, 1]`` as ``(nodes, weights)``, weights summing to one."""
    x, w = np.polynomial.legendre.leggauss(points)
    x, w = (x + 1) / 2, w / 2
    nodes = np.concatenate([(k + x) / subdivisions for k in range(subdivisions)])
    weights = np.concatenate([w / subdivisions] * subdivisions)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _fan_triangles(poly: ConvexPolygon):
    v = poly.vertices
    if len(v) < 3:
        return np.zeros((0, 3, 2))
    return np.stack([np.repeat(v[:1], len(v) - 2, axis=0), v[1:-1], v[2:]], axis=1)


def _quadrature_moments(tris, owner, n_owners, density, q):
    """Mass and first moments of a batch of triangles, summed per owner."""
    mass = np.zeros(n_owners)
    moment = np.zeros((n_owners, 2))
    if len(tris) == 0:
        return mass, moment
    coords, weights = triangle_rule(q.triangle_degree, q.triangle_subdivisions)
    a = tris[:, 0, :]
    e1 = tris[:, 1, :] - a
    e2 = tris[:, 2, :] - a
    area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    pts = a[:, None, :] + coords[None, :, 0, None] * e1[:, None, :] + coords[None, :, 1, None] * e2[:, None, :]
    vals = density(pts) * weights[None, :]
    tri_mass = area * vals.sum(axis=1)
    tri_moment = area[:, None] * np.einsum("tk,tkd->td", vals, pts)
    np.add.at(mass, owner, tri_mass)
    np.add.at(moment, owner, tri_moment)
    return mass, moment


def _grid_moments(poly: ConvexPolygon, grid: GridDensity):
    if poly.is_empty:
        return 0.0, np.zeros(2)
    v = poly.vertices
    rows, cols = grid.shape
    (x0, y0), (hx, hy) = grid.origin, grid.cell_size
    c_lo = max(0, int(math.floor((v[:, 0].min() - x0) / hx)))
    c_hi = min(cols - 1, int(math.floor((v[:, 0].max() - x0) / hx)))
    r_lo = max(0, int(math.floor((v[:, 1].min() - y0) / hy)))
    r_hi = min(rows - 1, int(math.floor((v[:, 1].max() - y0) / hy)))
    mass = 0.0
    moment = np.zeros(2)
    for r in range(r_lo, r_hi + 1):
        ylo, yhi = y0 + r * hy, y0 + (r + 1) * hy
        band = clip_halfplane(clip_halfplane(poly, HalfPlane((0.0, -1.0), -ylo)), HalfPlane((0.0, 1.0), yhi))
        if band.is_empty:
            continue
        for c in range(c_lo, c_hi + 1):
            val = grid.values[r, c]
            if val == 0.0:
                continue
            xlo, xhi = x0 + c * hx, x0 + (c + 1) * hx
            piece = clip_halfplane(clip_halfplane(band, HalfPlane((-1.0, 0.0), -xlo)), HalfPlane((1.0, 0.0), xhi))
            if piece.is_empty:
                continue
            a = polygon_area(piece)
            mass += val * a
            moment += val * a * polygon_centroid(piece)
    return mass, moment


def polygon_moments(polys, density, q: QuadratureSpec = DEFAULT_QUADRATURE):
    """Masses ``(n,)`` and first moments ``(n, 2)`` of a list of polygons."""
    n = len(polys)
    if isinstance(density, UniformDensity):
        mass = np.zeros(n)
        moment = np.zeros((n, 2))
        for k, p in enumerate(polys):
            if p.is_empty:
                continue
            a = polygon_area(p)
            mass[k] = density.value * a
            moment[k] = mass[k] * polygon_centroid(p)
        return mass, moment
    if isinstance(density, GridDensity):
        mass = np.zeros(n)
        moment = np.zeros((n, 2))
        for k, p in enumerate(polys):
            mass[k], moment[k] = _grid_moments(p, density)
        return mass, moment
    tris, owner = [], []
    for k, p in enumerate(polys):
        t = _fan_triangles(p)
        tris.append(t)
        owner.extend([k] * len(t))
    tris = np.concatenate(tris) if tris else np.zeros((0, 3, 2))
    return _quadrature_moments(tris, np.asarray(owner, dtype=int), n, density, q)


def region_measure(poly: ConvexPolygon, density, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Integral of the density over ``poly`` (0 for the empty polygon)."""
    mass, _ = polygon_moments([poly], density, q)
    return max(float(mass[0]), 0.0)


region_mass = region_measure


def region_centroid(poly: ConvexPolygon, density, q: QuadratureSpec = DEFAULT_QUADRATURE) -> np.ndarray:
    """Density-weighted centroid; raises ``ZeroMassRegion`` for a (numerically) massless region."""
    mass, moment = polygon_moments([poly], density, q)
    if mass[0] <= ZERO_MASS:
        raise ZeroMassRegion(f"region mass {mass[0]:.3e} is below {ZERO_MASS}")
    return moment[0] / mass[0]


def _grid_segment_breaks(p, q, grid: GridDensity):
    ts = [0.0, 1.0]
    for axis in (0, 1):
        d = q[axis] - p[axis]
        if d == 0.0:
            continue
        h = grid.cell_size[axis]
        o = grid.origin[axis]
        lo, hi = sorted((p[axis], q[axis]))
        k0 = int(math.ceil((lo - o) / h))
        k1 = int(math.floor((hi - o) / h))
        for k in range(k0, k1 + 1):
            t = (o + k * h - p[axis]) / d
            if 0.0 < t < 1.0:
                ts.append(t)
    return np.unique(ts)


def segment_moments(segments, bases, density, q: QuadratureSpec = DEFAULT_QUADRATURE):
    """For segments ``(n, 2, 2)`` return ``int lambda ds`` ``(n,)`` and ``int (x - base) lambda ds`` ``(n, 2)``."""
    segments = np.asarray(segments, dtype=float).reshape(-1, 2, 2)
    bases = np.asarray(bases, dtype=float).reshape(-1, 2)
    p = segments[:, 0, :]
    d = segments[:, 1, :] - p
    length = np.hypot(d[:, 0], d[:, 1])
    if isinstance(density, UniformDensity):
        mass = density.value * length
        mid = p + 0.5 * d
        return mass, mass[:, None] * (mid - bases)
    if isinstance(density, GridDensity):
        mass = np.zeros(len(p))
        moment = np.zeros((len(p), 2))
        for k in range(len(p)):
            ts = _grid_segment_breaks(p[k], p[k] + d[k], density)
            for t0, t1 in zip(ts[:-1], ts[1:]):
                val = float(density(p[k] + 0.5 * (t0 + t1) * d[k]))
                piece = val * length[k] * (t1 - t0)
                mass[k] += piece
                moment[k] += piece * (p[k] + 0.5 * (t0 + t1) * d[k] - bases[k])
        return mass, moment
    nodes, weights = segment_rule(q.segment_points, q.segment_subdivisions)
    pts = p[:, None, :] + nodes[None, :, None] * d[:, None, :]
    vals = density(pts) * weights[None, :] * length[:, None]
    mass = vals.sum(axis=1)
    moment = np.einsum("sk,skd->sd", vals, pts - bases[:, None, :])
    return mass, moment


def face_integral(seg, density, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """``int_seg lambda ds`` for a segment given as two endpoints."""
    mass, _ = segment_moments(np.asarray(seg, dtype=float)[None], np.zeros((1, 2)), density, q)
    return float(mass[0])


def face_first_moment(seg, base, density, q: QuadratureSpec = DEFAULT_QUADRATURE) -> np.ndarray:
    """``int_seg (x - base) lambda ds`` as a 2-vector."""
    _, moment = segment_moments(np.asarray(seg, dtype=float)[None], np.asarray(base, dtype=float)[None], density, q)
    return moment[0]
