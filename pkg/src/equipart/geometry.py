"""Convex polygons, power bisectors and power diagrams of convex workspaces.

Cells are built by clipping the workspace against every pairwise power
bisector (O(m^2) half-plane clips). Each edge produced by a clip remembers
which generator created it, so faces and the power-Delaunay neighbour graph
fall out of the construction without any extra geometric search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CoincidentGenerators, InvalidParams

DUPLICATE_TOL = 1e-12
DISTINCT_TOL = 1e-9
FACE_MIN_LENGTH = 1e-10
EMPTY_AREA = 1e-18


@dataclass(frozen=True, eq=False)
class ConvexPolygon:
    """Closed convex polygon stored as a counter-clockwise ``(n, 2)`` array.

    Zero vertices is the empty polygon. Use :meth:`from_points` for untrusted
    input; the bare constructor assumes the vertices are already normalised.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @classmethod
    def from_points(cls, points) -> "ConvexPolygon":
        """Normalise a vertex list: drop duplicates and collinear points, orient CCW.

        Raises ``InvalidParams`` if the points do not describe a convex polygon.
        """
        pts = [tuple(map(float, p)) for p in np.asarray(points, dtype=float).reshape(-1, 2)]
        pts = _drop_duplicates(pts)
        if len(pts) < 3:
            return cls.empty()
        if _signed_area(pts) < 0:
            pts.reverse()
        pts = _drop_collinear(pts)
        if len(pts) < 3 or _signed_area(pts) <= EMPTY_AREA:
            return cls.empty()
        poly = cls(np.array(pts))
        if not poly.is_convex():
            raise InvalidParams("vertices do not form a convex polygon")
        return poly

    @classmethod
    def empty(cls) -> "ConvexPolygon":
        return cls(np.zeros((0, 2)))

    @classmethod
    def box(cls, xmin=0.0, ymin=0.0, xmax=1.0, ymax=1.0) -> "ConvexPolygon":
        return cls(np.array([[xmin, ymin], [xmax, ymin], [xmax, ymax], [xmin, ymax]], dtype=float))

    @property
    def is_empty(self) -> bool:
        return len(self.vertices) == 0

    def __len__(self):
        return len(self.vertices)

    def __repr__(self):
        return f"ConvexPolygon({self.vertices.tolist()!r})"

    def edges(self):
        """Yield consecutive vertex pairs ``(p, q)`` going counter-clockwise."""
        v = self.vertices
        n = len(v)
        for k in range(n):
            yield v[k], v[(k + 1) % n]

    def is_convex(self, tol=1e-12) -> bool:
        v = self.vertices
        n = len(v)
        if n < 3:
            return n == 0
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
        scale = max(1.0, float(np.abs(v).max())) ** 2
        return bool(np.all(cross >= -tol * scale))

    def validate(self):
        """Raise ``ValueError`` if any representation invariant is violated."""
        v = self.vertices
        if self.is_empty:
            return
        if len(v) < 3:
            raise ValueError("non-empty polygon needs at least three vertices")
        if polygon_area(self) <= 0:
            raise ValueError("polygon must be counter-clockwise with positive area")
        if not self.is_convex():
            raise ValueError("polygon is not convex")
        gaps = np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)
        if np.any(gaps <= DUPLICATE_TOL):
            raise ValueError("repeated consecutive vertices")


@dataclass(frozen=True)
class HalfPlane:
    """The set ``{x : normal . x <= offset}`` with a unit normal."""

    normal: tuple
    offset: float

    def __post_init__(self):
        n = tuple(float(c) for c in self.normal)
        norm = math.hypot(*n)
        if abs(norm - 1.0) > 1e-12:
            raise InvalidParams(f"half-plane normal must be unit length, got {norm!r}")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def from_normal(cls, normal, offset) -> "HalfPlane":
        """Build from any non-zero normal, rescaling the offset accordingly."""
        nx, ny = map(float, normal)
        norm = math.hypot(nx, ny)
        if norm == 0.0:
            raise InvalidParams("zero normal")
        return cls((nx / norm, ny / norm), float(offset) / norm)

    def signed_distance(self, x) -> float:
        return self.normal[0] * float(x[0]) + self.normal[1] * float(x[1]) - self.offset

    def contains(self, x, tol=0.0) -> bool:
        return self.signed_distance(x) <= tol


@dataclass(frozen=True)
class PowerGeneratorSet:
    """Generator positions ``g_i`` and weights ``w_i`` (the state ``G_W``)."""

    positions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        g = np.array(self.positions, dtype=float).reshape(-1, 2)
        w = np.array(self.weights, dtype=float).reshape(-1)
        if len(g) != len(w):
            raise InvalidParams(f"{len(g)} positions but {len(w)} weights")
        if len(g) < 1:
            raise InvalidParams("need at least one generator")
        g.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "positions", g)
        object.__setattr__(self, "weights", w)

    @classmethod
    def voronoi(cls, positions) -> "PowerGeneratorSet":
        positions = np.asarray(positions, dtype=float)
        return cls(positions, np.zeros(len(positions)))

    @property
    def m(self) -> int:
        return len(self.weights)

    def with_weights(self, weights) -> "PowerGeneratorSet":
        return PowerGeneratorSet(self.positions, weights)

    def min_distance(self) -> float:
        if self.m < 2:
            return math.inf
        d = self.positions[:, None, :] - self.positions[None, :, :]
        dist = np.hypot(d[..., 0], d[..., 1])
        dist[np.diag_indices(self.m)] = math.inf
        return float(dist.min())

    def validate(self, region: ConvexPolygon | None = None):
        """Check distinctness and, if a region is given, containment."""
        if self.min_distance() <= DISTINCT_TOL:
            raise CoincidentGenerators("generator positions are not pairwise distinct")
        if region is not None:
            for i, g in enumerate(self.positions):
                if not point_in(region, g, tol=1e-12):
                    raise InvalidParams(f"generator {i} at {g.tolist()} lies outside the region")


@dataclass(frozen=True)
class Face:
    """Shared edge ``Delta_ij`` between cells ``i < j``; ``p -> q`` runs CCW around cell i."""

    i: int
    j: int
    p: np.ndarray
    q: np.ndarray

    @property
    def length(self) -> float:
        return float(math.hypot(*(self.q - self.p)))


@dataclass(frozen=True, eq=False)
class PowerDiagram:
    region: ConvexPolygon
    generators: PowerGeneratorSet
    cells: list
    faces: list
    neighbors: list
    _face_index: dict = field(repr=False, default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.cells)

    def face(self, i, j) -> Face | None:
        """Face shared by cells ``i`` and ``j`` (either order), or ``None``."""
        return self._face_index.get((min(i, j), max(i, j)))

    def n_pairs(self) -> int:
        return len(self.faces)


# -- internal clipping on plain Python lists ---------------------------------


def _signed_area(pts) -> float:
    s = 0.0
    n = len(pts)
    for k in range(n):
        x0, y0 = pts[k]
        x1, y1 = pts[(k + 1) % n]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def _drop_duplicates(pts, labels=None):
    pts = list(pts)
    labels = list(labels) if labels is not None else None
    changed = True
    while changed and len(pts) > 1:
        changed = False
        n = len(pts)
        for k in range(n):
            a = pts[k]
            b = pts[(k + 1) % n]
            if abs(a[0] - b[0]) <= DUPLICATE_TOL and abs(a[1] - b[1]) <= DUPLICATE_TOL:
                # the zero-length edge k -> k+1 disappears; vertex k+1 keeps its label
                del pts[k]
                if labels is not None:
                    del labels[k]
                changed = True
                break
    if labels is None:
        return pts
    return pts, labels


def _drop_collinear(pts, labels=None):
    pts = list(pts)
    labels = list(labels) if labels is not None else None
    k = 0
    while len(pts) >= 3 and k < len(pts):
        n = len(pts)
        a, b, c = pts[k - 1], pts[k], pts[(k + 1) % n]
        if labels is not None:
            redundant = labels[k - 1] == labels[k]
        else:
            ux, uy = b[0] - a[0], b[1] - a[1]
            vx, vy = c[0] - b[0], c[1] - b[1]
            cross = ux * vy - uy * vx
            redundant = abs(cross) <= 1e-14 * math.hypot(ux, uy) * math.hypot(vx, vy) and (
                ux * vx + uy * vy > 0
            )
        if redundant:
            del pts[k]
            if labels is not None:
                del labels[k]
            k = max(k - 1, 0)
        else:
            k += 1
    if labels is None:
        return pts
    return pts, labels


def _clip(pts, labels, nx, ny, c, label):
    """Clip a labelled CCW vertex list against ``nx*x + ny*y <= c``.

    ``labels[k]`` tags the edge from vertex k to vertex k+1; the new edge lying
    on the clip line is tagged ``label``.
    """
    s = [nx * x + ny * y - c for x, y in pts]
    if max(s) <= 0.0:
        return pts, labels
    if min(s) > 0.0:
        return [], []
    out, out_labels = [], []
    n = len(pts)
    for k in range(n):
        sp, sq = s[k], s[(k + 1) % n]
        p, q = pts[k], pts[(k + 1) % n]
        if sp <= 0.0:
            out.append(p)
            out_labels.append(labels[k])
            if sq > 0.0:
                t = sp / (sp - sq)
                out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
                out_labels.append(label)
        elif sq <= 0.0:
            t = sp / (sp - sq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
            out_labels.append(labels[k])
    out, out_labels = _drop_duplicates(out, out_labels)
    if len(out) >= 3:
        out, out_labels = _drop_collinear(out, out_labels)
    if len(out) < 3 or _signed_area(out) <= EMPTY_AREA:
        return [], []
    return out, out_labels


def _as_lists(poly: ConvexPolygon):
    pts = [(float(x), float(y)) for x, y in poly.vertices]
    return pts, [-(k + 1) for k in range(len(pts))]


# -- public operations -------------------------------------------------------


def clip_halfplane(poly: ConvexPolygon, h: HalfPlane) -> ConvexPolygon:
    """Intersect ``poly`` with the half-plane ``h``; may return the empty polygon."""
    if poly.is_empty:
        return poly
    pts, labels = _as_lists(poly)
    out, _ = _clip(pts, labels, h.normal[0], h.normal[1], h.offset, 0)
    if not out:
        return ConvexPolygon.empty()
    return ConvexPolygon(np.array(out))


def power_bisector(gi, wi, gj, wj) -> HalfPlane:
    """Half-plane where ``(gi, wi)`` dominates ``(gj, wj)`` in power distance.

    ``(gj - gi) . x <= (|gj|^2 - |gi|^2 + wi - wj) / 2``, normalised to a unit normal.
    """
    gix, giy = float(gi[0]), float(gi[1])
    gjx, gjy = float(gj[0]), float(gj[1])
    dx, dy = gjx - gix, gjy - giy
    gamma = math.hypot(dx, dy)
    if gamma <= DISTINCT_TOL:
        raise CoincidentGenerators(f"generators at {(gix, giy)} and {(gjx, gjy)} coincide")
    c = 0.5 * (gjx * gjx + gjy * gjy - gix * gix - giy * giy + float(wi) - float(wj))
    return HalfPlane((dx / gamma, dy / gamma), c / gamma)


def bisector_point(gi, wi, gj, wj) -> np.ndarray:
    """Point where the power bisector crosses the line through ``gi`` and ``gj``."""
    gi = np.asarray(gi, dtype=float)
    gj = np.asarray(gj, dtype=float)
    d = gj - gi
    gamma2 = float(d @ d)
    if gamma2 <= DISTINCT_TOL**2:
        raise CoincidentGenerators("coincident generators have no bisector")
    t = 0.5 + (float(wi) - float(wj)) / (2.0 * gamma2)
    return gi + t * d


def power_diagram(region: ConvexPolygon, gens: PowerGeneratorSet) -> PowerDiagram:
    """Power diagram of ``region`` for the given generators.

    Cells may be empty and a generator may lie outside its own cell. Faces
    shorter than ``FACE_MIN_LENGTH`` do not create neighbour links.
    """
    g = gens.positions
    w = gens.weights
    m = gens.m
    if m > 1 and gens.min_distance() <= DISTINCT_TOL:
        raise CoincidentGenerators("generator positions are not pairwise distinct")
    base_pts, base_labels = _as_lists(region)
    gx = [float(v) for v in g[:, 0]]
    gy = [float(v) for v in g[:, 1]]
    wl = [float(v) for v in w]
    sq = [x * x + y * y for x, y in zip(gx, gy)]

    cells_raw = []
    for i in range(m):
        pts, labels = base_pts, base_labels
        # nearest generators first so the cell shrinks early and later clips short-circuit
        order = sorted(
            (j for j in range(m) if j != i),
            key=lambda j: (gx[j] - gx[i]) ** 2 + (gy[j] - gy[i]) ** 2 - wl[j],
        )
        for j in order:
            dx, dy = gx[j] - gx[i], gy[j] - gy[i]
            gamma = math.hypot(dx, dy)
            c = 0.5 * (sq[j] - sq[i] + wl[i] - wl[j])
            pts, labels = _clip(pts, labels, dx / gamma, dy / gamma, c / gamma, j)
            if not pts:
                break
        cells_raw.append((pts, labels))

    cells = [ConvexPolygon(np.array(p)) if p else ConvexPolygon.empty() for p, _ in cells_raw]

    edge_maps = []
    for pts, labels in cells_raw:
        n = len(pts)
        edge_maps.append({lab: (pts[k], pts[(k + 1) % n]) for k, lab in enumerate(labels) if lab >= 0})

    faces = []
    index = {}
    neighbors = [[] for _ in range(m)]
    for i in range(m):
        for j in range(i + 1, m):
            seg = edge_maps[i].get(j)
            if seg is None:
                back = edge_maps[j].get(i)
                if back is None:
                    continue
                seg = (back[1], back[0])
            p, q = np.array(seg[0]), np.array(seg[1])
            if math.hypot(*(q - p)) <= FACE_MIN_LENGTH:
                continue
            face = Face(i, j, p, q)
            faces.append(face)
            index[(i, j)] = face
            neighbors[i].append(j)
            neighbors[j].append(i)

    return PowerDiagram(
        region=region,
        generators=gens,
        cells=cells,
        faces=faces,
        neighbors=[tuple(sorted(n)) for n in neighbors],
        _face_index=index,
    )


def polygon_area(poly: ConvexPolygon) -> float:
    v = poly.vertices
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_perimeter(poly: ConvexPolygon) -> float:
    v = poly.vertices
    if len(v) < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)))


def polygon_diameter(poly: ConvexPolygon) -> float:
    """Largest vertex-to-vertex distance, which is the diameter of a convex polygon."""
    v = poly.vertices
    if len(v) < 2:
        return 0.0
    d = v[:, None, :] - v[None, :, :]
    return float(np.sqrt((d**2).sum(axis=-1)).max())


def diameter_pair(poly: ConvexPolygon):
    """The two vertices realising the diameter."""
    v = poly.vertices
    d = ((v[:, None, :] - v[None, :, :]) ** 2).sum(axis=-1)
    a, b = np.unravel_index(np.argmax(d), d.shape)
    return v[a].copy(), v[b].copy()


def polygon_centroid(poly: ConvexPolygon) -> np.ndarray:
    """Area centroid (uniform density)."""
    v = poly.vertices
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * cross.sum()
    if a <= 0:
        raise InvalidParams("centroid of an empty polygon")
    return np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6.0 * a)


def point_in(poly: ConvexPolygon, x, tol=1e-12) -> bool:
    """Closed point-in-convex-polygon test with an absolute tolerance."""
    v = poly.vertices
    if len(v) < 3:
        return False
    x = np.asarray(x, dtype=float)
    e = np.roll(v, -1, axis=0) - v
    rel = x - v
    cross = e[:, 0] * rel[:, 1] - e[:, 1] * rel[:, 0]
    lengths = np.hypot(e[:, 0], e[:, 1])
    return bool(np.all(cross >= -tol * lengths))


def points_in(poly: ConvexPolygon, pts, tol=0.0) -> np.ndarray:
    """Vectorised :func:`point_in` for an ``(n, 2)`` array of points."""
    pts = np.asarray(pts, dtype=float)
    v = poly.vertices
    if len(v) < 3:
        return np.zeros(len(pts), dtype=bool)
    inside = np.ones(len(pts), dtype=bool)
    for p, q in poly.edges():
        ex, ey = q - p
        cross = ex * (pts[:, 1] - p[1]) - ey * (pts[:, 0] - p[0])
        inside &= cross >= -tol * math.hypot(ex, ey)
    return inside


def _closest_on_segment(p, q, x):
    d = q - p
    dd = float(d @ d)
    if dd == 0.0:
        return p.copy()
    t = min(1.0, max(0.0, float((x - p) @ d) / dd))
    return p + t * d


def project_to_polygon(poly: ConvexPolygon, x) -> np.ndarray:
    """Closest point of ``poly`` to ``x`` (``x`` itself when already inside)."""
    x = np.asarray(x, dtype=float)
    if point_in(poly, x, tol=0.0):
        return x.copy()
    best, best_d = None, math.inf
    for p, q in poly.edges():
        c = _closest_on_segment(p, q, x)
        d = float(np.hypot(*(c - x)))
        if d < best_d:
            best, best_d = c, d
    return best


def distance_to_boundary(poly: ConvexPolygon, x) -> float:
    """Distance from ``x`` to the boundary of ``poly``; 0 if ``x`` is outside or the polygon is empty."""
    if poly.is_empty or not point_in(poly, x, tol=0.0):
        return 0.0
    x = np.asarray(x, dtype=float)
    return min(float(np.hypot(*(_closest_on_segment(p, q, x) - x))) for p, q in poly.edges())


def regular_polygon(n, circumradius=1.0, center=(0.0, 0.0), phase=0.0) -> ConvexPolygon:
    k = np.arange(n)
    ang = phase + 2.0 * np.pi * k / n
    pts = np.column_stack([np.cos(ang), np.sin(ang)]) * circumradius + np.asarray(center, dtype=float)
    return ConvexPolygon(pts)
