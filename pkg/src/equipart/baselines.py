"""Centralised equitable partitions and the constructive existence results.

Slicing and sweeping are the leader-election style baselines. The unimodal
construction places equal-weight generators on a line so that their Voronoi
cells are equitable, and the 1-D checker decides whether an equitable
Voronoi partition of an interval exists at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .density import QuadratureSpec, UniformDensity, polygon_moments, region_measure
from .errors import InvalidParams, UnsupportedDensity
from .geometry import (
    ConvexPolygon,
    HalfPlane,
    clip_halfplane,
    diameter_pair,
    distance_to_boundary,
    polygon_centroid,
)

BISECT_TOL = 1e-12
# the equitability checks here are tighter than what the dynamics need
FINE_QUADRATURE = QuadratureSpec(triangle_subdivisions=8)


def _bisect(f, lo, hi, target, tol=BISECT_TOL):
    """Smallest-bracket root of the non-decreasing ``f(s) = target`` on ``[lo, hi]``."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _unit(direction):
    d = np.asarray(direction, dtype=float)
    n = math.hypot(*d)
    if n == 0:
        raise InvalidParams("direction must be non-zero")
    return d / n


def _slab(poly, d, lo, hi):
    """``poly`` intersected with ``{lo <= d.x <= hi}``; ``None`` skips a side."""
    out = poly
    if hi is not None:
        out = clip_halfplane(out, HalfPlane(tuple(d), hi))
    if lo is not None and not out.is_empty:
        out = clip_halfplane(out, HalfPlane(tuple(-d), -lo))
    return out


def _measure(poly, density, q):
    if poly.is_empty:
        return 0.0
    return float(polygon_moments([poly], density, q)[0][0])


# -- slicing -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SlicedPartition:
    direction: np.ndarray
    offsets: np.ndarray
    cells: list

    @property
    def m(self):
        return len(self.cells)


def slice_partition(A: ConvexPolygon, density, m: int, direction=(1.0, 0.0), q: QuadratureSpec = FINE_QUADRATURE):
    """Cut ``A`` by parallel lines normal to ``direction`` into ``m`` slabs of equal measure."""
    if m < 1:
        raise InvalidParams("m must be at least 1")
    d = _unit(direction)
    proj = A.vertices @ d
    smin, smax = float(proj.min()), float(proj.max())
    total = region_measure(A, density, q)
    below = lambda s: _measure(_slab(A, d, None, s), density, q)  # noqa: E731
    offsets = []
    lo = smin
    for k in range(1, m):
        s = _bisect(below, lo, smax, k * total / m)
        offsets.append(s)
        lo = s
    bounds = [None] + offsets + [None]
    cells = [_slab(A, d, bounds[k], bounds[k + 1]) for k in range(m)]
    return SlicedPartition(direction=d, offsets=np.array(offsets), cells=cells)


# -- sweeping ----------------------------------------------------------------


def _wedge(A, pivot, a, b):
    """``A`` intersected with the wedge swept counter-clockwise from angle ``a`` to ``b`` (``b - a <= pi``)."""
    p = np.asarray(pivot, dtype=float)
    ua = np.array([math.cos(a), math.sin(a)])
    ub = np.array([math.cos(b), math.sin(b)])
    # left of ray a: cross(ua, x - p) >= 0, i.e. (uy, -ux).x <= (uy, -ux).p
    na = np.array([ua[1], -ua[0]])
    nb = np.array([-ub[1], ub[0]])
    out = clip_halfplane(A, HalfPlane(tuple(na), float(na @ p)))
    if not out.is_empty:
        out = clip_halfplane(out, HalfPlane(tuple(nb), float(nb @ p)))
    return out


def _sector_pieces(A, pivot, a, b):
    """Convex pieces of the sector from ``a`` to ``b``; widths above pi are split."""
    width = b - a
    if width <= 0:
        return ()
    n = max(1, math.ceil(width / (math.pi / 2)))
    cuts = np.linspace(a, b, n + 1)
    pieces = [_wedge(A, pivot, cuts[k], cuts[k + 1]) for k in range(n)]
    return tuple(p for p in pieces if not p.is_empty)


def sweep_partition(
    A: ConvexPolygon,
    density,
    m: int,
    pivot,
    start_angle: float = 0.0,
    q: QuadratureSpec = FINE_QUADRATURE,
):
    """Sweep a ray around ``pivot`` from ``start_angle``, cutting a cell each time ``lambda_A / m`` is enclosed.

    Returns ``(angles, cells)``. Each cell is a tuple of convex pieces since a
    sector wider than a half-turn is not convex.
    """
    if m < 1:
        raise InvalidParams("m must be at least 1")
    pivot = np.asarray(pivot, dtype=float)
    if distance_to_boundary(A, pivot) <= 0.0:
        raise InvalidParams("pivot must lie strictly inside the region")
    a0 = float(start_angle)
    total = region_measure(A, density, q)

    def swept(theta):
        return sum(_measure(p, density, q) for p in _sector_pieces(A, pivot, a0, a0 + theta))

    angles = [0.0]
    for k in range(1, m):
        angles.append(_bisect(swept, angles[-1], 2.0 * math.pi, k * total / m))
    angles.append(2.0 * math.pi)
    cells = [_sector_pieces(A, pivot, a0 + angles[k], a0 + angles[k + 1]) for k in range(m)]
    return np.array(angles), cells


# -- equitable Voronoi for constant densities --------------------------------


@dataclass(frozen=True, eq=False)
class UnimodalVoronoi:
    direction: np.ndarray
    base: np.ndarray
    s: np.ndarray
    t: np.ndarray
    kappa: int
    positions: np.ndarray

    @property
    def contained(self) -> bool:
        """Whether every ``t_i`` lies in its own interval ``[s_{i-1}, s_i]``."""
        return bool(np.all(self.t >= self.s[:-1] - 1e-12) and np.all(self.t <= self.s[1:] + 1e-12))


def unimodal_voronoi(A: ConvexPolygon, m: int, direction=None, density=None, q: QuadratureSpec = FINE_QUADRATURE):
    """Collinear equal-weight generators whose Voronoi cells are equitable.

    The slab quantiles ``s_0 < ... < s_m`` split ``A`` along ``direction`` into
    equal measures. Starting from the midpoint of the shortest interval, the
    remaining abscissae follow by reflection through the quantiles, so each
    consecutive midpoint is a quantile. Generators sit on the line through a
    base point: a diameter endpoint when ``direction`` is ``None`` (the line is
    then the diameter), otherwise the centroid of ``A``.
    """
    if density is not None and not isinstance(density, UniformDensity):
        raise UnsupportedDensity("the construction needs a constant density")
    if m < 1:
        raise InvalidParams("m must be at least 1")
    if direction is None:
        p0, p1 = diameter_pair(A)
        d = _unit(p1 - p0)
        base = p0
    else:
        d = _unit(direction)
        base = polygon_centroid(A)
    dens = UniformDensity()
    proj = A.vertices @ d
    smin, smax = float(proj.min()), float(proj.max())
    total = region_measure(A, dens, q)
    below = lambda s: _measure(_slab(A, d, None, s), dens, q)  # noqa: E731
    s = [smin]
    for k in range(1, m):
        s.append(_bisect(below, s[-1], smax, k * total / m))
    s.append(smax)
    s = np.array(s)
    lengths = np.diff(s)
    kappa = int(np.argmin(lengths))
    t = np.empty(m)
    t[kappa] = 0.5 * (s[kappa] + s[kappa + 1])
    for i in range(kappa, m - 1):
        t[i + 1] = 2.0 * s[i + 1] - t[i]
    for i in range(kappa, 0, -1):
        t[i - 1] = 2.0 * s[i] - t[i]
    # keep the base's component across d, replace the component along d
    perp = base - (base @ d) * d
    positions = perp[None, :] + t[:, None] * d[None, :]
    return UnimodalVoronoi(direction=d, base=base, s=s, t=t, kappa=kappa, positions=positions)


# -- the 1-D existence problem -----------------------------------------------


@dataclass(frozen=True)
class OneDDensity:
    """Piecewise-constant density on ``[breaks[0], breaks[-1]]``."""

    breaks: tuple
    values: tuple

    def __post_init__(self):
        b = tuple(float(x) for x in self.breaks)
        v = tuple(float(x) for x in self.values)
        if len(b) != len(v) + 1 or len(v) == 0:
            raise InvalidParams("need one more breakpoint than values")
        if any(b1 <= b0 for b0, b1 in zip(b, b[1:])):
            raise InvalidParams("breakpoints must increase")
        if any(x < 0 for x in v):
            raise InvalidParams("density values must be non-negative")
        if sum(x * (b1 - b0) for x, b0, b1 in zip(v, b, b[1:])) <= 0:
            raise InvalidParams("total mass must be positive")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", v)

    @classmethod
    def uniform(cls, a=0.0, b=1.0):
        return cls((a, b), (1.0,))

    @property
    def total(self) -> float:
        return self.mass(self.breaks[0], self.breaks[-1])

    def mass(self, a, b) -> float:
        out = 0.0
        for x, b0, b1 in zip(self.values, self.breaks, self.breaks[1:]):
            lo, hi = max(a, b0), min(b, b1)
            if hi > lo:
                out += x * (hi - lo)
        return out

    def quantile(self, p):
        """Leftmost ``x`` with cumulative mass ``p * total``, and whether it is unique."""
        target = p * self.total
        acc = 0.0
        for x, b0, b1 in zip(self.values, self.breaks, self.breaks[1:]):
            seg = x * (b1 - b0)
            if seg > 0 and acc + seg >= target:
                point = b0 + (target - acc) / x
                # a zero-density stretch right after an exact boundary hit leaves it ambiguous
                unique = not (point == b1 and self._zero_after(b1))
                return point, unique
            acc += seg
        return self.breaks[-1], True

    def _zero_after(self, x):
        for v, b0 in zip(self.values, self.breaks):
            if b0 == x:
                return v == 0.0
        return False


@dataclass(frozen=True)
class Conflict:
    """Two cell constraints that no common ``g_1`` satisfies.

    ``kind`` is ``"difference"`` when ``g_j - g_i`` is forced to ``value`` and
    ``"sum"`` when ``g_i + g_j`` is. ``allowed`` is the range the two cells
    permit for that same expression. Indices are 1-based.
    """

    i: int
    j: int
    kind: str
    value: float
    allowed: tuple

    def describe(self) -> str:
        expr = f"g{self.j} - g{self.i}" if self.kind == "difference" else f"g{self.i} + g{self.j}"
        lo, hi = self.allowed
        return f"{expr} = {self.value:.6g} but the cells allow [{lo:.6g}, {hi:.6g}]"


@dataclass(frozen=True)
class OneDCheck:
    feasible: bool
    b: tuple
    g: tuple | None
    g1_range: tuple
    conflicts: tuple = ()
    degenerate: tuple = field(default=())


def oned_equitable_voronoi_check(rho: OneDDensity, m: int) -> OneDCheck:
    """Decide whether ``m`` generators on the line have an equitable Voronoi partition.

    The boundaries ``b_i`` are the mass quantiles. Each boundary is the
    midpoint of its two generators, so ``g_i = a_i + (-1)^(i+1) g_1`` with
    fixed offsets ``a_i``; requiring ``g_i`` inside ``[b_{i-1}, b_i]`` bounds
    ``g_1`` to an interval, and the partition exists iff the intervals meet.
    """
    if m < 2:
        raise InvalidParams("m must be at least 2")
    b = [rho.breaks[0]]
    degenerate = []
    for k in range(1, m):
        x, unique = rho.quantile(k / m)
        b.append(x)
        if not unique:
            degenerate.append(k)
    b.append(rho.breaks[-1])
    b = np.array(b)
    a = np.zeros(m)
    sign = np.ones(m)
    for i in range(1, m):
        a[i] = 2.0 * b[i] - a[i - 1]
        sign[i] = -sign[i - 1]
    # b_{i-1} <= a_i + sign_i g1 <= b_i, 0-based i
    lo_i = np.where(sign > 0, b[:-1] - a, a - b[1:])
    hi_i = np.where(sign > 0, b[1:] - a, a - b[:-1])
    lo, hi = float(lo_i.max()), float(hi_i.min())
    if lo <= hi:
        g1 = 0.5 * (lo + hi)
        g = tuple(float(x) for x in a + sign * g1)
        return OneDCheck(True, tuple(float(x) for x in b), g, (lo, hi), (), tuple(degenerate))
    conflicts = []
    for i in range(m):
        for j in range(i + 1, m):
            if lo_i[i] > hi_i[j] or lo_i[j] > hi_i[i]:
                if sign[i] == sign[j]:
                    kind, value = "difference", float(a[j] - a[i])
                    allowed = (float(b[j] - b[i + 1]), float(b[j + 1] - b[i]))
                else:
                    kind, value = "sum", float(a[i] + a[j])
                    allowed = (float(b[i] + b[j]), float(b[i + 1] + b[j + 1]))
                conflicts.append(Conflict(i + 1, j + 1, kind, value, allowed))
    return OneDCheck(False, tuple(float(x) for x in b), None, (lo, hi), tuple(conflicts), tuple(degenerate))


def figure4_density() -> OneDDensity:
    """A density of the Fig. 4 shape: heavy ends, light middle.

    With ``m = 5`` its quantiles are ``(0.1, 0.2, 0.8, 0.9)``, forcing
    ``g4 - g2 = 2 (b3 - b2) = 1.2`` while the cells confine ``g2`` to
    ``[0.1, 0.2]`` and ``g4`` to ``[0.8, 0.9]``.
    """
    return OneDDensity((0.0, 0.2, 0.8, 1.0), (2.0, 1.0 / 3.0, 2.0))
