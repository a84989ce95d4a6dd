"""Locational cost, its gradients, the control laws and time stepping.

Every law is computed from a :class:`Snapshot`, an immutable evaluation of
the power diagram, cell masses, centroids and gradients at one state. An
agent's control reads only its own cell, its power-Delaunay neighbours and
the faces it shares with them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np

from .density import DEFAULT_QUADRATURE, ZERO_MASS, QuadratureSpec, polygon_moments, region_measure, segment_moments
from .errors import CoincidentGenerators, EmptyCell, InvalidParams, StepFailed
from .geometry import (
    ConvexPolygon,
    PowerDiagram,
    PowerGeneratorSet,
    distance_to_boundary,
    point_in,
    polygon_diameter,
    power_diagram,
    project_to_polygon,
)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class LawParams:
    """Gains of the control laws.

    ``None`` for ``Delta``, ``delta`` or ``eps3`` means "derive from the region
    diameter" (``0.1 D``, ``Delta / 4`` and ``0.05 D``); see :meth:`resolved`.
    """

    alpha: float = 1e-3
    beta_theta: float = 1000.0
    Delta: float | None = None
    delta: float | None = None
    eps1: float = 1e-4
    eps2: float = 1e-3
    eps3: float | None = None
    target_fractions: tuple | None = None

    def __post_init__(self):
        if self.target_fractions is not None:
            object.__setattr__(self, "target_fractions", tuple(float(b) for b in self.target_fractions))

    def resolved(self, region: ConvexPolygon) -> "LawParams":
        diam = polygon_diameter(region)
        Delta = self.Delta if self.Delta is not None else 0.1 * diam
        delta = self.delta if self.delta is not None else Delta / 4.0
        eps3 = self.eps3 if self.eps3 is not None else 0.05 * diam
        out = replace(self, Delta=float(Delta), delta=float(delta), eps3=float(eps3))
        out.check()
        return out

    def check(self):
        if not self.alpha > 0 or not self.beta_theta > 0:
            raise InvalidParams("alpha and beta_theta must be positive")
        if self.Delta is not None and self.delta is not None and not 0 < self.delta < self.Delta:
            raise InvalidParams("need 0 < delta < Delta")
        if not 0 < self.eps1 < self.eps2:
            raise InvalidParams("need 0 < eps1 < eps2")
        if self.eps3 is not None and not self.eps3 > 0:
            raise InvalidParams("eps3 must be positive")
        if self.target_fractions is not None:
            b = np.asarray(self.target_fractions)
            if np.any(b <= 0) or np.any(b >= 1) or abs(b.sum() - 1.0) > 1e-12:
                raise InvalidParams("target fractions must lie in (0, 1) and sum to 1")


# -- scalar gains ------------------------------------------------------------


def sat(a, b, x) -> float:
    """Linear ramp from 0 at ``a`` to 1 at ``b``."""
    if not a < b:
        raise InvalidParams(f"sat needs a < b, got a={a}, b={b}")
    if x > b:
        return 1.0
    if x >= a:
        return (x - a) / (b - a)
    return 0.0


def theta(beta_theta, x) -> float:
    """Smooth gate: 0 for ``x <= 0``, ``exp(-1 / (beta x)^2)`` otherwise."""
    if x <= 0.0:
        return 0.0
    t = beta_theta * x
    t2 = t * t
    if t2 == 0.0:
        return 0.0
    return math.exp(-1.0 / t2)


def psi(rho, angle, Delta, delta) -> float:
    """Collision-avoidance gain for a neighbour at distance ``rho`` seen at ``angle``.

    Angles in ``[0, pi)`` mean the motion has a component toward the neighbour.
    """
    if rho > Delta * (1 + 1e-12) or rho < 0:
        raise InvalidParams(f"psi is defined for 0 <= rho <= Delta, got rho={rho}")
    s = math.sin(angle)
    approaching = 0.0 <= angle < math.pi
    if rho > delta:
        r = (rho - delta) / (Delta - delta)
        return r if approaching else r * (1.0 + s) - s
    return 0.0 if approaching else -(rho / delta) * s


def collision_angle(gi, gj, v) -> float:
    """Angle in ``[0, 2 pi)`` of ``v`` in the frame whose y-axis points from ``gi`` to ``gj``."""
    ux, uy = float(gj[0]) - float(gi[0]), float(gj[1]) - float(gi[1])
    n = math.hypot(ux, uy)
    if n == 0.0:
        raise CoincidentGenerators("collision angle of coincident generators")
    ux, uy = ux / n, uy / n
    vx, vy = float(v[0]), float(v[1])
    if vx == 0.0 and vy == 0.0:
        return 1.5 * math.pi
    along = vx * ux + vy * uy
    across = vx * uy - vy * ux
    return math.atan2(along, across) % TWO_PI


# -- evaluation of a state ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class GradientBundle:
    dH_dw: np.ndarray
    dH_dg: np.ndarray | None
    measures: np.ndarray
    centroid_offsets: np.ndarray
    coupling: tuple | None = None

    @property
    def descent(self) -> np.ndarray:
        """``v_{-dH_i}``: the negated position gradient, one row per agent."""
        return -self.dH_dg


@dataclass(frozen=True, eq=False)
class Snapshot:
    """Everything the laws need about one state, computed once."""

    region: ConvexPolygon
    gens: PowerGeneratorSet
    density: object
    quad: QuadratureSpec
    fractions: np.ndarray
    diagram: PowerDiagram
    total_measure: float
    measures: np.ndarray
    centroids: np.ndarray
    bundle: GradientBundle
    value: float

    @property
    def m(self):
        return self.gens.m

    def weight_hessian(self) -> np.ndarray:
        """Gauss-Newton approximation ``L D L`` of the weight Hessian of the cost.

        ``L`` is the Jacobian of the cell measures in the weights, a graph
        Laplacian with edge weights ``lambda(face) / (2 gamma)``, and ``D`` is
        the Hessian of the cost in the measures. The neglected term vanishes at
        equitable states, so the approximation is exact where it matters.
        """
        m = self.m
        L = np.zeros((m, m))
        if self.bundle.coupling is not None:
            I, J, c = self.bundle.coupling
            np.add.at(L, (I, I), c)
            np.add.at(L, (J, J), c)
            np.add.at(L, (I, J), -c)
            np.add.at(L, (J, I), -c)
        d = 2.0 * self.fractions**2 / self.measures**3
        return L @ (d[:, None] * L)


def _cell_moments(diagram: PowerDiagram, density, q):
    mass, moment = polygon_moments(diagram.cells, density, q)
    mass = np.maximum(mass, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        centroids = np.where(mass[:, None] > ZERO_MASS, moment / mass[:, None], np.nan)
    return mass, centroids


def _check_cells(measures, threshold=ZERO_MASS):
    bad = np.flatnonzero(measures <= threshold)
    if len(bad):
        raise EmptyCell(int(bad[0]), float(measures[bad[0]]))


def _fractions(fractions, m):
    if fractions is None:
        return np.ones(m)
    b = np.asarray(fractions, dtype=float)
    if len(b) != m:
        raise InvalidParams(f"{len(b)} target fractions for {m} agents")
    return b


def _gradients(diagram: PowerDiagram, measures, fractions, density, q, positions_too=True):
    g = diagram.generators.positions
    m = diagram.m
    coef = fractions**2 / measures**2
    dH_dw = np.zeros(m)
    dH_dg = np.zeros((m, 2)) if positions_too else None
    if not diagram.faces:
        return dH_dw, dH_dg, None
    I = np.array([f.i for f in diagram.faces])
    J = np.array([f.j for f in diagram.faces])
    segs = np.array([[f.p, f.q] for f in diagram.faces])
    gamma = np.hypot(*(g[J] - g[I]).T)
    face_mass, moment_i = segment_moments(segs, g[I], density, q)
    diff = coef[J] - coef[I]
    wterm = diff * face_mass / (2.0 * gamma)
    np.add.at(dH_dw, I, wterm)
    np.add.at(dH_dw, J, -wterm)
    if positions_too:
        moment_j = moment_i - face_mass[:, None] * (g[J] - g[I])
        np.add.at(dH_dg, I, (diff / gamma)[:, None] * moment_i)
        np.add.at(dH_dg, J, (-diff / gamma)[:, None] * moment_j)
    return dH_dw, dH_dg, (I, J, face_mass / (2.0 * gamma))


def evaluate(
    region: ConvexPolygon,
    gens: PowerGeneratorSet,
    density,
    quad: QuadratureSpec = DEFAULT_QUADRATURE,
    fractions=None,
    total_measure: float | None = None,
) -> Snapshot:
    """Build the diagram and every derived quantity; raises ``EmptyCell`` outside ``S``."""
    diagram = power_diagram(region, gens)
    measures, centroids = _cell_moments(diagram, density, quad)
    _check_cells(measures)
    beta = _fractions(fractions, gens.m)
    dH_dw, dH_dg, coupling = _gradients(diagram, measures, beta, density, quad)
    if total_measure is None:
        total_measure = region_measure(region, density, quad)
    bundle = GradientBundle(dH_dw, dH_dg, measures, centroids - gens.positions, coupling)
    return Snapshot(
        region=region,
        gens=gens,
        density=density,
        quad=quad,
        fractions=beta,
        diagram=diagram,
        total_measure=float(total_measure),
        measures=measures,
        centroids=centroids,
        bundle=bundle,
        value=float(np.sum(beta**2 / measures)),
    )


def grad_w_HV(diagram: PowerDiagram, density, q: QuadratureSpec = DEFAULT_QUADRATURE, fractions=None) -> GradientBundle:
    """Weight gradient of ``H_V`` (or of its target-fraction variant)."""
    measures, centroids = _cell_moments(diagram, density, q)
    _check_cells(measures)
    beta = _fractions(fractions, diagram.m)
    dH_dw, _, _ = _gradients(diagram, measures, beta, density, q, positions_too=False)
    return GradientBundle(dH_dw, None, measures, centroids - diagram.generators.positions)


def grad_HVtilde(diagram: PowerDiagram, density, q: QuadratureSpec = DEFAULT_QUADRATURE, fractions=None) -> GradientBundle:
    """Weight and position gradients of ``H~_V``."""
    measures, centroids = _cell_moments(diagram, density, q)
    _check_cells(measures)
    beta = _fractions(fractions, diagram.m)
    dH_dw, dH_dg, _ = _gradients(diagram, measures, beta, density, q)
    return GradientBundle(dH_dw, dH_dg, measures, centroids - diagram.generators.positions)


def HV_value(diagram: PowerDiagram, density, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """``sum_i 1 / lambda(V_i)``."""
    measures, _ = _cell_moments(diagram, density, q)
    _check_cells(measures)
    return float(np.sum(1.0 / measures))


def HV_beta_value(diagram: PowerDiagram, density, fractions, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """``sum_i beta_i^2 / lambda(V_i)``, minimised when ``lambda(V_i) = beta_i lambda(A)``."""
    measures, _ = _cell_moments(diagram, density, q)
    _check_cells(measures)
    beta = _fractions(fractions, diagram.m)
    return float(np.sum(beta**2 / measures))


# -- control laws ------------------------------------------------------------


def _psi_product(snap: Snapshot, i, direction, params: LawParams) -> float:
    """Product of ``psi`` over power neighbours within ``Delta`` of agent ``i``."""
    g = snap.gens.positions
    prod = 1.0
    for j in snap.diagram.neighbors[i]:
        rho = math.hypot(*(g[j] - g[i]))
        if rho <= params.Delta:
            prod *= psi(rho, collision_angle(g[i], g[j], direction), params.Delta, params.delta)
            if prod == 0.0:
                break
    return prod


def law_weights_only(snap: Snapshot, params: LawParams):
    """Pure weight descent; positions stay fixed."""
    return -snap.bundle.dH_dw.copy(), np.zeros((snap.m, 2))


def law_centroidal(snap: Snapshot, params: LawParams):
    """Weight descent plus motion toward cell centroids when that motion also descends."""
    b = snap.bundle
    dw = -b.dH_dw.copy()
    dg = np.zeros((snap.m, 2))
    for i in range(snap.m):
        v_desc = -b.dH_dg[i]
        v_c = b.centroid_offsets[i]
        gate = theta(params.beta_theta, float(v_c @ v_desc))
        if gate == 0.0:
            continue
        gain = (2.0 / math.pi) * math.atan(float(v_desc @ v_desc) / params.alpha) * gate
        if gain == 0.0:
            continue
        gain *= _psi_product(snap, i, v_c, params)
        dg[i] = gain * v_c
    return dw, dg


def law_voronoi_defect(snap: Snapshot, params: LawParams):
    """Weight descent with a pull of the weights toward zero, compensated by position motion."""
    b = snap.bundle
    w = snap.gens.weights
    dw = -b.dH_dw.copy()
    dg = np.zeros((snap.m, 2))
    for i in range(snap.m):
        v = b.dH_dg[i]
        nv = math.hypot(v[0], v[1])
        # gate before dividing by |v|^2
        s1 = sat(params.eps1, params.eps2, nv)
        if s1 == 0.0 or w[i] == 0.0:
            continue
        s3 = sat(0.0, params.eps3, distance_to_boundary(snap.diagram.cells[i], snap.gens.positions[i]))
        if s3 == 0.0:
            continue
        k = w[i] * b.dH_dw[i]
        gain = s1 * s3 * _psi_product(snap, i, k * v, params)
        dw[i] -= w[i] * gain
        dg[i] = k * gain / (nv * nv) * v
    return dw, dg


def law_combined(snap: Snapshot, params: LawParams):
    """Componentwise sum of the centroidal and Voronoi-defect laws."""
    dw1, dg1 = law_centroidal(snap, params)
    dw2, dg2 = law_voronoi_defect(snap, params)
    return dw1 + dw2, dg1 + dg2


LAWS: dict[str, Callable] = {
    "weights": law_weights_only,
    "beta": law_weights_only,
    "centroidal": law_centroidal,
    "voronoi": law_voronoi_defect,
    "combined": law_combined,
}


def get_law(name: str) -> Callable:
    try:
        return LAWS[name]
    except KeyError:
        raise InvalidParams(f"unknown law {name!r}; choose from {sorted(LAWS)}") from None


def lyapunov_rate(snap: Snapshot, dw, dg) -> float:
    """Time derivative of the cost along ``(dw, dg)``."""
    b = snap.bundle
    return float(b.dH_dw @ dw + np.sum(b.dH_dg * dg))


# -- time stepping -----------------------------------------------------------


class StepResult(NamedTuple):
    snapshot: Snapshot
    dt: float
    dw: np.ndarray
    dg: np.ndarray


MAX_HALVINGS = 20
MEASURE_FLOOR = 1e-6

# multiple of -dH/dw contained in each law's weight velocity
GRADIENT_GAIN = {law_combined: 2.0}


@dataclass(frozen=True)
class StepControl:
    """How :func:`euler_step` integrates and when it accepts a step.

    ``scheme="explicit"`` is plain forward Euler. ``scheme="implicit"`` treats
    the weight-gradient part linearly implicitly, ``dw = (I + h k Hgn)^-1 (-k dH/dw)``
    with ``Hgn`` from :meth:`Snapshot.weight_hessian`; the rest of the velocity
    stays explicit. Both are first-order consistent with the same flow and
    both conserve the sum of the weights. A step is accepted when the cost
    grows by at most ``1e-12 |H| + drift * h * |H|``.
    """

    scheme: str = "explicit"
    drift: float = 0.0
    max_halvings: int = MAX_HALVINGS
    measure_floor: float = MEASURE_FLOOR

    def __post_init__(self):
        if self.scheme not in ("explicit", "implicit"):
            raise InvalidParams(f"unknown scheme {self.scheme!r}")
        if self.drift < 0 or self.max_halvings < 0 or self.measure_floor < 0:
            raise InvalidParams("drift, max_halvings and measure_floor must be non-negative")


EXPLICIT = StepControl()


def simulation_control(law_name: str) -> StepControl:
    """Step control used by the simulation engine.

    Laws with a weight pull toward zero keep the cost constant only to first
    order, so they get a small drift allowance; pure descent laws stay strict.
    """
    drift = 0.1 if law_name in ("voronoi", "combined") else 0.0
    return StepControl(scheme="implicit", drift=drift)


def euler_step(
    snap: Snapshot, law: Callable, params: LawParams, dt: float, control: StepControl = EXPLICIT
) -> StepResult:
    """One Euler step with a safeguard.

    The step is retried with ``dt / 2`` (at most ``control.max_halvings`` times)
    if a cell measure falls below ``measure_floor * lambda(A)``, generators
    collide, or the cost grows beyond the allowance of ``control``. Moved
    positions are projected back onto the region. The returned ``dw`` and
    ``dg`` are the law's velocities at the start of the step.
    """
    if dt <= 0:
        raise InvalidParams("dt must be positive")
    dw, dg = law(snap, params)
    if not np.any(dw) and not np.any(dg):
        return StepResult(snap, dt, dw, dg)
    g0 = snap.gens.positions
    w0 = snap.gens.weights
    floor = control.measure_floor * snap.total_measure
    scale = max(1.0, abs(snap.value))
    moving = np.flatnonzero(np.any(dg != 0.0, axis=1))
    implicit = control.scheme == "implicit"
    if implicit:
        k = GRADIENT_GAIN.get(law, 1.0)
        stiff = -k * snap.bundle.dH_dw
        rest = dw - stiff
        hess = k * snap.weight_hessian()
        eye = np.eye(snap.m)
    h = dt
    for _ in range(control.max_halvings + 1):
        pos = g0 + h * dg
        for i in moving:
            if not point_in(snap.region, pos[i], tol=0.0):
                pos[i] = project_to_polygon(snap.region, pos[i])
        if implicit:
            x = np.linalg.solve(eye + h * hess, stiff)
            # the solve preserves the sum exactly in exact arithmetic
            x -= (x.sum() - stiff.sum()) / snap.m
            step_w = h * (x + rest)
        else:
            step_w = h * dw
        try:
            new = evaluate(
                snap.region,
                PowerGeneratorSet(pos, w0 + step_w),
                snap.density,
                snap.quad,
                snap.fractions,
                snap.total_measure,
            )
        except (EmptyCell, CoincidentGenerators):
            new = None
        allowed = (1e-12 + control.drift * h) * scale
        if new is not None and new.measures.min() >= floor and new.value <= snap.value + allowed:
            return StepResult(new, h, dw, dg)
        h *= 0.5
    raise StepFailed(f"no acceptable step after {control.max_halvings} halvings of dt={dt}")


def relative_deviation(snap: Snapshot) -> float:
    """``max_i |lambda(V_i) - beta_i lambda(A)| / (beta_i lambda(A))``."""
    beta = snap.fractions
    if np.all(beta == 1.0):
        beta = np.full(snap.m, 1.0 / snap.m)
    target = beta * snap.total_measure
    return float(np.max(np.abs(snap.measures - target) / target))


def descend_weights(
    region: ConvexPolygon,
    gens: PowerGeneratorSet,
    density,
    params: LawParams | None = None,
    dt: float = 0.01,
    tol: float = 1e-3,
    max_steps: int = 100_000,
    quad: QuadratureSpec = DEFAULT_QUADRATURE,
    control: StepControl = StepControl(scheme="implicit"),
):
    """Run the weight-only law from ``gens`` until every cell is within ``tol`` of its target.

    Returns ``(snapshot, steps, values)`` where ``values`` holds the cost after every accepted step.
    """
    params = (params or LawParams()).resolved(region)
    snap = evaluate(region, gens, density, quad, params.target_fractions)
    values = [snap.value]
    steps = 0
    while relative_deviation(snap) > tol and steps < max_steps:
        snap = euler_step(snap, law_weights_only, params, dt, control).snapshot
        values.append(snap.value)
        steps += 1
    return snap, steps, np.array(values)
