"""Error bounds for first-order linear PDEs with Dirichlet data.

For ``a v_x + b v_y + c v = f`` on a rectangle, two bounds are offered:

* ``constant_bound``: when c keeps one sign and stays away from zero over
  the domain, ``B = max |r / c|`` over a dense mesh bounds the error
  everywhere. Cheap and loose.
* ``curve_bound``: along the characteristic curve through a query point
  the PDE collapses to a first-order ODE in the curve parameter, and the
  scalar variable-coefficient machinery applies with coefficient c(s).
  Requires the curve to reach the Dirichlet boundary, where the error is
  zero by assumption.

Characteristics are traced numerically (backward fixed-step RK4 with a
bisection-refined boundary hit) instead of demanding closed forms; that
also opens up fields whose integral curves have no analytic expression.
Tracing assumes the Dirichlet boundary is the inflow boundary: if the
backward trace leaves the domain through an edge without Dirichlet data,
the operation fails loudly rather than fabricating boundary values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    CoefficientVanishes,
    DomainError,
    NoBoundaryHit,
    NotOnDirichletBoundary,
    StagnationPoint,
)
from .expr import Expression

__all__ = [
    "PDEProblem",
    "GammaSegment",
    "CharCurve",
    "constant_bound",
    "trace_characteristic",
    "curve_bound",
]

DEFAULT_MESH = (512, 512)
MAX_TRACE_STEPS = 1_000_000
FIELD_FLOOR = 1e-10       # below this the field counts as stagnant
BOUNDARY_REFINE = 1e-10   # bisection tolerance for the boundary hit
GAMMA_TOL = 1e-8          # how close the exit point must sit to a segment

_EDGES = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class GammaSegment:
    """One piece of the Dirichlet boundary: an edge name plus the range of
    the coordinate that varies along it (y for left/right, x for
    bottom/top)."""

    edge: str
    lo: float
    hi: float

    def __post_init__(self):
        if self.edge not in _EDGES:
            raise ValueError(f"edge must be one of {_EDGES}, got {self.edge!r}")
        if not self.lo < self.hi:
            raise ValueError("segment range must be nondegenerate")


@dataclass(frozen=True)
class PDEProblem:
    """Coefficients, forcing, rectangle, Dirichlet segments, residual.

    ``residual`` is any object with ``sample_xy(x, y) -> ndarray``;
    ``boundary_data`` is the Dirichlet datum g, kept only for oracle use.
    """

    a: Expression
    b: Expression
    c: Expression
    f: Expression
    rect: tuple[float, float, float, float]  # x_min, x_max, y_min, y_max
    gamma: tuple[GammaSegment, ...]
    residual: object
    boundary_data: Optional[Expression] = None

    def __post_init__(self):
        x0, x1, y0, y1 = self.rect
        if not (x0 < x1 and y0 < y1):
            raise ValueError("degenerate domain rectangle")
        if not self.gamma:
            raise ValueError("Dirichlet boundary must be nonempty")
        object.__setattr__(self, "gamma", tuple(self.gamma))

    @property
    def diagonal(self) -> float:
        x0, x1, y0, y1 = self.rect
        return float(np.hypot(x1 - x0, y1 - y0))

    def contains(self, x: float, y: float, slack: float = 0.0) -> bool:
        x0, x1, y0, y1 = self.rect
        return (x0 - slack <= x <= x1 + slack) and (y0 - slack <= y <= y1 + slack)

    def field_at(self, x: float, y: float) -> tuple[float, float]:
        pt = {"x": x, "y": y}
        return float(self.a.evaluate(pt)), float(self.b.evaluate(pt))

    def on_gamma(self, x: float, y: float, tol: float = GAMMA_TOL) -> bool:
        x0, x1, y0, y1 = self.rect
        for seg in self.gamma:
            if seg.edge == "left" and abs(x - x0) <= tol and seg.lo - tol <= y <= seg.hi + tol:
                return True
            if seg.edge == "right" and abs(x - x1) <= tol and seg.lo - tol <= y <= seg.hi + tol:
                return True
            if seg.edge == "bottom" and abs(y - y0) <= tol and seg.lo - tol <= x <= seg.hi + tol:
                return True
            if seg.edge == "top" and abs(y - y1) <= tol and seg.lo - tol <= x <= seg.hi + tol:
                return True
        return False


@dataclass(frozen=True)
class CharCurve:
    """A traced characteristic, parameterized with s = 0 at the Dirichlet
    boundary and s = s_star at the query point. Nodes satisfy the curve
    ODE to the local truncation order of the RK4 tracer."""

    s: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    start: tuple[float, float]

    @property
    def s_star(self) -> float:
        return float(self.s[-1])

    @property
    def endpoint(self) -> tuple[float, float]:
        return float(self.x[-1]), float(self.y[-1])


def constant_bound(p: PDEProblem, mesh: tuple[int, int] = DEFAULT_MESH) -> float:
    """Constant bound ``max |r / c|`` over an (nx x ny) mesh.

    Requires |c| > 1e-9 with constant sign over the mesh; raises
    :class:`CoefficientVanishes` otherwise. Sampling-based: the max is
    taken over mesh nodes, and the mesh should be dense enough for the
    residual's variation (default 512 x 512).
    """
    nx, ny = mesh
    x0, x1, y0, y1 = p.rect
    xs = np.linspace(x0, x1, nx)
    ys = np.linspace(y0, y1, ny)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    c_vals = np.broadcast_to(np.asarray(p.c.evaluate({"x": X, "y": Y}), dtype=float), X.shape)
    if np.any(np.abs(c_vals) <= 1e-9):
        raise CoefficientVanishes("|c| <= 1e-9 somewhere on the mesh")
    if float(np.min(c_vals)) < 0.0 < float(np.max(c_vals)):
        raise CoefficientVanishes("c changes sign across the mesh")
    r_vals = np.broadcast_to(np.asarray(p.residual.sample_xy(X, Y), dtype=float), X.shape)
    return float(np.max(np.abs(r_vals / c_vals)))


def _rk4_step(p: PDEProblem, x: float, y: float, h: float) -> tuple[float, float]:
    k1 = p.field_at(x, y)
    k2 = p.field_at(x + 0.5 * h * k1[0], y + 0.5 * h * k1[1])
    k3 = p.field_at(x + 0.5 * h * k2[0], y + 0.5 * h * k2[1])
    k4 = p.field_at(x + h * k3[0], y + h * k3[1])
    return (
        x + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
        y + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
    )


def trace_characteristic(p: PDEProblem, endpoint: tuple[float, float], step: Optional[float] = None) -> CharCurve:
    """Trace the characteristic through ``endpoint`` back to the Dirichlet
    boundary.

    Integrates ``x' = a, y' = b`` backward (negative parameter steps) from
    the endpoint with fixed-step RK4 until the path crosses the domain
    boundary; the crossing is refined by bisection on the step fraction to
    1e-10 and must land on a Dirichlet segment. The returned curve runs
    forward: s = 0 at the boundary crossing, s_star at the endpoint.

    Raises :class:`StagnationPoint` if the field magnitude drops below
    1e-10 along the path, :class:`NoBoundaryHit` after 1e6 steps, and
    :class:`NotOnDirichletBoundary` if the exit point carries no
    Dirichlet data.
    """
    x, y = float(endpoint[0]), float(endpoint[1])
    if not p.contains(x, y, slack=GAMMA_TOL):
        raise ValueError(f"endpoint {endpoint} lies outside the domain")
    if step is None:
        step = 1e-3 * p.diagonal
    h = -abs(float(step))

    xs = [x]
    ys = [y]
    dist = [0.0]  # backward arc parameter |s| at each node
    for _ in range(MAX_TRACE_STEPS):
        fx, fy = p.field_at(x, y)
        if np.hypot(fx, fy) <= FIELD_FLOOR:
            raise StagnationPoint(f"field vanishes at ({x:.6g}, {y:.6g})")
        nx, ny = _rk4_step(p, x, y, h)
        if p.contains(nx, ny):
            x, y = nx, ny
            xs.append(x)
            ys.append(y)
            dist.append(dist[-1] + abs(h))
            continue
        # crossed the boundary inside this step: bisect the step fraction
        lo, hi = 0.0, 1.0
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            mx, my = _rk4_step(p, x, y, h * mid)
            if p.contains(mx, my):
                lo = mid
            else:
                hi = mid
            if (hi - lo) * abs(h) < BOUNDARY_REFINE:
                break
        frac = hi  # first fraction that falls outside; land on/over the edge
        bx, by = _rk4_step(p, x, y, h * frac)
        x0, x1, y0, y1 = p.rect
        bx = min(max(bx, x0), x1)
        by = min(max(by, y0), y1)
        if not p.on_gamma(bx, by):
            raise NotOnDirichletBoundary(
                f"characteristic exits at ({bx:.6g}, {by:.6g}), which carries no Dirichlet data"
            )
        if frac * abs(h) > 1e-15 * max(1.0, dist[-1]):
            xs.append(bx)
            ys.append(by)
            dist.append(dist[-1] + frac * abs(h))
        else:
            xs[-1], ys[-1] = bx, by
        back = np.array(dist)
        return CharCurve(
            s=back[-1] - back[::-1],
            x=np.array(xs[::-1]),
            y=np.array(ys[::-1]),
            start=(float(bx), float(by)),
        )
    raise NoBoundaryHit(f"no boundary crossing within {MAX_TRACE_STEPS} steps")


def curve_bound(p: PDEProblem, curve: CharCurve, *, safety: bool = True) -> float:
    """Error bound at the curve's endpoint:

        B = integral_0^{s*} |r(s)| exp(-integral_s^{s*} c dsigma) ds

    which is the first-order variable-coefficient scalar bound applied
    along the curve with coefficient c(s). The running integral of c and
    the outer accumulation both use the trapezoidal rule on the curve
    nodes, with the max-of-neighbors safety inflation on |r| by default.
    """
    from .operators import neighbor_max  # local import avoids cycle at module load

    s = curve.s
    if len(s) < 2:
        return 0.0
    pt = {"x": curve.x, "y": curve.y}
    c_vals = np.broadcast_to(np.asarray(p.c.evaluate(pt), dtype=float), s.shape)
    rho = np.abs(np.asarray(p.residual.sample_xy(curve.x, curve.y), dtype=float))
    rho = np.broadcast_to(rho, s.shape)
    if safety:
        rho = neighbor_max(rho)
    ds = np.diff(s)
    big_c = np.concatenate(([0.0], np.cumsum(0.5 * ds * (c_vals[:-1] + c_vals[1:]))))
    decay = np.exp(-np.diff(big_c))
    acc = 0.0
    for k in range(len(ds)):
        acc = decay[k] * acc + 0.5 * ds[k] * (decay[k] * rho[k] + rho[k + 1])
    if not np.isfinite(acc):
        raise DomainError("curve bound accumulation overflowed")
    return float(acc)
