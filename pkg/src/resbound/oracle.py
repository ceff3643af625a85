"""Reference machinery: integrators and manufactured verification cases.

Every bound in this package is validated against problems whose true
error is known by construction: pick an exact solution v, derive the
forcing from it, then perturb it into a surrogate "approximate solution"
u = v + p whose perturbation p respects the initial/boundary data. The
residual of u is available in closed form, the true error u - v equals p
exactly, and no network training is involved.

The catalog covers second-order scalar ODEs (stable, marginally stable,
unstable), a six-dimensional coupled system with a seeded random
orthogonal transformation, a Duffing oscillator expanded to order 6, and
two first-order PDEs (one with closed-form spiral characteristics, one
whose characteristics have no analytic form). Reference trajectories come
from fixed-step RK4 and an adaptive Fehlberg 4(5) pair with cubic Hermite
dense output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import StepUnderflow
from .expr import Expression, parse
from .operators import Grid

__all__ = [
    "ManufacturedCase",
    "rk4_solve",
    "rkf45_solve",
    "DenseOutput",
    "catalog",
    "exact_error",
    "DEFAULT_SEED",
    "DEFAULT_AMPLITUDE",
    "spiral_boundary_starts",
    "spiral_point",
]

#: seed for the random orthogonal transformation of the 6-dim system case;
#: fixed so the case is bit-reproducible across runs
DEFAULT_SEED = 1729

DEFAULT_AMPLITUDE = 1e-2

CATALOG_IDS = ("ODE-A", "ODE-B", "ODE-C", "SYS-6", "DUFF", "PDE-SPIRAL", "PDE-CONST")


# --------------------------------------------------------------------------
# Integrators
# --------------------------------------------------------------------------

def rk4_solve(rhs: Callable, y0, grid: Grid) -> np.ndarray:
    """Classical fixed-step RK4 trajectory of y' = rhs(t, y) on the grid.

    Returns an array of shape (node_count, dim).
    """
    t = grid.nodes
    y = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    out = np.empty((len(t), len(y)))
    out[0] = y
    for k in range(len(t) - 1):
        h = t[k + 1] - t[k]
        k1 = np.asarray(rhs(t[k], y))
        k2 = np.asarray(rhs(t[k] + 0.5 * h, y + 0.5 * h * k1))
        k3 = np.asarray(rhs(t[k] + 0.5 * h, y + 0.5 * h * k2))
        k4 = np.asarray(rhs(t[k] + h, y + h * k3))
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k + 1] = y
    return out


# Fehlberg tableau: stage times, stage weights, 4th-order propagation
# weights, and the coefficients of the embedded local error estimate.
_RKF_C = (0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2)
_RKF_A = (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8.0, 3680 / 513, -845 / 4104),
    (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
)
_RKF_B4 = (25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0)
_RKF_ERR = (1 / 360, 0.0, -128 / 4275, -2197 / 75240, 1 / 50, 2 / 55)


@dataclass(frozen=True)
class DenseOutput:
    """Accepted nodes of an adaptive run plus cubic Hermite interpolation."""

    ts: np.ndarray = field(repr=False)
    ys: np.ndarray = field(repr=False)
    fs: np.ndarray = field(repr=False)

    def __call__(self, t) -> np.ndarray:
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.clip(np.searchsorted(self.ts, t_arr, side="right") - 1, 0, len(self.ts) - 2)
        t0 = self.ts[idx]
        h = self.ts[idx + 1] - t0
        theta = ((t_arr - t0) / h)[:, None]
        y0, y1 = self.ys[idx], self.ys[idx + 1]
        f0, f1 = self.fs[idx], self.fs[idx + 1]
        h00 = 2 * theta**3 - 3 * theta**2 + 1
        h10 = theta**3 - 2 * theta**2 + theta
        h01 = -2 * theta**3 + 3 * theta**2
        h11 = theta**3 - theta**2
        out = h00 * y0 + h10 * h[:, None] * f0 + h01 * y1 + h11 * h[:, None] * f1
        if np.isscalar(t) or np.asarray(t).ndim == 0:
            return out[0]
        return out


def rkf45_solve(rhs: Callable, y0, t_span: tuple[float, float], tol: float,
                max_step: Optional[float] = None) -> DenseOutput:
    """Adaptive Fehlberg 4(5): propagates the 4th-order solution, controls
    the step so the embedded local error estimate stays below ``tol``.

    ``max_step`` defaults to span/50 so the Hermite dense output stays
    well below the integration error. Raises :class:`StepUnderflow` if the
    controller collapses the step to machine resolution.
    """
    if not 1e-12 <= tol <= 1e-4:
        raise ValueError("tol must lie in [1e-12, 1e-4]")
    t0, t1 = float(t_span[0]), float(t_span[1])
    span = t1 - t0
    if span <= 0:
        raise ValueError("t_span must be increasing")
    if max_step is None:
        max_step = span / 50.0
    y = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    t = t0
    h = min(max_step, span / 100.0)
    ts = [t]
    ys = [y.copy()]
    fs = [np.asarray(rhs(t, y), dtype=float)]
    h_floor = 1e-14 * max(abs(span), 1.0)
    while t1 - t > h_floor:
        h = min(h, max_step, t1 - t)
        if h < h_floor:
            raise StepUnderflow(f"step collapsed to {h:g} at t = {t:g}")
        k = [fs[-1]]  # rhs at (t, y) is always current here
        for i in range(1, 6):
            yi = y + h * sum(a * k[j] for j, a in enumerate(_RKF_A[i]))
            k.append(np.asarray(rhs(t + _RKF_C[i] * h, yi), dtype=float))
        err_vec = h * sum(e * k[i] for i, e in enumerate(_RKF_ERR))
        err = float(np.max(np.abs(err_vec)))
        if err <= tol:
            y = y + h * sum(b * k[i] for i, b in enumerate(_RKF_B4))
            t = t + h
            ts.append(t)
            ys.append(y.copy())
            fs.append(np.asarray(rhs(t, y), dtype=float))
        factor = 0.9 * (tol / err) ** 0.2 if err > 0 else 5.0
        h = h * min(5.0, max(0.2, factor))
    return DenseOutput(np.array(ts), np.array(ys), np.array(fs))


# --------------------------------------------------------------------------
# Manufactured cases
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ManufacturedCase:
    """One verification problem with its exact solution and a surrogate
    whose true error is known in closed form (except the Duffing case,
    whose reference is the adaptive integrator)."""

    case_id: str
    kind: str
    description: str
    problem: dict
    exact: Optional[tuple[Expression, ...]] = None
    perturbation: Optional[tuple[Expression, ...]] = None
    amplitude: float = DEFAULT_AMPLITUDE
    seed: int = DEFAULT_SEED


def _f(x: float) -> str:
    """Full-precision literal for embedding in expression text."""
    return repr(float(x))


def _ode_case(case_id: str, coeffs, forcing: str, residual: str, perturb: str,
              amplitude: float, grid_k: int) -> ManufacturedCase:
    surrogate = f"t^2+t+1+{perturb}"
    problem = {
        "kind": "ode",
        "coefficients": list(coeffs),
        "residual": {"expression": residual},
        "domain": {"T": 1.0, "K": grid_k},
        "exact": "t^2+t+1",
        "surrogate": surrogate,
        "forcing": forcing,
    }
    return ManufacturedCase(
        case_id=case_id,
        kind="ode",
        description=f"second-order constant-coefficient ODE, forcing {forcing}",
        problem=problem,
        exact=(parse("t^2+t+1"),),
        perturbation=(parse(perturb),),
        amplitude=amplitude,
    )


def random_orthogonal(n: int, seed: int) -> np.ndarray:
    """Seeded random orthogonal matrix: QR of a Gaussian sample with the
    sign convention that makes the factorization unique."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


_SYS6_BLOCKS = ((4.0, 3), (3.0, 2), (2.0, 1))
_SYS6_BASE = ("sin(t)", "ln(t+1)", "t+1", "t^2", "exp(t)", "cos(t)")


def _sys6_case(amplitude: float, seed: int, grid_k: int) -> ManufacturedCase:
    n = 6
    P = random_orthogonal(n, seed)
    J = np.zeros((n, n))
    start = 0
    for lam, size in _SYS6_BLOCKS:
        for i in range(size):
            J[start + i, start + i] = lam
            if i + 1 < size:
                J[start + i, start + i + 1] = 1.0
        start += size
    A = P @ J @ P.T

    rng = np.random.default_rng(seed + 1)
    alphas = amplitude * rng.uniform(-1.0, 1.0, n)
    a_alpha = A @ alphas
    # perturbation p_i = alpha_i t e^{-t}; residual r = p' + A p
    perturb = [f"{_f(alphas[i])}*t*exp(-t)" for i in range(n)]
    residual = [f"({_f(alphas[i])}*(1-t)+{_f(a_alpha[i])}*t)*exp(-t)" for i in range(n)]
    exact = [
        "+".join(f"{_f(P[i, j])}*({_SYS6_BASE[j]})" for j in range(n)) for i in range(n)
    ]
    problem = {
        "kind": "ode_system",
        "jordan": {
            "P": [[float(v) for v in row] for row in P],
            "blocks": [{"lambda": [float(lam), 0.0], "size": size} for lam, size in _SYS6_BLOCKS],
        },
        "matrix": [[float(v) for v in row] for row in A],
        "residual": {"expressions": residual},
        "domain": {"T": 1.0, "K": grid_k},
        "exact": exact,
        "surrogate": [f"{e}+{p}" for e, p in zip(exact, perturb)],
    }
    return ManufacturedCase(
        case_id="SYS-6",
        kind="ode_system",
        description="6-dim coupled system, blocks (4;3x3)(3;2x2)(2;1x1), random orthogonal P",
        problem=problem,
        exact=tuple(parse(e) for e in exact),
        perturbation=tuple(parse(p) for p in perturb),
        amplitude=amplitude,
        seed=seed,
    )


# Duffing oscillator: v'' + 3 v' + 2 v + eps v^3 = cos t, v(0) = v'(0) = 1
_DUFF_COEFFS = (2.0, 3.0)
_DUFF_DEGREE = 3
_DUFF_ORDER = 6
_DUFF_T = 2.0


def duffing_rhs(eps: float) -> Callable:
    def rhs(t, y):
        return np.array([y[1], -3.0 * y[1] - 2.0 * y[0] - eps * y[0] ** 3 + math.cos(t)])
    return rhs


def _poly_text(coeffs: np.ndarray) -> str:
    """Low-to-high coefficients to expression text."""
    parts = []
    for m, c in enumerate(coeffs):
        if c == 0.0 and m > 1:
            continue
        if m == 0:
            parts.append(_f(c))
        elif m == 1:
            parts.append(f"{_f(c)}*t")
        else:
            parts.append(f"{_f(c)}*t^{m}")
    return "+".join(parts) if parts else "0.0"


@lru_cache(maxsize=4)
def duffing_components(fit_k: int = 4000, fit_degree: int = 12) -> tuple[str, ...]:
    """Approximate expansion components u_0 .. u_6 for the Duffing case.

    Each component equation is integrated with fixed-step RK4 (the
    nonlinear forcing built from the previously fitted components), then
    fitted by least squares in the basis {t^2 .. t^degree} on top of the
    exact initial-condition part, so every u_j matches its initial data
    exactly and the fit residual is small but honestly nonzero. These
    stand in for trained network components.
    """
    from .nonlinear import compositions
    from .operators import linspace as _linspace

    grid = _linspace(_DUFF_T, fit_k)
    t = grid.nodes
    design = np.vstack([t**m for m in range(2, fit_degree + 1)]).T

    fitted: list[np.ndarray] = []  # low-to-high coefficient arrays
    texts: list[str] = []
    pv = np.polynomial.polynomial.polyval
    for j in range(_DUFF_ORDER + 1):
        if j == 0:
            ic = np.array([1.0, 1.0])
            def forcing(tt):
                return math.cos(tt)
        else:
            ic = np.array([0.0, 0.0])
            tuples = list(compositions(j - 1, _DUFF_DEGREE))
            def forcing(tt, _tuples=tuples):
                vals = [pv(tt, c) for c in fitted]
                return -sum(vals[a] * vals[b] * vals[c] for a, b, c in _tuples)

        def rhs(tt, y, _forcing=forcing):
            return np.array([y[1], -3.0 * y[1] - 2.0 * y[0] + _forcing(tt)])

        traj = rk4_solve(rhs, ic, grid)[:, 0]
        target = traj - (ic[0] + ic[1] * t)
        sol, *_ = np.linalg.lstsq(design, target, rcond=None)
        coeffs = np.concatenate((ic, sol))
        fitted.append(coeffs)
        texts.append(_poly_text(coeffs))
    return tuple(texts)


def _duffing_case(grid_k: int) -> ManufacturedCase:
    components = duffing_components()
    problem = {
        "kind": "nonlinear_ode",
        "coefficients": list(_DUFF_COEFFS),
        "degree": _DUFF_DEGREE,
        "components": list(components),
        "forcing": "cos(t)",
        "domain": {"T": _DUFF_T, "K": grid_k},
        "validity_radius": 0.9,
        "query": {"t_linspace": [0.0, _DUFF_T, 81], "eps_values": [-0.5, -0.25, 0.0, 0.25, 0.5]},
    }
    return ManufacturedCase(
        case_id="DUFF",
        kind="nonlinear_ode",
        description="Duffing oscillator, cubic term, expansion order 6",
        problem=problem,
    )


# PDE cases ------------------------------------------------------------------

def spiral_boundary_starts(count: int = 16) -> list[tuple[float, float]]:
    """Equidistant starts on the boundary of [-1, 1]^2, counterclockwise
    from (-1, -1)."""
    out = []
    perimeter = 8.0
    for k in range(count):
        pos = perimeter * k / count
        if pos < 2.0:
            out.append((-1.0 + pos, -1.0))
        elif pos < 4.0:
            out.append((1.0, -1.0 + (pos - 2.0)))
        elif pos < 6.0:
            out.append((1.0 - (pos - 4.0), 1.0))
        else:
            out.append((-1.0, 1.0 - (pos - 6.0)))
    return out


def spiral_point(x0: float, y0: float, s) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form integral curve of the field (-x-y, x-y) from (x0, y0):
    a logarithmic spiral with unit angular rate and e^{-s} radial decay."""
    r0 = math.hypot(x0, y0)
    theta0 = math.atan2(y0, x0)
    s = np.asarray(s, dtype=float)
    return r0 * np.exp(-s) * np.cos(s + theta0), r0 * np.exp(-s) * np.sin(s + theta0)


def _pde_spiral_case(amplitude: float, mesh: int) -> ManufacturedCase:
    al = _f(amplitude)
    p = f"{al}*(1-x^2)*(1-y^2)*sin(3*x+2*y)"
    px = f"{al}*(1-y^2)*(-2*x*sin(3*x+2*y)+3*(1-x^2)*cos(3*x+2*y))"
    py = f"{al}*(1-x^2)*(-2*y*sin(3*x+2*y)+2*(1-y^2)*cos(3*x+2*y))"
    residual = f"(-x-y)*({px})+(x-y)*({py})+({p})"
    queries = []
    for x0, y0 in spiral_boundary_starts():
        for s in (0.3, 0.6, 0.9, 1.2):
            qx, qy = spiral_point(x0, y0, s)
            queries.append([float(qx), float(qy)])
    problem = {
        "kind": "pde",
        "a": "-x-y",
        "b": "x-y",
        "c": "1",
        "f": "3*x-2*y",
        "domain": {"rect": [-1.0, 1.0, -1.0, 1.0], "mesh": [mesh, mesh]},
        "gamma": [
            {"edge": e, "range": [-1.0, 1.0]} for e in ("left", "right", "bottom", "top")
        ],
        "residual": {"expression": residual},
        "g": "2*x+3*y",
        "exact": "2*x+3*y",
        "surrogate": f"2*x+3*y+{p}",
        "query": {"points": queries},
    }
    return ManufacturedCase(
        case_id="PDE-SPIRAL",
        kind="pde",
        description="first-order PDE with spiral characteristics, Dirichlet data on the whole boundary",
        problem=problem,
        exact=(parse("2*x+3*y"),),
        perturbation=(parse(p),),
        amplitude=amplitude,
    )


def _pde_const_case(amplitude: float, mesh: int) -> ManufacturedCase:
    al = _f(amplitude)
    p = f"{al}*(1+x)*(1-y)*sin(3*x+2*y)"
    px = f"{al}*(1-y)*(sin(3*x+2*y)+3*(1+x)*cos(3*x+2*y))"
    py = f"{al}*(1+x)*(-sin(3*x+2*y)+2*(1-y)*cos(3*x+2*y))"
    residual = f"(x^2+y^2+1)*({px})+(x^2-y^2+2)*({py})+(3-2*x)*({p})"
    problem = {
        "kind": "pde",
        "a": "x^2+y^2+1",
        "b": "x^2-y^2+2",
        "c": "3-2*x",
        "f": "6-4*x",
        "domain": {"rect": [-1.0, 1.0, -1.0, 1.0], "mesh": [mesh, mesh]},
        "gamma": [
            {"edge": "left", "range": [-1.0, 1.0]},
            {"edge": "top", "range": [-1.0, 1.0]},
        ],
        "residual": {"expression": residual},
        "g": "2",
        "exact": "2",
        "surrogate": f"2+{p}",
    }
    return ManufacturedCase(
        case_id="PDE-CONST",
        kind="pde",
        description="first-order PDE without closed-form characteristics; constant bound via |r/c|",
        problem=problem,
        exact=(parse("2"),),
        perturbation=(parse(p),),
        amplitude=amplitude,
    )


def catalog(amplitude: float = DEFAULT_AMPLITUDE, seed: int = DEFAULT_SEED,
            grid_k: int = 10_000, mesh: int = 512) -> list[ManufacturedCase]:
    """The seven verification cases, each exporting the same problem JSON
    schema the CLI consumes."""
    a = float(amplitude)
    return [
        _ode_case(
            "ODE-A", (2.0, 3.0), "2*t^2+8*t+7",
            residual=f"{_f(2 * a)}*(1+t)*exp(-t)",
            perturb=f"{_f(a)}*t^2*exp(-t)", amplitude=a, grid_k=grid_k,
        ),
        _ode_case(
            "ODE-B", (1.0, 0.0), "t^2+t+3",
            residual=f"{_f(2 * a)}*(1-t)^2*exp(-t)",
            perturb=f"{_f(a)}*t^2*exp(-t)", amplitude=a, grid_k=grid_k,
        ),
        _ode_case(
            "ODE-C", (0.0, -1.0), "1-2*t",
            residual=f"{_f(2 * a)}*(t^2-3*t+1)*exp(-t)",
            perturb=f"{_f(a)}*t^2*exp(-t)", amplitude=a, grid_k=grid_k,
        ),
        _sys6_case(a, seed, grid_k),
        _duffing_case(grid_k),
        _pde_spiral_case(a, mesh),
        _pde_const_case(a, mesh),
    ]


def exact_error(case: ManufacturedCase, points) -> np.ndarray:
    """True error eta = u - v at the given points, evaluated from the
    closed-form perturbation. ODE cases take a t array (returns values, or
    a (len, n) matrix for systems); PDE cases take an (x, y) pair of
    arrays."""
    if case.perturbation is None:
        raise ValueError(f"case {case.case_id} has no closed-form surrogate")
    if case.kind == "pde":
        x, y = points
        out = np.asarray(case.perturbation[0].evaluate({"x": x, "y": y}), dtype=float)
        return np.broadcast_to(out, np.broadcast(np.asarray(x), np.asarray(y)).shape)
    t = np.asarray(points, dtype=float)
    cols = [
        np.broadcast_to(np.asarray(p.evaluate({"t": t}), dtype=float), t.shape)
        for p in case.perturbation
    ]
    if case.kind == "ode":
        return cols[0]
    return np.column_stack(cols)
