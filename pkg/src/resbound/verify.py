"""Manufactured-solution verification suite behind ``resbound verify``.

Each catalog case is exported to the problem-JSON schema, re-parsed with
the same code path the CLI uses for user files, run through every
applicable bound engine, and checked for zero soundness violations
against the exactly-known error. Operator property suites (absolute
inequality, commutativity, linearity, nonlinear enclosure containment,
block-chain equivalence) run alongside.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import report
from .errors import UnstableSystem
from .nonlinear import component_bounds, nl_bound, nl_term, reconstruct
from .ode import loose_bound, tight_bound
from .operators import SampledFunction, apply_I, linspace
from .oracle import (
    ManufacturedCase,
    catalog,
    duffing_rhs,
    exact_error,
    rkf45_solve,
    spiral_point,
)
from .pde import constant_bound, curve_bound, trace_characteristic
from .problems import parse_problem
from .systems import componentwise_bound, norm_bound, operator_block_apply

__all__ = ["Row", "run_suite"]

DOMINANCE_REL = 1e-9       # tight <= loose * (1 + this)
INEQUALITY_ABS = 1e-9      # |I_lam psi| <= I_Re(lam)|psi| + this
COMMUTE_REL = 1e-8
LINEARITY_REL = 1e-12
SPIRAL_GEOMETRY_TOL = 1e-6
MESH_REFINE_REL = 0.01
RKF_TOL = 1e-11


@dataclass
class Row:
    case: str
    method: str
    max_eta: Optional[float]
    min_slack: Optional[float]
    seconds: float
    ok: bool
    note: str = ""


def _timed(fn):
    start = time.perf_counter()
    result = fn()
    return result, time.perf_counter() - start


def run_suite(case_ids, amplitude, seed, grid_k, include_properties=True,
              plot_dir=None) -> list[Row]:
    rows: list[Row] = []
    cases = {c.case_id: c for c in catalog(amplitude=amplitude, seed=seed, grid_k=grid_k)}
    for case_id in case_ids:
        case = cases[case_id]
        if case.kind == "ode":
            rows.extend(_verify_ode(case, plot_dir))
        elif case.kind == "ode_system":
            rows.extend(_verify_system(case, plot_dir))
        elif case.kind == "nonlinear_ode":
            rows.extend(_verify_duffing(case, plot_dir))
        else:
            rows.extend(_verify_pde(case, plot_dir))
    if include_properties:
        rows.extend(_property_rows())
    return rows


# --------------------------------------------------------------------------
# per-case checks
# --------------------------------------------------------------------------

def _verify_ode(case: ManufacturedCase, plot_dir) -> list[Row]:
    parsed = parse_problem(case.problem)
    problem = parsed.payload
    rows = []

    tight, t_tight = _timed(lambda: tight_bound(problem))
    eta = np.abs(exact_error(case, tight.points))
    tight_slack = float(np.min(tight.values - eta))
    max_eta = float(np.max(eta))

    try:
        loose, t_loose = _timed(lambda: loose_bound(problem))
    except UnstableSystem:
        rows.append(Row(case.case_id, "loose", None, None, 0.0, True,
                        "UnstableSystem raised (expected)"))
    else:
        loose_slack = float(np.min(loose.values - eta))
        rows.append(Row(case.case_id, "loose", max_eta, loose_slack, t_loose,
                        loose_slack >= 0.0))
        excess = float(np.max(tight.values - loose.values * (1 + DOMINANCE_REL)))
        rows.append(Row(case.case_id, "tight<=loose", None, -excess, 0.0, excess <= 0.0))

    rows.append(Row(case.case_id, "tight", max_eta, tight_slack, t_tight,
                    tight_slack >= 0.0))
    if plot_dir is not None:
        report.render_curve_figure(
            plot_dir / f"{case.case_id}.png", tight.points, tight.values,
            abs_error=eta, label="tight bound", title=case.description,
        )
    return rows


def _verify_system(case: ManufacturedCase, plot_dir) -> list[Row]:
    parsed = parse_problem(case.problem)
    problem = parsed.payload
    rows = []

    comp, t_comp = _timed(lambda: componentwise_bound(problem))
    eta = exact_error(case, comp.points)
    comp_slack = float(np.min(comp.components - np.abs(eta)))
    rows.append(Row(case.case_id, "componentwise", float(np.max(np.abs(eta))),
                    comp_slack, t_comp, comp_slack >= 0.0))

    nb, t_norm = _timed(lambda: norm_bound(problem))
    eta_norm = np.linalg.norm(eta, axis=1)
    norm_slack = float(np.min(nb.norms - eta_norm))
    rows.append(Row(case.case_id, "norm", float(np.max(eta_norm)),
                    norm_slack, t_norm, norm_slack >= 0.0))

    if plot_dir is not None:
        report.render_system_figure(
            plot_dir / f"{case.case_id}.png", comp.points, comp.components,
            nb.norms, abs_error=eta, title=case.description,
        )
    return rows


def _verify_duffing(case: ManufacturedCase, plot_dir) -> list[Row]:
    parsed = parse_problem(case.problem)
    problem = parsed.payload
    query = parsed.query

    def run():
        bounds = component_bounds(problem)
        u, bound = reconstruct(problem, query, bounds)
        return bounds, u, bound

    (bounds, u, bound), seconds = _timed(run)
    pairs = query.pairs
    t_dense = np.linspace(0.0, problem.t_end, 2001)
    u_last = np.max(np.abs(problem.components[-1].evaluate({"t": t_dense})))
    order = problem.expansion_order

    min_slack = np.inf
    max_err = 0.0
    for eps in np.unique(pairs[:, 1]):
        mask = pairs[:, 1] == eps
        tq = pairs[mask, 0]
        ref = rkf45_solve(duffing_rhs(float(eps)), [1.0, 1.0],
                          (0.0, problem.t_end), RKF_TOL)(tq)[:, 0]
        tail = abs(eps) ** (order + 1) * u_last
        err = np.abs(u[mask] - ref)
        max_err = max(max_err, float(np.max(err)))
        min_slack = min(min_slack, float(np.min(bound[mask] + tail - err)))

    # at eps = 0 the reconstruction must collapse to the linear component bound
    mask0 = pairs[:, 1] == 0.0
    reduction_ok = True
    if np.any(mask0):
        b0 = bounds.at(pairs[mask0, 0])[:, 0]
        reduction_ok = bool(np.array_equal(bound[mask0], b0))

    ok = min_slack >= 0.0 and reduction_ok
    note = f"tail allowance |eps|^{order + 1}*max|u_{order}|"
    if not reduction_ok:
        note += "; eps=0 reduction failed"
    if plot_dir is not None:
        report.render_eps_figure(plot_dir / f"{case.case_id}.png", pairs, u, bound,
                                 title=case.description)
    return [Row(case.case_id, "reconstruct", max_err, float(min_slack), seconds, ok, note)]


def _verify_pde(case: ManufacturedCase, plot_dir) -> list[Row]:
    parsed = parse_problem(case.problem)
    problem = parsed.payload
    rows = []

    # constant bound against the max error over a probe mesh
    def run_const():
        B = constant_bound(problem, parsed.mesh or (512, 512))
        x0, x1, y0, y1 = problem.rect
        X, Y = np.meshgrid(np.linspace(x0, x1, 301), np.linspace(y0, y1, 301), indexing="ij")
        eta = np.abs(exact_error(case, (X, Y)))
        return B, float(np.max(eta))

    (B, max_eta), t_const = _timed(run_const)
    rows.append(Row(case.case_id, "const", max_eta, B - max_eta, t_const, B >= max_eta))

    if case.case_id == "PDE-CONST":
        B_fine, t_fine = _timed(lambda: constant_bound(problem, (2049, 2049)))
        rel = abs(B - B_fine) / max(B_fine, 1e-300)
        rows.append(Row(case.case_id, "const-refine", None, MESH_REFINE_REL - rel,
                        t_fine, rel <= MESH_REFINE_REL,
                        f"2049x2049 mesh agrees to {rel:.2e}"))

    if parsed.query is not None:
        def run_curves():
            xq, yq = parsed.query[:, 0], parsed.query[:, 1]
            bounds = []
            geometry_err = 0.0
            for xv, yv in zip(xq, yq):
                curve = trace_characteristic(problem, (float(xv), float(yv)), parsed.trace_step)
                bounds.append(curve_bound(problem, curve))
                if case.case_id == "PDE-SPIRAL":
                    cx, cy = spiral_point(curve.start[0], curve.start[1], curve.s)
                    geometry_err = max(geometry_err, float(np.max(np.hypot(curve.x - cx, curve.y - cy))))
            eta = np.abs(exact_error(case, (xq, yq)))
            return np.array(bounds), eta, geometry_err

        (curve_b, eta_q, geom), t_curve = _timed(run_curves)
        slack = float(np.min(curve_b - eta_q))
        ok = slack >= 0.0 and geom <= SPIRAL_GEOMETRY_TOL
        note = f"{len(curve_b)} curves"
        if case.case_id == "PDE-SPIRAL":
            note += f", trace vs closed form {geom:.1e}"
        rows.append(Row(case.case_id, "characteristic", float(np.max(eta_q)), slack,
                        t_curve, ok, note))
        if plot_dir is not None:
            report.render_points_figure(
                plot_dir / f"{case.case_id}.png", parsed.query[:, 0], parsed.query[:, 1],
                curve_b, abs_error=eta_q, title=case.description,
            )
    elif plot_dir is not None:
        x0, x1, y0, y1 = problem.rect
        xs = np.linspace(x0, x1, 256)
        ys = np.linspace(y0, y1, 256)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        c_vals = np.broadcast_to(np.asarray(problem.c.evaluate({"x": X, "y": Y}), dtype=float), X.shape)
        r_vals = np.broadcast_to(np.asarray(problem.residual.sample_xy(X, Y), dtype=float), X.shape)
        report.render_field_figure(plot_dir / f"{case.case_id}.png", xs, ys,
                                   np.abs(r_vals / c_vals), B, title=case.description)
    return rows


# --------------------------------------------------------------------------
# operator property rows
# --------------------------------------------------------------------------

def _random_smooth(rng, t):
    coef = rng.standard_normal(4)
    return coef[0] * np.sin(3 * t) + coef[1] * np.cos(5 * t) + coef[2] * t**2 + coef[3]


def _property_rows() -> list[Row]:
    rows = []
    grid = linspace(1.0, 10_000)
    t = grid.nodes
    rng = np.random.default_rng(0)

    def ineq():
        worst = -np.inf
        for _ in range(50):
            lam = complex(rng.uniform(-3, 3), rng.uniform(-3, 3))
            vals = _random_smooth(rng, t)
            lhs = np.abs(apply_I(lam, SampledFunction(grid, vals)).values)
            rhs = apply_I(lam.real, SampledFunction(grid, np.abs(vals))).values
            worst = max(worst, float(np.max(lhs - rhs)))
        return worst

    worst, secs = _timed(ineq)
    rows.append(Row("PROP", "abs-inequality", None, INEQUALITY_ABS - worst, secs,
                    worst <= INEQUALITY_ABS, "50 random complex pairs"))

    def commute():
        # the discrete commutator of two trapezoid compositions shrinks as
        # h^2; K = 4e4 puts random complex pairs up to |lam| ~ 2*sqrt(2)
        # below the stated tolerance with margin
        fine = linspace(1.0, 40_000)
        tf = fine.nodes
        worst = 0.0
        for _ in range(10):
            lam1 = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
            lam2 = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
            f = SampledFunction(fine, _random_smooth(rng, tf))
            ab = apply_I(lam1, apply_I(lam2, f)).values
            ba = apply_I(lam2, apply_I(lam1, f)).values
            scale = float(np.max(np.abs(ab))) or 1.0
            worst = max(worst, float(np.max(np.abs(ab - ba))) / scale)
        return worst

    worst, secs = _timed(commute)
    rows.append(Row("PROP", "commutativity", None, COMMUTE_REL - worst, secs,
                    worst <= COMMUTE_REL))

    def linear():
        worst = 0.0
        for _ in range(10):
            lam = rng.uniform(-2, 2)
            f1 = _random_smooth(rng, t)
            f2 = _random_smooth(rng, t)
            c1, c2 = rng.uniform(-3, 3, 2)
            lhs = apply_I(lam, SampledFunction(grid, c1 * f1 + c2 * f2)).values
            rhs = c1 * apply_I(lam, SampledFunction(grid, f1)).values \
                + c2 * apply_I(lam, SampledFunction(grid, f2)).values
            scale = float(np.max(np.abs(rhs))) or 1.0
            worst = max(worst, float(np.max(np.abs(lhs - rhs))) / scale)
        return worst

    worst, secs = _timed(linear)
    rows.append(Row("PROP", "linearity", None, LINEARITY_REL - worst, secs,
                    worst <= LINEARITY_REL))

    def containment():
        # randomized containment of the nonlinear enclosure at k=3, j<=3
        k = 3
        tt = np.linspace(0.0, 1.0, 33)
        u = [np.sin(3 * tt) + 1.2, np.cos(2 * tt) - 0.4, 0.5 * tt**2 - 0.2]
        b = [np.full_like(tt, 0.05), np.full_like(tt, 0.02), np.full_like(tt, 0.08)]
        worst = -np.inf
        for j in (1, 2, 3):
            enclosure = nl_bound(j, k, u[:j], b[:j])
            base = nl_term(j, k, u[:j])
            for _ in range(1000 // 3 + 1):
                v = [u[i] + rng.uniform(-1, 1, tt.shape) * b[i] for i in range(j)]
                dev = np.abs(nl_term(j, k, v) - base)
                worst = max(worst, float(np.max(dev - enclosure)))
        return worst

    worst, secs = _timed(containment)
    rows.append(Row("PROP", "nl-containment", None, -worst, secs, worst <= 0.0,
                    "1000 randomized draws"))

    def block_equiv():
        # one 3x3 block at eigenvalue 4: bottom-up chain vs hand-composed powers
        lam = 4.0
        q = [SampledFunction(grid, np.abs(_random_smooth(rng, t))) for _ in range(3)]
        chain = operator_block_apply(lam, 3, q, safety=False)
        I = lambda f: apply_I(-lam, f)
        hand = [
            I(q[0]).values + I(I(q[1])).values + I(I(I(q[2]))).values,
            I(q[1]).values + I(I(q[2])).values,
            I(q[2]).values,
        ]
        worst = 0.0
        for got, want in zip(chain, hand):
            scale = float(np.max(np.abs(want))) or 1.0
            worst = max(worst, float(np.max(np.abs(got.values - want))) / scale)
        return worst

    worst, secs = _timed(block_equiv)
    rows.append(Row("PROP", "block-chain", None, 1e-8 - worst, secs, worst <= 1e-8,
                    "vs hand-composed powers"))
    return rows
