import math

import numpy as np
import pytest

from resbound.errors import StepUnderflow
from resbound.expr import eval_dual, parse
from resbound.operators import linspace
from resbound.oracle import (
    CATALOG_IDS,
    DEFAULT_SEED,
    catalog,
    duffing_components,
    duffing_rhs,
    exact_error,
    random_orthogonal,
    rk4_solve,
    rkf45_solve,
    spiral_boundary_starts,
    spiral_point,
)
from resbound.problems import parse_problem


class TestRK4:
    def test_exponential(self):
        grid = linspace(1.0, 10_000)
        traj = rk4_solve(lambda t, y: y, [1.0], grid)
        assert abs(traj[-1, 0] - math.e) < 1e-10

    def test_zero_rhs_constant(self):
        grid = linspace(1.0, 100)
        traj = rk4_solve(lambda t, y: np.zeros_like(y), [2.0, -1.0], grid)
        assert np.array_equal(traj, np.tile([2.0, -1.0], (101, 1)))

    def test_reproduces_manufactured_system(self):
        # forcing derived from the exact solution: f = dv/dt + A v
        case = {c.case_id: c for c in catalog()}["SYS-6"]
        A = np.array(case.problem["matrix"])
        exact = case.exact
        grid = linspace(1.0, 2000)

        def rhs(t, y):
            v = np.array([float(e.evaluate({"t": t})) for e in exact])
            dv = np.array([eval_dual(e, "t", {"t": t}, 1).derivatives[0] for e in exact])
            return (dv + A @ v) - A @ y

        y0 = np.array([float(e.evaluate({"t": 0.0})) for e in exact])
        traj = rk4_solve(rhs, y0, grid)
        v_end = np.array([float(e.evaluate({"t": 1.0})) for e in exact])
        assert np.max(np.abs(traj[-1] - v_end)) < 1e-8


class TestRKF45:
    def test_duffing_linear_limit_vs_closed_form(self):
        sol = rkf45_solve(duffing_rhs(0.0), [1.0, 1.0], (0.0, 2.0), 1e-10)
        t = np.linspace(0, 2, 501)
        closed = 2.5 * np.exp(-t) - 1.6 * np.exp(-2 * t) + 0.1 * np.cos(t) + 0.3 * np.sin(t)
        assert np.max(np.abs(sol(t)[:, 0] - closed)) < 1e-7

    def test_decay(self):
        sol = rkf45_solve(lambda t, y: -y, [1.0], (0.0, 1.0), 1e-10)
        t = np.linspace(0, 1, 101)
        assert np.max(np.abs(sol(t)[:, 0] - np.exp(-t))) < 1e-9

    def test_nonlinearity_active(self):
        t = np.linspace(0, 2, 41)
        plus = rkf45_solve(duffing_rhs(0.5), [1.0, 1.0], (0.0, 2.0), 1e-9)(t)[:, 0]
        minus = rkf45_solve(duffing_rhs(-0.5), [1.0, 1.0], (0.0, 2.0), 1e-9)(t)[:, 0]
        assert np.max(np.abs(plus - minus)) > 1e-4

    def test_tolerance_range(self):
        with pytest.raises(ValueError):
            rkf45_solve(lambda t, y: -y, [1.0], (0.0, 1.0), 1e-3)

    def test_step_underflow(self):
        # derivative blows up at t = 0.5; controller collapses the step
        def rhs(t, y):
            return np.array([1.0 / (0.5 - t)])

        with pytest.raises((StepUnderflow, ZeroDivisionError, FloatingPointError)):
            rkf45_solve(rhs, [0.0], (0.0, 1.0), 1e-10)


class TestCatalog:
    def test_all_cases_present(self):
        ids = [c.case_id for c in catalog()]
        assert ids == list(CATALOG_IDS)

    def test_manufactured_solution_satisfies_each_ode(self):
        # v = t^2 + t + 1 against the three forcing functions
        cases = {c.case_id: c for c in catalog()}
        for cid, coeffs in [("ODE-A", (2.0, 3.0)), ("ODE-B", (1.0, 0.0)), ("ODE-C", (0.0, -1.0))]:
            case = cases[cid]
            f = parse(case.problem["forcing"])
            v = case.exact[0]
            t = np.linspace(0, 1, 57)
            dv = v.derivatives("t", {"t": t}, 2)
            lv = dv[2] + coeffs[1] * dv[1] + coeffs[0] * dv[0]
            assert np.max(np.abs(lv - f.evaluate({"t": t}))) < 1e-12, cid

    def test_surrogate_matches_initial_conditions(self):
        # perturbations vanish with their first derivatives at t = 0
        cases = {c.case_id: c for c in catalog()}
        for cid in ("ODE-A", "ODE-B", "ODE-C"):
            p = cases[cid].perturbation[0]
            dv = eval_dual(p, "t", {"t": 0.0}, 1)
            assert abs(dv.value) < 1e-10
            assert abs(dv.derivatives[0]) < 1e-10
        for p in cases["SYS-6"].perturbation:
            assert abs(p.evaluate({"t": 0.0})) < 1e-10

    def test_pde_perturbations_vanish_on_gamma(self):
        cases = {c.case_id: c for c in catalog()}
        p = cases["PDE-SPIRAL"].perturbation[0]
        edge = np.linspace(-1, 1, 101)
        for x, y in [(edge, -1.0), (edge, 1.0), (-1.0, edge), (1.0, edge)]:
            assert np.max(np.abs(p.evaluate({"x": x, "y": y}))) < 1e-10
        pc = cases["PDE-CONST"].perturbation[0]
        assert np.max(np.abs(pc.evaluate({"x": -1.0, "y": edge}))) < 1e-10
        assert np.max(np.abs(pc.evaluate({"x": edge, "y": 1.0}))) < 1e-10

    def test_residuals_match_finite_differences(self):
        # residual expressions against a finite-difference application of
        # the operator to the surrogate; h balances truncation against
        # cancellation in the second difference
        cases = {c.case_id: c for c in catalog()}
        h = 1e-4
        t = np.linspace(2 * h, 1 - 2 * h, 23)
        for cid, coeffs in [("ODE-A", (2.0, 3.0)), ("ODE-B", (1.0, 0.0)), ("ODE-C", (0.0, -1.0))]:
            case = cases[cid]
            u = parse(case.problem["surrogate"])
            f = parse(case.problem["forcing"])
            r = parse(case.problem["residual"]["expression"])

            uv = lambda tt: u.evaluate({"t": tt})
            d1 = (uv(t + h) - uv(t - h)) / (2 * h)
            d2 = (uv(t + h) - 2 * uv(t) + uv(t - h)) / h**2
            fd_residual = d2 + coeffs[1] * d1 + coeffs[0] * uv(t) - f.evaluate({"t": t})
            assert np.max(np.abs(fd_residual - r.evaluate({"t": t}))) < 1e-6, cid

    def test_pde_residuals_match_finite_differences(self):
        cases = {c.case_id: c for c in catalog()}
        h = 1e-6
        pts = np.linspace(-0.9, 0.9, 13)
        X, Y = np.meshgrid(pts, pts, indexing="ij")
        for cid in ("PDE-SPIRAL", "PDE-CONST"):
            case = cases[cid]
            d = case.problem
            u = parse(d["surrogate"])
            a, b, c, f = (parse(d[k]) for k in "abcf")
            r = parse(d["residual"]["expression"])
            ux = (u.evaluate({"x": X + h, "y": Y}) - u.evaluate({"x": X - h, "y": Y})) / (2 * h)
            uy = (u.evaluate({"x": X, "y": Y + h}) - u.evaluate({"x": X, "y": Y - h})) / (2 * h)
            fd = (a.evaluate({"x": X, "y": Y}) * ux + b.evaluate({"x": X, "y": Y}) * uy
                  + c.evaluate({"x": X, "y": Y}) * u.evaluate({"x": X, "y": Y})
                  - f.evaluate({"x": X, "y": Y}))
            assert np.max(np.abs(fd - r.evaluate({"x": X, "y": Y}))) < 1e-6, cid

    def test_duffing_components_match_initial_conditions(self):
        texts = duffing_components()
        assert len(texts) == 7
        u0 = eval_dual(parse(texts[0]), "t", {"t": 0.0}, 1)
        assert u0.value == 1.0 and u0.derivatives[0] == 1.0
        for text in texts[1:]:
            dv = eval_dual(parse(text), "t", {"t": 0.0}, 1)
            assert dv.value == 0.0 and dv.derivatives[0] == 0.0

    def test_random_orthogonal_is_seeded_and_orthogonal(self):
        q1 = random_orthogonal(6, DEFAULT_SEED)
        q2 = random_orthogonal(6, DEFAULT_SEED)
        assert np.array_equal(q1, q2)
        assert np.allclose(q1 @ q1.T, np.eye(6), atol=1e-12)

    def test_amplitude_scales_perturbation(self):
        big = {c.case_id: c for c in catalog(amplitude=0.02)}["ODE-A"]
        small = {c.case_id: c for c in catalog(amplitude=0.01)}["ODE-A"]
        t = np.linspace(0, 1, 11)
        assert np.allclose(
            exact_error(big, t), 2 * exact_error(small, t), rtol=1e-12)


class TestExactError:
    def test_zero_amplitude(self):
        case = {c.case_id: c for c in catalog(amplitude=0.0)}["ODE-A"]
        assert np.array_equal(exact_error(case, np.linspace(0, 1, 5)), np.zeros(5))

    def test_ode_a_at_one(self):
        case = {c.case_id: c for c in catalog()}["ODE-A"]
        assert exact_error(case, np.array([1.0]))[0] == pytest.approx(0.01 * math.exp(-1))

    def test_sys6_cross_check_with_rk4(self):
        # integrate the error equation d(eta)/dt + A eta = r directly and
        # compare with the closed-form perturbation
        case = {c.case_id: c for c in catalog()}["SYS-6"]
        parsed = parse_problem(case.problem)
        A = np.array(case.problem["matrix"])
        residual = parsed.payload.residual
        grid = linspace(1.0, 2000)

        def rhs(t, y):
            r = residual.sample_matrix(np.array([t]))[0]
            return r - A @ y

        traj = rk4_solve(rhs, np.zeros(6), grid)
        eta = exact_error(case, grid.nodes)
        assert np.max(np.abs(traj - eta)) < 1e-8

    def test_duffing_has_no_closed_form(self):
        case = {c.case_id: c for c in catalog()}["DUFF"]
        with pytest.raises(ValueError):
            exact_error(case, np.array([0.5]))


class TestSpiralHelpers:
    def test_boundary_starts_on_boundary(self):
        starts = spiral_boundary_starts()
        assert len(starts) == 16
        for x, y in starts:
            assert max(abs(x), abs(y)) == pytest.approx(1.0)

    def test_spiral_satisfies_field(self):
        s = np.linspace(0, 1.5, 401)
        x, y = spiral_point(1.0, 0.5, s)
        h = s[1] - s[0]
        dx = (x[2:] - x[:-2]) / (2 * h)
        dy = (y[2:] - y[:-2]) / (2 * h)
        assert np.max(np.abs(dx - (-x - y)[1:-1])) < 1e-4
        assert np.max(np.abs(dy - (x - y)[1:-1])) < 1e-4
