import numpy as np
import pytest

from resbound.errors import IllConditionedBoundWarning, OutOfDomain, UnstableSystem
from resbound.expr import parse
from resbound.ode import (
    LinearODEProblem,
    first_order_variable_bound,
    loose_bound,
    tight_bound,
)
from resbound.residuals import (
    CallableResidual,
    DerivedLinearResidual,
    ExpressionResidual,
    SampledResidual,
)


def _const_residual(value: float):
    return CallableResidual(lambda t, v=value: np.full_like(np.asarray(t, dtype=float), v))


class TestLooseBound:
    def test_stable_pair(self):
        # roots {-1, -2}: Z = 0, C = 1/2, B = 0.05 everywhere
        p = LinearODEProblem(_const_residual(0.1), 1.0, coefficients=(2.0, 3.0), grid_k=100)
        rep = loose_bound(p)
        assert rep.zero_root_count == 0
        assert rep.coefficient == pytest.approx(0.5)
        assert rep.r_max == pytest.approx(0.1)
        assert np.allclose(rep.values, 0.05)

    def test_marginal_pair(self):
        # roots {+-i}: Z = 2, C = 1, B = 0.05 t^2
        p = LinearODEProblem(_const_residual(0.1), 1.0, coefficients=(1.0, 0.0), grid_k=100)
        rep = loose_bound(p)
        assert rep.zero_root_count == 2
        assert rep.coefficient == pytest.approx(1.0)
        assert np.allclose(rep.values, 0.05 * rep.points**2)

    def test_unstable_raises(self):
        p = LinearODEProblem(_const_residual(0.1), 1.0, coefficients=(0.0, -1.0), grid_k=100)
        with pytest.raises(UnstableSystem):
            loose_bound(p)

    def test_near_axis_warning(self):
        p = LinearODEProblem(_const_residual(0.1), 1.0, coefficients=(1e-8,), grid_k=100)
        with pytest.warns(IllConditionedBoundWarning):
            loose_bound(p)

    def test_nondecreasing_when_marginal(self):
        p = LinearODEProblem(_const_residual(0.2), 2.0, coefficients=(0.0,), grid_k=50)
        rep = loose_bound(p)
        assert rep.zero_root_count == 1
        assert np.all(np.diff(rep.values) >= 0)


class TestTightBound:
    def test_single_integrator_root_zero(self):
        # n = 1 with root 0: B(t) = integral of |r|; r = 1 gives B = t
        p = LinearODEProblem(_const_residual(1.0), 1.0, coefficients=(0.0,), grid_k=1000)
        series = tight_bound(p, safety=False)
        assert np.allclose(series.values, series.points, atol=1e-12)

    def test_starts_at_zero(self):
        p = LinearODEProblem(_const_residual(1.0), 1.0, coefficients=(2.0, 3.0), grid_k=100)
        assert tight_bound(p).values[0] == 0.0

    def test_dominance_constant_residual(self):
        p = LinearODEProblem(_const_residual(0.3), 1.0, coefficients=(2.0, 3.0), grid_k=2000)
        tight = tight_bound(p)
        loose = loose_bound(p)
        assert np.all(tight.values <= loose.values * (1 + 1e-9))

    def test_manufactured_soundness(self):
        # v'' + 3v' + 2v = f with surrogate u = v + 0.01 t^2 e^{-t}:
        # residual known in closed form, error exactly the perturbation
        res = ExpressionResidual(parse("0.02*(1+t)*exp(-t)"))
        p = LinearODEProblem(res, 1.0, coefficients=(2.0, 3.0))
        series = tight_bound(p)
        eta = 0.01 * series.points**2 * np.exp(-series.points)
        assert np.all(series.values >= eta)

    def test_derived_residual_matches_closed_form(self):
        derived = DerivedLinearResidual(
            (2.0, 3.0), parse("t^2+t+1+0.01*t^2*exp(-t)"), parse("2*t^2+8*t+7"))
        closed = ExpressionResidual(parse("0.02*(1+t)*exp(-t)"))
        t = np.linspace(0, 1, 257)
        assert np.max(np.abs(derived.sample(t) - closed.sample(t))) < 1e-13

    def test_scaling_exact(self):
        p1 = LinearODEProblem(_const_residual(0.25), 1.0, coefficients=(2.0, 3.0), grid_k=500)
        p2 = LinearODEProblem(_const_residual(0.5), 1.0, coefficients=(2.0, 3.0), grid_k=500)
        assert np.array_equal(tight_bound(p2).values, 2 * tight_bound(p1).values)
        assert np.array_equal(loose_bound(p2).values, 2 * loose_bound(p1).values)

    def test_query_outside_grid_rejected(self):
        p = LinearODEProblem(_const_residual(1.0), 1.0, coefficients=(1.0,),
                             grid_k=100, query=np.array([0.5, 1.2]))
        with pytest.raises(OutOfDomain):
            tight_bound(p)

    def test_unstable_ok(self):
        res = ExpressionResidual(parse("0.02*(t^2-3*t+1)*exp(-t)"))
        p = LinearODEProblem(res, 1.0, coefficients=(0.0, -1.0))
        series = tight_bound(p)
        eta = 0.01 * series.points**2 * np.exp(-series.points)
        assert np.all(series.values >= eta)

    def test_violently_unstable_overflows(self):
        # root +50 over T = 30: the bound value is e^{1500}-sized and not
        # representable; the overflow must surface, not silently saturate
        p = LinearODEProblem(_const_residual(1.0), 30.0, coefficients=(-50.0,),
                             grid_k=3000)
        with pytest.raises(OverflowError):
            tight_bound(p)


class TestVariableCoefficient:
    def test_constant_reduction(self):
        res = ExpressionResidual(parse("abs(sin(5*t))+0.1"))
        pv = LinearODEProblem(res, 1.0, coefficient_expr=parse("1"))
        pc = LinearODEProblem(res, 1.0, coefficients=(1.0,))
        bv = first_order_variable_bound(pv).values
        bc = tight_bound(pc).values
        assert np.max(np.abs(bv - bc)) <= 1e-10 * np.max(bc)

    def test_brute_force_oracle(self):
        # a0(t) = 1 + t, r = 1: B(t) = integral_0^t e^{-(t-tau)-(t^2-tau^2)/2} dtau
        p = LinearODEProblem(_const_residual(1.0), 1.0,
                             coefficient_expr=parse("1+t"), grid_k=20_000)
        series = first_order_variable_bound(p, safety=False)
        for tq in (0.3, 0.7, 1.0):
            taus = np.linspace(0.0, tq, 400_001)
            ref = np.trapezoid(np.exp(-(tq - taus) - (tq**2 - taus**2) / 2), taus)
            k = round(tq * 20_000)
            assert abs(series.values[k] - ref) <= 1e-6 * ref

    def test_zero_residual(self):
        p = LinearODEProblem(_const_residual(0.0), 1.0, coefficient_expr=parse("1+t"),
                             grid_k=200)
        assert np.array_equal(first_order_variable_bound(p).values, np.zeros(201))


class TestResidualProviders:
    def test_sampled_residual_interpolates(self):
        t = np.linspace(0, 1, 51)
        provider = SampledResidual(t, t**2)
        grid_t = np.linspace(0, 1, 11)
        assert np.allclose(provider.sample(grid_t), grid_t**2, atol=1e-3)

    def test_sampled_residual_no_extrapolation(self):
        provider = SampledResidual(np.linspace(0, 0.5, 20), np.ones(20))
        with pytest.raises(OutOfDomain):
            provider.sample(np.linspace(0, 1.0, 5))

    def test_problem_needs_exactly_one_coefficient_form(self):
        with pytest.raises(ValueError):
            LinearODEProblem(_const_residual(1.0), 1.0)
        with pytest.raises(ValueError):
            LinearODEProblem(_const_residual(1.0), 1.0,
                             coefficients=(1.0,), coefficient_expr=parse("1"))
