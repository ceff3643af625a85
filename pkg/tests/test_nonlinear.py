import numpy as np
import pytest

from resbound.errors import OutOfValidityWarning, UnstableSystem
from resbound.expr import parse
from resbound.nonlinear import (
    EpsQuery,
    PerturbationProblem,
    component_bounds,
    composition_count,
    compositions,
    nl_bound,
    nl_term,
    reconstruct,
)
from resbound.ode import LinearODEProblem, tight_bound
from resbound.operators import SampledFunction, interp_linear
from resbound.residuals import CallableResidual


class TestNlTerm:
    def test_order_one_is_kth_power(self):
        t = np.linspace(0, 1, 33)
        u0 = np.sin(t) + 2
        assert np.allclose(nl_term(1, 3, [u0]), u0**3, rtol=1e-15)

    def test_order_two_cubic(self):
        t = np.linspace(0, 1, 33)
        u0, u1 = np.sin(t) + 2, np.cos(t)
        assert np.allclose(nl_term(2, 3, [u0, u1]), 3 * u0**2 * u1, rtol=1e-14)

    def test_order_three_cubic(self):
        t = np.linspace(0, 1, 33)
        u0, u1, u2 = np.sin(t) + 2, np.cos(t), t**2
        want = 3 * u0 * u1**2 + 3 * u0**2 * u2
        assert np.allclose(nl_term(3, 3, [u0, u1, u2]), want, rtol=1e-14)

    def test_term_counts(self):
        for j in range(1, 9):
            for k in (2, 3, 4):
                assert len(list(compositions(j - 1, k))) == composition_count(j, k)


class TestNlBound:
    def test_zero_bounds_give_zero(self):
        t = np.linspace(0, 1, 17)
        u = [np.sin(t), np.cos(t)]
        b = [np.zeros_like(t), np.zeros_like(t)]
        assert np.allclose(nl_bound(2, 3, u, b), 0.0, atol=1e-15)

    def test_binomial_quadratic(self):
        # j = 1, k = 2: (|u0| + B0)^2 - u0^2 = 2|u0|B0 + B0^2
        t = np.linspace(0, 1, 17)
        u0 = np.sin(t) - 0.4
        b0 = np.full_like(t, 0.3)
        want = 2 * np.abs(u0) * b0 + b0**2
        assert np.allclose(nl_bound(1, 2, [u0], [b0]), want, rtol=1e-14)

    def test_randomized_containment(self):
        # 1000 random admissible component draws never exceed the enclosure
        rng = np.random.default_rng(12)
        t = np.linspace(0, 1, 29)
        u = [np.sin(3 * t) + 1.2, np.cos(2 * t) - 0.4, 0.5 * t**2 - 0.2]
        b = [np.full_like(t, 0.05), np.full_like(t, 0.02), np.full_like(t, 0.08)]
        for j in (1, 2, 3):
            enclosure = nl_bound(j, 3, u[:j], b[:j])
            base = nl_term(j, 3, u[:j])
            for _ in range(334):
                v = [u[i] + rng.uniform(-1, 1, t.shape) * b[i] for i in range(j)]
                assert np.all(np.abs(nl_term(j, 3, v) - base) <= enclosure + 1e-15)


def _nl_problem(components, residuals=None, **kw):
    defaults = dict(
        coefficients=(1.0,), degree=2, forcing=parse("exp(-t)+exp(-2*t)"),
        t_end=1.0, grid_k=2000, validity_radius=0.5,
    )
    defaults.update(kw)
    return PerturbationProblem(components=components, residuals=residuals, **defaults)


class TestComponentBounds:
    def test_order_zero_reduces_to_linear(self):
        # single surrogate component: B_0 is exactly the linear tight bound
        # of its residual r_0 = L u_0 - f
        comp = parse("exp(-t)+0.01*t^2")
        prob = _nl_problem((comp,), forcing=parse("0"))
        cb = component_bounds(prob)
        # L u0 = d/dt u0 + u0 = 0.02 t + 0.01 t^2 for L = d/dt + 1
        lp = LinearODEProblem(
            CallableResidual(lambda t: 0.02 * t + 0.01 * t**2),
            1.0, coefficients=(1.0,), grid_k=2000)
        linear = tight_bound(lp)
        assert np.allclose(cb.arrays[0], linear.values, rtol=1e-12, atol=1e-16)

    def test_exact_components_zero_bounds(self):
        # v0 = e^{-t}, v1 = e^{-2t} - e^{-t} solve the expansion of
        # v' + v + eps v^2 = f with f = L v0; all residuals vanish
        comps = (parse("exp(-t)"), parse("exp(-2*t)-exp(-t)"))
        prob = _nl_problem(comps, forcing=parse("0"))
        cb = component_bounds(prob)
        for b in cb.arrays:
            assert np.max(b) <= 1e-12

    def test_loose_method_requires_stability(self):
        prob = PerturbationProblem(
            coefficients=(0.0, -1.0), degree=2,
            components=(parse("t"), parse("t^2")),
            forcing=parse("1"), t_end=1.0, grid_k=500)
        with pytest.raises(UnstableSystem):
            component_bounds(prob, method="loose")

    def test_tight_below_loose(self):
        comps = (parse("exp(-t)+0.01*t*exp(-t)"), parse("exp(-2*t)-exp(-t)"))
        prob = _nl_problem(comps, forcing=parse("0"))
        tight_cb = component_bounds(prob, method="tight")
        loose_cb = component_bounds(prob, method="loose")
        for bt, bl in zip(tight_cb.arrays, loose_cb.arrays):
            assert np.all(bt <= bl * (1 + 1e-9) + 1e-15)


class TestResidualConsistency:
    def test_consistent_explicit_residuals_accepted(self):
        from resbound.residuals import ExpressionResidual

        comps = (parse("exp(-t)+0.01*t*exp(-t)"),)
        # L u0 - 0 for L = d/dt + 1 collapses to 0.01 e^{-t}
        r0 = ExpressionResidual(parse("0.01*exp(-t)"))
        prob = _nl_problem(comps, residuals=(r0,), forcing=parse("0"))
        cb = component_bounds(prob)
        assert np.all(cb.arrays[0] >= 0)

    def test_mismatched_residuals_rejected(self):
        from resbound.residuals import ExpressionResidual

        comps = (parse("exp(-t)+0.01*t*exp(-t)"),)
        wrong = ExpressionResidual(parse("0.5+t"))
        prob = _nl_problem(comps, residuals=(wrong,), forcing=parse("0"))
        with pytest.raises(ValueError, match="disagrees"):
            component_bounds(prob)


class TestReconstruct:
    def _setup(self):
        comps = (parse("exp(-t)+0.01*t*exp(-t)"), parse("exp(-2*t)-exp(-t)+0.02*t*exp(-t)"))
        prob = _nl_problem(comps, forcing=parse("0"))
        return prob, component_bounds(prob)

    def test_eps_zero_is_component_zero(self):
        prob, cb = self._setup()
        t = np.linspace(0, 1, 11)
        u, b = reconstruct(prob, EpsQuery(np.column_stack([t, np.zeros_like(t)])), cb)
        assert np.allclose(u, prob.components[0].evaluate({"t": t}), rtol=1e-15)
        assert np.array_equal(b, interp_linear(SampledFunction(cb.grid, cb.arrays[0]), t))

    def test_sign_symmetry_of_bound(self):
        prob, cb = self._setup()
        t = np.linspace(0, 1, 11)
        _, b_plus = reconstruct(prob, EpsQuery(np.column_stack([t, np.full_like(t, 0.3)])), cb)
        _, b_minus = reconstruct(prob, EpsQuery(np.column_stack([t, np.full_like(t, -0.3)])), cb)
        assert np.array_equal(b_plus, b_minus)

    def test_bound_monotone_in_eps(self):
        prob, cb = self._setup()
        t = np.linspace(0, 1, 11)
        previous = None
        for eps in (0.0, 0.1, 0.2, 0.4):
            _, b = reconstruct(prob, EpsQuery(np.column_stack([t, np.full_like(t, eps)])), cb)
            if previous is not None:
                assert np.all(b >= previous)
            previous = b

    def test_out_of_validity_warns(self):
        prob, cb = self._setup()
        with pytest.warns(OutOfValidityWarning):
            reconstruct(prob, EpsQuery(np.array([[0.5, 0.9]])), cb)


class TestSequentialSoundness:
    def test_manufactured_expansion(self):
        # L = d/dt + 1, k = 2, f = L v0 with v0 = e^{-t}; exact components
        # v1 = e^{-2t} - e^{-t}, v2 = e^{-t} - 2 e^{-2t} + e^{-3t}.
        # Surrogates add zero-initial-value perturbations; the certified
        # component bounds must cover the reconstruction error for |eps|
        # within the declared radius.
        exact = [
            parse("exp(-t)"),
            parse("exp(-2*t)-exp(-t)"),
            parse("exp(-t)-2*exp(-2*t)+exp(-3*t)"),
        ]
        perturb = ["0.01*t*exp(-t)", "-0.02*t*exp(-t)", "0.015*t*exp(-2*t)"]
        comps = tuple(parse(f"{e}+{p}") for e, p in zip(exact, perturb))
        prob = PerturbationProblem(
            coefficients=(1.0,), degree=2, components=comps, forcing=parse("0"),
            t_end=1.0, grid_k=4000, validity_radius=0.5)
        cb = component_bounds(prob)
        t = np.linspace(0, 1, 101)
        for eps in (-0.5, -0.2, 0.0, 0.2, 0.5):
            u, b = reconstruct(prob, EpsQuery(np.column_stack([t, np.full_like(t, eps)])), cb)
            v = sum(eps**j * exact[j].evaluate({"t": t}) for j in range(3))
            assert np.all(np.abs(u - v) <= b), f"eps={eps}"

    def test_component_bounds_cover_each_component(self):
        exact = [parse("exp(-t)"), parse("exp(-2*t)-exp(-t)")]
        perturb = [parse("0.01*t*exp(-t)"), parse("-0.02*t*exp(-t)")]
        comps = tuple(parse(f"{e}+{p}") for e, p in zip(exact, perturb))
        prob = _nl_problem(comps, forcing=parse("0"), grid_k=4000)
        cb = component_bounds(prob)
        t = cb.grid.nodes
        for j in range(2):
            eta_j = np.abs(perturb[j].evaluate({"t": t}))
            assert np.all(cb.arrays[j] >= eta_j), f"component {j}"
