import numpy as np
import pytest

from resbound.errors import DegreeTooLarge, InvalidDomain, OutOfDomain
from resbound.expr import parse
from resbound.operators import (
    SampledFunction,
    apply_I,
    apply_I_variable,
    char_roots,
    cumtrapz,
    interp_linear,
    linspace,
    max_abs,
    neighbor_max,
)


class TestLinspace:
    def test_five_nodes(self):
        g = linspace(1.0, 4)
        assert np.array_equal(g.nodes, [0.0, 0.25, 0.5, 0.75, 1.0])

    def test_three_nodes(self):
        assert np.array_equal(linspace(2.0, 2).nodes, [0.0, 1.0, 2.0])

    def test_invalid_domain(self):
        with pytest.raises(InvalidDomain):
            linspace(-1.0, 10)
        with pytest.raises(InvalidDomain):
            linspace(1.0, 1)

    def test_exact_endpoints(self):
        g = linspace(0.3, 7)
        assert g.nodes[0] == 0.0
        assert g.nodes[-1] == 0.3


class TestCumtrapz:
    def test_constant_exact(self):
        g = linspace(1.0, 10)
        out = cumtrapz(SampledFunction(g, np.ones(11)))
        assert np.allclose(out.values, np.arange(11) / 10, atol=1e-15)

    def test_linear_exact(self):
        g = linspace(1.0, 8)  # dyadic spacing: sums are exact
        t = g.nodes
        out = cumtrapz(SampledFunction(g, t))
        assert np.array_equal(out.values, t**2 / 2)

    def test_safety_dominates(self):
        g = linspace(1.0, 200)
        rng = np.random.default_rng(5)
        vals = np.abs(rng.standard_normal(201))
        plain = cumtrapz(SampledFunction(g, vals)).values
        safe = cumtrapz(SampledFunction(g, vals), safety=True).values
        assert np.all(safe >= plain)

    def test_neighbor_max_ends_clamped(self):
        out = neighbor_max(np.array([5.0, 1.0, 2.0, 9.0]))
        assert np.array_equal(out, [5.0, 5.0, 9.0, 9.0])


class TestApplyI:
    def test_constant_negative_lambda_closed_form(self):
        # I_lam[c] = c/(-Re lam) (1 - e^{Re lam t})
        g = linspace(1.0, 10_000)
        out = apply_I(-1.0, SampledFunction(g, np.full(10_001, 3.0)))
        ref = 3.0 * (1 - np.exp(-g.nodes))
        assert np.max(np.abs(out.values - ref)) < 1e-8

    def test_lambda_zero_monomial_rule(self):
        # I_0[c t^m] = c/(m+1) t^{m+1}; m = 0 is exact for the trapezoid
        g = linspace(1.0, 1000)
        out = apply_I(0.0, SampledFunction(g, np.full(1001, 2.5)))
        assert np.allclose(out.values, 2.5 * g.nodes, atol=1e-14)

    def test_delta_initial_value_term(self):
        g = linspace(1.0, 100)
        out = apply_I(-1.0, SampledFunction(g, np.zeros(101)), delta=1.0)
        assert np.allclose(out.values, np.exp(-g.nodes), atol=1e-15)

    def test_positive_lambda_stable_accumulation(self):
        # lam = 30 on [0, 30] with psi supported on [15, 30]: the literal
        # form's prefactor e^{lam t} = e^{900} overflows although the true
        # value I(30) = (e^{450} - 1)/30 ~ 2.4e193 is representable; the
        # per-interval kernel never leaves the representable range
        g = linspace(30.0, 20_000)
        t = g.nodes
        psi = np.where(t >= 15.0, 1.0, 0.0)
        out = apply_I(30.0, SampledFunction(g, psi)).values
        assert np.all(np.isfinite(out))
        # per-step trapezoid error compounds over ~450 e-foldings here, so
        # only magnitude-level agreement is meaningful at this resolution
        ref_end = (np.exp(450.0) - 1.0) / 30.0
        assert abs(out[-1] - ref_end) <= 0.05 * ref_end
        k = round(20.0 / g.spacing)
        ref_mid = (np.exp(150.0) - 1.0) / 30.0
        assert abs(out[k] - ref_mid) <= 0.05 * ref_mid

    def test_overflow_raises(self):
        g = linspace(50.0, 2000)
        with pytest.raises(OverflowError):
            apply_I(50.0, SampledFunction(g, np.ones(2001)))

    def test_monotonicity_exact(self):
        g = linspace(1.0, 500)
        rng = np.random.default_rng(1)
        lo = np.abs(rng.standard_normal(501))
        hi = lo + np.abs(rng.standard_normal(501))
        out_lo = apply_I(-0.8, SampledFunction(g, lo)).values
        out_hi = apply_I(-0.8, SampledFunction(g, hi)).values
        assert np.all(out_hi >= out_lo)

    def test_safety_inflation_dominates(self):
        g = linspace(1.0, 500)
        vals = np.abs(np.sin(13 * g.nodes))
        f = SampledFunction(g, vals)
        assert np.all(apply_I(-1.0, f, safety=True).values >= apply_I(-1.0, f).values)

    def test_nonnegative_output_for_nonnegative_input(self):
        g = linspace(2.0, 300)
        vals = np.abs(np.cos(9 * g.nodes))
        for lam in (-3.0, 0.0, 1.5):
            assert np.all(apply_I(lam, SampledFunction(g, vals)).values >= 0.0)


class TestApplyIVariable:
    def test_constant_reduction(self):
        g = linspace(1.0, 5000)
        psi = SampledFunction(g, np.abs(np.sin(5 * g.nodes)) + 0.2)
        var = apply_I_variable(parse("-1"), psi).values
        const = apply_I(-1.0, psi).values
        assert np.max(np.abs(var - const)) <= 1e-10 * np.max(np.abs(const))

    def test_brute_force_oracle(self):
        # lam(t) = -t, psi = 1: I(t) = integral_0^t exp((tau^2 - t^2)/2) dtau
        g = linspace(1.0, 20_000)
        out = apply_I_variable(parse("-t"), SampledFunction(g, np.ones(20_001))).values
        for tq in (0.25, 0.5, 1.0):
            taus = np.linspace(0.0, tq, 400_001)
            ref = np.trapezoid(np.exp((taus**2 - tq**2) / 2), taus)
            k = round(tq / g.spacing)
            assert abs(out[k] - ref) <= 1e-6 * ref

    def test_zero_input(self):
        g = linspace(1.0, 100)
        out = apply_I_variable(parse("t^2"), SampledFunction(g, np.zeros(101)))
        assert np.array_equal(out.values, np.zeros(101))


class TestCharRoots:
    def test_paper_root_sets(self):
        assert char_roots([2.0, 3.0]).roots == (-2.0, -1.0)
        assert char_roots([1.0, 0.0]).roots == (-1j, 1j)
        assert char_roots([0.0, -1.0]).roots == (0.0, 1.0)

    def test_conjugate_pairs_exact(self):
        roots = char_roots([5.0, 0.1, 2.0, 0.3]).roots
        complex_roots = [z for z in roots if z.imag != 0]
        assert len(complex_roots) % 2 == 0
        for z in complex_roots:
            assert z.conjugate() in complex_roots

    def test_reconstruction_random(self):
        rng = np.random.default_rng(9)
        for _ in range(25):
            n = int(rng.integers(1, 9))
            coeffs = rng.uniform(-4, 4, n)
            roots = np.array(char_roots(coeffs).roots)
            recon = np.real(np.poly(roots))[1:][::-1]
            assert np.all(np.abs(recon - coeffs) <= 1e-8 * np.maximum(1.0, np.abs(coeffs)))

    def test_degree_cap(self):
        with pytest.raises(DegreeTooLarge):
            char_roots(np.ones(11))


class TestInterpAndMax:
    def test_midpoint(self):
        g = linspace(1.0, 2)
        f = SampledFunction(g, np.array([0.0, 0.5, 1.0]))
        assert interp_linear(f, [0.25])[0] == 0.25

    def test_exact_at_nodes(self):
        g = linspace(1.0, 10)
        vals = np.sin(g.nodes)
        f = SampledFunction(g, vals)
        assert np.array_equal(interp_linear(f, g.nodes), vals)

    def test_out_of_domain(self):
        g = linspace(1.0, 4)
        f = SampledFunction(g, np.zeros(5))
        with pytest.raises(OutOfDomain):
            interp_linear(f, [1.5])
        with pytest.raises(OutOfDomain):
            interp_linear(f, [-0.1])

    def test_max_abs(self):
        g = linspace(1.0, 2)
        assert max_abs(SampledFunction(g, np.array([-3.0, 1.0, 2.0]))) == 3.0
        assert max_abs(SampledFunction(g, np.zeros(3))) == 0.0

    def test_max_abs_dense_grid_oracle(self):
        g = linspace(1.0, 10_000)
        f = SampledFunction(g, np.sin(g.nodes))
        assert max_abs(f) == pytest.approx(np.sin(1.0), abs=1e-8)


class TestOperatorProperties:
    """Executable versions of the inverse-operator propositions."""

    def test_absolute_inequality_50_random_pairs(self):
        grid = linspace(1.0, 10_000)
        t = grid.nodes
        rng = np.random.default_rng(0)
        for _ in range(50):
            lam = complex(rng.uniform(-3, 3), rng.uniform(-3, 3))
            c = rng.standard_normal(4)
            vals = c[0] * np.sin(3 * t) + c[1] * np.cos(5 * t) + c[2] * t**2 + c[3]
            lhs = np.abs(apply_I(lam, SampledFunction(grid, vals)).values)
            rhs = apply_I(lam.real, SampledFunction(grid, np.abs(vals))).values
            assert np.all(lhs <= rhs + 1e-9)

    def test_linearity(self):
        grid = linspace(1.0, 10_000)
        t = grid.nodes
        rng = np.random.default_rng(3)
        for _ in range(10):
            lam = rng.uniform(-2, 2)
            f1 = rng.standard_normal(3) @ np.vstack([np.sin(2 * t), t, np.ones_like(t)])
            f2 = rng.standard_normal(3) @ np.vstack([np.cos(3 * t), t**2, np.ones_like(t)])
            c1, c2 = rng.uniform(-3, 3, 2)
            lhs = apply_I(lam, SampledFunction(grid, c1 * f1 + c2 * f2)).values
            rhs = c1 * apply_I(lam, SampledFunction(grid, f1)).values \
                + c2 * apply_I(lam, SampledFunction(grid, f2)).values
            scale = np.max(np.abs(rhs)) or 1.0
            assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale

    def test_commutativity(self):
        # discrete commutator shrinks as h^2; K = 4e4 meets the 1e-8
        # tolerance for |Re|, |Im| up to 2
        grid = linspace(1.0, 40_000)
        t = grid.nodes
        rng = np.random.default_rng(4)
        for _ in range(5):
            lam1 = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
            lam2 = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
            f = SampledFunction(grid, np.sin(3 * t) + 0.5 * t**2)
            ab = apply_I(lam1, apply_I(lam2, f)).values
            ba = apply_I(lam2, apply_I(lam1, f)).values
            scale = np.max(np.abs(ab)) or 1.0
            assert np.max(np.abs(ab - ba)) <= 1e-8 * scale
