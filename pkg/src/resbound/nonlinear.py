"""Solution reconstruction and error bounds for ``L v + eps v^k = f``.

The solution family v(t; eps) is expanded in powers of eps. Each series
component solves a linear problem: the zeroth carries the original data,
while component j >= 1 solves ``L v_j = -NL_j[v]`` with zero initial
values, where NL_j collects all ordered k-fold products of lower
components whose orders sum to j - 1. Given approximate components u_j
and their residuals, every component error is bounded with the linear
machinery plus a product-enclosure term for the nonlinearity, and the
reconstructed solution sum_{j<=J} eps^j u_j carries the certified bound

    B(t; eps) = sum_{j<=J} |eps|^j B_j(t).

The bound certifies the truncated series only: the tail beyond order J is
not controlled, which is why queries carry a declared validity radius for
|eps| and the CLI reports the bound as conditional on truncation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import comb
from typing import Optional, Sequence

import numpy as np

from .errors import OutOfValidityWarning
from .expr import Expression
from .ode import DEFAULT_GRID_K, LinearODEProblem, loose_bound, tight_bound
from .operators import Grid, SampledFunction, interp_linear, linspace
from .residuals import CallableResidual

__all__ = [
    "PerturbationProblem",
    "EpsQuery",
    "ComponentBounds",
    "nl_term",
    "nl_bound",
    "component_bounds",
    "reconstruct",
    "compositions",
]


def compositions(total: int, parts: int):
    """Yield all ordered tuples of ``parts`` nonnegative ints summing to
    ``total``; there are C(total + parts - 1, parts - 1) of them."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in compositions(total - head, parts - 1):
            yield (head,) + rest


def composition_count(j: int, k: int) -> int:
    """Number of product terms in the order-j nonlinear forcing."""
    return comb(j - 1 + k - 1, k - 1)


def nl_term(j: int, k: int, components: Sequence[np.ndarray]) -> np.ndarray:
    """Nodewise NL_j: sum over ordered k-tuples (j_1 .. j_k) with
    sum = j - 1 of the product components[j_1] * ... * components[j_k]."""
    if j < 1:
        raise ValueError("nonlinear terms start at order 1")
    if len(components) < j:
        raise ValueError(f"order {j} needs components 0..{j - 1}")
    acc = 0.0
    for tup in compositions(j - 1, k):
        prod = components[tup[0]].copy()
        for idx in tup[1:]:
            prod = prod * components[idx]
        acc = acc + prod
    return np.asarray(acc)


def nl_bound(j: int, k: int, u_components: Sequence[np.ndarray], b_components: Sequence[np.ndarray]) -> np.ndarray:
    """Enclosure of |NL_j[u] - NL_j[v]| given |v_i - u_i| <= B_i.

    Uses the telescoping product bound: each tuple contributes
    prod(|u_i| + B_i) - prod |u_i|, which dominates the worst-case
    deviation of the product over the component boxes.
    """
    acc = 0.0
    for tup in compositions(j - 1, k):
        hi = np.abs(u_components[tup[0]]) + b_components[tup[0]]
        lo = np.abs(u_components[tup[0]])
        for idx in tup[1:]:
            hi = hi * (np.abs(u_components[idx]) + b_components[idx])
            lo = lo * np.abs(u_components[idx])
        acc = acc + (hi - lo)
    return np.asarray(acc)


@dataclass(frozen=True)
class PerturbationProblem:
    """Expansion data for one nonlinear problem.

    ``components`` are the approximate series components u_0 .. u_J as
    expressions (surrogates or exported closed forms). ``residuals`` are
    per-component providers; when omitted they are derived from the
    components by exact differentiation, r_0 = L u_0 - f and
    r_j = L u_j + NL_j[u].
    """

    coefficients: tuple[float, ...]
    degree: int  # exponent k of the nonlinear term, >= 2
    components: tuple[Expression, ...]
    forcing: Expression
    t_end: float
    residuals: Optional[tuple] = None
    grid_k: int = DEFAULT_GRID_K
    validity_radius: float = 1.0

    def __post_init__(self):
        if self.degree < 2:
            raise ValueError("nonlinear degree must be >= 2")
        if self.residuals is not None and len(self.residuals) != len(self.components):
            raise ValueError("one residual per component")
        object.__setattr__(self, "coefficients", tuple(float(a) for a in self.coefficients))
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def expansion_order(self) -> int:
        return len(self.components) - 1

    def grid(self) -> Grid:
        return linspace(self.t_end, self.grid_k)


@dataclass(frozen=True)
class EpsQuery:
    """Pairs (t, eps) where solution and bound are wanted."""

    pairs: np.ndarray = field(repr=False)

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "pairs", pairs)


@dataclass(frozen=True)
class ComponentBounds:
    """Per-component bound arrays B_0 .. B_J on the computation grid."""

    grid: Grid
    arrays: tuple[np.ndarray, ...]
    method: str

    def at(self, t) -> np.ndarray:
        """Stack of component bounds interpolated to arbitrary points."""
        return np.column_stack(
            [interp_linear(SampledFunction(self.grid, b), t) for b in self.arrays]
        )


def _linear_operator_applied(p: PerturbationProblem, grid: Grid, values: np.ndarray, method: str, safety: bool) -> np.ndarray:
    """Bound |L^{-1} psi| for nonnegative psi with the chosen linear engine."""
    lp = LinearODEProblem(
        residual=CallableResidual(lambda t, v=values: v),
        t_end=p.t_end,
        coefficients=p.coefficients,
        grid_k=p.grid_k,
        query=grid.nodes,
    )
    if method == "loose":
        return loose_bound(lp).values
    return tight_bound(lp, safety=safety).values


def _component_residual_arrays(p: PerturbationProblem, grid: Grid, u_arrays) -> list[np.ndarray]:
    t = grid.nodes
    n = len(p.coefficients)
    out = []
    if p.residuals is not None:
        return [np.asarray(prov.sample(t), dtype=float) for prov in p.residuals]
    for j, u in enumerate(p.components):
        derivs = u.derivatives("t", {"t": t}, n)
        lu = np.broadcast_to(np.asarray(derivs[n], dtype=float), t.shape).copy()
        for m, a in enumerate(p.coefficients):
            lu = lu + a * np.asarray(derivs[m], dtype=float)
        if j == 0:
            f_vals = np.broadcast_to(np.asarray(p.forcing.evaluate({"t": t}), dtype=float), t.shape)
            out.append(lu - f_vals)
        else:
            out.append(lu + nl_term(j, p.degree, u_arrays))
    return out


def _component_value_arrays(p: PerturbationProblem, grid: Grid) -> list[np.ndarray]:
    t = grid.nodes
    return [
        np.broadcast_to(np.asarray(u.evaluate({"t": t}), dtype=float), t.shape).copy()
        for u in p.components
    ]


#: provided residuals may deviate from the expression-derived ones by
#: export/interpolation error, but a larger gap means the bound would be
#: computed for different components than the residuals describe
RESIDUAL_CONSISTENCY_REL = 1e-3


def _check_residual_consistency(p: PerturbationProblem, grid: Grid,
                                u_arrays, provided: list[np.ndarray]) -> None:
    derived = _component_residual_arrays(
        PerturbationProblem(
            coefficients=p.coefficients, degree=p.degree, components=p.components,
            forcing=p.forcing, t_end=p.t_end, residuals=None, grid_k=p.grid_k,
            validity_radius=p.validity_radius,
        ),
        grid, u_arrays,
    )
    for j, (got, want) in enumerate(zip(provided, derived)):
        scale = float(np.max(np.abs(want))) + 1e-12
        gap = float(np.max(np.abs(got - want)))
        if gap > RESIDUAL_CONSISTENCY_REL * scale:
            raise ValueError(
                f"residual {j} disagrees with the one derived from the components "
                f"(max gap {gap:.3e} vs scale {scale:.3e}); the bound would not "
                "certify the reconstructed solution"
            )


def component_bounds(p: PerturbationProblem, *, method: str = "tight", safety: bool = True) -> ComponentBounds:
    """Certified bounds B_0 .. B_J for the component errors |u_j - v_j|.

    Sequential in j: B_j needs the nonlinear enclosure built from all
    earlier components and their bounds. ``method`` picks the linear
    engine (``loose`` requires semi-stability and raises
    :class:`UnstableSystem` otherwise). Explicitly provided residuals are
    cross-checked against the ones derived from the components, because a
    mismatch would silently certify the wrong solution.
    """
    if method not in ("tight", "loose"):
        raise ValueError(f"unknown component bound method {method!r}")
    grid = p.grid()
    u_arrays = _component_value_arrays(p, grid)
    r_arrays = _component_residual_arrays(p, grid, u_arrays)
    if p.residuals is not None:
        _check_residual_consistency(p, grid, u_arrays, r_arrays)
    bounds: list[np.ndarray] = []
    for j in range(p.expansion_order + 1):
        bj = _linear_operator_applied(p, grid, np.abs(r_arrays[j]), method, safety)
        if j >= 1:
            enclosure = nl_bound(j, p.degree, u_arrays[:j], bounds[:j])
            bj = bj + _linear_operator_applied(p, grid, enclosure, method, safety)
        bounds.append(bj)
    return ComponentBounds(grid, tuple(bounds), method)


def reconstruct(p: PerturbationProblem, q: EpsQuery, bounds: ComponentBounds) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate the reconstructed solution and its certified bound at the
    query pairs: u = sum eps^j u_j(t), B = sum |eps|^j B_j(t).

    The bound uses |eps|^j so one computation serves both signs of eps.
    Queries beyond the declared validity radius emit
    :class:`OutOfValidityWarning` (the truncation tail is uncontrolled
    there) but still evaluate.
    """
    t = q.pairs[:, 0]
    eps = q.pairs[:, 1]
    if np.any(np.abs(eps) > p.validity_radius * (1 + 1e-12)):
        worst = float(np.max(np.abs(eps)))
        warnings.warn(
            f"|eps| = {worst:g} exceeds the declared validity radius "
            f"{p.validity_radius:g}; the truncation tail is not controlled",
            OutOfValidityWarning,
            stacklevel=2,
        )
    b_at = bounds.at(t)
    u_out = np.zeros_like(t)
    b_out = np.zeros_like(t)
    for j, u in enumerate(p.components):
        uj = np.broadcast_to(np.asarray(u.evaluate({"t": t}), dtype=float), t.shape)
        u_out = u_out + eps**j * uj
        b_out = b_out + np.abs(eps) ** j * b_at[:, j]
    return u_out, b_out
