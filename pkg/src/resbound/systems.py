"""Elementwise and norm error bounds for first-order linear ODE systems.

For ``dv/dt + A v = f`` the error vector satisfies ``d eta/dt + A eta = r``
with eta(0) = 0. Writing A = P J P^{-1} in block canonical form turns the
transformed error into chains of scalar first-order equations, one chain
per block, each solvable by the exponential-kernel operator. Stacking the
chains gives:

* a componentwise bound  |eta(t)| <= |P| . chain[ |P^{-1}| |r(t)| ]
* a norm bound           ||eta(t)|| <= cond2(P) ||chain[ ||r(t)|| 1 ]||

with the Euclidean norm throughout (the generic induced norm is pinned to
l2 so the condition number is computable by SVD at desk scale).

The block chain for eigenvalue lam and size m is evaluated bottom-up:

    out[m-1] = I(q[m-1]);   out[l] = I(q[l] + out[l+1])

which by linearity equals the upper-triangular sum of operator powers and
costs m operator applications per block.

The two bounds are not comparable in general: neither the componentwise
stack nor the norm bound dominates the other, so no such ordering is
asserted anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NeedExplicitJordan, SingularMatrix
from .operators import Grid, SampledFunction, apply_I, interp_linear, linspace, neighbor_max

__all__ = [
    "JordanSpec",
    "SystemProblem",
    "VectorBoundSeries",
    "jordan_from_matrix",
    "operator_block_apply",
    "componentwise_bound",
    "norm_bound",
    "cond2",
]

MAX_DIMENSION = 10

#: eigenvalues closer than this are treated as a cluster: the numerical
#: block structure is ill-posed there and must be supplied explicitly
DEFAULT_SEPARATION_TOL = 1e-6


def cond2(P: np.ndarray) -> float:
    """Spectral condition number: ratio of extreme singular values."""
    P = np.asarray(P)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("cond2 expects a square matrix")
    if P.shape[0] > MAX_DIMENSION:
        raise ValueError(f"dimension {P.shape[0]} exceeds the cap {MAX_DIMENSION}")
    sigma = np.linalg.svd(P, compute_uv=False)
    if sigma[-1] < 1e-12 * sigma[0]:
        raise SingularMatrix("matrix is singular to working precision")
    return float(sigma[0] / sigma[-1])


@dataclass(frozen=True)
class JordanSpec:
    """Transformation matrix P plus ordered blocks (eigenvalue, size)."""

    P: np.ndarray = field(repr=False)
    blocks: tuple[tuple[complex, int], ...]

    def __post_init__(self):
        P = np.asarray(self.P)
        object.__setattr__(self, "P", P)
        object.__setattr__(
            self, "blocks", tuple((complex(lam), int(size)) for lam, size in self.blocks)
        )
        n = sum(size for _, size in self.blocks)
        if P.shape != (n, n):
            raise ValueError(f"P is {P.shape}, blocks sum to {n}")
        cond2(P)  # raises SingularMatrix if not invertible

    @property
    def dimension(self) -> int:
        return self.P.shape[0]

    def block_matrix(self) -> np.ndarray:
        """Assemble the canonical form J from the block list."""
        n = self.dimension
        J = np.zeros((n, n), dtype=complex)
        start = 0
        for lam, size in self.blocks:
            for i in range(size):
                J[start + i, start + i] = lam
                if i + 1 < size:
                    J[start + i, start + i + 1] = 1.0
            start += size
        return J

    def reassemble(self) -> np.ndarray:
        """P J P^{-1}; matches the source matrix when built from one."""
        return self.P @ self.block_matrix() @ np.linalg.inv(self.P)


def jordan_from_matrix(A: np.ndarray, tol: float = DEFAULT_SEPARATION_TOL) -> JordanSpec:
    """Decompose a diagonalizable matrix into size-1 blocks.

    Raises :class:`NeedExplicitJordan` when eigenvalues cluster within
    ``tol`` (the block structure is discontinuous there) or when the
    eigenvector matrix fails to reassemble A to 1e-8 ||A||; in either
    case the caller must supply P and the blocks explicitly.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or n > MAX_DIMENSION:
        raise ValueError(f"expected a square matrix of dimension <= {MAX_DIMENSION}")
    eigvals, eigvecs = np.linalg.eig(A)
    for i in range(n):
        for j in range(i + 1, n):
            if abs(eigvals[i] - eigvals[j]) <= tol:
                raise NeedExplicitJordan(
                    f"eigenvalues {eigvals[i]:.6g} and {eigvals[j]:.6g} cluster within "
                    f"{tol:g}; supply the decomposition explicitly"
                )
    spec = JordanSpec(eigvecs, tuple((complex(lam), 1) for lam in eigvals))
    scale = max(float(np.linalg.norm(A)), 1e-30)
    if float(np.linalg.norm(spec.reassemble() - A)) > 1e-8 * scale:
        raise NeedExplicitJordan("eigendecomposition does not reassemble the matrix")
    return spec


@dataclass(frozen=True)
class SystemProblem:
    """A first-order system bound request: decomposition, residual vector
    provider (``sample_matrix(t) -> (len(t), n)``), domain, query points."""

    jordan: JordanSpec
    residual: object
    t_end: float
    grid_k: int = 10_000
    query: Optional[np.ndarray] = None

    def grid(self) -> Grid:
        return linspace(self.t_end, self.grid_k)

    def query_points(self, grid: Grid) -> np.ndarray:
        return grid.nodes if self.query is None else np.asarray(self.query, dtype=float)


@dataclass(frozen=True)
class VectorBoundSeries:
    """Componentwise bounds (len(points) x n) and/or norm bounds."""

    points: np.ndarray = field(repr=False)
    components: Optional[np.ndarray] = field(default=None, repr=False)
    norms: Optional[np.ndarray] = field(default=None, repr=False)


def operator_block_apply(lam, size: int, q_abs: list[SampledFunction], *, safety: bool = True) -> list[SampledFunction]:
    """Apply one block's operator chain to nonnegative inputs.

    Row l of the output equals sum_j I^{j+1} q[l+j] over the block's
    upper triangle; computed bottom-up so each row costs one operator
    application. With ``safety`` the sampled inputs are inflated once to
    their neighborhood max before the chain (intermediates are exact
    node values and are not re-inflated).
    """
    if len(q_abs) != size:
        raise ValueError(f"block size {size} but {len(q_abs)} inputs")
    lam_re = -complex(lam).real
    if safety:
        q_abs = [q.with_values(neighbor_max(q.values)) for q in q_abs]
    out: list[SampledFunction] = [None] * size  # type: ignore[list-item]
    for l in range(size - 1, -1, -1):
        rhs = q_abs[l]
        if l + 1 < size:
            rhs = rhs.with_values(rhs.values + out[l + 1].values)
        out[l] = apply_I(lam_re, rhs)
    return out


def _block_chain(spec: JordanSpec, grid: Grid, q_matrix: np.ndarray, *, safety: bool) -> np.ndarray:
    """Run every block's chain over the columns of q (nodes x n)."""
    out = np.empty_like(q_matrix)
    start = 0
    for lam, size in spec.blocks:
        q_funcs = [SampledFunction(grid, q_matrix[:, start + i]) for i in range(size)]
        bounded = operator_block_apply(lam, size, q_funcs, safety=safety)
        for i in range(size):
            out[:, start + i] = bounded[i].values
        start += size
    return out


def componentwise_bound(p: SystemProblem, *, safety: bool = True) -> VectorBoundSeries:
    """Elementwise bound |eta(t)| <= |P| chain[ |P^{-1}| |r(t)| ]."""
    grid = p.grid()
    r_abs = np.abs(p.residual.sample_matrix(grid.nodes))
    p_inv_abs = np.abs(np.linalg.inv(p.jordan.P))
    q = r_abs @ p_inv_abs.T
    delta_bound = _block_chain(p.jordan, grid, q, safety=safety)
    comp = delta_bound @ np.abs(p.jordan.P).T
    points = p.query_points(grid)
    interped = np.column_stack(
        [interp_linear(SampledFunction(grid, comp[:, i]), points) for i in range(comp.shape[1])]
    )
    return VectorBoundSeries(points, components=interped)


def norm_bound(p: SystemProblem, *, safety: bool = True) -> VectorBoundSeries:
    """Norm bound ||eta(t)|| <= cond2(P) ||chain[ ||r(t)|| 1 ]||."""
    grid = p.grid()
    r = p.residual.sample_matrix(grid.nodes)
    rho = np.linalg.norm(r, axis=1)
    n = p.jordan.dimension
    q = np.repeat(rho[:, None], n, axis=1)
    chained = _block_chain(p.jordan, grid, q, safety=safety)
    norms = cond2(p.jordan.P) * np.linalg.norm(chained, axis=1)
    points = p.query_points(grid)
    return VectorBoundSeries(points, norms=interp_linear(SampledFunction(grid, norms), points))
