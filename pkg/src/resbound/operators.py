"""Grids, sampled functions, and the exponential-kernel integral operator.

The central object is the inverse operator of ``d/dt - lambda`` with zero
initial value,

    (I_lam psi)(t) = exp(lam t) * integral_0^t exp(-lam tau) psi(tau) dtau,

realized nodewise on a uniform grid with the cumulative trapezoidal rule.
Compositions of ``apply_I`` over the characteristic roots invert a full
constant-coefficient operator; ``apply_I_variable`` covers the first-order
variable-coefficient case.

Numerical form: the literal ``exp(lam t) * cumtrapz(exp(-lam tau) psi)``
overflows for positive ``lam`` and underflows the integrand for large
domains, so the accumulation is carried per interval with the bounded
kernel ``exp(lam (t_k - tau))``. The quadrature weights are identical to
the literal form; only the evaluation order differs.

Safety rule: with ``safety=True`` each integrand node is replaced by the
maximum of itself and its two neighbors before accumulating, which keeps
bounds conservative against quadrature deficit. Bound engines enable it
by default; it is off here so the raw operators can serve as quadrature
oracles.

Everything in this module is immutable after construction and all
operations are pure; concurrent use needs no synchronization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegreeTooLarge, InvalidDomain, OutOfDomain

__all__ = [
    "Grid",
    "SampledFunction",
    "CharacteristicRoots",
    "linspace",
    "neighbor_max",
    "cumtrapz",
    "apply_I",
    "apply_I_variable",
    "char_roots",
    "interp_linear",
    "max_abs",
]

MAX_DEGREE = 10

#: |Re(lambda)| below this (scaled by max(1, |lambda|)) counts as a
#: zero-real-part root. The monomial power of the closed-form envelope is
#: discontinuous in the coefficients, so the cut has to live somewhere.
REAL_PART_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform nodes 0 = t_0 < t_1 < ... < t_K = T."""

    nodes: np.ndarray

    def __post_init__(self):
        t = self.nodes
        if t.ndim != 1 or len(t) < 3:
            raise InvalidDomain("grid needs at least 3 nodes")
        if t[0] != 0.0:
            raise InvalidDomain("temporal grids start at 0")
        dt = np.diff(t)
        if np.any(dt <= 0):
            raise InvalidDomain("grid nodes must increase strictly")
        h = dt[0]
        if np.max(np.abs(dt - h)) > 16 * np.finfo(float).eps * max(abs(float(t[-1])), 1.0):
            raise InvalidDomain("grid spacing is not uniform")
        self.nodes.setflags(write=False)

    @property
    def t_end(self) -> float:
        return float(self.nodes[-1])

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def spacing(self) -> float:
        return float(self.nodes[1] - self.nodes[0])


def linspace(T: float, K: int) -> Grid:
    """Uniform grid of K intervals (K + 1 nodes) on [0, T], exact endpoints."""
    if not T > 0:
        raise InvalidDomain(f"domain length must be positive, got {T}")
    if K < 2:
        raise InvalidDomain(f"need at least 2 intervals, got {K}")
    return Grid(np.linspace(0.0, float(T), K + 1))


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Values of a scalar (real or complex) function on a grid."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != self.grid.nodes.shape:
            raise ValueError("values and grid nodes differ in length")
        object.__setattr__(self, "values", v)
        self.values.setflags(write=False)

    def with_values(self, values: np.ndarray) -> "SampledFunction":
        return SampledFunction(self.grid, values)


def neighbor_max(values: np.ndarray) -> np.ndarray:
    """Each node replaced by max(self, left neighbor, right neighbor),
    clamped at the ends."""
    out = np.array(values, dtype=float)
    out[:-1] = np.maximum(out[:-1], values[1:])
    out[1:] = np.maximum(out[1:], values[:-1])
    return out


def cumtrapz(f: SampledFunction, safety: bool = False) -> SampledFunction:
    """Cumulative trapezoidal integral; node k holds the integral over
    [0, t_k]. With ``safety`` the node values are first inflated to the
    max of their neighborhood, so the result dominates the plain
    trapezoid result whenever f >= 0."""
    values = np.asarray(f.values, dtype=float)
    if safety:
        values = neighbor_max(values)
    dt = np.diff(f.grid.nodes)
    increments = 0.5 * dt * (values[:-1] + values[1:])
    out = np.concatenate(([0.0], np.cumsum(increments)))
    return f.with_values(out)


def _kernel_accumulate(nodes: np.ndarray, decay: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Trapezoid accumulation of integral_0^{t_k} ker(t_k, tau) v(tau) dtau
    where the kernel satisfies ker(t_k, t_i) = decay[i] * ... * decay[k-1].

    First-order recurrence; ``decay[k]`` propagates the running integral
    across interval k. Runs in Python floats: the recurrence is inherently
    sequential and per-element numpy scalars would be slower.
    """
    dt = np.diff(nodes)
    incr = 0.5 * dt * (decay * values[:-1] + values[1:])
    out = np.empty(len(nodes), dtype=np.result_type(decay.dtype, values.dtype, float))
    out[0] = 0.0
    acc = 0.0
    d_list = decay.tolist()
    g_list = incr.tolist()
    for k in range(len(d_list)):
        acc = d_list[k] * acc + g_list[k]
        out[k + 1] = acc
    return out


def apply_I(lam, psi: SampledFunction, delta: float = 0.0, *, safety: bool = False) -> SampledFunction:
    """Apply the inverse operator of ``d/dt - lam`` with zero initial value.

    ``lam`` may be real or complex; bound chains pass the real part of a
    characteristic root and a nonnegative psi. ``delta`` adds the inexact-
    initial-value correction ``delta * exp(lam t)``. Raises the built-in
    ``OverflowError`` if any node exceeds the largest finite float, which
    happens for violently unstable systems over long domains.
    """
    t = psi.grid.nodes
    values = np.asarray(psi.values)
    if safety:
        if np.iscomplexobj(values):
            raise ValueError("safety inflation requires real values")
        values = neighbor_max(values)
    lam = complex(lam)
    if lam.imag == 0.0:
        lam = lam.real
    decay = np.exp(lam * np.diff(t))
    out = _kernel_accumulate(t, decay, values)
    if delta:
        out = out + delta * np.exp(lam * t)
    if not np.all(np.isfinite(out)):
        raise OverflowError("integral operator overflowed; bound is not representable")
    return psi.with_values(out)


def apply_I_variable(lambda_fn, psi: SampledFunction, *, safety: bool = False) -> SampledFunction:
    """First-order variable-coefficient analogue of :func:`apply_I`:

        integral_0^t exp(integral_tau^t lam(sigma) dsigma) psi(tau) dtau

    ``lambda_fn`` is an Expression in t (or any object with an
    ``evaluate({"t": nodes})`` method, or a plain array of node values).
    The running integral of lam is itself computed by the trapezoidal
    rule, then the kernel is accumulated per interval.
    """
    t = psi.grid.nodes
    if hasattr(lambda_fn, "evaluate"):
        lam_vals = np.broadcast_to(np.asarray(lambda_fn.evaluate({"t": t}), dtype=float), t.shape)
    else:
        lam_vals = np.asarray(lambda_fn, dtype=float)
        if lam_vals.ndim == 0:
            lam_vals = np.broadcast_to(lam_vals, t.shape)
    values = np.asarray(psi.values, dtype=float)
    if safety:
        values = neighbor_max(values)
    big_lambda = np.concatenate(([0.0], np.cumsum(0.5 * np.diff(t) * (lam_vals[:-1] + lam_vals[1:]))))
    decay = np.exp(np.diff(big_lambda))
    out = _kernel_accumulate(t, decay, values)
    if not np.all(np.isfinite(out)):
        raise OverflowError("integral operator overflowed; bound is not representable")
    return psi.with_values(out)


@dataclass(frozen=True)
class CharacteristicRoots:
    """Roots of lambda^n + a_{n-1} lambda^{n-1} + ... + a_0, with the
    source coefficients kept for the reconstruction invariant."""

    roots: tuple[complex, ...]
    coefficients: tuple[float, ...]

    def __post_init__(self):
        # reconstruction guard: the monic polynomial through the returned
        # roots must reproduce the input coefficients
        monic = np.real(np.poly(np.array(self.roots)))
        src = np.array(self.coefficients[::-1])  # a_{n-1} .. a_0
        err = np.abs(monic[1:] - src)
        scale = np.maximum(1.0, np.abs(src))
        if np.any(err > 1e-8 * scale):
            raise ValueError("root reconstruction failed the tolerance check")


def char_roots(coeffs) -> CharacteristicRoots:
    """All complex roots of the monic characteristic polynomial with the
    given low-to-high coefficients a_0 .. a_{n-1}.

    Roots come from the eigenvalues of the companion matrix (numpy.roots);
    complex roots are symmetrized into exact conjugate pairs. Capped at
    degree 10, desk scale.
    """
    coeffs = tuple(float(a) for a in coeffs)
    n = len(coeffs)
    if n < 1:
        raise InvalidDomain("need at least one coefficient")
    if n > MAX_DEGREE:
        raise DegreeTooLarge(f"degree {n} exceeds the supported cap {MAX_DEGREE}")
    poly = np.concatenate(([1.0], np.array(coeffs)[::-1]))
    raw = np.roots(poly)

    roots: list[complex] = []
    pending: list[complex] = []
    for z in sorted(raw, key=lambda z: (z.real, abs(z.imag), z.imag)):
        scale = max(1.0, abs(z))
        if abs(z.imag) <= REAL_PART_TOL * scale:
            roots.append(complex(z.real, 0.0))
        else:
            pending.append(complex(z))
    # pair conjugates exactly: greedy nearest match of +Im against -Im
    upper = [z for z in pending if z.imag > 0]
    lower = [z for z in pending if z.imag < 0]
    for zu in upper:
        if not lower:
            roots.append(zu)
            continue
        j = int(np.argmin([abs(zu - zl.conjugate()) for zl in lower]))
        zl = lower.pop(j)
        mean = (zu + zl.conjugate()) / 2
        roots.extend([mean, mean.conjugate()])
    roots.extend(lower)
    roots.sort(key=lambda z: (z.real, z.imag))
    return CharacteristicRoots(tuple(roots), coeffs)


def interp_linear(f: SampledFunction, query) -> np.ndarray:
    """Piecewise-linear interpolation, exact at nodes. Query points must
    lie within the sampled domain; bounds are never extrapolated."""
    q = np.asarray(query, dtype=float)
    t = f.grid.nodes
    slack = 1e-12 * max(1.0, abs(float(t[-1])))
    bad = (q < t[0] - slack) | (q > t[-1] + slack)
    if np.any(bad):
        raise OutOfDomain(f"query point {q[np.argmax(bad)]!r} outside [{t[0]}, {t[-1]}]")
    q = np.clip(q, t[0], t[-1])
    return np.interp(q, t, np.asarray(f.values, dtype=float))


def max_abs(f: SampledFunction) -> float:
    """Maximum of |f| over the grid nodes."""
    return float(np.max(np.abs(f.values)))


def classify_roots(roots, tol: float = REAL_PART_TOL):
    """Split roots into (zero-real-part count Z, negative-real-part list,
    positive-real-part list) using the shared axis tolerance."""
    zero = 0
    negative = []
    positive = []
    for z in roots:
        scale = max(1.0, abs(z))
        if abs(z.real) <= tol * scale:
            zero += 1
        elif z.real < 0:
            negative.append(z)
        else:
            positive.append(z)
    return zero, negative, positive
