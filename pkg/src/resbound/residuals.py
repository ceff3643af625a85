"""Residual providers: how |r| gets onto the bound grid.

Two routes exist for every problem kind, because that is what users
actually have. Either the residual is a closed form (an expression, often
derived from a surrogate solution through exact differentiation), or it
is a table of samples exported from a training run, interpolated linearly
onto the grid. Interpolated samples are only as trustworthy as their
density; the max-of-neighbors safety rule in the quadrature partially
compensates, and the README spells out the caveat.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import OutOfDomain, ProblemFormatError
from .expr import Expression

__all__ = [
    "ExpressionResidual",
    "SampledResidual",
    "CallableResidual",
    "DerivedLinearResidual",
    "VectorResidual",
    "DerivedSystemResidual",
    "ExpressionField",
    "GridField",
    "load_residual_csv",
    "load_field_csv",
]


def _as_grid_array(values, t: np.ndarray) -> np.ndarray:
    out = np.asarray(values, dtype=float)
    if out.ndim == 0:
        out = np.full(t.shape, float(out))
    return out


@dataclass(frozen=True)
class ExpressionResidual:
    """Residual given as a closed-form expression in t."""

    expression: Expression

    def sample(self, t: np.ndarray) -> np.ndarray:
        return _as_grid_array(self.expression.evaluate({"t": t}), t)


@dataclass(frozen=True)
class CallableResidual:
    """Residual given as a vectorized python callable of t."""

    fn: object

    def sample(self, t: np.ndarray) -> np.ndarray:
        return _as_grid_array(self.fn(t), t)


@dataclass(frozen=True)
class SampledResidual:
    """Residual known only at sample points, interpolated linearly.

    The bound grid must be covered by the samples; extrapolating a
    residual would silently invalidate the bound.
    """

    t_samples: np.ndarray
    r_samples: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t_samples, dtype=float)
        r = np.asarray(self.r_samples, dtype=float)
        if t.ndim != 1 or t.shape != r.shape[:1]:
            raise ProblemFormatError("residual samples: t and r lengths differ")
        if np.any(np.diff(t) <= 0):
            raise ProblemFormatError("residual samples need strictly increasing t")
        object.__setattr__(self, "t_samples", t)
        object.__setattr__(self, "r_samples", r)

    def sample(self, t: np.ndarray) -> np.ndarray:
        ts = self.t_samples
        slack = 1e-12 * max(1.0, abs(float(ts[-1])))
        if float(np.min(t)) < ts[0] - slack or float(np.max(t)) > ts[-1] + slack:
            raise OutOfDomain(
                f"bound grid [{np.min(t)}, {np.max(t)}] not covered by residual samples "
                f"[{ts[0]}, {ts[-1]}]"
            )
        return np.interp(np.clip(t, ts[0], ts[-1]), ts, self.r_samples)


@dataclass(frozen=True)
class DerivedLinearResidual:
    """Residual of a closed-form surrogate u against a constant-coefficient
    operator: r = u^(n) + sum_j a_j u^(j) - f, differentiated exactly."""

    coefficients: tuple[float, ...]
    surrogate: Expression
    forcing: Expression

    def sample(self, t: np.ndarray) -> np.ndarray:
        n = len(self.coefficients)
        derivs = self.surrogate.derivatives("t", {"t": t}, n)
        acc = _as_grid_array(derivs[n], t)
        for j, a in enumerate(self.coefficients):
            acc = acc + a * _as_grid_array(derivs[j], t)
        return acc - _as_grid_array(self.forcing.evaluate({"t": t}), t)


@dataclass(frozen=True)
class VectorResidual:
    """Stack of scalar providers, one per system component."""

    components: tuple

    def sample_matrix(self, t: np.ndarray) -> np.ndarray:
        return np.column_stack([c.sample(t) for c in self.components])

    @property
    def dimension(self) -> int:
        return len(self.components)


@dataclass(frozen=True)
class DerivedSystemResidual:
    """Residual of surrogate expressions u against du/dt + A u = f."""

    matrix: np.ndarray
    surrogates: tuple[Expression, ...]
    forcings: tuple[Expression, ...]

    def sample_matrix(self, t: np.ndarray) -> np.ndarray:
        cols = []
        for u in self.surrogates:
            value, deriv = u.derivatives("t", {"t": t}, 1)
            cols.append((_as_grid_array(value, t), _as_grid_array(deriv, t)))
        u_mat = np.column_stack([v for v, _ in cols])
        du_mat = np.column_stack([d for _, d in cols])
        f_mat = np.column_stack([_as_grid_array(f.evaluate({"t": t}), t) for f in self.forcings])
        return du_mat + u_mat @ self.matrix.T - f_mat

    @property
    def dimension(self) -> int:
        return len(self.surrogates)


@dataclass(frozen=True)
class ExpressionField:
    """Scalar field over (x, y) given as a closed-form expression."""

    expression: Expression

    def sample_xy(self, x, y) -> np.ndarray:
        out = np.asarray(self.expression.evaluate({"x": x, "y": y}), dtype=float)
        if out.ndim == 0:
            out = np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, float(out))
        return out


@dataclass(frozen=True)
class GridField:
    """Scalar field sampled on a regular mesh, bilinearly interpolated."""

    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray  # shape (len(xs), len(ys))

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(xs), len(ys)):
            raise ProblemFormatError("field values do not match the mesh shape")
        if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
            raise ProblemFormatError("field mesh coordinates must increase strictly")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "values", v)

    def sample_xy(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        xf = np.broadcast_to(x, shape).ravel()
        yf = np.broadcast_to(y, shape).ravel()
        slack_x = 1e-12 * max(1.0, abs(float(self.xs[-1])))
        slack_y = 1e-12 * max(1.0, abs(float(self.ys[-1])))
        if (
            np.min(xf) < self.xs[0] - slack_x
            or np.max(xf) > self.xs[-1] + slack_x
            or np.min(yf) < self.ys[0] - slack_y
            or np.max(yf) > self.ys[-1] + slack_y
        ):
            raise OutOfDomain("query outside the sampled field mesh")
        xf = np.clip(xf, self.xs[0], self.xs[-1])
        yf = np.clip(yf, self.ys[0], self.ys[-1])
        i = np.clip(np.searchsorted(self.xs, xf, side="right") - 1, 0, len(self.xs) - 2)
        j = np.clip(np.searchsorted(self.ys, yf, side="right") - 1, 0, len(self.ys) - 2)
        tx = (xf - self.xs[i]) / (self.xs[i + 1] - self.xs[i])
        ty = (yf - self.ys[j]) / (self.ys[j + 1] - self.ys[j])
        v = (
            self.values[i, j] * (1 - tx) * (1 - ty)
            + self.values[i + 1, j] * tx * (1 - ty)
            + self.values[i, j + 1] * (1 - tx) * ty
            + self.values[i + 1, j + 1] * tx * ty
        )
        return v.reshape(shape)


def load_field_csv(path) -> GridField:
    """Read an ``x,y,r`` CSV sampled on a row-major rectangular mesh."""
    path = Path(path)
    if not path.exists():
        raise ProblemFormatError(f"residual file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ProblemFormatError(f"{path}: empty residual file") from None
        if [h.strip().lower() for h in header[:3]] != ["x", "y", "r"]:
            raise ProblemFormatError(f"{path}: expected header 'x,y,r'")
        rows = [(float(r[0]), float(r[1]), float(r[2])) for r in reader if r]
    xs = np.unique([r[0] for r in rows])
    ys = np.unique([r[1] for r in rows])
    if len(rows) != len(xs) * len(ys):
        raise ProblemFormatError(f"{path}: samples do not form a full rectangular mesh")
    values = np.full((len(xs), len(ys)), np.nan)
    xi = {v: i for i, v in enumerate(xs)}
    yi = {v: i for i, v in enumerate(ys)}
    for x, y, r in rows:
        values[xi[x], yi[y]] = r
    if np.any(np.isnan(values)):
        raise ProblemFormatError(f"{path}: duplicate or missing mesh samples")
    return GridField(xs, ys, values)


def load_residual_csv(path) -> SampledResidual:
    """Read a two-column ``t,r`` CSV (header required, strictly increasing t)."""
    path = Path(path)
    if not path.exists():
        raise ProblemFormatError(f"residual file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ProblemFormatError(f"{path}: empty residual file") from None
        if [h.strip().lower() for h in header[:2]] != ["t", "r"]:
            raise ProblemFormatError(f"{path}: expected header 't,r'")
        rows = [(float(row[0]), float(row[1])) for row in reader if row]
    if len(rows) < 2:
        raise ProblemFormatError(f"{path}: need at least two samples")
    t, r = zip(*rows)
    return SampledResidual(np.array(t), np.array(r))
