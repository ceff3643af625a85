"""Problem-file schema: JSON in, typed problems out.

One JSON document describes one bound request. The ``kind`` field selects
the engine; the rest is the kind-specific payload plus a shared trio of
optional fields (``query``, ``exact``, ``surrogate``). The manufactured
catalog exports exactly this schema, so the verification path exercises
the same parser end users go through.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ProblemFormatError
from .expr import Expression, parse as parse_expr
from .nonlinear import EpsQuery, PerturbationProblem
from .ode import LinearODEProblem
from .pde import GammaSegment, PDEProblem
from .residuals import (
    ExpressionField,
    ExpressionResidual,
    SampledResidual,
    VectorResidual,
    load_field_csv,
    load_residual_csv,
)
from .systems import JordanSpec, SystemProblem, jordan_from_matrix

__all__ = ["ParsedProblem", "load_problem", "parse_problem", "KINDS"]

KINDS = ("ode", "ode_system", "nonlinear_ode", "pde")


@dataclass(frozen=True)
class ParsedProblem:
    kind: str
    payload: object  # LinearODEProblem | SystemProblem | PerturbationProblem | PDEProblem
    query: object = None  # ndarray of t, (L, 2) points for pde, or EpsQuery
    exact: Optional[tuple[Expression, ...]] = None
    surrogate: Optional[tuple[Expression, ...]] = None
    mesh: Optional[tuple[int, int]] = None
    trace_step: Optional[float] = None
    source: dict = field(default_factory=dict, repr=False)


def _require(doc: dict, key: str, context: str):
    if key not in doc:
        raise ProblemFormatError(f"{context}: missing required field {key!r}")
    return doc[key]


def _expr(text, context: str) -> Expression:
    if not isinstance(text, str):
        raise ProblemFormatError(f"{context}: expected an expression string")
    try:
        return parse_expr(text)
    except Exception as ex:
        raise ProblemFormatError(f"{context}: {ex}") from ex


def _domain_1d(doc: dict, grid_k: Optional[int]) -> tuple[float, int]:
    dom = _require(doc, "domain", doc.get("kind", "problem"))
    T = float(_require(dom, "T", "domain"))
    K = int(grid_k if grid_k is not None else dom.get("K", 10_000))
    return T, K


def _query_1d(doc: dict) -> Optional[np.ndarray]:
    q = doc.get("query")
    if q is None:
        return None
    if "points" in q:
        return np.asarray(q["points"], dtype=float)
    if "linspace" in q:
        lo, hi, num = q["linspace"]
        return np.linspace(float(lo), float(hi), int(num))
    raise ProblemFormatError("query: expected 'points' or 'linspace'")


def _scalar_residual(doc: dict, base_dir: Path):
    res = _require(doc, "residual", doc["kind"])
    if "expression" in res:
        return ExpressionResidual(_expr(res["expression"], "residual"))
    if "csv" in res:
        return load_residual_csv(base_dir / res["csv"])
    raise ProblemFormatError("residual: expected 'expression' or 'csv'")


def _parse_ode(doc: dict, base_dir: Path, grid_k: Optional[int]) -> ParsedProblem:
    T, K = _domain_1d(doc, grid_k)
    residual = _scalar_residual(doc, base_dir)
    query = _query_1d(doc)
    if "coefficient_expr" in doc:
        payload = LinearODEProblem(
            residual=residual, t_end=T, grid_k=K, query=query,
            coefficient_expr=_expr(doc["coefficient_expr"], "coefficient_expr"),
        )
    else:
        coeffs = _require(doc, "coefficients", "ode")
        payload = LinearODEProblem(
            residual=residual, t_end=T, grid_k=K, query=query,
            coefficients=tuple(float(a) for a in coeffs),
        )
    return ParsedProblem(
        kind="ode", payload=payload, query=query,
        exact=_optional_exprs(doc.get("exact")),
        surrogate=_optional_exprs(doc.get("surrogate")),
        source=doc,
    )


def _matrix_entry(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    return complex(float(v), 0.0)


def _parse_system(doc: dict, base_dir: Path, grid_k: Optional[int]) -> ParsedProblem:
    T, K = _domain_1d(doc, grid_k)
    if "jordan" in doc:
        jd = doc["jordan"]
        P = np.array([[_matrix_entry(v) for v in row] for row in _require(jd, "P", "jordan")])
        if np.all(P.imag == 0):
            P = P.real
        blocks = tuple(
            (_matrix_entry(b["lambda"]), int(b["size"])) for b in _require(jd, "blocks", "jordan")
        )
        spec = JordanSpec(P, blocks)
    elif "matrix" in doc:
        spec = jordan_from_matrix(np.asarray(doc["matrix"], dtype=float))
    else:
        raise ProblemFormatError("ode_system: need 'jordan' or 'matrix'")
    n = spec.dimension

    res = _require(doc, "residual", "ode_system")
    if "expressions" in res:
        providers = tuple(ExpressionResidual(_expr(s, "residual")) for s in res["expressions"])
        if len(providers) != n:
            raise ProblemFormatError(f"ode_system: {len(providers)} residuals for dimension {n}")
        residual = VectorResidual(providers)
    elif "csv" in res:
        residual = _load_system_csv(base_dir / res["csv"], n)
    else:
        raise ProblemFormatError("residual: expected 'expressions' or 'csv'")

    query = _query_1d(doc)
    payload = SystemProblem(jordan=spec, residual=residual, t_end=T, grid_k=K, query=query)
    return ParsedProblem(
        kind="ode_system", payload=payload, query=query,
        exact=_optional_exprs(doc.get("exact")),
        surrogate=_optional_exprs(doc.get("surrogate")),
        source=doc,
    )


def _load_system_csv(path: Path, n: int) -> VectorResidual:
    if not path.exists():
        raise ProblemFormatError(f"residual file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0].strip().lower() != "t" or len(header) != n + 1:
            raise ProblemFormatError(f"{path}: expected header 't,r1,..,r{n}'")
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.array(rows)
    t = data[:, 0]
    return VectorResidual(tuple(SampledResidual(t, data[:, 1 + i]) for i in range(n)))


def _parse_nonlinear(doc: dict, base_dir: Path, grid_k: Optional[int]) -> ParsedProblem:
    T, K = _domain_1d(doc, grid_k)
    components = tuple(_expr(s, "components") for s in _require(doc, "components", "nonlinear_ode"))
    residuals = None
    if "residuals" in doc:
        parsed = []
        for item in doc["residuals"]:
            if "expression" in item:
                parsed.append(ExpressionResidual(_expr(item["expression"], "residuals")))
            elif "csv" in item:
                parsed.append(load_residual_csv(base_dir / item["csv"]))
            else:
                raise ProblemFormatError("residuals entries need 'expression' or 'csv'")
        residuals = tuple(parsed)
    payload = PerturbationProblem(
        coefficients=tuple(float(a) for a in _require(doc, "coefficients", "nonlinear_ode")),
        degree=int(_require(doc, "degree", "nonlinear_ode")),
        components=components,
        forcing=_expr(_require(doc, "forcing", "nonlinear_ode"), "forcing"),
        t_end=T,
        residuals=residuals,
        grid_k=K,
        validity_radius=float(doc.get("validity_radius", 1.0)),
    )
    query = _eps_query(doc)
    return ParsedProblem(
        kind="nonlinear_ode", payload=payload, query=query,
        exact=_optional_exprs(doc.get("exact")),
        surrogate=_optional_exprs(doc.get("surrogate")),
        source=doc,
    )


def _eps_query(doc: dict) -> Optional[EpsQuery]:
    q = doc.get("query")
    if q is None:
        return None
    if "pairs" in q:
        return EpsQuery(np.asarray(q["pairs"], dtype=float))
    if "t_linspace" in q and "eps_values" in q:
        lo, hi, num = q["t_linspace"]
        t = np.linspace(float(lo), float(hi), int(num))
        pairs = [(tv, float(e)) for e in q["eps_values"] for tv in t]
        return EpsQuery(np.asarray(pairs))
    raise ProblemFormatError("nonlinear query: expected 'pairs' or 't_linspace' + 'eps_values'")


def _parse_pde(doc: dict, base_dir: Path, grid_k: Optional[int]) -> ParsedProblem:
    dom = _require(doc, "domain", "pde")
    rect = tuple(float(v) for v in _require(dom, "rect", "pde domain"))
    if len(rect) != 4:
        raise ProblemFormatError("pde domain rect must be [x_min, x_max, y_min, y_max]")
    mesh_raw = dom.get("mesh", [512, 512])
    mesh = (int(mesh_raw[0]), int(mesh_raw[1]))

    gamma = []
    x0, x1, y0, y1 = rect
    full = {"left": (y0, y1), "right": (y0, y1), "bottom": (x0, x1), "top": (x0, x1)}
    for seg in _require(doc, "gamma", "pde"):
        edge = _require(seg, "edge", "gamma segment")
        lo, hi = seg.get("range", full.get(edge, (0.0, 1.0)))
        gamma.append(GammaSegment(edge, float(lo), float(hi)))

    res = _require(doc, "residual", "pde")
    if "expression" in res:
        residual = ExpressionField(_expr(res["expression"], "residual"))
    elif "csv" in res:
        residual = load_field_csv(base_dir / res["csv"])
    else:
        raise ProblemFormatError("residual: expected 'expression' or 'csv'")

    payload = PDEProblem(
        a=_expr(_require(doc, "a", "pde"), "a"),
        b=_expr(_require(doc, "b", "pde"), "b"),
        c=_expr(_require(doc, "c", "pde"), "c"),
        f=_expr(_require(doc, "f", "pde"), "f"),
        rect=rect,
        gamma=tuple(gamma),
        residual=residual,
        boundary_data=_expr(doc["g"], "g") if "g" in doc else None,
    )
    query = None
    if "query" in doc:
        pts = doc["query"].get("points")
        if pts is None:
            raise ProblemFormatError("pde query: expected 'points'")
        query = np.asarray(pts, dtype=float).reshape(-1, 2)
    return ParsedProblem(
        kind="pde", payload=payload, query=query,
        exact=_optional_exprs(doc.get("exact")),
        surrogate=_optional_exprs(doc.get("surrogate")),
        mesh=mesh,
        trace_step=float(doc["step"]) if "step" in doc else None,
        source=doc,
    )


def _optional_exprs(value) -> Optional[tuple[Expression, ...]]:
    if value is None:
        return None
    if isinstance(value, str):
        return (_expr(value, "exact/surrogate"),)
    return tuple(_expr(v, "exact/surrogate") for v in value)


_PARSERS = {
    "ode": _parse_ode,
    "ode_system": _parse_system,
    "nonlinear_ode": _parse_nonlinear,
    "pde": _parse_pde,
}


def parse_problem(doc: dict, base_dir=".", grid_k: Optional[int] = None) -> ParsedProblem:
    """Validate and convert a problem document. ``grid_k`` overrides the
    document's grid resolution (the CLI's --grid-k)."""
    if not isinstance(doc, dict):
        raise ProblemFormatError("problem document must be a JSON object")
    kind = _require(doc, "kind", "problem")
    if kind not in KINDS:
        raise ProblemFormatError(f"unknown kind {kind!r}; expected one of {KINDS}")
    return _PARSERS[kind](doc, Path(base_dir), grid_k)


def load_problem(path, grid_k: Optional[int] = None) -> ParsedProblem:
    """Read and parse a problem JSON file; relative CSV paths resolve
    against the file's directory."""
    path = Path(path)
    if not path.exists():
        raise ProblemFormatError(f"problem file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as ex:
        raise ProblemFormatError(f"{path}: invalid JSON ({ex})") from ex
    return parse_problem(doc, base_dir=path.parent, grid_k=grid_k)
