"""Command-line front end.

Two subcommands:

* ``bound``: read a problem JSON file, dispatch to the requested bound
  engine, write CSV or JSON results (optionally with a rendered figure
  next to the delimited output).
* ``verify``: replay the built-in manufactured-solution catalog through
  the same problem-file path and print a PASS/FAIL table.

Exit codes: 0 success, 1 verification failure, 2 malformed problem file,
3 method/kind mismatch, 4 mathematical precondition failure (the error
name goes to standard error so scripts can tell "fix the file" from
"use another algorithm").
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import report
from .errors import ProblemFormatError, ResboundError
from .nonlinear import component_bounds, reconstruct
from .ode import first_order_variable_bound, loose_bound, tight_bound
from .oracle import DEFAULT_AMPLITUDE, DEFAULT_SEED, CATALOG_IDS
from .pde import constant_bound, curve_bound, trace_characteristic
from .problems import ParsedProblem, load_problem
from .systems import componentwise_bound, norm_bound

METHODS = ("loose", "tight", "componentwise", "norm", "const", "characteristic")

_KIND_METHODS = {
    "ode": ("loose", "tight"),
    "ode_system": ("componentwise", "norm"),
    "nonlinear_ode": ("loose", "tight"),
    "pde": ("const", "characteristic"),
}

#: errors that signal a violated theorem hypothesis rather than bad input
_MATH_ERRORS = (ResboundError, OverflowError)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="resbound",
        description="Certified error bounds for approximate DE solutions from residual information.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bound", help="bound the error for one problem file")
    b.add_argument("--problem", required=True, help="problem JSON file")
    b.add_argument("--method", required=True, choices=METHODS)
    b.add_argument("--out", help="output path (default: stdout)")
    b.add_argument("--format", choices=("csv", "json"), default="csv")
    b.add_argument("--grid-k", type=int, help="override the problem's grid resolution")
    b.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed for seeded inputs")
    b.add_argument("--emit-plot-data", action="store_true",
                   help="append abs_error columns (problem must carry exact and surrogate)")
    b.add_argument("--plot", action="store_true",
                   help="render a figure next to the output file")

    v = sub.add_parser("verify", help="run the manufactured-solution verification suite")
    v.add_argument("--case", action="append", choices=CATALOG_IDS,
                   help="restrict to specific cases (repeatable)")
    v.add_argument("--perturbation-scale", type=float, default=1.0,
                   help="scale factor on the surrogate perturbation amplitude")
    v.add_argument("--seed", type=int, default=DEFAULT_SEED)
    v.add_argument("--grid-k", type=int, default=10_000)
    v.add_argument("--skip-properties", action="store_true",
                   help="skip the operator property suites")
    v.add_argument("--report", help="write the PASS/FAIL table as CSV")
    v.add_argument("--plot-dir", help="render per-case figures into this directory")

    args = parser.parse_args(argv)
    if args.command == "bound":
        return cmd_bound(args)
    return cmd_verify(args)


# --------------------------------------------------------------------------
# bound
# --------------------------------------------------------------------------

def cmd_bound(args) -> int:
    try:
        parsed = load_problem(args.problem, grid_k=args.grid_k)
    except ProblemFormatError as ex:
        print(f"schema error: {ex}", file=sys.stderr)
        return 2

    if args.method not in _KIND_METHODS[parsed.kind]:
        print(
            f"method {args.method!r} does not apply to kind {parsed.kind!r} "
            f"(expected one of {_KIND_METHODS[parsed.kind]})",
            file=sys.stderr,
        )
        return 3
    if parsed.kind == "ode" and args.method == "loose" and parsed.payload.coefficients is None:
        print("method 'loose' needs constant coefficients", file=sys.stderr)
        return 3

    try:
        header, columns, payload, figure = _run_bound(parsed, args)
    except ProblemFormatError as ex:
        print(f"schema error: {ex}", file=sys.stderr)
        return 2
    except _MATH_ERRORS as ex:
        print(type(ex).__name__, file=sys.stderr)
        print(str(ex), file=sys.stderr)
        return 4

    out = Path(args.out) if args.out else None
    if args.format == "json" or (header is None and out is None):
        text_payload = payload
        if out is None:
            import json as _json
            print(_json.dumps(text_payload, sort_keys=True, indent=2))
        else:
            report.write_json(out, text_payload)
    elif header is None:
        report.write_json(out, payload)
    elif out is None:
        print(",".join(header))
        for i in range(len(columns[0])):
            print(",".join(repr(float(c[i])) for c in columns))
    else:
        report.write_csv(out, header, columns)
    if args.plot and out is not None and figure is not None:
        figure(report.figure_path(out))
    return 0


def _abs_error_series(parsed: ParsedProblem, t: np.ndarray) -> np.ndarray:
    if parsed.exact is None or parsed.surrogate is None:
        raise ProblemFormatError(
            "--emit-plot-data needs 'exact' and 'surrogate' expressions in the problem file"
        )
    cols = []
    for e, u in zip(parsed.exact, parsed.surrogate):
        ev = np.broadcast_to(np.asarray(e.evaluate({"t": t}), dtype=float), t.shape)
        uv = np.broadcast_to(np.asarray(u.evaluate({"t": t}), dtype=float), t.shape)
        cols.append(np.abs(uv - ev))
    return np.column_stack(cols) if len(cols) > 1 else cols[0]


def _abs_error_xy(parsed: ParsedProblem, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if parsed.exact is None or parsed.surrogate is None:
        raise ProblemFormatError(
            "--emit-plot-data needs 'exact' and 'surrogate' expressions in the problem file"
        )
    pt = {"x": x, "y": y}
    shape = np.broadcast(x, y).shape
    ev = np.broadcast_to(np.asarray(parsed.exact[0].evaluate(pt), dtype=float), shape)
    uv = np.broadcast_to(np.asarray(parsed.surrogate[0].evaluate(pt), dtype=float), shape)
    return np.abs(uv - ev)


def _run_bound(parsed: ParsedProblem, args):
    """Returns (csv_header, csv_columns, json_payload, figure_renderer)."""
    if parsed.kind == "ode":
        if parsed.payload.coefficient_expr is not None:
            series = first_order_variable_bound(parsed.payload)
        elif args.method == "loose":
            series = loose_bound(parsed.payload).series
        else:
            series = tight_bound(parsed.payload)
        t, bound = series.points, series.values
        header = ["t", "B"]
        columns = [t, bound]
        payload = {"kind": "ode", "method": series.method,
                   "t": [float(v) for v in t], "B": [float(v) for v in bound]}
        abs_err = None
        if args.emit_plot_data:
            abs_err = _abs_error_series(parsed, t)
            header.append("abs_error")
            columns.append(abs_err)
            payload["abs_error"] = [float(v) for v in abs_err]
        err_overlay = abs_err if abs_err is not None else _try_abs_error(parsed, t)

        def figure(path):
            report.render_curve_figure(
                path, t, bound, abs_error=err_overlay,
                label=f"{series.method} bound", title=Path(args.problem).name,
            )
        return header, columns, payload, figure

    if parsed.kind == "ode_system":
        comp = componentwise_bound(parsed.payload)
        nb = norm_bound(parsed.payload)
        t = comp.points
        n = comp.components.shape[1]
        header = ["t"] + [f"B_{i + 1}" for i in range(n)] + ["B_norm"]
        columns = [t] + [comp.components[:, i] for i in range(n)] + [nb.norms]
        payload = {
            "kind": "ode_system", "method": args.method,
            "t": [float(v) for v in t],
            "B_components": [[float(v) for v in row] for row in comp.components],
            "B_norm": [float(v) for v in nb.norms],
        }
        abs_err = None
        if args.emit_plot_data:
            abs_err = np.atleast_2d(_abs_error_series(parsed, t))
            for i in range(n):
                header.append(f"abs_error_{i + 1}")
                columns.append(abs_err[:, i])
            header.append("abs_error_norm")
            columns.append(np.linalg.norm(abs_err, axis=1))
        err_overlay = abs_err

        def figure(path):
            report.render_system_figure(
                path, t, comp.components, nb.norms, abs_error=err_overlay,
                title=Path(args.problem).name,
            )
        return header, columns, payload, figure

    if parsed.kind == "nonlinear_ode":
        if parsed.query is None:
            raise ProblemFormatError("nonlinear problems need a query (t, eps) set")
        bounds = component_bounds(parsed.payload, method=args.method)
        u, bound = reconstruct(parsed.payload, parsed.query, bounds)
        pairs = parsed.query.pairs
        header = ["t", "eps", "u", "B"]
        columns = [pairs[:, 0], pairs[:, 1], u, bound]
        payload = {
            "kind": "nonlinear_ode", "method": args.method,
            "t": [float(v) for v in pairs[:, 0]],
            "eps": [float(v) for v in pairs[:, 1]],
            "u": [float(v) for v in u],
            "B": [float(v) for v in bound],
            "validity_radius": parsed.payload.validity_radius,
            "note": "bound certifies the truncated expansion; the tail beyond "
                    f"order {parsed.payload.expansion_order} is not controlled",
        }

        def figure(path):
            report.render_eps_figure(path, pairs, u, bound, title=Path(args.problem).name)
        return header, columns, payload, figure

    # pde
    if args.method == "const":
        value = constant_bound(parsed.payload, parsed.mesh or (512, 512))
        payload = {"kind": "pde", "method": "const", "B": value}

        def figure(path):
            nx, ny = parsed.mesh or (512, 512)
            x0, x1, y0, y1 = parsed.payload.rect
            xs = np.linspace(x0, x1, min(nx, 256))
            ys = np.linspace(y0, y1, min(ny, 256))
            X, Y = np.meshgrid(xs, ys, indexing="ij")
            c_vals = np.broadcast_to(
                np.asarray(parsed.payload.c.evaluate({"x": X, "y": Y}), dtype=float), X.shape)
            r_vals = np.broadcast_to(
                np.asarray(parsed.payload.residual.sample_xy(X, Y), dtype=float), X.shape)
            report.render_field_figure(path, xs, ys, np.abs(r_vals / c_vals), value,
                                       title=Path(args.problem).name)
        return None, None, payload, figure

    if parsed.query is None:
        raise ProblemFormatError("characteristic method needs query points")
    xq, yq = parsed.query[:, 0], parsed.query[:, 1]
    values = []
    for xv, yv in zip(xq, yq):
        curve = trace_characteristic(parsed.payload, (float(xv), float(yv)), parsed.trace_step)
        values.append(curve_bound(parsed.payload, curve))
    bound = np.array(values)
    header = ["x", "y", "B"]
    columns = [xq, yq, bound]
    payload = {"kind": "pde", "method": "characteristic",
               "x": [float(v) for v in xq], "y": [float(v) for v in yq],
               "B": [float(v) for v in bound]}
    abs_err = None
    if args.emit_plot_data:
        abs_err = _abs_error_xy(parsed, xq, yq)
        header.append("abs_error")
        columns.append(abs_err)
        payload["abs_error"] = [float(v) for v in abs_err]

    def figure(path):
        report.render_points_figure(path, xq, yq, bound, abs_error=abs_err,
                                    title=Path(args.problem).name)
    return header, columns, payload, figure


def _try_abs_error(parsed: ParsedProblem, t: np.ndarray):
    if parsed.exact is None or parsed.surrogate is None:
        return None
    return _abs_error_series(parsed, t)


# --------------------------------------------------------------------------
# verify
# --------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return "-"
    return f"{value:.3e}"


def cmd_verify(args) -> int:
    from .verify import run_suite

    case_ids = tuple(args.case) if args.case else CATALOG_IDS
    amplitude = DEFAULT_AMPLITUDE * args.perturbation_scale
    plot_dir = Path(args.plot_dir) if args.plot_dir else None
    if plot_dir:
        plot_dir.mkdir(parents=True, exist_ok=True)

    rows = run_suite(
        case_ids=case_ids,
        amplitude=amplitude,
        seed=args.seed,
        grid_k=args.grid_k,
        include_properties=not args.skip_properties,
        plot_dir=plot_dir,
    )

    widths = (12, 16, 12, 12, 9, 6)
    print(f"{'case':<{widths[0]}}{'method':<{widths[1]}}{'max|eta|':>{widths[2]}}"
          f"{'min slack':>{widths[3]}}{'time[s]':>{widths[4]}}{'status':>{widths[5]}}")
    for row in rows:
        status = "PASS" if row.ok else "FAIL"
        print(f"{row.case:<{widths[0]}}{row.method:<{widths[1]}}{_fmt(row.max_eta):>{widths[2]}}"
              f"{_fmt(row.min_slack):>{widths[3]}}{row.seconds:>{widths[4]}.2f}{status:>{widths[5]}}"
              + (f"  {row.note}" if row.note else ""))

    n_fail = sum(1 for r in rows if not r.ok)
    print(f"{len(rows) - n_fail}/{len(rows)} checks passed")
    if args.report:
        _write_report(args.report, rows)
    return 0 if n_fail == 0 else 1


def _write_report(path, rows) -> None:
    lines = ["case,method,max_eta,min_slack,seconds,passed"]
    for r in rows:
        max_eta = "" if r.max_eta is None else repr(float(r.max_eta))
        slack = "" if r.min_slack is None else repr(float(r.min_slack))
        lines.append(f"{r.case},{r.method},{max_eta},{slack},{r.seconds:.3f},{int(r.ok)}")
    Path(path).write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    raise SystemExit(main())
