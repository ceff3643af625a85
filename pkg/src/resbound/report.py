"""Delimited output and figure rendering for bound results.

CSV cells are written with ``repr`` so identical inputs produce
byte-identical files (shortest round-trip float formatting, no locale
involvement). Figures are optional companions to the delimited output:
when requested, a PNG lands next to the CSV with the bound curve and,
when the problem carries an exact solution, the true absolute error
overlaid, in the style of residual-vs-bound comparison plots.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "write_csv",
    "write_json",
    "figure_path",
    "render_curve_figure",
    "render_system_figure",
    "render_points_figure",
    "render_field_figure",
    "render_eps_figure",
]


def _cell(x) -> str:
    return repr(float(x))


def write_csv(path, header: list[str], columns: list[np.ndarray]) -> None:
    rows = len(columns[0])
    for col in columns:
        if len(col) != rows:
            raise ValueError("CSV columns differ in length")
    lines = [",".join(header)]
    for i in range(rows):
        lines.append(",".join(_cell(col[i]) for col in columns))
    Path(path).write_text("\n".join(lines) + "\n")


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def figure_path(out_path) -> Path:
    return Path(out_path).with_suffix(".png")


def _new_axes(title: str, xlabel: str, ylabel: str):
    fig, ax = plt.subplots(figsize=(6.4, 4.0), dpi=150)
    ax.set_title(title, fontsize=10)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _finish(fig, ax, path) -> Path:
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def render_curve_figure(path, t, bound, *, abs_error=None, label="error bound", title="") -> Path:
    fig, ax = _new_axes(title, "t", "bound")
    ax.plot(t, bound, color="tab:red", ls="--", label=label)
    if abs_error is not None:
        ax.plot(t, abs_error, color="tab:blue", label="|error|")
    return _finish(fig, ax, path)


def render_system_figure(path, t, components, norms, *, abs_error=None, title="") -> Path:
    n = components.shape[1]
    fig, axes = plt.subplots(2, (n + 2) // 2, figsize=(2.6 * ((n + 2) // 2), 5.0), dpi=150)
    axes = np.atleast_1d(axes).ravel()
    for i in range(n):
        ax = axes[i]
        ax.plot(t, components[:, i], color="tab:red", ls="--", label="bound")
        if abs_error is not None:
            ax.plot(t, np.abs(abs_error[:, i]), color="tab:blue", label="|error|")
        ax.set_title(f"component {i + 1}", fontsize=8)
        ax.grid(True, alpha=0.3)
        ax.tick_params(labelsize=7)
    ax = axes[n]
    ax.plot(t, norms, color="tab:red", ls="--", label="norm bound")
    if abs_error is not None:
        ax.plot(t, np.linalg.norm(abs_error, axis=1), color="tab:blue", label="||error||")
    ax.set_title("norm", fontsize=8)
    ax.grid(True, alpha=0.3)
    ax.tick_params(labelsize=7)
    ax.legend(fontsize=7)
    for extra in axes[n + 1:]:
        extra.axis("off")
    fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def render_points_figure(path, x, y, bound, *, abs_error=None, title="") -> Path:
    fig, ax = _new_axes(title, "x", "y")
    sc = ax.scatter(x, y, c=bound, cmap="viridis", s=24, label="bound at query points")
    fig.colorbar(sc, ax=ax, label="bound")
    if abs_error is not None:
        worst = np.argmax(np.abs(abs_error))
        ax.annotate(
            f"max |error| = {np.max(np.abs(abs_error)):.3g}",
            xy=(x[worst], y[worst]), fontsize=8,
            xytext=(0.02, 0.98), textcoords="axes fraction", va="top",
        )
    ax.set_aspect("equal", adjustable="box")
    return _finish(fig, ax, path)


def render_field_figure(path, xs, ys, field, bound_value, *, title="") -> Path:
    fig, ax = _new_axes(title, "x", "y")
    im = ax.imshow(
        field.T, origin="lower", extent=(xs[0], xs[-1], ys[0], ys[-1]),
        cmap="magma", aspect="auto",
    )
    fig.colorbar(im, ax=ax, label="|r / c|")
    ax.plot([], [], " ", label=f"constant bound B = {bound_value:.6g}")
    return _finish(fig, ax, path)


def render_eps_figure(path, pairs, solution, bound, *, title="") -> Path:
    fig, (ax_u, ax_b) = plt.subplots(1, 2, figsize=(9.6, 4.0), dpi=150)
    eps_values = np.unique(pairs[:, 1])
    cmap = plt.get_cmap("coolwarm")
    for i, eps in enumerate(eps_values):
        mask = pairs[:, 1] == eps
        color = cmap(i / max(len(eps_values) - 1, 1))
        order = np.argsort(pairs[mask, 0])
        t = pairs[mask, 0][order]
        ax_u.plot(t, solution[mask][order], color=color, label=f"eps = {eps:+g}")
        ax_b.plot(t, bound[mask][order], color=color, ls="--")
    ax_u.set_xlabel("t")
    ax_u.set_ylabel("reconstructed solution")
    ax_u.grid(True, alpha=0.3)
    ax_u.legend(fontsize=7)
    ax_b.set_xlabel("t")
    ax_b.set_ylabel("error bound")
    ax_b.set_yscale("log")
    ax_b.grid(True, alpha=0.3)
    fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)
