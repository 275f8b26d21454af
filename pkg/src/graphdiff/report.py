"""Render convergence figures from experiment result rows.

One figure per sweep: the geometric-mean RMSE as a bold line on a log
scale, with a shaded band spanning one geometric standard deviation on
each side. Figures are written next to the delimited output.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["render_figures"]

_X_KEY = {"m": "m", "cardinality": "cardinality", "dimension": "m", "size": "m", "dataset": "m"}


def _line_label(sweep: str, row: dict) -> str:
    if sweep == "dimension":
        return f"{row['method']} (d={row['d']})"
    if sweep == "size":
        return f"{row['method']} ({row['n_nodes']} nodes)"
    return str(row["method"])


def _numeric(value) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        return float("nan")


def render_figures(rows: list[dict], out_stem) -> list[Path]:
    """Write one PNG per sweep found in ``rows``; returns the written paths."""
    out_stem = Path(out_stem)
    out_stem.parent.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    sweeps = sorted({str(row["sweep"]) for row in rows})
    for sweep in sweeps:
        x_key = _X_KEY.get(sweep, "m")
        lines: dict[str, list[tuple[float, float, float]]] = {}
        for row in rows:
            if str(row["sweep"]) != sweep:
                continue
            if str(row.get("skipped", "False")) == "True" or row.get("skipped") is True:
                continue
            mean = _numeric(row.get("rmse_geomean"))
            if not math.isfinite(mean) or mean <= 0:
                continue
            spread = _numeric(row.get("rmse_geostd"))
            x = _numeric(row.get(x_key))
            lines.setdefault(_line_label(sweep, row), []).append((x, mean, spread))
        if not lines:
            continue

        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for label, triples in sorted(lines.items()):
            triples.sort(key=lambda t: t[0])
            xs = [t[0] for t in triples]
            means = [t[1] for t in triples]
            ax.plot(xs, means, marker="o", linewidth=2.0, label=label)
            spreads = [t[2] if math.isfinite(t[2]) and t[2] >= 1.0 else 1.0 for t in triples]
            lower = [m / s for m, s in zip(means, spreads)]
            upper = [m * s for m, s in zip(means, spreads)]
            ax.fill_between(xs, lower, upper, alpha=0.2)
        ax.set_yscale("log")
        ax.set_xlabel("index set cardinality" if x_key == "cardinality" else "sample points m")
        ax.set_ylabel("RMSE (geometric mean)")
        ax.set_title(f"{sweep} sweep")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out_stem.parent / f"{out_stem.name}_{sweep}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
