"""Loss-curve panels and field comparison figures from finished runs.

Figures are SVG with a fixed hash salt and no date stamp, so re-plotting
unchanged data reproduces the files byte for byte.  Each figure is
accompanied by a CSV holding exactly the plotted data.
"""
from __future__ import annotations

import csv
import logging
import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import yaml  # noqa: E402

from .metrics import normalize_trace  # noqa: E402
from .oracle import read_field_csv  # noqa: E402

log = logging.getLogger(__name__)

_RC = {"svg.hashsalt": "helmpinn", "svg.fonttype": "path", "font.size": 9}
_STYLE = {"pinn": "-", "fbpinn": "--"}


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _read_trace(path: Path):
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([float(r["loss"]) for r in rows])


def find_runs(result_dir) -> list[Path]:
    """Run directories (those holding a ``config.yaml``) below ``result_dir``."""
    root = Path(result_dir)
    runs = [p.parent for p in root.glob("*/config.yaml")]
    if (root / "config.yaml").exists():
        runs.append(root)
    return sorted(runs)


def _run_meta(run: Path) -> dict:
    cfg = yaml.safe_load((run / "config.yaml").read_text())
    return {"name": cfg.get("name") or run.name, "method": cfg["method"],
            "optimizer": cfg["optimizer"]["kind"], "k": float(cfg["problem"]["k"]),
            "width": float(cfg["pml"]["width_in_lambdas"])}


def plot_loss_panel(series, title: str, svg_path: Path, csv_path: Path) -> None:
    """``series`` maps a label to ``(method, normalised losses)``."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        for label, (method, curve) in series.items():
            ax.semilogy(np.arange(len(curve)), curve, _STYLE.get(method, "-"),
                        label=label, linewidth=1.0)
        ax.set_xlabel("epoch")
        ax.set_ylabel("normalised loss")
        ax.set_title(title)
        ax.legend(fontsize=7)
        fig.tight_layout()
        _save(fig, svg_path)
    labels = list(series)
    length = max((len(c) for _, c in series.values()), default=0)
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch"] + labels)
        for e in range(length):
            row = [e]
            for lab in labels:
                c = series[lab][1]
                row.append(repr(float(c[e])) if e < len(c) else "")
            w.writerow(row)


def plot_field_comparison(run: Path, svg_path: Path, csv_path: Path) -> None:
    x, y, approx = read_field_csv(run / "field_approx.csv")
    x2, y2, ref = read_field_csv(run / "field_ref.csv")
    if not (np.array_equal(x, x2) and np.array_equal(y, y2)):
        raise ValueError("approximation and reference are on different points")
    xs, ys = np.unique(x), np.unique(y)
    shape = (len(ys), len(xs))
    panels = [("Re approx", approx.real), ("Re reference", ref.real),
              ("Im approx", approx.imag), ("Im reference", ref.imag)]
    extent = (xs[0], xs[-1], ys[0], ys[-1])
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(2, 2, figsize=(6.4, 5.6))
        for ax, (title, vals), partner in zip(axes.flat, panels, [1, 0, 3, 2]):
            both = np.concatenate([vals, panels[partner][1]])
            lim = float(np.nanmax(np.abs(both))) if np.any(np.isfinite(both)) else 1.0
            im = ax.imshow(vals.reshape(shape), origin="lower", extent=extent,
                           cmap="RdBu_r", vmin=-lim, vmax=lim, interpolation="nearest")
            ax.set_title(title)
            fig.colorbar(im, ax=ax, shrink=0.8)
        fig.suptitle(run.name)
        fig.tight_layout()
        _save(fig, svg_path)
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "re_approx", "im_approx", "re_ref", "im_ref"])
        for row in zip(x, y, approx.real, approx.imag, ref.real, ref.imag):
            w.writerow([repr(float(v)) for v in row])


def emit_plots(result_dir, plot_dir=None) -> list[Path]:
    """Write loss panels (one per (k, optimizer)) and one field figure per run.

    Runs with missing files are skipped with a warning.  Returns the SVG
    paths written.
    """
    root = Path(result_dir)
    out = Path(plot_dir) if plot_dir is not None else root / "plots"
    written: list[Path] = []
    panels: dict = {}
    runs = find_runs(root)
    if not runs:
        warnings.warn(f"no runs found under {root}", stacklevel=2)
        return written
    out.mkdir(parents=True, exist_ok=True)
    for run in runs:
        try:
            meta = _run_meta(run)
        except (OSError, KeyError, TypeError, yaml.YAMLError) as exc:
            warnings.warn(f"skipping {run}: unreadable config ({exc})", stacklevel=2)
            continue
        trace = run / "trace.csv"
        if trace.exists():
            try:
                curve = normalize_trace(_read_trace(trace))
            except ValueError as exc:
                warnings.warn(f"skipping loss curve of {run.name}: {exc}", stacklevel=2)
            else:
                key = (meta["k"], meta["optimizer"])
                label = f"{meta['method']} L_pml={meta['width']:g}λ"
                panels.setdefault(key, {})[label] = (meta["method"], curve)
        else:
            warnings.warn(f"skipping loss curve of {run.name}: no trace.csv", stacklevel=2)
        if (run / "field_approx.csv").exists() and (run / "field_ref.csv").exists():
            svg = out / f"field_{meta['name']}.svg"
            plot_field_comparison(run, svg, out / f"field_{meta['name']}.csv")
            written.append(svg)
        else:
            warnings.warn(f"skipping field figure of {run.name}: missing field CSVs",
                          stacklevel=2)
    for (k, opt), series in sorted(panels.items()):
        stem = f"loss_k{k:g}_{opt}"
        series = dict(sorted(series.items()))
        plot_loss_panel(series, f"k = {k:g}, {opt}", out / f"{stem}.svg", out / f"{stem}.csv")
        written.append(out / f"{stem}.svg")
    return sorted(written)
