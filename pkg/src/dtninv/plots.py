"""Figure rendering for run directories.

Renders the training curves (10-epoch block averages on a log scale), heat
maps of the exact and reconstructed fields with their absolute error, and 1D
slices along y=0, x=0, y=1, x=1, y=x and y=0.5. Output is PNG with fixed dpi
so re-rendering an unchanged run reproduces identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.tri import LinearTriInterpolator

from .metrics import _triangulation

_DPI = 130
_SLICES = (
    ("y = 0", lambda t: (t, np.zeros_like(t))),
    ("x = 0", lambda t: (np.zeros_like(t), t)),
    ("y = 1", lambda t: (t, np.ones_like(t))),
    ("x = 1", lambda t: (np.ones_like(t), t)),
    ("y = x", lambda t: (t, t)),
    ("y = 0.5", lambda t: (t, np.full_like(t, 0.5))),
)


def _require(path: Path) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"run directory is missing {path.name}")
    return path


def _read_history(path: Path):
    rows = _require(path).read_text().strip().splitlines()
    if len(rows) < 2:
        raise FileNotFoundError("history.csv contains no epochs")
    data = np.array([[float(v) for v in line.split(",")] for line in rows[1:]])
    return data  # columns epoch, mean_loss, rel_error, lr, clamps, seconds


def _block_mean(values: np.ndarray, width: int = 10):
    centers, means = [], []
    for start in range(0, len(values), width):
        chunk = values[start:start + width]
        centers.append(start + (len(chunk) - 1) / 2.0)
        means.append(float(np.mean(chunk)))
    return np.asarray(centers), np.asarray(means)


def _load_run(run_dir: Path):
    from .cli import config_from_manifest  # deferred: cli depends on plots

    manifest = json.loads(_require(run_dir / "manifest.json").read_text())
    config = config_from_manifest(manifest)
    from .trainer import build_mesh

    mesh = build_mesh(config)
    rows = _require(run_dir / "fields.csv").read_text().strip().splitlines()[1:]
    table = np.array([[float(v) for v in line.split(",")] for line in rows])
    if len(table) != mesh.n_vertices:
        raise ValueError("fields.csv does not match the manifest mesh")
    return mesh, table[:, 2], table[:, 3]


def plot_history(run_dir: Path, out: Path) -> Path:
    hist = _read_history(run_dir / "history.csv")
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    cl, ml = _block_mean(hist[:, 1])
    ce, me = _block_mean(hist[:, 2])
    ax.semilogy(cl, ml, "o-", color="tab:blue", label="boundary-flux loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss (10-epoch mean)", color="tab:blue")
    ax2 = ax.twinx()
    ax2.semilogy(ce, me, "s--", color="tab:red", label="relative error")
    ax2.set_ylabel("relative error (10-epoch mean)", color="tab:red")
    ax.set_title("training history")
    fig.tight_layout()
    fig.savefig(out, dpi=_DPI)
    plt.close(fig)
    return out


def plot_fields(run_dir: Path, out: Path) -> Path:
    mesh, k_exact, k_recon = _load_run(run_dir)
    tri, _ = _triangulation(mesh)
    fig, axes = plt.subplots(1, 3, figsize=(13.5, 4.0))
    panels = (("exact k", k_exact), ("reconstructed k", k_recon),
              ("absolute error", np.abs(k_exact - k_recon)))
    for ax, (title, values) in zip(axes, panels):
        im = ax.tripcolor(tri, values, shading="gouraud")
        ax.set_title(title)
        ax.set_aspect("equal")
        fig.colorbar(im, ax=ax, shrink=0.9)
    fig.tight_layout()
    fig.savefig(out, dpi=_DPI)
    plt.close(fig)
    return out


def plot_slices(run_dir: Path, out: Path) -> Path:
    mesh, k_exact, k_recon = _load_run(run_dir)
    tri, finder = _triangulation(mesh)
    interp_e = LinearTriInterpolator(tri, k_exact, trifinder=finder)
    interp_r = LinearTriInterpolator(tri, k_recon, trifinder=finder)
    t = np.linspace(0.0, 1.0, 201)
    fig, axes = plt.subplots(3, 2, figsize=(10.0, 9.0))
    for ax, (label, line) in zip(axes.ravel(), _SLICES):
        x, y = line(t)
        ve = interp_e(x, y)
        vr = interp_r(x, y)
        keep = ~(np.ma.getmaskarray(ve) | np.ma.getmaskarray(vr))
        if keep.any():
            ax.plot(t[keep], np.ma.filled(ve, np.nan)[keep], "-", color="tab:orange",
                    label="exact")
            ax.plot(t[keep], np.ma.filled(vr, np.nan)[keep], "--", color="tab:blue",
                    label="reconstructed")
            ax.legend(fontsize=8)
        else:
            ax.text(0.5, 0.5, "slice outside domain", ha="center", va="center",
                    transform=ax.transAxes)
        ax.set_title(label)
    fig.tight_layout()
    fig.savefig(out, dpi=_DPI)
    plt.close(fig)
    return out


def render_run(run_dir) -> list[Path]:
    """Render every report figure for a completed run; returns written paths."""
    run_dir = Path(run_dir)
    plot_dir = run_dir / "plots"
    plot_dir.mkdir(exist_ok=True)
    written = [
        plot_history(run_dir, plot_dir / "loss_error.png"),
        plot_fields(run_dir, plot_dir / "fields.png"),
        plot_slices(run_dir, plot_dir / "slices.png"),
    ]
    return written
