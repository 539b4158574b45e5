"""Exact coefficient fields and manufactured data for synthetic experiments.

All evaluators are vectorized over numpy arrays of coordinates and return
strictly positive values on the closed domain.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

_DIFFERENTIABLE = ("constant", "sinusoid")


@dataclass(frozen=True)
class ManufacturedSolution:
    """Separable reference solution cos(a*pi*x)*cos(b*pi*y)."""

    a: float
    b: float

    def __post_init__(self):
        if not (0.0 <= self.a <= 2.0 and 0.0 <= self.b <= 2.0):
            raise ValueError("frequencies must lie in [0, 2]")

    def values(self, x, y):
        return np.cos(self.a * np.pi * np.asarray(x)) * np.cos(self.b * np.pi * np.asarray(y))


@dataclass
class CoefficientField:
    """A positive conductivity field k(x, y).

    ``evaluator`` maps coordinate arrays to values; ``params`` records the
    construction so phantoms can be exported and reloaded.
    """

    kind: str
    evaluator: Callable
    params: dict = field(default_factory=dict)

    def __call__(self, x, y):
        return self.evaluator(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    @property
    def differentiable(self) -> bool:
        return self.kind in _DIFFERENTIABLE


def eval_constant(c: float, x, y):
    """Constant coefficient k = c (c > 0)."""
    if c <= 0:
        raise ValueError("constant coefficient must be positive")
    return np.full_like(np.asarray(x, dtype=float), float(c))


def eval_sinusoid(x, y):
    """k(x, y) = 0.9*sin(pi*(x + y + 0.1)/3), positive on the unit square."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return 0.9 * np.sin(np.pi * (x + y + 0.1) / 3.0)


def eval_disk_inclusion(x, y, inside: float = 0.9, outside: float = 0.5,
                        center: tuple[float, float] = (0.5, 0.5), radius: float = 0.25):
    """Piecewise constant disk inclusion; the circle itself takes the outside value."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r2 = (x - center[0]) ** 2 + (y - center[1]) ** 2
    return np.where(r2 < radius ** 2, float(inside), float(outside))


def constant_field(c: float = 1.0) -> CoefficientField:
    return CoefficientField("constant", lambda x, y: eval_constant(c, x, y), {"value": float(c)})


def sinusoid_field() -> CoefficientField:
    return CoefficientField("sinusoid", eval_sinusoid)


def disk_inclusion_field(inside: float = 0.9, outside: float = 0.5,
                         center: tuple[float, float] = (0.5, 0.5),
                         radius: float = 0.25) -> CoefficientField:
    params = {"inside": inside, "outside": outside, "center": center, "radius": radius}
    return CoefficientField(
        "disk_inclusion",
        lambda x, y: eval_disk_inclusion(x, y, inside, outside, center, radius),
        params)


def manufactured_source_closed_form(k: CoefficientField, sol: ManufacturedSolution, x, y):
    """Analytic source -div(k grad p*) for differentiable coefficient kinds."""
    if not k.differentiable:
        raise ValueError(f"no closed-form source for coefficient kind {k.kind!r}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a, b = sol.a, sol.b
    cax, cby = np.cos(a * np.pi * x), np.cos(b * np.pi * y)
    lap = -(a * a + b * b) * np.pi ** 2 * cax * cby
    if k.kind == "constant":
        return -k.params["value"] * lap
    # sinusoid: k = 0.9 sin(u), u = pi (x + y + 0.1)/3, so k_x = k_y = 0.3 pi cos(u)
    u = np.pi * (x + y + 0.1) / 3.0
    kval = 0.9 * np.sin(u)
    kgrad = 0.3 * np.pi * np.cos(u)
    px = -a * np.pi * np.sin(a * np.pi * x) * cby
    py = -b * np.pi * cax * np.sin(b * np.pi * y)
    return -(kgrad * px + kgrad * py + kval * lap)


def _gaussian_smooth(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur (truncated at 4 sigma, edge padding)."""
    if sigma <= 0:
        return img.copy()
    rad = int(math.ceil(4.0 * sigma))
    offs = np.arange(-rad, rad + 1)
    w = np.exp(-0.5 * (offs / sigma) ** 2)
    w /= w.sum()
    out = img
    for axis in (0, 1):
        a = np.moveaxis(out, axis, 0)
        padded = np.pad(a, ((rad, rad), (0, 0)), mode="edge")
        acc = np.zeros_like(a)
        for j in range(2 * rad + 1):
            acc += w[j] * padded[j:j + a.shape[0]]
        out = np.moveaxis(acc, 0, axis)
    return out


def _bilinear_evaluator(xs: np.ndarray, ys: np.ndarray, img: np.ndarray) -> Callable:
    nx, ny = len(xs), len(ys)
    x0, x1 = xs[0], xs[-1]
    y0, y1 = ys[0], ys[-1]

    def evaluate(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        fx = np.clip((x - x0) / (x1 - x0) * (nx - 1), 0.0, nx - 1)
        fy = np.clip((y - y0) / (y1 - y0) * (ny - 1), 0.0, ny - 1)
        ix = np.minimum(fx.astype(int), nx - 2)
        iy = np.minimum(fy.astype(int), ny - 2)
        tx = fx - ix
        ty = fy - iy
        return ((1 - tx) * (1 - ty) * img[iy, ix]
                + tx * (1 - ty) * img[iy, ix + 1]
                + (1 - tx) * ty * img[iy + 1, ix]
                + tx * ty * img[iy + 1, ix + 1])

    return evaluate


def make_phantom(inclusions, background: float, sigma: float,
                 bbox: tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0),
                 grid: int = 256) -> CoefficientField:
    """Rasterized inclusion phantom with optional Gaussian smoothing.

    Parameters
    ----------
    inclusions : sequence of ((cx, cy, r), value)
        Disk inclusions painted over the background in order (later entries
        overwrite earlier ones). Disk boundaries take the background value.
    background : float
        Value outside all inclusions; must be positive like every value.
    sigma : float
        Smoothing standard deviation in raster cells; 0 keeps the raw raster.
    bbox : (x0, x1, y0, y1)
        Raster extent; evaluation clamps to it.
    grid : int
        Raster nodes per axis.
    """
    if background <= 0 or any(v <= 0 for _, v in inclusions):
        raise ValueError("phantom values must be strictly positive")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    x0, x1, y0, y1 = bbox
    xs = np.linspace(x0, x1, grid)
    ys = np.linspace(y0, y1, grid)
    xg, yg = np.meshgrid(xs, ys)
    img = np.full((grid, grid), float(background))
    for (cx, cy, r), value in inclusions:
        img[(xg - cx) ** 2 + (yg - cy) ** 2 < r ** 2] = float(value)
    img = _gaussian_smooth(img, sigma)
    params = {
        "inclusions": [((float(cx), float(cy), float(r)), float(v)) for (cx, cy, r), v in inclusions],
        "background": float(background),
        "sigma": float(sigma),
        "bbox": tuple(float(v) for v in bbox),
        "grid": int(grid),
        "raster": img,
        "xs": xs,
        "ys": ys,
    }
    return CoefficientField("phantom", _bilinear_evaluator(xs, ys, img), params)


def phantom_one() -> CoefficientField:
    """Two soft inclusions (0.3 and 0.5) on a 0.9 background, values in [0.2, 1.0]."""
    return make_phantom(
        [((0.35, 0.62, 0.13), 0.3), ((0.64, 0.38, 0.11), 0.5)],
        background=0.9, sigma=2.0)


def phantom_two() -> CoefficientField:
    """Three strong inclusions (5, 4, 3) on a unit background, values in [1.0, 5.0]."""
    return make_phantom(
        [((0.38, 0.62, 0.10), 5.0), ((0.62, 0.62, 0.09), 4.0), ((0.50, 0.34, 0.11), 3.0)],
        background=1.0, sigma=2.0)


def save_phantom_pgm(phantom: CoefficientField, path):
    """Write a phantom raster as 16-bit ASCII PGM with a JSON sidecar.

    The sidecar records the bounding box, smoothing width and the value range
    used for quantization, so ``load_phantom_pgm`` can reconstruct the field.
    """
    if phantom.kind != "phantom":
        raise ValueError("only phantom fields carry a raster")
    img = phantom.params["raster"]
    vmin, vmax = float(img.min()), float(img.max())
    maxval = 65535
    scale = (vmax - vmin) or 1.0
    q = np.rint((img - vmin) / scale * maxval).astype(int)
    path = Path(path)
    lines = ["P2", f"{img.shape[1]} {img.shape[0]}", str(maxval)]
    lines.extend(" ".join(str(v) for v in row) for row in q)
    path.write_text("\n".join(lines) + "\n")
    sidecar = {
        "bbox": list(phantom.params["bbox"]),
        "sigma": phantom.params["sigma"],
        "vmin": vmin,
        "vmax": vmax,
        "grid": list(img.shape),
    }
    Path(str(path) + ".json").write_text(
        json.dumps(sidecar, sort_keys=True, indent=2) + "\n")


def load_phantom_pgm(path) -> CoefficientField:
    """Reload a phantom exported by :func:`save_phantom_pgm`."""
    path = Path(path)
    meta = json.loads(Path(str(path) + ".json").read_text())
    tokens = path.read_text().split()
    if tokens[0] != "P2":
        raise ValueError("not an ASCII PGM file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    q = np.asarray(tokens[4:4 + w * h], dtype=float).reshape(h, w)
    img = meta["vmin"] + q / maxval * (meta["vmax"] - meta["vmin"])
    x0, x1, y0, y1 = meta["bbox"]
    xs = np.linspace(x0, x1, w)
    ys = np.linspace(y0, y1, h)
    params = {"bbox": tuple(meta["bbox"]), "sigma": meta["sigma"], "grid": w,
              "raster": img, "xs": xs, "ys": ys}
    return CoefficientField("phantom", _bilinear_evaluator(xs, ys, img), params)
