"""Reconstruction quality metrics: relative L2, MSE/MAE, PSNR and masked SSIM.

Image metrics run on a raster sampled from the mesh by barycentric
interpolation; cells outside the domain (disk case) are masked and excluded
everywhere, with SSIM windows renormalized over the surviving pixels.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from matplotlib.tri import LinearTriInterpolator, TrapezoidMapTriFinder, Triangulation
from scipy.ndimage import convolve1d

from .fem import mass_matrix
from .mesh import Mesh

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5


@dataclass
class MetricsReport:
    rel_l2: float
    mse: float
    mae: float
    psnr: float
    ssim: float
    data_range: float
    grid: int
    mse_vertex: float

    def to_json(self, extra: dict | None = None) -> str:
        payload = asdict(self)
        if extra:
            payload.update(extra)
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def relative_l2(mesh: Mesh, k_exact: np.ndarray, k_recon: np.ndarray) -> float:
    """sqrt(e^T M e / k^T M k) with the consistent P1 mass matrix."""
    k_exact = np.asarray(k_exact, dtype=float)
    k_recon = np.asarray(k_recon, dtype=float)
    M = mass_matrix(mesh)
    denom = float(k_exact @ (M @ k_exact))
    if denom <= 0:
        raise ValueError("exact field has zero L2 norm")
    e = k_exact - k_recon
    return float(np.sqrt(max(float(e @ (M @ e)), 0.0) / denom))


def _triangulation(mesh: Mesh):
    tri = mesh.cache.get("triangulation")
    if tri is None:
        t = Triangulation(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles)
        tri = (t, TrapezoidMapTriFinder(t))
        mesh.cache["triangulation"] = tri
    return tri


def domain_bbox(mesh: Mesh) -> tuple[float, float, float, float]:
    if mesh.domain_kind == "disk":
        cx, cy = mesh.disk_center
        r = mesh.disk_radius
        return (cx - r, cx + r, cy - r, cy + r)
    return (0.0, 1.0, 0.0, 1.0)


def rasterize(mesh: Mesh, values: np.ndarray, grid: int) -> np.ma.MaskedArray:
    """Cell-centered (grid, grid) raster of a nodal field over the bounding
    box; row iy indexes y from the bottom. Cells outside the mesh are masked."""
    if grid < 8:
        raise ValueError("grid must be at least 8")
    x0, x1, y0, y1 = domain_bbox(mesh)
    xs = x0 + (np.arange(grid) + 0.5) * (x1 - x0) / grid
    ys = y0 + (np.arange(grid) + 0.5) * (y1 - y0) / grid
    xg, yg = np.meshgrid(xs, ys)
    tri, finder = _triangulation(mesh)
    interp = LinearTriInterpolator(tri, np.asarray(values, dtype=float), trifinder=finder)
    return interp(xg, yg)


def psnr(mse: float, data_range: float) -> float:
    """10 log10(range^2 / mse) in dB; infinite for a vanishing mse."""
    if data_range <= 0:
        raise ValueError("data_range must be positive")
    if mse < 0:
        raise ValueError("mse must be nonnegative")
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(data_range ** 2 / mse)


def _gaussian_kernel(size: int = _SSIM_WINDOW, sigma: float = _SSIM_SIGMA) -> np.ndarray:
    offs = np.arange(size) - (size - 1) / 2.0
    w = np.exp(-0.5 * (offs / sigma) ** 2)
    return w / w.sum()


def _windowed(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    out = convolve1d(img, kernel, axis=0, mode="constant", cval=0.0)
    return convolve1d(out, kernel, axis=1, mode="constant", cval=0.0)


def _as_filled(img) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(img, np.ma.MaskedArray):
        return np.ma.filled(img, 0.0).astype(float), ~np.ma.getmaskarray(img)
    img = np.asarray(img, dtype=float)
    return img, np.ones(img.shape, dtype=bool)


def ssim(img1, img2, data_range: float) -> float:
    """Mean local SSIM with an 11x11 Gaussian window (sigma 1.5).

    Masked pixels are excluded; windows overlapping the mask (or the image
    border) renormalize the Gaussian weights over the valid pixels.
    """
    a, valid_a = _as_filled(img1)
    b, valid_b = _as_filled(img2)
    if a.shape != b.shape:
        raise ValueError("images must share a shape")
    if not np.array_equal(valid_a, valid_b):
        raise ValueError("images must share a mask")
    valid = valid_a
    k = _gaussian_kernel()
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2

    vf = valid.astype(float)
    wsum = _windowed(vf, k)
    wsum = np.where(wsum > 0, wsum, 1.0)
    mu1 = _windowed(a * vf, k) / wsum
    mu2 = _windowed(b * vf, k) / wsum
    e11 = _windowed(a * a * vf, k) / wsum
    e22 = _windowed(b * b * vf, k) / wsum
    e12 = _windowed(a * b * vf, k) / wsum
    var1 = e11 - mu1 * mu1
    var2 = e22 - mu2 * mu2
    cov = e12 - mu1 * mu2
    smap = ((2 * mu1 * mu2 + c1) * (2 * cov + c2)
            / ((mu1 * mu1 + mu2 * mu2 + c1) * (var1 + var2 + c2)))
    return float(smap[valid].mean())


def full_report(mesh: Mesh, k_exact: np.ndarray, k_recon: np.ndarray,
                grid: int = 256) -> MetricsReport:
    """MSE/MAE/PSNR/SSIM on the raster plus relative L2 on the mesh.

    PSNR uses the maximum of the exact raster as the data range; the
    vertex-based MSE is logged alongside for comparison.
    """
    r_exact = rasterize(mesh, k_exact, grid)
    r_recon = rasterize(mesh, k_recon, grid)
    valid = ~np.ma.getmaskarray(r_exact)
    diff = np.ma.filled(r_exact - r_recon, 0.0)[valid]
    mse = float(np.mean(diff ** 2))
    mae = float(np.mean(np.abs(diff)))
    data_range = float(np.ma.filled(r_exact, -np.inf).max())
    return MetricsReport(
        rel_l2=relative_l2(mesh, k_exact, k_recon),
        mse=mse,
        mae=mae,
        psnr=psnr(mse, data_range),
        ssim=ssim(r_exact, r_recon, data_range),
        data_range=data_range,
        grid=int(grid),
        mse_vertex=float(np.mean((np.asarray(k_exact) - np.asarray(k_recon)) ** 2)),
    )


def save_raster_pgm(img, path, maxval: int = 65535):
    """Dump a (masked) raster as ASCII PGM; masked cells take the minimum value.

    A JSON sidecar records the quantization range and mask fill.
    """
    data, valid = _as_filled(img)
    vmin = float(data[valid].min()) if valid.any() else 0.0
    vmax = float(data[valid].max()) if valid.any() else 1.0
    scale = (vmax - vmin) or 1.0
    filled = np.where(valid, data, vmin)
    q = np.rint((filled - vmin) / scale * maxval).astype(int)
    path = Path(path)
    lines = ["P2", f"{q.shape[1]} {q.shape[0]}", str(maxval)]
    lines.extend(" ".join(str(v) for v in row) for row in q)
    path.write_text("\n".join(lines) + "\n")
    sidecar = {"vmin": vmin, "vmax": vmax, "masked_fill": "vmin",
               "shape": list(q.shape)}
    Path(str(path) + ".json").write_text(json.dumps(sidecar, sort_keys=True, indent=2) + "\n")
