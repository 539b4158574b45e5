"""Discrete Neumann traces and Cauchy data synthesis.

Fluxes are recovered variationally: the residual A p - b vanishes at interior
vertices by construction of the solve, and its boundary entries divided by the
lumped arc weights are the discrete flux k dp/dnu. For manufactured data the
load vector carries the weak source sum_T mean(k) grad(p*) . grad(phi_j) at
interior vertices and zero at boundary vertices, so the recorded trace is the
boundary residual itself. This encodes f = -div(k grad p*) without requiring a
differentiable coefficient, and the same discrete map is used for training,
which makes the data exactly reproducible at the true coefficient.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coeff import CoefficientField
from .fem import (InteriorSolver, SolverError, assemble_stiffness,
                  assemble_system, interior_vertices)
from .mesh import Mesh, ObservationSpec, fingerprint, mark_boundary, unit_square_mesh

_FLUX_RTOL = 1e-8
_DATASET_FORMAT = 1


@dataclass
class BoundaryTrace:
    """Flux values per boundary vertex with lumped weights and observation flags.

    Unobserved entries of measured traces are NaN, never silently zero.
    """

    values: np.ndarray
    weights: np.ndarray
    observed: np.ndarray


@dataclass
class CauchySample:
    """One (Dirichlet trace, weak load, observed Neumann trace) triple."""

    sample_id: int
    g: np.ndarray
    load: np.ndarray
    trace: BoundaryTrace
    meta: dict = field(default_factory=dict)


@dataclass
class CauchyDataset:
    samples: list
    seed: int
    mesh_fingerprint: str
    observation: ObservationSpec
    mesh: Mesh


def boundary_flux(mesh: Mesh, A, p: np.ndarray, load: np.ndarray,
                  observed: np.ndarray | None = None) -> BoundaryTrace:
    """Variationally consistent flux h_i = (A p - load)_i / m_i on the boundary.

    Refuses to produce a trace when the interior residual is not negligible,
    since the boundary residual would then be meaningless.
    """
    Ap = A @ p
    r = Ap - load
    # cancellation scale: a fully cancelled product A p still counts as solved
    absA = abs(A)
    scale = max(float(np.linalg.norm(load)), float(np.linalg.norm(absA @ np.abs(p))))
    if scale > 0:
        rint = float(np.linalg.norm(r[interior_vertices(mesh)]))
        if rint > _FLUX_RTOL * scale:
            raise SolverError(
                f"interior residual {rint:.3e} exceeds {_FLUX_RTOL:.0e} * {scale:.3e}")
    h = r[mesh.boundary_vertices] / mesh.boundary_weights
    if observed is None:
        observed = np.ones(len(h), dtype=bool)
    return BoundaryTrace(h, mesh.boundary_weights.copy(), observed)


def dtn_apply(mesh: Mesh, k: np.ndarray, g: np.ndarray,
              load: np.ndarray | None = None,
              observed: np.ndarray | None = None) -> BoundaryTrace:
    """Discrete Dirichlet-to-Neumann action: assemble, solve, recover the flux."""
    if load is None:
        load = np.zeros(mesh.n_vertices)
    A, A_II, A_IB = assemble_system(mesh, k)
    p = InteriorSolver(mesh, A, A_II=A_II, A_IB=A_IB).solve_dirichlet(g, load)
    return boundary_flux(mesh, A, p, load, observed=observed)


def _square_refinement_map(mesh: Mesh, fine: Mesh) -> np.ndarray:
    """Positions of the coarse boundary vertices inside the fine boundary loop."""
    n = mesh.n
    fine_pos = {int(v): i for i, v in enumerate(fine.boundary_vertices)}
    idx = []
    for v in mesh.boundary_vertices:
        j, i = divmod(int(v), n + 1)
        idx.append(fine_pos[(2 * j) * (2 * n + 1) + 2 * i])
    return np.asarray(idx)


def generate_dataset(mesh: Mesh, k_true: CoefficientField, spec: ObservationSpec,
                     n_samples: int, seed: int, refine: bool = False) -> CauchyDataset:
    """Synthesize Cauchy samples for boundary data cos(a*pi*x)cos(b*pi*y).

    Frequencies (a, b) are drawn up-front from a seeded generator, so the
    data stream is reproducible bit for bit. Dirichlet values are zeroed on
    the hidden boundary and recorded fluxes are NaN there. With ``refine`` the
    trace comes from a once-refined solve (unit square only), breaking the
    exact data/model consistency of the default same-mesh construction.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    mask = mark_boundary(mesh, spec)
    rng = np.random.default_rng(seed)
    ab = rng.uniform(0.0, 2.0, size=(n_samples, 2))

    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    k_nodal = np.asarray(k_true(x, y), dtype=float)
    A, A_II, A_IB = assemble_system(mesh, k_nodal)
    solver = InteriorSolver(mesh, A, A_II=A_II, A_IB=A_IB)
    bb = mesh.boundary_vertices

    fine = fine_solver = fine_A = fine_map = fine_mask = None
    if refine:
        if mesh.domain_kind != "unit_square":
            raise ValueError("refined data generation is supported on the unit square only")
        fine = unit_square_mesh(2 * mesh.n)
        fine_mask = mark_boundary(fine, spec)
        kf = np.asarray(k_true(fine.vertices[:, 0], fine.vertices[:, 1]), dtype=float)
        fine_A = assemble_stiffness(fine, kf)
        fine_solver = InteriorSolver(fine, fine_A)
        fine_map = _square_refinement_map(mesh, fine)

    samples = []
    for sid, (a, b) in enumerate(ab):
        pstar = np.cos(a * np.pi * x) * np.cos(b * np.pi * y)
        g = pstar[bb].copy()
        g[~mask.observed] = 0.0
        load = A @ pstar
        load[bb] = 0.0
        if refine:
            fx, fy = fine.vertices[:, 0], fine.vertices[:, 1]
            pf = np.cos(a * np.pi * fx) * np.cos(b * np.pi * fy)
            gf = pf[fine.boundary_vertices].copy()
            gf[~fine_mask.observed] = 0.0
            lf = fine_A @ pf
            lf[fine.boundary_vertices] = 0.0
            sol = fine_solver.solve_dirichlet(gf, lf)
            trace_f = boundary_flux(fine, fine_A, sol, lf)
            h = trace_f.values[fine_map]
        else:
            p = solver.solve_dirichlet(g, load)
            h = boundary_flux(mesh, A, p, load).values
        h = h.copy()
        h[~mask.observed] = np.nan
        trace = BoundaryTrace(h, mesh.boundary_weights.copy(), mask.observed.copy())
        samples.append(CauchySample(sid, g, load, trace,
                                    meta={"a": float(a), "b": float(b)}))
    return CauchyDataset(samples, int(seed), fingerprint(mesh), spec, mesh)


def generate_phantom_dataset(mesh: Mesh, k_true: CoefficientField,
                             n_samples: int, seed: int) -> CauchyDataset:
    """Zero-source Cauchy samples on a fully observed boundary."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    rng = np.random.default_rng(seed)
    ab = rng.uniform(0.0, 2.0, size=(n_samples, 2))
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    k_nodal = np.asarray(k_true(x, y), dtype=float)
    A, A_II, A_IB = assemble_system(mesh, k_nodal)
    solver = InteriorSolver(mesh, A, A_II=A_II, A_IB=A_IB)
    bb = mesh.boundary_vertices
    spec = ObservationSpec("full")
    observed = np.ones(len(bb), dtype=bool)

    samples = []
    for sid, (a, b) in enumerate(ab):
        g = np.cos(a * np.pi * x[bb]) * np.cos(b * np.pi * y[bb])
        load = np.zeros(mesh.n_vertices)
        p = solver.solve_dirichlet(g, load)
        trace = boundary_flux(mesh, A, p, load, observed=observed.copy())
        samples.append(CauchySample(sid, g, load, trace,
                                    meta={"a": float(a), "b": float(b)}))
    return CauchyDataset(samples, int(seed), fingerprint(mesh), spec, mesh)


def save_dataset(dataset: CauchyDataset, path):
    """Persist a dataset as manifest.json plus per-sample CSV files."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": _DATASET_FORMAT,
        "seed": dataset.seed,
        "n_samples": len(dataset.samples),
        "mesh_fingerprint": dataset.mesh_fingerprint,
        "observation": {
            "mode": dataset.observation.mode,
            "exclusions": [list(e) for e in dataset.observation.exclusions],
        },
    }
    (path / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    bb = dataset.mesh.boundary_vertices
    for s in dataset.samples:
        rows = ["vertex_id,g,h,m,observed"]
        for i, v in enumerate(bb):
            rows.append(f"{int(v)},{float(s.g[i])!r},{float(s.trace.values[i])!r},"
                        f"{float(s.trace.weights[i])!r},{int(s.trace.observed[i])}")
        (path / f"sample_{s.sample_id:04d}.csv").write_text("\n".join(rows) + "\n")
        rows = ["vertex_id,load"]
        rows.extend(f"{j},{float(val)!r}" for j, val in enumerate(s.load))
        (path / f"sample_{s.sample_id:04d}_load.csv").write_text("\n".join(rows) + "\n")


def load_dataset(path, mesh: Mesh) -> CauchyDataset:
    """Reload a persisted dataset; the mesh fingerprint must match."""
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    if manifest["mesh_fingerprint"] != fingerprint(mesh):
        raise ValueError("dataset was generated on a different mesh")
    spec = ObservationSpec(manifest["observation"]["mode"],
                           tuple(tuple(e) for e in manifest["observation"]["exclusions"]))
    samples = []
    for sid in range(manifest["n_samples"]):
        body = (path / f"sample_{sid:04d}.csv").read_text().strip().splitlines()[1:]
        g, h, m, obs = [], [], [], []
        for line in body:
            _, gs, hs, ms, os_ = line.split(",")
            g.append(float(gs))
            h.append(float(hs))
            m.append(float(ms))
            obs.append(bool(int(os_)))
        body = (path / f"sample_{sid:04d}_load.csv").read_text().strip().splitlines()[1:]
        load = np.asarray([float(line.split(",")[1]) for line in body])
        trace = BoundaryTrace(np.asarray(h), np.asarray(m), np.asarray(obs))
        samples.append(CauchySample(sid, np.asarray(g), load, trace))
    return CauchyDataset(samples, manifest["seed"], manifest["mesh_fingerprint"], spec, mesh)
