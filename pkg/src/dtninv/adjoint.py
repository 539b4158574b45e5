"""Boundary-flux mismatch loss and its exact gradient in the nodal coefficient.

For the discrete chain k -> A(k) -> p(k) -> h(k) the masked mismatch

    L(k) = sum_{i observed} m_i (h_i - h~_i(k))^2

is differentiated by one extra interior solve. With w carrying 2*(h~ - h) on
the observed boundary (zero elsewhere) and z solving A_II z_I = (A w)_I, the
coefficient enters only through A, so

    dL/dk_v = (w - z)^T (dA/dk_v) p = sum_{T owning v} (w - z)|_T^T S_T p|_T / 3

where S_T is the element's unit-coefficient stiffness (the 1/3 comes from the
vertex-mean coefficient rule). The reduced stiffness is symmetric, so the
adjoint solve reuses the forward factorization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dtn import CauchyDataset, CauchySample, boundary_flux
from .fem import (InteriorSolver, assemble_stiffness, assemble_system,
                  element_unit_stiffness, interior_vertices, unit_stiffness)
from .mesh import Mesh


@dataclass
class LossGradient:
    loss: float
    grad: np.ndarray


def _forward_mismatch(mesh, A, solver, k, sample):
    p = solver.solve_dirichlet(sample.g, sample.load)
    trace = boundary_flux(mesh, A, p, sample.load, observed=sample.trace.observed)
    obs = sample.trace.observed
    m = sample.trace.weights
    d = np.zeros(len(obs))
    d[obs] = trace.values[obs] - sample.trace.values[obs]
    loss = float(np.sum(m[obs] * d[obs] ** 2))
    return p, d, loss


def sample_loss_grad(mesh: Mesh, k: np.ndarray, sample: CauchySample) -> LossGradient:
    """Masked squared-flux mismatch of one sample and its gradient wrt k.

    Costs one factorization, one forward and one adjoint interior solve.
    """
    A, A_II, A_IB = assemble_system(mesh, k)
    solver = InteriorSolver(mesh, A, A_II=A_II, A_IB=A_IB)
    p, d, loss = _forward_mismatch(mesh, A, solver, k, sample)

    # dL/dr on the boundary; the sample's loss weights cancel against the
    # flux-recovery weights only when they coincide, so keep the ratio.
    w = np.zeros(mesh.n_vertices)
    w[mesh.boundary_vertices] = 2.0 * d * (sample.trace.weights / mesh.boundary_weights)
    ii = interior_vertices(mesh)
    z = np.zeros(mesh.n_vertices)
    z[ii] = solver.solve_interior((A @ w)[ii])

    t = mesh.triangles
    wz = w - z
    s_t = np.einsum("tij,ti,tj->t", element_unit_stiffness(mesh), wz[t], p[t])
    grad = np.bincount(t.ravel(), weights=np.repeat(s_t / 3.0, 3),
                       minlength=mesh.n_vertices)
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite coefficient gradient")
    return LossGradient(loss, grad)


def sample_loss(mesh: Mesh, k: np.ndarray, sample: CauchySample,
                A=None, solver: InteriorSolver | None = None) -> float:
    """Mismatch loss only (one interior solve); A and solver may be reused."""
    if A is None:
        A = assemble_stiffness(mesh, k)
    if solver is None:
        solver = InteriorSolver(mesh, A)
    return _forward_mismatch(mesh, A, solver, k, sample)[2]


def dataset_loss(mesh: Mesh, k: np.ndarray, dataset: CauchyDataset) -> float:
    """Sum of per-sample losses; reporting only, training consumes single samples.

    fsum keeps the total exactly invariant under sample reordering.
    """
    if not dataset.samples:
        return 0.0
    A, A_II, A_IB = assemble_system(mesh, k)
    solver = InteriorSolver(mesh, A, A_II=A_II, A_IB=A_IB)
    return math.fsum(sample_loss(mesh, k, s, A=A, solver=solver) for s in dataset.samples)


def regularization_grad(mesh: Mesh, k: np.ndarray, lam: float) -> LossGradient:
    """Gradient-energy penalty lam * ||grad k_h||^2 with exact P1 value lam * k^T A1 k."""
    if lam < 0:
        raise ValueError("regularization weight must be nonnegative")
    A1k = unit_stiffness(mesh) @ np.asarray(k, dtype=float)
    return LossGradient(float(lam * (k @ A1k)), 2.0 * lam * A1k)
