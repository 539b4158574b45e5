"""Self-supervised training loop.

Each step evaluates the network at every mesh vertex, clamps the field at the
positivity floor, runs one forward solve plus one adjoint solve for the
sample's flux mismatch, chains the coefficient gradient through the network
and applies one Adam update (batch size is fixed at 1). The whole loop is
deterministic for fixed seeds.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adjoint import regularization_grad, sample_loss_grad
from .coeff import (CoefficientField, constant_field, disk_inclusion_field,
                    phantom_one, phantom_two, sinusoid_field)
from .dtn import CauchyDataset, generate_dataset, generate_phantom_dataset
from .fem import SolverError, unit_stiffness
from .mesh import Mesh, ObservationSpec, disk_mesh, export_vtk, unit_square_mesh
from .metrics import relative_l2
from .neural import (adam_init, adam_step, apply_range, backward, forward,
                     init, lr_schedule, save_checkpoint)

# Hidden-boundary intervals used by the partially observed experiments:
# left y in [2/5, 4/5], right y in [1/5, 3/5], bottom x in [0.3, 0.7],
# top x in [0.5, 0.9] -- about 40% of the square's boundary.
PARTIAL40 = (("left", 0.4, 0.8), ("right", 0.2, 0.6),
             ("bottom", 0.3, 0.7), ("top", 0.5, 0.9))


class TrainingError(RuntimeError):
    """Training aborted on a solver failure or non-finite loss."""


@dataclass
class TrainConfig:
    mesh_kind: str = "unit_square"
    mesh_n: int = 32
    disk_center: tuple = (0.5, 0.5)
    disk_radius: float = 0.5
    disk_target_h: float = 0.0112
    coeff: str = "constant"
    coeff_value: float = 1.0
    obs_mode: str = "full"
    exclusions: tuple = ()
    n_samples: int = 256
    zero_source: bool = False
    refine_data: bool = False
    epochs: int = 40
    lr_preset: str = "square"
    lr: float | None = None
    reg_lambda: float = 0.0
    range_bounds: tuple | None = None
    range_mode: str = "during"
    floor: float = 1e-6
    omega0: float = 30.0
    hidden: tuple = (50, 50, 50)
    seed_data: int = 101
    seed_init: int = 202
    seed_shuffle: int = 303

    def __post_init__(self):
        if self.epochs < 1 or self.n_samples < 1:
            raise ValueError("epochs and n_samples must be at least 1")
        if self.reg_lambda < 0:
            raise ValueError("regularization weight must be nonnegative")
        if self.range_mode not in ("during", "after"):
            raise ValueError("range_mode must be 'during' or 'after'")


@dataclass
class TrainResult:
    config: TrainConfig
    mesh: Mesh
    params: object
    k_exact: np.ndarray
    k_recon: np.ndarray
    history: list          # rows (epoch, mean_loss, rel_error, lr, clamps)
    epoch_seconds: list
    grad_energy: float
    final_loss: float = field(init=False)

    def __post_init__(self):
        self.final_loss = self.history[-1][1] if self.history else float("nan")


def build_mesh(config: TrainConfig) -> Mesh:
    if config.mesh_kind == "unit_square":
        return unit_square_mesh(config.mesh_n)
    if config.mesh_kind == "disk":
        return disk_mesh(config.disk_center, config.disk_radius, config.disk_target_h)
    raise ValueError(f"unknown mesh kind {config.mesh_kind!r}")


def build_coefficient(config: TrainConfig) -> CoefficientField:
    kind = config.coeff
    if kind == "constant":
        return constant_field(config.coeff_value)
    if kind == "sinusoid":
        return sinusoid_field()
    if kind == "disk_inclusion":
        return disk_inclusion_field()
    if kind == "phantom1":
        return phantom_one()
    if kind == "phantom2":
        return phantom_two()
    raise ValueError(f"unknown coefficient kind {kind!r}")


def build_observation(config: TrainConfig) -> ObservationSpec:
    return ObservationSpec(config.obs_mode, config.exclusions)


def build_dataset(config: TrainConfig, mesh: Mesh,
                  truth: CoefficientField) -> CauchyDataset:
    if config.zero_source:
        return generate_phantom_dataset(mesh, truth, config.n_samples, config.seed_data)
    return generate_dataset(mesh, truth, build_observation(config),
                            config.n_samples, config.seed_data,
                            refine=config.refine_data)


def reconstruct_field(params, mesh: Mesh) -> np.ndarray:
    """Network values at every vertex; the range transform is part of the
    parameters when configured."""
    return forward(params, mesh.vertices)


def _final_field(config: TrainConfig, params, mesh: Mesh) -> np.ndarray:
    values = reconstruct_field(params, mesh)
    if config.range_mode == "after" and config.range_bounds is not None:
        values = apply_range(values, *config.range_bounds)
    return values


def train(config: TrainConfig, checkpoint_dir=None) -> TrainResult:
    """Run the full loop and return the reconstruction with its history."""
    mesh = build_mesh(config)
    truth = build_coefficient(config)
    dataset = build_dataset(config, mesh, truth)
    k_exact = np.asarray(truth(mesh.vertices[:, 0], mesh.vertices[:, 1]), dtype=float)

    train_range = config.range_bounds if config.range_mode == "during" else None
    params = init(config.seed_init, config.omega0,
                  (2, *config.hidden, 1), train_range)
    state = adam_init(params)
    shuffle_rng = np.random.default_rng(config.seed_shuffle)
    verts = mesh.vertices
    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    history = []
    epoch_seconds = []
    n = len(dataset.samples)
    for epoch in range(config.epochs):
        tic = time.perf_counter()
        lr = config.lr if config.lr is not None else lr_schedule(config.lr_preset, epoch)
        order = shuffle_rng.permutation(n)
        losses = np.empty(n)
        clamps = 0
        for pos, si in enumerate(order):
            k_raw, cache = forward(params, verts, return_cache=True)
            clamped = k_raw < config.floor
            clamps += int(clamped.sum())
            k_fem = np.where(clamped, config.floor, k_raw)
            try:
                lg = sample_loss_grad(mesh, k_fem, dataset.samples[si])
            except (SolverError, FloatingPointError) as exc:
                raise TrainingError(
                    f"solver failure at epoch {epoch}, sample {si}: {exc}") from exc
            if not np.isfinite(lg.loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, sample {si}")
            grad_k = lg.grad
            if config.reg_lambda > 0:
                grad_k = grad_k + regularization_grad(mesh, k_fem, config.reg_lambda).grad
            upstream = np.where(clamped, 0.0, grad_k)
            adam_step(state, params, backward(params, cache, upstream), lr)
            losses[pos] = lg.loss
        k_rec = _final_field(config, params, mesh)
        rel = relative_l2(mesh, k_exact, k_rec)
        history.append((epoch, float(losses.mean()), rel, lr, clamps))
        epoch_seconds.append(time.perf_counter() - tic)
        if checkpoint_dir is not None and (epoch + 1) % 10 == 0:
            save_checkpoint(params, checkpoint_dir / f"checkpoint_{epoch + 1:04d}",
                            seed=config.seed_init)

    k_rec = _final_field(config, params, mesh)
    grad_energy = float(k_rec @ (unit_stiffness(mesh) @ k_rec))
    return TrainResult(config, mesh, params, k_exact, k_rec, history,
                       epoch_seconds, grad_energy)


def write_history(result: TrainResult, path):
    """history.csv rows: epoch,mean_loss,rel_error,lr,clamps,seconds.

    The seconds column is measured wall-clock and is the only field excluded
    from the bit-reproducibility contract.
    """
    lines = ["epoch,mean_loss,rel_error,lr,clamps,seconds"]
    for (epoch, loss, rel, lr, clamps), sec in zip(result.history, result.epoch_seconds):
        lines.append(f"{epoch},{float(loss)!r},{float(rel)!r},{float(lr)!r},{clamps},{sec:.3f}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_fields(result: TrainResult, csv_path, vtk_path=None):
    """Final field dump: CSV x,y,k_exact,k_recon,abs_err plus legacy VTK."""
    mesh = result.mesh
    err = np.abs(result.k_exact - result.k_recon)
    lines = ["x,y,k_exact,k_recon,abs_err"]
    for (x, y), ke, kr, ae in zip(mesh.vertices, result.k_exact, result.k_recon, err):
        lines.append(f"{float(x)!r},{float(y)!r},{float(ke)!r},{float(kr)!r},{float(ae)!r}")
    Path(csv_path).write_text("\n".join(lines) + "\n")
    if vtk_path is not None:
        export_vtk(mesh, vtk_path, point_data={
            "k_exact": result.k_exact, "k_recon": result.k_recon, "abs_err": err})


def history_windows(history, width: int = 10) -> list:
    """Block means of the per-epoch loss (the plotting convention)."""
    losses = [row[1] for row in history]
    return [float(np.mean(losses[i:i + width])) for i in range(0, len(losses), width)]
