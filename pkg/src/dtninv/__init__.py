"""Reconstruction of elliptic PDE coefficients from boundary Cauchy data."""

__version__ = "0.1.0"

from .adjoint import LossGradient, dataset_loss, regularization_grad, sample_loss_grad
from .coeff import (CoefficientField, ManufacturedSolution, constant_field,
                    disk_inclusion_field, eval_constant, eval_disk_inclusion,
                    eval_sinusoid, make_phantom, manufactured_source_closed_form,
                    phantom_one, phantom_two, sinusoid_field)
from .dtn import (BoundaryTrace, CauchyDataset, CauchySample, boundary_flux,
                  dtn_apply, generate_dataset, generate_phantom_dataset,
                  load_dataset, save_dataset)
from .fem import (DirichletSystem, InteriorSolver, SolverError,
                  assemble_load_from_function, assemble_stiffness, error_l2,
                  mass_matrix, solve_dirichlet, unit_stiffness)
from .mesh import (BoundaryMask, Mesh, MeshError, ObservationSpec, disk_mesh,
                   export_vertex_csv, export_vtk, fingerprint, mark_boundary,
                   unit_square_mesh)
from .metrics import MetricsReport, full_report, psnr, rasterize, relative_l2, ssim
from .neural import (AdamState, SineMlpParams, adam_init, adam_step, apply_range,
                     backward, forward, init, load_checkpoint, lr_schedule,
                     save_checkpoint)
from .presets import preset_config, preset_names
from .trainer import (PARTIAL40, TrainConfig, TrainResult, TrainingError,
                      reconstruct_field, train)
