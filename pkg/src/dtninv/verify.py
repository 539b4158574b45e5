"""Property suites behind the ``verify`` command.

Each suite returns (name, passed, detail) triples so the CLI can print a
machine-readable line per check and exit nonzero on any failure.
"""

from __future__ import annotations

import numpy as np

from .adjoint import regularization_grad, sample_loss_grad
from .coeff import ManufacturedSolution, constant_field, manufactured_source_closed_form, sinusoid_field
from .dtn import dtn_apply, generate_dataset
from .fem import DirichletSystem, assemble_load_from_function, assemble_stiffness, error_l2, solve_dirichlet
from .mesh import ObservationSpec, unit_square_mesh
from .metrics import psnr, relative_l2, ssim
from .neural import MlpGrads, SineMlpParams, adam_init, adam_step, backward, forward, init
from .trainer import PARTIAL40

SUITES = ("fem", "adjoint", "dtn", "neural", "metrics")

# published (mse, data_range, psnr_db) triples the formula must reproduce
PSNR_TABLE = (
    (3.10e-11, 1.0, 105.09),
    (8.93e-10, 1.0, 90.49),
    (1.95e-8, 0.9, 76.18),
    (4.10e-8, 0.9, 72.95),
    (4.36e-4, 0.9, 32.69),
    (5.02e-4, 0.9, 32.08),
)


def _manufactured_error(n: int) -> float:
    mesh = unit_square_mesh(n)
    sol = ManufacturedSolution(1.0, 1.0)
    field = constant_field(1.0)
    A = assemble_stiffness(mesh, np.ones(mesh.n_vertices))
    b = assemble_load_from_function(
        mesh, lambda x, y: manufactured_source_closed_form(field, sol, x, y))
    g = sol.values(mesh.vertices[mesh.boundary_vertices, 0],
                   mesh.vertices[mesh.boundary_vertices, 1])
    p = solve_dirichlet(DirichletSystem(mesh, A, b), g)
    return error_l2(mesh, p, sol.values)


def fem_suite() -> list:
    checks = []
    errs = [_manufactured_error(n) for n in (8, 16, 32, 64)]
    rates = [float(np.log2(errs[i] / errs[i + 1])) for i in range(3)]
    ok = all(1.8 <= r <= 2.2 for r in rates)
    checks.append(("fem.l2_convergence_rate", ok,
                   "rates=" + ",".join(f"{r:.3f}" for r in rates)))

    mesh = unit_square_mesh(16)
    rng = np.random.default_rng(100)
    k = 0.2 + rng.uniform(0, 2, mesh.n_vertices)
    A = assemble_stiffness(mesh, k)
    g = rng.uniform(-1, 1, len(mesh.boundary_vertices))
    p = solve_dirichlet(DirichletSystem(mesh, A, np.zeros(mesh.n_vertices)), g)
    dev = max(float(g.min() - p.min()), float(p.max() - g.max()), 0.0)
    checks.append(("fem.discrete_maximum_principle", dev <= 1e-9, f"overshoot={dev:.2e}"))

    rows = np.asarray(assemble_stiffness(mesh, np.ones(mesh.n_vertices)).sum(axis=1)).ravel()
    dev = float(np.abs(rows).max())
    checks.append(("fem.zero_row_sums", dev <= 1e-12, f"max={dev:.2e}"))
    return checks


def adjoint_suite() -> list:
    checks = []
    mesh = unit_square_mesh(16)
    rng = np.random.default_rng(200)
    for label, spec in (("full", ObservationSpec("full")),
                        ("partial", ObservationSpec("partial", PARTIAL40))):
        ds = generate_dataset(mesh, sinusoid_field(), spec, 2, seed=17)
        worst = 0.0
        for trial in range(3):
            k = 0.5 + rng.uniform(0, 1, mesh.n_vertices)
            sample = ds.samples[trial % len(ds.samples)]
            lg = sample_loss_grad(mesh, k, sample)
            eps = 1e-5 * float(np.abs(k).max())
            for _ in range(5):
                d = rng.standard_normal(mesh.n_vertices)
                d /= np.linalg.norm(d)
                fd = (sample_loss_grad(mesh, k + eps * d, sample).loss
                      - sample_loss_grad(mesh, k - eps * d, sample).loss) / (2 * eps)
                an = float(lg.grad @ d)
                worst = max(worst, abs(fd - an) / (abs(an) + 1e-12))
        checks.append((f"adjoint.fd_match_{label}", worst <= 1e-4, f"worst_rel={worst:.2e}"))

    k = 0.5 + rng.uniform(0, 1, mesh.n_vertices)
    rg = regularization_grad(mesh, k, 0.5)
    eps = 1e-4
    d = rng.standard_normal(mesh.n_vertices)
    d /= np.linalg.norm(d)
    fd = (regularization_grad(mesh, k + eps * d, 0.5).loss
          - regularization_grad(mesh, k - eps * d, 0.5).loss) / (2 * eps)
    dev = abs(fd - float(rg.grad @ d)) / max(abs(fd), 1e-12)
    checks.append(("adjoint.regularizer_fd_match", dev <= 1e-8, f"rel={dev:.2e}"))
    return checks


def dtn_suite() -> list:
    checks = []
    mesh = unit_square_mesh(16)
    ds = generate_dataset(mesh, constant_field(1.0), ObservationSpec("full"), 8, seed=23)
    worst = 0.0
    for s in ds.samples:
        total = float(np.sum(s.trace.weights * s.trace.values))
        scale = max(float(np.abs(s.load).sum()), 1.0)
        worst = max(worst, abs(total + float(s.load.sum())) / scale)
    checks.append(("dtn.flux_conservation", worst <= 1e-12, f"worst={worst:.2e}"))

    rng = np.random.default_rng(300)
    k = 0.5 + rng.uniform(0, 1, mesh.n_vertices)
    m = mesh.boundary_weights
    nb = len(mesh.boundary_vertices)
    worst = 0.0
    for _ in range(20):
        g1, g2 = rng.standard_normal(nb), rng.standard_normal(nb)
        h1 = dtn_apply(mesh, k, g1).values
        h2 = dtn_apply(mesh, k, g2).values
        lhs = float(np.sum(m * h1 * g2))
        rhs = float(np.sum(m * g1 * h2))
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1.0))
    checks.append(("dtn.reciprocity", worst <= 1e-9, f"worst={worst:.2e}"))
    return checks


def neural_suite() -> list:
    checks = []
    rng = np.random.default_rng(400)
    params = init(31, omega0=30.0, layer_sizes=(2, 12, 10, 1), range_bounds=(0.4, 1.0))
    pts = rng.uniform(0, 1, (25, 2))
    upstream = rng.standard_normal(25)
    _, cache = forward(params, pts, return_cache=True)
    grads = backward(params, cache, upstream)
    tensors = list(params.weights) + list(params.biases)
    gtensors = list(grads.weights) + list(grads.biases)
    worst = 0.0
    for _ in range(5):
        ti = int(rng.integers(0, len(tensors)))
        arr = tensors[ti]
        idx = np.unravel_index(int(rng.integers(0, arr.size)), arr.shape)
        old = arr[idx]
        arr[idx] = old + 1e-6
        fp = float(np.sum(upstream * forward(params, pts)))
        arr[idx] = old - 1e-6
        fm = float(np.sum(upstream * forward(params, pts)))
        arr[idx] = old
        fd = (fp - fm) / 2e-6
        an = float(gtensors[ti][idx])
        worst = max(worst, abs(fd - an) / max(abs(an), 1e-3))
    checks.append(("neural.backward_fd_match", worst <= 1e-6, f"worst_rel={worst:.2e}"))

    p1 = SineMlpParams([np.array([[0.0]])], [np.array([0.0])], 1.0, None, (1, 1))
    adam_step(adam_init(p1), p1, MlpGrads([np.array([[1.0]])], [np.array([0.0])]), 1e-3)
    got = float(p1.weights[0][0, 0])
    expect = -1e-3 / (1 + 1e-8)
    checks.append(("neural.adam_first_step", abs(got - expect) < 1e-15, f"theta={got:.12e}"))

    w = np.concatenate([init(s).weights[0].ravel() for s in range(100)])
    ok = w.size >= 10_000 and float(np.abs(w).max()) <= 0.5
    checks.append(("neural.init_first_layer_bounds", ok, f"max|w|={np.abs(w).max():.4f}"))
    return checks


def metrics_suite() -> list:
    checks = []
    worst = 0.0
    for mse, rng_, expect in PSNR_TABLE:
        worst = max(worst, abs(psnr(mse, rng_) - expect))
    checks.append(("metrics.psnr_table", worst <= 0.01, f"worst_dev_db={worst:.4f}"))

    a = np.ones((24, 24))
    b = np.full((24, 24), 0.5)
    val = ssim(a, b, 1.0)
    expect = (2 * 0.5 + 1e-4) / (1.25 + 1e-4)
    checks.append(("metrics.ssim_constant_images", abs(val - expect) < 1e-9, f"ssim={val:.6f}"))
    checks.append(("metrics.ssim_identity", ssim(a, a, 1.0) == 1.0, "ssim=1"))

    mesh = unit_square_mesh(8)
    k = 1.0 + mesh.vertices[:, 0]
    ok = (relative_l2(mesh, k, k) == 0.0
          and abs(relative_l2(mesh, k, 2 * k) - 1.0) < 1e-12
          and abs(relative_l2(mesh, k, np.zeros_like(k)) - 1.0) < 1e-12)
    checks.append(("metrics.relative_l2_anchors", ok, ""))
    return checks


def run_suite(name: str) -> list:
    runners = {"fem": fem_suite, "adjoint": adjoint_suite, "dtn": dtn_suite,
               "neural": neural_suite, "metrics": metrics_suite}
    if name not in runners:
        raise KeyError(f"unknown suite {name!r}; known: {', '.join(SUITES)}")
    return runners[name]()
