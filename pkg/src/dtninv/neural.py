"""Sine-activation MLP coefficient model with hand-rolled backprop and Adam.

The network maps (x, y) to a scalar through sin(omega0*(W1 x + b1)) followed
by sin-activated hidden layers and a final affine layer; an optional tanh
transform confines the output to a prescribed (lo, hi) range.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import chain
from pathlib import Path

import numpy as np

DEFAULT_LAYERS = (2, 50, 50, 50, 1)


@dataclass
class SineMlpParams:
    weights: list
    biases: list
    omega0: float
    range_bounds: tuple | None
    layer_sizes: tuple


@dataclass
class MlpGrads:
    weights: list
    biases: list


@dataclass
class AdamState:
    m: list
    v: list
    t: int
    beta1: float
    beta2: float
    eps: float


def init(seed: int, omega0: float = 30.0, layer_sizes: tuple = DEFAULT_LAYERS,
         range_bounds: tuple | None = None) -> SineMlpParams:
    """Deterministic sinusoidal-network initialization.

    First-layer weights are uniform in [-1/fan_in, 1/fan_in]; deeper layers
    uniform in +-sqrt(6/fan_in)/omega0; biases start at zero.
    """
    if range_bounds is not None:
        lo, hi = float(range_bounds[0]), float(range_bounds[1])
        if not lo < hi:
            raise ValueError("range bounds must satisfy lo < hi")
        if lo <= 0:
            raise ValueError("range lower bound must be positive")
        range_bounds = (lo, hi)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for l in range(len(layer_sizes) - 1):
        fan_in, fan_out = layer_sizes[l], layer_sizes[l + 1]
        bound = 1.0 / fan_in if l == 0 else np.sqrt(6.0 / fan_in) / omega0
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return SineMlpParams(weights, biases, float(omega0), range_bounds, tuple(layer_sizes))


def apply_range(z, lo: float, hi: float):
    """tanh map of the raw output into (lo, hi); z = 0 lands at the midpoint."""
    return lo + (hi - lo) * 0.5 * (np.tanh(z) + 1.0)


def forward(params: SineMlpParams, points, return_cache: bool = False):
    """Evaluate the network at (n, 2) points; optionally keep the activation
    cache needed by :func:`backward`."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    nlayers = len(params.weights)
    acts = [x]
    pres = []
    a = x
    for l in range(nlayers - 1):
        s = a @ params.weights[l] + params.biases[l]
        if l == 0:
            s = params.omega0 * s
        pres.append(s)
        a = np.sin(s)
        acts.append(a)
    z = (a @ params.weights[-1] + params.biases[-1])[:, 0]
    if params.range_bounds is not None:
        out = apply_range(z, *params.range_bounds)
    else:
        out = z
    if return_cache:
        return out, (acts, pres, z)
    return out


def backward(params: SineMlpParams, cache, upstream) -> MlpGrads:
    """Exact reverse-mode gradient of sum(upstream * output) over all
    weights and biases, including the range transform when present."""
    acts, pres, z = cache
    u = np.asarray(upstream, dtype=float)
    if params.range_bounds is not None:
        lo, hi = params.range_bounds
        u = u * (hi - lo) * 0.5 * (1.0 - np.tanh(z) ** 2)
    nlayers = len(params.weights)
    gw = [None] * nlayers
    gb = [None] * nlayers
    delta = u[:, None]
    gw[-1] = acts[-1].T @ delta
    gb[-1] = delta.sum(axis=0)
    back = delta @ params.weights[-1].T
    for l in range(nlayers - 2, -1, -1):
        scale = params.omega0 if l == 0 else 1.0
        delta = back * np.cos(pres[l]) * scale
        gw[l] = acts[l].T @ delta
        gb[l] = delta.sum(axis=0)
        if l > 0:
            back = delta @ params.weights[l].T
    return MlpGrads(gw, gb)


def adam_init(params: SineMlpParams, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> AdamState:
    m = [np.zeros_like(w) for w in chain(params.weights, params.biases)]
    v = [np.zeros_like(w) for w in chain(params.weights, params.biases)]
    return AdamState(m, v, 0, beta1, beta2, eps)


def adam_step(state: AdamState, params: SineMlpParams, grads: MlpGrads, lr: float):
    """Bias-corrected Adam update, in place; rejects non-finite gradients."""
    tensors = list(chain(params.weights, params.biases))
    gs = list(chain(grads.weights, grads.biases))
    for g in gs:
        if not np.all(np.isfinite(g)):
            raise ValueError("non-finite gradient passed to the optimizer")
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for p, g, m, v in zip(tensors, gs, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state, params


def lr_schedule(preset: str, epoch: int) -> float:
    """Learning-rate schedules: "square" decays 0.001 by 0.25 every 20 epochs,
    "phantom" holds 0.001 for 50 epochs then drops to 0.0001."""
    if epoch < 0:
        raise ValueError("epoch must be nonnegative")
    if preset == "square":
        return 1e-3 * 0.25 ** (epoch // 20)
    if preset == "phantom":
        return 1e-3 if epoch < 50 else 1e-4
    raise ValueError(f"unknown learning-rate preset {preset!r}")


def save_checkpoint(params: SineMlpParams, stem, seed: int | None = None):
    """Write <stem>.json (shape header) and <stem>.csv (flat parameter list)."""
    stem = Path(stem)
    header = {
        "layer_sizes": list(params.layer_sizes),
        "omega0": params.omega0,
        "range": list(params.range_bounds) if params.range_bounds else None,
        "seed": seed,
    }
    stem.with_suffix(".json").write_text(json.dumps(header, sort_keys=True, indent=2) + "\n")
    flat = np.concatenate([a.ravel() for a in chain(params.weights, params.biases)])
    lines = ["index,value"]
    lines.extend(f"{i},{float(v)!r}" for i, v in enumerate(flat))
    stem.with_suffix(".csv").write_text("\n".join(lines) + "\n")


def load_checkpoint(stem) -> SineMlpParams:
    stem = Path(stem)
    header = json.loads(stem.with_suffix(".json").read_text())
    sizes = tuple(header["layer_sizes"])
    rng_bounds = tuple(header["range"]) if header["range"] else None
    body = stem.with_suffix(".csv").read_text().strip().splitlines()[1:]
    flat = np.asarray([float(line.split(",")[1]) for line in body])
    weights, biases = [], []
    pos = 0
    for l in range(len(sizes) - 1):
        wn = sizes[l] * sizes[l + 1]
        weights.append(flat[pos:pos + wn].reshape(sizes[l], sizes[l + 1]).copy())
        pos += wn
    for l in range(len(sizes) - 1):
        biases.append(flat[pos:pos + sizes[l + 1]].copy())
        pos += sizes[l + 1]
    return SineMlpParams(weights, biases, float(header["omega0"]), rng_bounds, sizes)
