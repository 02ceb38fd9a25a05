"""Minimal dense feed-forward networks with exact reverse-mode gradients.

Everything is float64 numpy: the networks here are tiny, and full precision
keeps finite-difference gradient checks tight. A forward pass returns a tape;
backward consumes the tape and returns exact parameter and input gradients.
Parameter updates go through an adaptive-moment optimizer, and target
networks are synchronized by hard copy.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1

ACTIVATIONS = ("relu", "tanh", "identity")


class CheckpointError(ValueError):
    """Raised when a checkpoint file fails shape or format validation."""


@dataclass(frozen=True)
class LayerSpec:
    in_width: int
    out_width: int
    activation: str = "relu"

    def __post_init__(self):
        if self.in_width <= 0 or self.out_width <= 0:
            raise ValueError(f"layer widths must be positive, got {self}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}; choose from {ACTIVATIONS}")


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return z


def _activate_grad(name: str, z: np.ndarray, h: np.ndarray) -> np.ndarray:
    """d activation / d z evaluated at preactivation z (h is the activation output)."""
    if name == "relu":
        return np.where(z > 0.0, 1.0, 0.0)
    if name == "tanh":
        return 1.0 - h * h
    return np.ones_like(z)


@dataclass
class Tape:
    """Forward-pass record consumed by backward.

    Invalidated whenever the owning network's parameters change, so gradients
    can never silently mix parameter versions.
    """

    net: "DenseNet"
    version: int
    inputs: list[np.ndarray]   # input to each layer (first entry is the net input)
    preacts: list[np.ndarray]
    outputs: np.ndarray
    batched: bool


class DenseNet:
    """Chain of dense layers; weights (out, in) uniform fan-in initialized."""

    def __init__(self, specs: list[LayerSpec], rng: np.random.Generator | None = None,
                 init: str = "fan_in"):
        if not specs:
            raise ValueError("need at least one layer")
        for a, b in zip(specs, specs[1:]):
            if a.out_width != b.in_width:
                raise ValueError(f"layer widths do not chain: {a} -> {b}")
        self.specs = list(specs)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        self._version = 0
        if init == "zeros":
            for s in specs:
                self.weights.append(np.zeros((s.out_width, s.in_width)))
                self.biases.append(np.zeros(s.out_width))
        elif init == "fan_in":
            rng = rng if rng is not None else np.random.default_rng()
            for s in specs:
                bound = 1.0 / math.sqrt(s.in_width)
                self.weights.append(rng.uniform(-bound, bound, size=(s.out_width, s.in_width)))
                self.biases.append(rng.uniform(-bound, bound, size=s.out_width))
        else:
            raise ValueError(f"unknown init {init!r}")

    @property
    def in_width(self) -> int:
        return self.specs[0].in_width

    @property
    def out_width(self) -> int:
        return self.specs[-1].out_width

    def parameters(self) -> list[np.ndarray]:
        """Flat list [W0, b0, W1, b1, ...]; arrays are the live parameters."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def set_parameters(self, params: list[np.ndarray]) -> None:
        expected = self.parameters()
        if len(params) != len(expected):
            raise ValueError(f"expected {len(expected)} parameter arrays, got {len(params)}")
        for dst, src in zip(expected, params):
            if dst.shape != np.shape(src):
                raise ValueError(f"parameter shape mismatch: {dst.shape} vs {np.shape(src)}")
            dst[...] = src
        self._version += 1

    def mark_updated(self) -> None:
        """Invalidate outstanding tapes after in-place parameter mutation."""
        self._version += 1


def forward(net: DenseNet, x: np.ndarray) -> tuple[np.ndarray, Tape]:
    """Run the network on a vector (width,) or batch (batch, width).

    Returns the output plus a tape sufficient for an exact backward pass.
    """
    x = np.asarray(x, dtype=float)
    batched = x.ndim == 2
    if not batched and x.ndim != 1:
        raise ValueError(f"input must be 1-D or 2-D, got shape {x.shape}")
    if x.shape[-1] != net.in_width:
        raise ValueError(f"input width {x.shape[-1]} does not match net input {net.in_width}")

    inputs, preacts = [], []
    h = x
    for spec, w, b in zip(net.specs, net.weights, net.biases):
        inputs.append(h)
        z = h @ w.T + b
        h = _activate(spec.activation, z)
        preacts.append(z)
    return h, Tape(net=net, version=net._version, inputs=inputs, preacts=preacts,
                   outputs=h, batched=batched)


def backward(tape: Tape, output_grad: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Exact gradients of sum(output * output_grad) w.r.t. parameters and input.

    For batched tapes the parameter gradients accumulate over the batch; scale
    output_grad by 1/batch for means. Rejects tapes whose network has been
    updated since the forward pass.
    """
    net = tape.net
    if tape.version != net._version:
        raise ValueError("stale tape: network parameters changed since forward")
    g = np.asarray(output_grad, dtype=float)
    if g.shape != tape.outputs.shape:
        raise ValueError(f"output_grad shape {g.shape} does not match output {tape.outputs.shape}")

    grads: list[np.ndarray] = [None] * (2 * len(net.specs))
    h_out = tape.outputs
    for li in range(len(net.specs) - 1, -1, -1):
        spec = net.specs[li]
        z = tape.preacts[li]
        h_in = tape.inputs[li]
        dz = g * _activate_grad(spec.activation, z, h_out)
        if tape.batched:
            grads[2 * li] = dz.T @ h_in
            grads[2 * li + 1] = dz.sum(axis=0)
        else:
            grads[2 * li] = np.outer(dz, h_in)
            grads[2 * li + 1] = dz
        g = dz @ net.weights[li]
        h_out = h_in
    return grads, g


@dataclass
class OptState:
    """Adaptive-moment optimizer state for one parameter list."""

    first_moment: list[np.ndarray]
    second_moment: list[np.ndarray]
    step_count: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_stability: float = 1e-8

    @classmethod
    def for_params(cls, params: list[np.ndarray], learning_rate: float = 1e-3,
                   **kwargs) -> "OptState":
        return cls(
            first_moment=[np.zeros_like(p) for p in params],
            second_moment=[np.zeros_like(p) for p in params],
            learning_rate=learning_rate,
            **kwargs,
        )


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], opt: OptState) -> bool:
    """Apply one bias-corrected adaptive-moment step in place.

    Returns False (and leaves parameters, moments and step count untouched)
    if any gradient is non-finite.
    """
    if len(params) != len(grads):
        raise ValueError(f"got {len(grads)} gradients for {len(params)} parameters")
    for p, g in zip(params, grads):
        if p.shape != np.shape(g):
            raise ValueError(f"gradient shape {np.shape(g)} does not match parameter {p.shape}")
    if not all(np.all(np.isfinite(g)) for g in grads):
        log.warning("non-finite gradients; optimizer update skipped")
        return False

    opt.step_count += 1
    t = opt.step_count
    bc1 = 1.0 - opt.beta1**t
    bc2 = 1.0 - opt.beta2**t
    for p, g, m, v in zip(params, grads, opt.first_moment, opt.second_moment):
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * g * g
        p -= opt.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + opt.eps_stability)
    return True


def optimizer_update(net: DenseNet, grads: list[np.ndarray], opt: OptState) -> DenseNet:
    """One optimizer step on a whole network, invalidating outstanding tapes."""
    if adam_step(net.parameters(), grads, opt):
        net.mark_updated()
    return net


def sync_target(net: DenseNet, target: DenseNet) -> DenseNet:
    """Hard-copy all parameters of net into target (architectures must match)."""
    if net.specs != target.specs:
        raise ValueError(f"architecture mismatch: {net.specs} vs {target.specs}")
    for dst, src in zip(target.parameters(), net.parameters()):
        dst[...] = src
    target.mark_updated()
    return target


def net_to_dict(net: DenseNet) -> dict:
    return {
        "layers": [
            {"in_width": s.in_width, "out_width": s.out_width, "activation": s.activation}
            for s in net.specs
        ],
        "params": [p.ravel().tolist() for p in net.parameters()],
    }


def net_from_dict(data: dict) -> DenseNet:
    try:
        specs = [LayerSpec(d["in_width"], d["out_width"], d["activation"])
                 for d in data["layers"]]
        flat = data["params"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed network record: {exc}") from None
    net = DenseNet(specs, init="zeros")
    params = net.parameters()
    if len(flat) != len(params):
        raise CheckpointError(f"expected {len(params)} parameter arrays, got {len(flat)}")
    for p, values in zip(params, flat):
        arr = np.asarray(values, dtype=float)
        if arr.size != p.size:
            raise CheckpointError(f"parameter size mismatch: file {arr.size} vs net {p.size}")
        p[...] = arr.reshape(p.shape)
    net.mark_updated()
    return net


def save_checkpoint(path, payload: dict) -> None:
    """Write a versioned JSON checkpoint. float64 values round-trip exactly."""
    payload = dict(payload)
    payload["format_version"] = CHECKPOINT_FORMAT_VERSION
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_checkpoint(path) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    if data.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported format_version {data.get('format_version')!r}"
        )
    return data
