"""Fixed-architecture MLP value network with exact gradients.

Parameters live in one flat float64 vector. Layout is layer-major with the
weight matrix before the bias of each layer::

    [W_0 (input_dim x units), b_0, W_1 (units x units), b_1, ..., W_L (units x A), b_L]

Weight matrices are row-major with shape ``(fan_in, fan_out)`` so a layer is
``h @ W + b``. Optimizer moments and noise vectors use the same layout.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ._backend import kernels

_ACTIVATIONS = ("relu", "leaky_relu")
_MAGIC = b"DXPV"
_HEADER = struct.Struct("<4sIIIIId")


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    output_dim: int
    hidden_layers: int = 2
    hidden_units: int = 50
    activation: str = "relu"
    slope: float = 0.1

    def __post_init__(self):
        if min(self.input_dim, self.output_dim, self.hidden_units) < 1:
            raise ValueError("all layer widths must be >= 1")
        if self.hidden_layers < 1:
            raise ValueError("hidden_layers must be >= 1")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"activation must be one of {_ACTIVATIONS}")
        if self.activation == "leaky_relu" and not 0.0 < self.slope < 1.0:
            raise ValueError("leaky_relu slope must lie in (0, 1)")

    @property
    def dims(self) -> np.ndarray:
        return np.array(
            [self.input_dim] + [self.hidden_units] * self.hidden_layers + [self.output_dim],
            dtype=np.int64,
        )

    @property
    def negative_slope(self) -> float:
        return self.slope if self.activation == "leaky_relu" else 0.0

    @property
    def n_params(self) -> int:
        d = self.dims
        return int(np.sum(d[:-1] * d[1:] + d[1:]))

    def layer_slices(self):
        """(weight_slice, weight_shape, bias_slice) per layer in layout order."""
        out = []
        off = 0
        d = self.dims
        for fan_in, fan_out in zip(d[:-1], d[1:]):
            w = slice(off, off + fan_in * fan_out)
            off += fan_in * fan_out
            b = slice(off, off + fan_out)
            off += fan_out
            out.append((w, (int(fan_in), int(fan_out)), b))
        return out


def _truncated_normal(rng: np.random.Generator, size: int, std: float) -> np.ndarray:
    # resample anything beyond two standard deviations
    x = rng.standard_normal(size)
    bad = np.abs(x) > 2.0
    while bad.any():
        x[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(x) > 2.0
    return x * std


def init_params(spec: MlpSpec, rng: np.random.Generator) -> np.ndarray:
    """Truncated-normal weights with std 1/sqrt(fan_in); zero biases."""
    params = np.zeros(spec.n_params)
    for w, (fan_in, _), _ in spec.layer_slices():
        params[w] = _truncated_normal(rng, w.stop - w.start, 1.0 / np.sqrt(fan_in))
    return params


def _check_params(spec: MlpSpec, params: np.ndarray) -> np.ndarray:
    params = np.ascontiguousarray(params, dtype=np.float64)
    if params.shape != (spec.n_params,):
        raise ValueError(f"expected {spec.n_params} parameters, got shape {params.shape}")
    return params


def _as_table(spec: MlpSpec, states) -> np.ndarray:
    states = np.ascontiguousarray(states, dtype=np.float64)
    if states.ndim == 1:
        states = states[None, :]
    if states.ndim != 2 or states.shape[1] != spec.input_dim:
        raise ValueError(f"states must have trailing dimension {spec.input_dim}")
    return states


def forward_rows(spec: MlpSpec, params: np.ndarray, table: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Q-values for ``table[rows]``; no input validation (hot path)."""
    return kernels.mlp_forward(params, spec.dims, spec.negative_slope, table, rows)


def forward(spec: MlpSpec, params: np.ndarray, state) -> np.ndarray:
    """Q-values for one state (shape ``(A,)``) or a batch of states (shape ``(B, A)``)."""
    params = _check_params(spec, params)
    single = np.ndim(state) == 1
    table = _as_table(spec, state)
    q = forward_rows(spec, params, table, np.arange(len(table), dtype=np.int64))
    return q[0] if single else q


def loss_gradient(
    spec: MlpSpec,
    params: np.ndarray,
    states,
    actions,
    targets,
    lam: float = 0.0,
    dataset_size: int = 1,
):
    """Loss and gradient of ``mean_n (Q(s_n)[a_n] - y_n)^2 + lam * |params|^2 / dataset_size``.

    Targets are constants (semi-gradient), so bootstrap values must already be
    folded into ``targets``.
    """
    params = _check_params(spec, params)
    table = _as_table(spec, states)
    actions = np.ascontiguousarray(actions, dtype=np.int64)
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    if not (len(actions) == len(targets) == len(table)) or len(table) == 0:
        raise ValueError("states, actions and targets must have the same nonzero length")
    if actions.min() < 0 or actions.max() >= spec.output_dim:
        raise ValueError("action index out of range")
    if dataset_size < 1:
        raise ValueError("dataset_size must be positive")
    grad = np.empty_like(params)
    rows = np.arange(len(table), dtype=np.int64)
    loss = kernels.mlp_td_grad(
        params, spec.dims, spec.negative_slope, table, rows, actions, targets,
        lam / dataset_size, grad,
    )
    return float(loss), grad


def dumps(spec: MlpSpec, *vectors: np.ndarray) -> bytes:
    """Serialize one or more same-layout vectors (params, moments, ...) with a spec header."""
    act = _ACTIVATIONS.index(spec.activation)
    head = _HEADER.pack(
        _MAGIC, spec.input_dim, spec.output_dim, spec.hidden_layers,
        spec.hidden_units, act | (len(vectors) << 8), spec.slope,
    )
    body = b"".join(_check_params(spec, v).astype("<f8").tobytes() for v in vectors)
    return head + body


def loads(data: bytes):
    """Inverse of :func:`dumps`; returns ``(spec, [vectors...])``."""
    if len(data) < _HEADER.size or data[:4] != _MAGIC:
        raise ValueError("not a parameter vector file")
    magic, i, o, hl, hu, packed, slope = _HEADER.unpack_from(data)
    if (len(data) - _HEADER.size) % 8 or magic != _MAGIC:
        raise ValueError("not a parameter vector file")
    spec = MlpSpec(i, o, hl, hu, _ACTIVATIONS[packed & 0xFF], slope)
    count = packed >> 8
    flat = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).astype(np.float64)
    if flat.size != count * spec.n_params:
        raise ValueError("truncated parameter file")
    return spec, [flat[k * spec.n_params:(k + 1) * spec.n_params].copy() for k in range(count)]
