"""Dense prediction heads with hand-written backward passes.

An MLP is a chain of dense layers, one per entry of ``output_sizes``. Every
layer but the last applies ``activation``; the last one does too only when
``activate_final`` is set. With ``use_layer_norm`` a layer normalisation
(learned gain and offset) follows the final layer.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import make_rng
from ..errors import ConfigError, ShapeError

LN_EPS = 1e-5


def _tanh(x):
    return np.tanh(x)


def _tanh_grad(y):
    return 1.0 - y * y


def _relu(x):
    return np.maximum(x, 0.0)


def _relu_grad(y):
    return (y > 0).astype(y.dtype)


def _identity(x):
    return x


def _identity_grad(y):
    return np.ones_like(y)


# derivative expressed through the activation output
ACTIVATIONS = {
    "tanh": (_tanh, _tanh_grad),
    "relu": (_relu, _relu_grad),
    "linear": (_identity, _identity_grad),
}


@dataclass(eq=False)
class MlpParams:
    weights: list  # weights[k] has shape (fan_in, fan_out)
    biases: list
    activation: str = "tanh"
    activate_final: bool = False
    use_layer_norm: bool = False
    ln_gain: np.ndarray | None = None
    ln_bias: np.ndarray | None = None
    name: str = "mlp"

    @property
    def sizes(self):
        return [w.shape[1] for w in self.weights]

    @property
    def in_size(self):
        return self.weights[0].shape[0]

    def arrays(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        if self.use_layer_norm:
            out += [self.ln_gain, self.ln_bias]
        return out

    def copy(self):
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                         self.activation, self.activate_final, self.use_layer_norm,
                         None if self.ln_gain is None else self.ln_gain.copy(),
                         None if self.ln_bias is None else self.ln_bias.copy(), self.name)


def variance_scaling(rng, fan_in, fan_out, scale=1.0):
    """Truncated normal (cut at two standard deviations), variance scale / fan_in."""
    std = np.sqrt(scale / fan_in) / 0.87962566103423978  # std of N(0,1) truncated to [-2, 2]
    w = rng.standard_normal((fan_in, fan_out))
    bad = np.abs(w) > 2.0
    while bad.any():
        w[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(w) > 2.0
    return w * std


def build_mlp(output_sizes, activation="tanh", activate_final=False, use_layer_norm=False,
              seed=0, in_size=None, name="mlp") -> MlpParams:
    if not output_sizes:
        raise ConfigError("output_sizes must not be empty")
    if activation not in ACTIVATIONS:
        raise ConfigError(f"unknown activation {activation!r}")
    if in_size is None:
        in_size = output_sizes[0]
    rng = make_rng(seed)
    weights, biases = [], []
    fan_in = in_size
    for size in output_sizes:
        if size < 1:
            raise ConfigError("layer sizes must be positive")
        weights.append(variance_scaling(rng, fan_in, size))
        biases.append(np.zeros(size))
        fan_in = size
    gain = np.ones(fan_in) if use_layer_norm else None
    bias = np.zeros(fan_in) if use_layer_norm else None
    return MlpParams(weights, biases, activation, activate_final, use_layer_norm, gain, bias, name)


@dataclass
class _MlpCache:
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    ln: tuple | None = None


def mlp_forward(p: MlpParams, x: np.ndarray, cache: bool = False):
    if x.shape[-1] != p.in_size:
        raise ShapeError(f"{p.name}: expected input width {p.in_size}, got {x.shape[-1]}")
    act, _ = ACTIVATIONS[p.activation]
    c = _MlpCache() if cache else None
    last = len(p.weights) - 1
    for k, (w, b) in enumerate(zip(p.weights, p.biases)):
        if c is not None:
            c.inputs.append(x)
        x = x @ w + b
        if k < last or p.activate_final:
            x = act(x)
        if c is not None:
            c.outputs.append(x)
    if p.use_layer_norm:
        mu = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(var + LN_EPS)
        xhat = (x - mu) * inv
        if c is not None:
            c.ln = (xhat, inv)
        x = xhat * p.ln_gain + p.ln_bias
    return (x, c) if cache else x


def mlp_backward(p: MlpParams, c: _MlpCache, gy: np.ndarray):
    """Return (gradient w.r.t. the input, gradients aligned with ``p.arrays()``)."""
    _, dact = ACTIVATIONS[p.activation]
    grads_ln = []
    if p.use_layer_norm:
        xhat, inv = c.ln
        grads_ln = [np.sum(gy * xhat, axis=0), np.sum(gy, axis=0)]
        gx = gy * p.ln_gain
        m = gx.shape[-1]
        gy = inv / m * (m * gx - gx.sum(axis=-1, keepdims=True)
                        - xhat * np.sum(gx * xhat, axis=-1, keepdims=True))
    last = len(p.weights) - 1
    gw = [None] * len(p.weights)
    gb = [None] * len(p.weights)
    for k in range(last, -1, -1):
        if k < last or p.activate_final:
            gy = gy * dact(c.outputs[k])
        gw[k] = c.inputs[k].T @ gy
        gb[k] = gy.sum(axis=0)
        gy = gy @ p.weights[k].T
    grads = []
    for w, b in zip(gw, gb):
        grads += [w, b]
    return gy, grads + grads_ln
