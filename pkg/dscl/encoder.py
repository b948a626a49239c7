"""Small numpy encoders with hand-written backward passes, plus optimizers."""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import ConfigError, DimensionMismatch
from .numerics import EmbeddingBatch, SeededRng, normalize_rows


class EncoderKind(str, Enum):
    LINEAR = "linear"
    MLP2 = "mlp2"


@dataclass(frozen=True)
class EncoderSpec:
    """Encoder architecture. ``hidden_dim`` is used by ``mlp2`` only (tanh layer)."""

    input_dim: int
    output_dim: int
    init_seed: int
    kind: EncoderKind = EncoderKind.MLP2
    hidden_dim: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", EncoderKind(self.kind))
        if self.input_dim < 1 or self.output_dim < 2:
            raise ConfigError("need input_dim >= 1 and output_dim >= 2")
        if self.kind is EncoderKind.MLP2 and (self.hidden_dim or 0) < 1:
            raise ConfigError("mlp2 encoder needs hidden_dim >= 1")

    def with_seed_offset(self, offset):
        return EncoderSpec(
            self.input_dim, self.output_dim, self.init_seed + offset, self.kind, self.hidden_dim
        )


def _init_weight(gen, fan_in, fan_out):
    return gen.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)


class Encoder:
    """Maps raw inputs to unit-norm embeddings.

    ``forward`` returns the embeddings and a cache for ``backward``, which turns
    a gradient with respect to the embeddings into parameter gradients.
    """

    def __init__(self, spec, params=None):
        self.spec = spec
        self.params = params if params is not None else self._initial_params()

    def _initial_params(self):
        gen = SeededRng(self.spec.init_seed).generator
        if self.spec.kind is EncoderKind.LINEAR:
            return {
                "W": _init_weight(gen, self.spec.input_dim, self.spec.output_dim),
                "b": np.zeros(self.spec.output_dim),
            }
        return {
            "W1": _init_weight(gen, self.spec.input_dim, self.spec.hidden_dim),
            "b1": np.zeros(self.spec.hidden_dim),
            "W2": _init_weight(gen, self.spec.hidden_dim, self.spec.output_dim),
            "b2": np.zeros(self.spec.output_dim),
        }

    def copy(self):
        return Encoder(self.spec, {k: v.copy() for k, v in self.params.items()})

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.spec.input_dim:
            raise DimensionMismatch(
                f"encoder expects (n, {self.spec.input_dim}) inputs, got {x.shape}"
            )
        p = self.params
        if self.spec.kind is EncoderKind.LINEAR:
            hidden = None
            out = x @ p["W"] + p["b"]
        else:
            hidden = np.tanh(x @ p["W1"] + p["b1"])
            out = hidden @ p["W2"] + p["b2"]
        norms = np.linalg.norm(out, axis=1, keepdims=True)
        z = normalize_rows(out)
        return z, (x, hidden, z, norms)

    def backward(self, cache, grad_z):
        x, hidden, z, norms = cache
        # through z = out / |out|
        radial = np.sum(grad_z * z, axis=1, keepdims=True)
        grad_out = (grad_z - radial * z) / norms
        if self.spec.kind is EncoderKind.LINEAR:
            return {"W": x.T @ grad_out, "b": grad_out.sum(axis=0)}
        grad_hidden = (grad_out @ self.params["W2"].T) * (1.0 - hidden**2)
        return {
            "W1": x.T @ grad_hidden,
            "b1": grad_hidden.sum(axis=0),
            "W2": hidden.T @ grad_out,
            "b2": grad_out.sum(axis=0),
        }

    def embed(self, x, temperature=1.0):
        return EmbeddingBatch(self.forward(x)[0], temperature)

    def to_dict(self):
        return {name: value.tolist() for name, value in self.params.items()}


class OptimizerKind(str, Enum):
    SGD = "sgd"
    ADAM = "adam"


@dataclass(frozen=True)
class OptimizerConfig:
    kind: OptimizerKind = OptimizerKind.ADAM
    lr: float = 1e-2
    momentum: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "kind", OptimizerKind(self.kind))
        # lr == 0 is allowed: it freezes the encoder
        if self.lr < 0:
            raise ConfigError(f"lr must be >= 0, got {self.lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must lie in [0, 1), got {self.momentum}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("adam betas must lie in [0, 1)")
        if not self.eps > 0:
            raise ConfigError("eps must be positive")

    def build(self):
        if self.kind is OptimizerKind.SGD:
            return Sgd(self.lr, self.momentum)
        return Adam(self.lr, self.beta1, self.beta2, self.eps)


class Sgd:
    def __init__(self, lr, momentum=0.0):
        self.lr = lr
        self.momentum = momentum
        self.velocity = {}

    def step(self, params, grads):
        for name, grad in grads.items():
            v = self.momentum * self.velocity.get(name, 0.0) + grad
            self.velocity[name] = v
            params[name] -= self.lr * v


class Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params, grads):
        self.t += 1
        for name, grad in grads.items():
            m = self.beta1 * self.m.get(name, 0.0) + (1.0 - self.beta1) * grad
            v = self.beta2 * self.v.get(name, 0.0) + (1.0 - self.beta2) * grad**2
            self.m[name], self.v[name] = m, v
            m_hat = m / (1.0 - self.beta1**self.t)
            v_hat = v / (1.0 - self.beta2**self.t)
            params[name] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
