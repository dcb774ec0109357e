"""Network building blocks: dense stacks, the per-user attention encoder,
Gaussian policy heads with bounded-action squashing, and Adam.

The encoder follows the fixed-size observation scheme: one scaled
dot-product attention slot per potential user, each slot with its own
query/key/value projections, inactive slots fed all-zero inputs, and the
slot outputs concatenated in slot order so the result has the same width no
matter how many users are active.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import (
    LOG_2PI, Tensor, as_tensor, clip, concat, parameter, slot_matmul, softmax,
    softplus,
)

__all__ = [
    "Dense", "MLP", "scaled_dot_attention", "MhaEncoderSpec", "MhaEncoder",
    "GaussianHead", "adam_step", "Adam",
]


class Dense:
    """Affine layer ``x @ W + b`` with fan-in scaled Gaussian init."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator,
                 scale: float = 1.0):
        self.w = parameter(rng.normal(0.0, 1.0, (n_in, n_out))
                           * (scale / math.sqrt(n_in)))
        self.b = parameter(np.zeros(n_out))

    def __call__(self, x: Tensor) -> Tensor:
        return as_tensor(x) @ self.w + self.b

    def parameters(self) -> list[Tensor]:
        return [self.w, self.b]


class MLP:
    """Dense stack with tanh hidden activations and a linear output layer."""

    def __init__(self, sizes: list[int], rng: np.random.Generator,
                 out_scale: float = 1.0):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.layers = [
            Dense(sizes[i], sizes[i + 1], rng,
                  scale=out_scale if i == len(sizes) - 2 else 1.0)
            for i in range(len(sizes) - 1)
        ]

    def __call__(self, x: Tensor) -> Tensor:
        h = as_tensor(x)
        for layer in self.layers[:-1]:
            h = layer(h).tanh()
        return self.layers[-1](h)

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.parameters()]


def scaled_dot_attention(q, k, v, d: float) -> Tensor:
    """softmax(Q K^T / sqrt(d)) V with rows of the softmax summing to one.

    ``q`` is (n_q, d), ``k`` and ``v`` are (n_k, d) and (n_k, d_v).
    """
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    if q.shape[-1] != k.shape[-1] or k.shape[0] != v.shape[0]:
        raise ValueError(
            f"non-conformable attention shapes {q.shape}, {k.shape}, {v.shape}"
        )
    scores = (q @ k.T) * (1.0 / math.sqrt(d))
    return softmax(scores, axis=-1) @ v


@dataclass(frozen=True)
class MhaEncoderSpec:
    """Sizes of the fixed-width set encoder."""

    max_users: int
    d_u: int            # per-user input feature width
    att_dim: int = 16   # per-slot attention output width

    @property
    def output_dim(self) -> int:
        return self.max_users * self.att_dim

    def validate_active(self, n_active: int) -> None:
        if n_active > self.max_users:
            raise ValueError(
                f"{n_active} active users exceed the {self.max_users} slots"
            )


class MhaEncoder:
    """Per-user attention slots concatenated into one fixed-size vector.

    Each slot owns projection matrices (no biases, so an all-zero inactive
    slot contributes an exactly-zero block to the output).
    """

    def __init__(self, spec: MhaEncoderSpec, rng: np.random.Generator):
        self.spec = spec
        shape = (spec.max_users, spec.d_u, spec.att_dim)
        scale = 1.0 / math.sqrt(spec.d_u)
        self.wq = parameter(rng.normal(0.0, scale, shape))
        self.wk = parameter(rng.normal(0.0, scale, shape))
        self.wv = parameter(rng.normal(0.0, scale, shape))

    def encode(self, member_states) -> Tensor:
        """(B, max_users, d_u) padded user states -> (B, output_dim)."""
        x = as_tensor(member_states)
        if x.ndim == 2:
            x = x.reshape(1, *x.shape)
        if x.shape[1] != self.spec.max_users or x.shape[2] != self.spec.d_u:
            raise ValueError(
                f"expected (B, {self.spec.max_users}, {self.spec.d_u}), "
                f"got {x.shape}"
            )
        q = slot_matmul(x, self.wq)
        k = slot_matmul(x, self.wk)
        v = slot_matmul(x, self.wv)
        scores = (q * k).sum(axis=2, keepdims=True) \
            * (1.0 / math.sqrt(self.spec.d_u))
        weights = softmax(scores, axis=2)   # one key per slot
        out = weights * v
        return out.reshape(x.shape[0], self.spec.output_dim)

    def parameters(self) -> list[Tensor]:
        return [self.wq, self.wk, self.wv]


LOG_STD_BOUNDS = (-5.0, 2.0)


class GaussianHead:
    """Diagonal Gaussian with state-independent learnable log-std.

    ``squash`` maps raw samples to the action range: ``"none"`` leaves them
    unbounded, ``"unit"`` applies a sigmoid onto (0, 1), and ``"symmetric"``
    applies ``scale * tanh``.  Log-densities of squashed actions carry the
    change-of-variables correction; the entropy reported is that of the base
    Gaussian.
    """

    def __init__(self, dim: int, log_std_init: float = 0.0,
                 squash: str = "none", scale: float = 1.0):
        if squash not in ("none", "unit", "symmetric"):
            raise ValueError(f"unknown squash kind {squash!r}")
        self.dim = dim
        self.squash = squash
        self.scale = scale
        self.log_std = parameter(np.full(dim, float(log_std_init)))

    # -- numpy-side helpers (no graph) -------------------------------------------

    def std(self) -> np.ndarray:
        return np.exp(np.clip(self.log_std.data, *LOG_STD_BOUNDS))

    def sample_raw(self, mean: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return mean + self.std() * rng.standard_normal(mean.shape)

    def to_action(self, raw: np.ndarray) -> np.ndarray:
        if self.squash == "unit":
            return self.scale * 0.5 * (1.0 + np.tanh(0.5 * raw))
        if self.squash == "symmetric":
            return self.scale * np.tanh(raw)
        return raw

    def squash_correction(self, raw: np.ndarray) -> np.ndarray:
        """log|d action / d raw| summed over dimensions, shape (B,)."""
        if self.squash == "unit":
            per_dim = math.log(self.scale) - np.logaddexp(0.0, raw) \
                - np.logaddexp(0.0, -raw)
        elif self.squash == "symmetric":
            per_dim = math.log(self.scale) + 2.0 * (
                math.log(2.0) - raw - np.logaddexp(0.0, -2.0 * raw)
            )
        else:
            return np.zeros(raw.shape[:-1])
        return per_dim.sum(axis=-1)

    # -- graph-side ----------------------------------------------------------------

    def log_prob(self, mean: Tensor, raw: np.ndarray) -> Tensor:
        """Log-density of the squashed action for stored raw samples, (B,)."""
        ls = clip(self.log_std, *LOG_STD_BOUNDS)
        inv_std = (-ls).exp()
        z = (Tensor(raw) - mean) * inv_std
        base = (z * z * -0.5 - ls - 0.5 * LOG_2PI).sum(axis=1)
        return base - Tensor(self.squash_correction(raw))

    def entropy(self) -> Tensor:
        ls = clip(self.log_std, *LOG_STD_BOUNDS)
        return (ls + 0.5 * (LOG_2PI + 1.0)).sum()

    def parameters(self) -> list[Tensor]:
        return [self.log_std]


def adam_step(param: np.ndarray, grad: np.ndarray, m: np.ndarray,
              v: np.ndarray, lr: float, betas: tuple[float, float],
              eps: float, t: int) -> None:
    """One bias-corrected adaptive moment update, in place.

    Algebraically lr * (m / bias1) / (sqrt(v / bias2) + eps), arranged to
    minimize temporaries.
    """
    if param.shape != grad.shape:
        raise ValueError(f"shape mismatch: {param.shape} vs {grad.shape}")
    b1, b2 = betas
    m *= b1
    m += (1.0 - b1) * grad
    v *= b2
    v += (1.0 - b2) * np.square(grad)
    denom = np.sqrt(v)
    denom /= math.sqrt(1.0 - b2 ** t)
    denom += eps
    step = m / denom
    step *= lr / (1.0 - b1 ** t)
    param -= step


class Adam:
    """Adaptive moment optimizer over a fixed parameter list."""

    def __init__(self, params: list[Tensor], lr: float = 3e-4,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        self.t += 1
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            adam_step(p.data, p.grad, m, v, self.lr, self.betas, self.eps,
                      self.t)
