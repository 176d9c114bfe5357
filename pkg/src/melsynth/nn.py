"""Parameter containers, initializers and the Adam optimizer."""

from __future__ import annotations

import numpy as np

from .autograd import Tensor, parameter

DTYPE = np.float32


class Module:
    """Base class that discovers parameters from instance attributes.

    Attributes that are trainable Tensors, Modules, or lists of either are
    walked recursively; names join with dots like ``layers.3.w``.
    """

    def named_params(self) -> list[tuple[str, Tensor]]:
        out = []
        self._collect("", self, out)
        return out

    @staticmethod
    def _collect(prefix: str, obj, out: list):
        if isinstance(obj, Tensor):
            if obj.requires_grad:
                out.append((prefix, obj))
        elif isinstance(obj, Module):
            for name, child in vars(obj).items():
                Module._collect(f"{prefix}.{name}" if prefix else name, child, out)
        elif isinstance(obj, (list, tuple)):
            for i, child in enumerate(obj):
                Module._collect(f"{prefix}.{i}", child, out)

    def params(self) -> list[Tensor]:
        return [p for _, p in self.named_params()]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_params()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        own = dict(self.named_params())
        missing = set(own) - set(state)
        extra = set(state) - set(own)
        if missing or extra:
            raise ValueError(f"state mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, p in own.items():
            arr = np.asarray(state[name], dtype=p.data.dtype)
            if arr.shape != p.data.shape:
                raise ValueError(f"shape mismatch for {name}: "
                                 f"{arr.shape} vs {p.data.shape}")
            p.data = arr.copy()

    def zero_grad(self):
        for p in self.params():
            p.grad = None


def glorot(rng: np.random.Generator, shape, dtype=DTYPE) -> Tensor:
    """Uniform Glorot init; fan-in is the product of all but the first axis."""
    fan_out = shape[0]
    fan_in = int(np.prod(shape[1:]))
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return parameter(rng.uniform(-bound, bound, shape).astype(dtype))


def zeros(shape, dtype=DTYPE) -> Tensor:
    return parameter(np.zeros(shape, dtype=dtype))


class Adam:
    """Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8)."""

    def __init__(self, params: list[Tensor], beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, lr: float):
        self.step_count += 1
        b1c = 1.0 - self.beta1 ** self.step_count
        b2c = 1.0 - self.beta2 ** self.step_count
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if g is None:
                continue
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)

    def state_blobs(self, named: list[tuple[str, Tensor]]) -> dict[str, np.ndarray]:
        blobs = {}
        for (name, _), m, v in zip(named, self.m, self.v):
            blobs[f"adam_m.{name}"] = m
            blobs[f"adam_v.{name}"] = v
        return blobs

    def load_state_blobs(self, named: list[tuple[str, Tensor]],
                         blobs: dict[str, np.ndarray], step_count: int):
        self.step_count = step_count
        for i, (name, p) in enumerate(named):
            self.m[i] = np.asarray(blobs[f"adam_m.{name}"],
                                   dtype=p.data.dtype).reshape(p.data.shape).copy()
            self.v[i] = np.asarray(blobs[f"adam_v.{name}"],
                                   dtype=p.data.dtype).reshape(p.data.shape).copy()


def lr_schedule(initial: float, halve_every: int, step: int) -> float:
    """Step decay: halves every `halve_every` optimizer steps."""
    return initial * 0.5 ** (step // halve_every)
