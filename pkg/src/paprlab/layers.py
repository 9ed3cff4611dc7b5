"""Trainable layers built on the autodiff engine."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

__all__ = ["Module", "Linear", "Conv1d", "BatchNorm1d", "activation_fn"]


def activation_fn(name: str):
    if name == "selu":
        return ad.selu
    if name == "relu":
        return ad.relu
    raise ValueError(f"unknown activation {name!r} (expected 'selu' or 'relu')")


class Module:
    """Base class: tracks parameters, buffers and train/eval mode.

    Child modules and parameters are discovered from instance attributes in
    definition order, which keeps parameter ordering (and therefore optimizer
    state and checkpoints) deterministic.
    """

    def __init__(self):
        self.training = True

    def _children(self):
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix: str = ""):
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + name, value
        for name, child in self._children():
            yield from child.named_parameters(prefix + name + ".")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = ""):
        for name in getattr(self, "_buffer_names", ()):
            yield prefix + name, getattr(self, name)
        for name, child in self._children():
            yield from child.named_buffers(prefix + name + ".")

    def train(self, mode: bool = True):
        self.training = mode
        for _, child in self._children():
            child.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {name: p.data for name, p in self.named_parameters()}
        state.update({name: buf for name, buf in self.named_buffers()})
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]):
        expected = dict(self.named_parameters())
        buffers = dict(self.named_buffers())
        for name, array in state.items():
            if name in expected:
                if expected[name].data.shape != array.shape:
                    raise ValueError(f"shape mismatch for parameter {name}")
                expected[name].data = np.array(array, dtype=np.float64)
            elif name in buffers:
                buffers[name][...] = array
            else:
                raise KeyError(f"unexpected state entry {name}")
        missing = (set(expected) | set(buffers)) - set(state)
        if missing:
            raise KeyError(f"missing state entries: {sorted(missing)}")

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters())


def _lecun_normal(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    return rng.standard_normal(shape) / np.sqrt(fan_in)


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator):
        super().__init__()
        self.w = ad.parameter(_lecun_normal(rng, (in_features, out_features), in_features))
        self.b = ad.parameter(np.zeros(out_features))

    def __call__(self, x: Tensor) -> Tensor:
        return ad.linear(x, self.w, self.b)


class Conv1d(Module):
    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator,
                 kernel_size: int = 3, padding: int = 2):
        super().__init__()
        self.padding = padding
        fan_in = in_channels * kernel_size
        self.w = ad.parameter(_lecun_normal(rng, (out_channels, in_channels, kernel_size), fan_in))
        self.b = ad.parameter(np.zeros(out_channels))

    def __call__(self, x: Tensor) -> Tensor:
        return ad.conv1d(x, self.w, self.b, padding=self.padding)


class BatchNorm1d(Module):
    _buffer_names = ("running_mean", "running_var")

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.1):
        super().__init__()
        self.eps = eps
        self.momentum = momentum
        self.gamma = ad.parameter(np.ones(channels))
        self.beta = ad.parameter(np.zeros(channels))
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)

    def __call__(self, x: Tensor) -> Tensor:
        return ad.batch_norm(x, self.gamma, self.beta, self.running_mean, self.running_var,
                             training=self.training, momentum=self.momentum, eps=self.eps)
