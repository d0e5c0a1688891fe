"""Parameter-holding building blocks shared by every network in the package.

Layers store their tensors directly; a model gathers them through
``named_params`` into one flat, insertion-ordered mapping used by the
optimizer and the checkpoint writer. Initialization draws from a caller
supplied generator so whole models are reproducible from a single seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor


def _he(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape).astype(ad.default_dtype())


@dataclass
class Linear:
    w: Tensor  # (n_in, n_out), applied as x @ w + b
    b: Tensor

    @classmethod
    def create(cls, rng: np.random.Generator, n_in: int, n_out: int) -> "Linear":
        return cls(
            w=Tensor(_he(rng, (n_in, n_out), n_in), requires_grad=True),
            b=Tensor(np.zeros(n_out, dtype=ad.default_dtype()), requires_grad=True),
        )

    def __call__(self, x) -> Tensor:
        return ad.add(ad.matmul(x, self.w), self.b)

    def named_params(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b}


@dataclass
class Conv:
    w: Tensor  # (n_out, n_in, k, k)
    b: Tensor
    stride: int = 1
    padding: int = 1

    @classmethod
    def create(
        cls, rng: np.random.Generator, n_in: int, n_out: int, k: int = 3,
        stride: int = 1, padding: int = 1,
    ) -> "Conv":
        return cls(
            w=Tensor(_he(rng, (n_out, n_in, k, k), n_in * k * k), requires_grad=True),
            b=Tensor(np.zeros(n_out, dtype=ad.default_dtype()), requires_grad=True),
            stride=stride,
            padding=padding,
        )

    def __call__(self, x) -> Tensor:
        return ad.conv2d(x, self.w, self.b, stride=self.stride, padding=self.padding)

    def named_params(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b}


def mlp(rng: np.random.Generator, sizes: list[int]) -> list[Linear]:
    return [Linear.create(rng, sizes[i], sizes[i + 1]) for i in range(len(sizes) - 1)]


def run_mlp(layers: list[Linear], x, final_activation=None) -> Tensor:
    for i, layer in enumerate(layers):
        x = layer(x)
        if i < len(layers) - 1:
            x = ad.relu(x)
    if final_activation is not None:
        x = final_activation(x)
    return x


def mlp_params(layers: list[Linear], prefix: str) -> dict[str, Tensor]:
    out: dict[str, Tensor] = {}
    for i, layer in enumerate(layers):
        out.update(layer.named_params(f"{prefix}.{i}"))
    return out


def zero_params(params: dict[str, Tensor]) -> None:
    """Test helper: overwrite every parameter with zeros in place."""
    for t in params.values():
        t.data[...] = 0.0
