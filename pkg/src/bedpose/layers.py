"""Conv/dense parameter containers with fan-in normal initialization."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


def kaiming_normal(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


class Conv2d:
    def __init__(self, rng: np.random.Generator, in_ch: int, out_ch: int,
                 k: int = 3, stride: int = 1, padding: int = 0, bias: bool = True):
        self.stride = stride
        self.padding = padding
        self.weight = Tensor(kaiming_normal(rng, (out_ch, in_ch, k, k), in_ch * k * k),
                             requires_grad=True)
        self.bias = Tensor(np.zeros(out_ch), requires_grad=True) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return ad.conv2d(x, self.weight, self.stride, self.padding, self.bias)

    def named_params(self, prefix: str):
        yield prefix + ".weight", self.weight
        if self.bias is not None:
            yield prefix + ".bias", self.bias


class Dense:
    def __init__(self, rng: np.random.Generator, in_dim: int, out_dim: int, bias: bool = True):
        self.weight = Tensor(kaiming_normal(rng, (in_dim, out_dim), in_dim), requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim), requires_grad=True) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return ad.dense(x, self.weight, self.bias)

    def named_params(self, prefix: str):
        yield prefix + ".weight", self.weight
        if self.bias is not None:
            yield prefix + ".bias", self.bias


def collect_params(modules: dict) -> dict[str, Tensor]:
    """Flatten {prefix: module-with-named_params} into an ordered name->Tensor map."""
    out: dict[str, Tensor] = {}
    for prefix, mod in modules.items():
        for name, p in mod.named_params(prefix):
            if name in out:
                raise ValueError(f"duplicate parameter name '{name}'")
            out[name] = p
    return out


def set_trainable(params, trainable: bool) -> None:
    for p in params:
        p.requires_grad = bool(trainable)
