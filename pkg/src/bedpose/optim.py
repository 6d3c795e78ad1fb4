"""Adam optimizer with bias correction, plus the step learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor


@dataclass
class AdamState:
    """First/second moment estimates keyed by parameter name, plus step count."""
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params: list[Tensor], grads: list[np.ndarray], state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8, names: list[str] | None = None) -> None:
    """One Adam update over aligned parameter/gradient lists, in place."""
    if len(params) != len(grads):
        raise ValueError(f"adam_step: {len(params)} params vs {len(grads)} grads")
    if names is None:
        names = [str(i) for i in range(len(params))]
    if len(names) != len(params):
        raise ValueError(f"adam_step: {len(params)} params vs {len(names)} names")
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for name, p, g in zip(names, params, grads):
        if g.shape != p.data.shape:
            raise ValueError(f"adam_step: grad shape {g.shape} != param shape {p.data.shape} for '{name}'")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
        v = state.v.get(name)
        if v is None:
            v = state.v[name] = np.zeros_like(p.data)
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


class Adam:
    """Adam over a named-parameter dict; frozen params are skipped untouched."""

    def __init__(self, named_params: dict[str, Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.named_params = dict(named_params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = AdamState()

    def step(self, lr: float | None = None) -> None:
        names, params, grads = [], [], []
        for name, p in self.named_params.items():
            if p.requires_grad and p.grad is not None:
                names.append(name)
                params.append(p)
                grads.append(p.grad)
        adam_step(params, grads, self.state, self.lr if lr is None else lr,
                  self.beta1, self.beta2, self.eps, names=names)

    def zero_grad(self) -> None:
        for p in self.named_params.values():
            p.grad = None

    def reset_state(self) -> None:
        self.state = AdamState()


def scheduled_lr(base_lr: float, decay_factor: float, decay_epochs, epoch: int) -> float:
    """Learning rate for a 1-indexed epoch: decayed once per boundary passed.

    With base 1e-3, factor 0.1 and boundaries (70, 90): epoch 69 -> 1e-3,
    epoch 70 -> 1e-4, epoch 90 -> 1e-5.
    """
    lr = base_lr
    for d in decay_epochs:
        if epoch >= d:
            lr *= decay_factor
    return lr
