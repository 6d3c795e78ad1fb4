"""Attentional fusion of two late feature streams.

A small bottleneck attention net maps (f1 + f2) to a sigmoid-gated importance
kernel W with one entry per feature element, and the fused stream is the
convex combination (1 - W) * f1 + W * f2.  The grand mean of W over a dataset
measures how much the model leans on the second stream (its "utilization").
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .layers import Conv2d


def blend(f_m1: Tensor, f_m2: Tensor, weights: Tensor) -> Tensor:
    """(1 - W) * f1 + W * f2 elementwise; the fusion contract."""
    if f_m1.data.shape != f_m2.data.shape:
        raise ValueError(f"fuse: shape mismatch {f_m1.data.shape} vs {f_m2.data.shape}")
    if weights.data.shape != f_m1.data.shape:
        raise ValueError(f"fuse: weight shape {weights.data.shape} does not match "
                         f"features {f_m1.data.shape}")
    return (1.0 - weights) * f_m1 + weights * f_m2


class AttentionFusion:
    """Single-iteration attentional fusion with a channel bottleneck (ratio 4)."""

    def __init__(self, rng: np.random.Generator, channels: int = 32, ratio: int = 4):
        self.squeeze = Conv2d(rng, channels, channels // ratio, 1)
        self.expand = Conv2d(rng, channels // ratio, channels, 1)

    def weights(self, f_m1: Tensor, f_m2: Tensor) -> Tensor:
        if f_m1.data.shape != f_m2.data.shape:
            raise ValueError(f"fuse: shape mismatch {f_m1.data.shape} vs {f_m2.data.shape}")
        return ad.sigmoid(self.expand(ad.relu(self.squeeze(f_m1 + f_m2))))

    def __call__(self, f_m1: Tensor, f_m2: Tensor) -> tuple[Tensor, Tensor]:
        w = self.weights(f_m1, f_m2)
        return blend(f_m1, f_m2, w), w

    def named_params(self, prefix: str):
        yield from self.squeeze.named_params(prefix + ".squeeze")
        yield from self.expand.named_params(prefix + ".expand")


def utilization(weights_over_dataset) -> float:
    """Grand mean of all importance-kernel entries: second-stream share."""
    weights = list(weights_over_dataset)
    if not weights:
        raise ValueError("utilization: empty weight list")
    total, count = 0.0, 0
    for w in weights:
        arr = w.data if isinstance(w, Tensor) else np.asarray(w)
        total += float(arr.sum())
        count += arr.size
    return total / count
