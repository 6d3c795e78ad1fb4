"""Feature extraction: per-modality stems and a lite two-branch trunk.

The stem downsamples a 64x64 image to the 16x16x16 tap block where the
feature reconstructor reads and writes; both modalities share this tap shape
so a reconstructed block can stand in for the real one.  The trunk keeps a
high-resolution branch (16ch @ 16x16) and a low-resolution branch
(32ch @ 8x8) running in parallel, exchanges information between them after
every stage, and finally upsamples-and-concatenates into a 32ch late feature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .layers import Conv2d, collect_params, set_trainable


@dataclass
class StemConfig:
    in_channels: int
    stem_channels: int = 16
    tap_hw: int = 16


@dataclass
class TrunkConfig:
    hi_channels: int = 16
    lo_channels: int = 32
    blocks_per_stage: int = 2
    stages: int = 2
    out_channels: int = 32


class Stem:
    """Stride-2 downsampling convs: [C,64,64] -> [16,16,16]; last layer unactivated."""

    def __init__(self, rng: np.random.Generator, cfg: StemConfig):
        self.cfg = cfg
        self.conv1 = Conv2d(rng, cfg.in_channels, cfg.stem_channels, 2, stride=2)
        self.conv2 = Conv2d(rng, cfg.stem_channels, cfg.stem_channels, 2, stride=2)

    def __call__(self, image: Tensor) -> Tensor:
        if image.data.ndim != 4 or image.data.shape[1] != self.cfg.in_channels:
            raise ValueError(f"stem expects [N,{self.cfg.in_channels},64,64] input, "
                             f"got {image.data.shape}")
        return self.conv2(ad.relu(self.conv1(image)))

    def named_params(self, prefix: str):
        yield from self.conv1.named_params(prefix + ".conv1")
        yield from self.conv2.named_params(prefix + ".conv2")


class LiteTrunk:
    """Two-resolution trunk with per-stage cross-branch exchange units."""

    def __init__(self, rng: np.random.Generator, cfg: TrunkConfig = TrunkConfig()):
        self.cfg = cfg
        hi, lo = cfg.hi_channels, cfg.lo_channels
        self.transition = Conv2d(rng, hi, lo, 2, stride=2)
        self.hi_blocks = [[Conv2d(rng, hi, hi, 3, padding=1)
                           for _ in range(cfg.blocks_per_stage)]
                          for _ in range(cfg.stages)]
        self.lo_blocks = [[Conv2d(rng, lo, lo, 3, padding=1)
                           for _ in range(cfg.blocks_per_stage)]
                          for _ in range(cfg.stages)]
        self.lo_to_hi = [Conv2d(rng, lo, hi, 1) for _ in range(cfg.stages)]
        self.hi_to_lo = [Conv2d(rng, hi, lo, 2, stride=2)
                         for _ in range(cfg.stages)]
        self.fuse = Conv2d(rng, hi + lo, cfg.out_channels, 1)

    def __call__(self, tap: Tensor) -> Tensor:
        if tap.data.ndim != 4 or tap.data.shape[1] != self.cfg.hi_channels:
            raise ValueError(f"trunk expects [N,{self.cfg.hi_channels},16,16] tap, "
                             f"got {tap.data.shape}")
        b_hi = tap
        b_lo = ad.relu(self.transition(tap))
        for stage in range(self.cfg.stages):
            for conv in self.hi_blocks[stage]:
                b_hi = ad.relu(conv(b_hi))
            for conv in self.lo_blocks[stage]:
                b_lo = ad.relu(conv(b_lo))
            # Exchange: both directions computed from the pre-exchange branches.
            up = ad.upsample_nearest(self.lo_to_hi[stage](b_lo), 2)
            down = self.hi_to_lo[stage](b_hi)
            b_hi, b_lo = ad.relu(b_hi + up), ad.relu(b_lo + down)
        merged = ad.concat([b_hi, ad.upsample_nearest(b_lo, 2)], axis=1)
        return ad.relu(self.fuse(merged))

    def named_params(self, prefix: str):
        yield from self.transition.named_params(prefix + ".transition")
        for s in range(self.cfg.stages):
            for k, conv in enumerate(self.hi_blocks[s]):
                yield from conv.named_params(f"{prefix}.stage{s}.hi{k}")
            for k, conv in enumerate(self.lo_blocks[s]):
                yield from conv.named_params(f"{prefix}.stage{s}.lo{k}")
            yield from self.lo_to_hi[s].named_params(f"{prefix}.stage{s}.lo_to_hi")
            yield from self.hi_to_lo[s].named_params(f"{prefix}.stage{s}.hi_to_lo")
        yield from self.fuse.named_params(prefix + ".fuse")


def freeze_stem(stem: Stem) -> None:
    """Exclude stem parameters from subsequent optimizer steps."""
    set_trainable(collect_params({"stem": stem}).values(), False)


def unfreeze_stem(stem: Stem) -> None:
    set_trainable(collect_params({"stem": stem}).values(), True)


def param_count(module, prefix: str = "m") -> int:
    return sum(p.data.size for _, p in module.named_params(prefix))
