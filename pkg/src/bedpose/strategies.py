"""The four end-to-end model assemblies sharing backbone, fusion, and head.

* finetune: one stem/trunk/head stream.  Phase 1 trains everything on the
  second modality; phase 2 freezes the stem and fine-tunes trunk and head on
  the first modality (single-channel images replicated to three channels so
  the stem trained on RGB can consume them).  Single-modality inference.
* fusion: two full streams fused by the attention module.  Requires both
  modalities at inference and refuses to run without them.
* rdf: the fusion architecture, but during training the whole second-modality
  batch is replaced by zeros with probability rdf_p, and whenever the second
  input is the zero tensor (or absent), fusion is bypassed and the head
  consumes the first stream directly.  Single-modality inference via bypass.
* mcvae: two streams plus the feature reconstructor.  During training the
  decoded block (never the raw second-modality tap) feeds the second trunk;
  at inference the block is reconstructed from the first modality alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import rng as rng_mod
from .autodiff import Tensor
from .backbone import LiteTrunk, Stem, StemConfig, TrunkConfig
from .fusion import AttentionFusion
from .layers import collect_params, set_trainable
from .mcvae import Mcvae, McvaeConfig, recon_loss, squash_np
from .pose import HeatmapHead

KINDS = ("finetune", "fusion", "rdf", "mcvae")


class MissingModalityError(ValueError):
    """Raised when an assembly is asked to infer without a required modality."""


@dataclass
class ModelConfig:
    latent_dim: int = 64
    rdf_p: float = 0.5
    lambda_reg: float = 1.0     # weight of the ELBO regularizer
    lambda_recon: float = 1.0   # weight of the reconstruction norm
    recon_draws: int = 1        # draws averaged by conditional reconstruction


class Assembly:
    """One strategy's components, built deterministically from (kind, seed)."""

    def __init__(self, kind: str, seed: int, model: ModelConfig = ModelConfig()):
        if kind not in KINDS:
            raise ValueError(f"unknown strategy kind '{kind}' (expected one of {KINDS})")
        self.kind = kind
        self.model = model
        g = rng_mod.stream(seed, "init", kind)
        if kind == "finetune":
            self.stem = Stem(g, StemConfig(in_channels=3))
            self.trunk = LiteTrunk(g, TrunkConfig())
            self.head = HeatmapHead(g)
        else:
            self.stem1 = Stem(g, StemConfig(in_channels=1))
            self.stem2 = Stem(g, StemConfig(in_channels=3))
            self.trunk1 = LiteTrunk(g, TrunkConfig())
            self.trunk2 = LiteTrunk(g, TrunkConfig())
            self.fusion = AttentionFusion(g)
            self.head = HeatmapHead(g)
            if kind == "mcvae":
                self.vae = Mcvae(g, McvaeConfig(latent_dim=model.latent_dim))

    def named_params(self) -> dict[str, Tensor]:
        if self.kind == "finetune":
            mods = {"stem": self.stem, "trunk": self.trunk, "head": self.head}
        else:
            mods = {"stem1": self.stem1, "stem2": self.stem2,
                    "trunk1": self.trunk1, "trunk2": self.trunk2,
                    "fusion": self.fusion, "head": self.head}
            if self.kind == "mcvae":
                mods["vae"] = self.vae
        return collect_params(mods)

    def stem_params(self) -> dict[str, Tensor]:
        mod = self.stem if self.kind == "finetune" else self.stem1
        return collect_params({"stem": mod})

    def set_finetune_phase(self, phase: int) -> None:
        if self.kind != "finetune":
            raise ValueError(f"set_finetune_phase on a '{self.kind}' assembly")
        set_trainable(collect_params({"stem": self.stem}).values(), phase == 1)


def replicate_channels(i1: np.ndarray) -> np.ndarray:
    """Single-channel batch to three channels (for the shared finetune stem)."""
    return np.repeat(i1, 3, axis=1)


def finetune_forward(assembly: Assembly, images: Tensor) -> Tensor:
    if assembly.kind != "finetune":
        raise ValueError(f"finetune_forward on a '{assembly.kind}' assembly")
    return assembly.head(assembly.trunk(assembly.stem(images)))


def fusion_forward(assembly: Assembly, i1: Tensor | None, i2: Tensor | None):
    """Both-modality path; refuses single-modality input (no silent fallback)."""
    if assembly.kind not in ("fusion", "rdf", "mcvae"):
        raise ValueError(f"fusion_forward on a '{assembly.kind}' assembly")
    if i1 is None or i2 is None:
        raise MissingModalityError("feature fusion requires both modalities")
    f1 = assembly.trunk1(assembly.stem1(i1))
    f2 = assembly.trunk2(assembly.stem2(i2))
    fused, w = assembly.fusion(f1, f2)
    return assembly.head(fused), w


def _direct_path(assembly: Assembly, i1: Tensor) -> Tensor:
    return assembly.head(assembly.trunk1(assembly.stem1(i1)))


def rdf_forward(assembly: Assembly, i1: Tensor, i2: Tensor | None,
                train_mode: bool, noise_rng: np.random.Generator | None = None):
    """Zero the second modality with probability rdf_p in training; bypass the
    fusion whenever the second input is the zero tensor or absent."""
    if assembly.kind != "rdf":
        raise ValueError(f"rdf_forward on a '{assembly.kind}' assembly")
    if train_mode and i2 is not None and noise_rng is not None:
        if noise_rng.random() < assembly.model.rdf_p:
            i2 = Tensor(np.zeros_like(i2.data))
    if i2 is None or not i2.data.any():
        return _direct_path(assembly, i1), None
    return fusion_forward(assembly, i1, i2)


def mcvae_forward(assembly: Assembly, i1: Tensor, i2: Tensor | None,
                  train_mode: bool, noise, beta: float = 1.0):
    """Training: joint-posterior sample, decode, both VAE losses, decoded block
    through the second trunk.  Inference: block reconstructed from i1 alone.

    Returns (heatmaps, losses-or-None, fusion weights).  ``noise`` is a
    Generator in training; a Generator or a premade [k, N, D] eps array at
    inference.
    """
    if assembly.kind != "mcvae":
        raise ValueError(f"mcvae_forward on a '{assembly.kind}' assembly")
    x1 = assembly.stem1(i1)
    if train_mode:
        if i2 is None:
            raise MissingModalityError("mcvae training requires the second modality")
        x2 = assembly.stem2(i2)
        code = assembly.vae.sample_joint_posterior(x1, x2, noise)
        xhat = assembly.vae.decode(code.z)
        l_reg = assembly.vae.elbo_loss(x1, x2, code, beta, xhat=xhat)
        l_rec = recon_loss(xhat, Tensor(squash_np(x2.data)))
        losses = {"reg": l_reg, "recon": l_rec}
    else:
        xhat = assembly.vae.reconstruct_conditional(x1, noise, k=assembly.model.recon_draws)
        losses = None
    f1 = assembly.trunk1(x1)
    f2 = assembly.trunk2(xhat)
    fused, w = assembly.fusion(f1, f2)
    return assembly.head(fused), losses, w


def infer_heatmaps(assembly: Assembly, i1: np.ndarray, i2: np.ndarray | None,
                   noise=None):
    """Strategy-appropriate inference on a raw image batch.

    finetune / rdf / mcvae consume modality 1 only; fusion requires both.
    Returns (heatmaps Tensor, fusion weights Tensor or None).
    """
    kind = assembly.kind
    with ad.no_grad():
        if kind == "finetune":
            return finetune_forward(assembly, Tensor(replicate_channels(i1))), None
        if kind == "fusion":
            if i2 is None:
                raise MissingModalityError("feature fusion requires both modalities")
            return fusion_forward(assembly, Tensor(i1), Tensor(i2))
        if kind == "rdf":
            return rdf_forward(assembly, Tensor(i1), None, train_mode=False)
        heat, _, w = mcvae_forward(assembly, Tensor(i1), None, False, noise)
        return heat, w
