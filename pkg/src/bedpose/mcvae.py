"""Cross-modal feature reconstruction with a two-expert mixture posterior.

One encoder per modality maps a 16x16x16 tap block to a diagonal Gaussian
over a shared latent space.  The joint posterior is the equal-weight mixture
of the two per-modality Gaussians, sampled by picking an expert per example
(probability 1/2 each) and drawing through the reparameterization
z = mu + exp(logvar/2) * eps.  A single shared decoder maps z back to a
sigmoid-bounded block, so every reconstruction lies strictly inside (0, 1).

Because the decoder is sigmoid-bounded while raw tap features are not, tap
blocks are squashed through the same sigmoid before serving as regression
targets; downstream consumers of the real second-modality feature use the
squashed version too, keeping train and inference distributions aligned.

Losses:
* the regularizer is a single-sample negated ELBO: Gaussian reconstruction
  likelihood of the selected expert's (squashed) input block, plus
  beta * KL(selected posterior || N(0, I)) in closed form;
* the reconstruction loss is the per-example Euclidean norm of
  (decoded block - squashed second-modality block), batch-averaged.

Targets are held constant (detached): the reconstructor learns to match the
backbone's features, while the backbone itself is shaped by the pose loss and
by gradients through the encoder inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .layers import Conv2d, Dense

ALPHA = 0.5   # fixed, non-trainable mixture weight for each expert


@dataclass
class McvaeConfig:
    latent_dim: int = 64
    tap_channels: int = 16
    tap_hw: int = 16


@dataclass
class LatentCode:
    """One latent draw; for mixture draws, mu/logvar/z are the selected
    expert's per example and ``expert`` records which expert fired (1 or 2)."""
    mu: Tensor
    logvar: Tensor
    z: Tensor
    eps: np.ndarray
    expert: np.ndarray | None = None


class _Encoder:
    def __init__(self, rng, cfg: McvaeConfig):
        c = cfg.tap_channels
        self.conv1 = Conv2d(rng, c, 16, 2, stride=2)
        self.conv2 = Conv2d(rng, 16, 32, 2, stride=2)
        self.conv3 = Conv2d(rng, 32, 64, 2, stride=2)
        self.flat_dim = 64 * (cfg.tap_hw // 8) ** 2
        self.fc_mu = Dense(rng, self.flat_dim, cfg.latent_dim)
        self.fc_logvar = Dense(rng, self.flat_dim, cfg.latent_dim)

    def __call__(self, x: Tensor) -> tuple[Tensor, Tensor]:
        h = ad.relu(self.conv1(x))
        h = ad.relu(self.conv2(h))
        h = ad.relu(self.conv3(h))
        h = h.reshape((x.data.shape[0], self.flat_dim))
        return self.fc_mu(h), self.fc_logvar(h)

    def named_params(self, prefix):
        for name, m in (("conv1", self.conv1), ("conv2", self.conv2),
                        ("conv3", self.conv3), ("fc_mu", self.fc_mu),
                        ("fc_logvar", self.fc_logvar)):
            yield from m.named_params(f"{prefix}.{name}")


class _Decoder:
    def __init__(self, rng, cfg: McvaeConfig):
        hw0 = cfg.tap_hw // 8
        self.hw0 = hw0
        self.fc = Dense(rng, cfg.latent_dim, 64 * hw0 * hw0)
        self.conv1 = Conv2d(rng, 64, 32, 3, padding=1)
        self.conv2 = Conv2d(rng, 32, 16, 3, padding=1)
        self.conv3 = Conv2d(rng, 16, cfg.tap_channels, 3, padding=1)

    def __call__(self, z: Tensor) -> Tensor:
        h = ad.relu(self.fc(z))
        h = h.reshape((z.data.shape[0], 64, self.hw0, self.hw0))
        h = ad.relu(self.conv1(ad.upsample_nearest(h, 2)))
        h = ad.relu(self.conv2(ad.upsample_nearest(h, 2)))
        return ad.sigmoid(self.conv3(ad.upsample_nearest(h, 2)))

    def named_params(self, prefix):
        for name, m in (("fc", self.fc), ("conv1", self.conv1),
                        ("conv2", self.conv2), ("conv3", self.conv3)):
            yield from m.named_params(f"{prefix}.{name}")


def squash(x: Tensor) -> Tensor:
    """Map an unbounded tap block into (0, 1); the decoder's target space."""
    return ad.sigmoid(x)


def squash_np(x: np.ndarray) -> np.ndarray:
    return ad.sigmoid_np(x)


def gaussian_kl(mu: Tensor, logvar: Tensor) -> Tensor:
    """Batch-mean closed-form KL(N(mu, diag exp(logvar)) || N(0, I))."""
    n = mu.data.shape[0]
    terms = ad.sqdiff(mu, Tensor(np.zeros_like(mu.data))) + ad.exp(logvar) - logvar
    return (terms.sum() + (-mu.data.size)) * (0.5 / n)


class Mcvae:
    """Two modality encoders (phi_1, phi_2), a shared decoder, standard-normal
    prior, and fixed mixture weights 1/2."""

    def __init__(self, rng: np.random.Generator, cfg: McvaeConfig = McvaeConfig()):
        self.cfg = cfg
        self.enc1 = _Encoder(rng, cfg)
        self.enc2 = _Encoder(rng, cfg)
        self.dec = _Decoder(rng, cfg)

    def named_params(self, prefix: str = "mcvae"):
        yield from self.enc1.named_params(prefix + ".enc1")
        yield from self.enc2.named_params(prefix + ".enc2")
        yield from self.dec.named_params(prefix + ".dec")

    def _check_tap(self, x: Tensor, name: str) -> None:
        want = (self.cfg.tap_channels, self.cfg.tap_hw, self.cfg.tap_hw)
        if x.data.ndim != 4 or x.data.shape[1:] != want:
            raise ValueError(f"{name} must be [N,{want[0]},{want[1]},{want[2]}], "
                             f"got {x.data.shape}")

    def encode(self, x: Tensor, which: str, noise_seed_rng) -> LatentCode:
        """Posterior draw from one modality's encoder ('m1' or 'm2')."""
        self._check_tap(x, f"encode({which}) input")
        if which == "m1":
            mu, logvar = self.enc1(x)
        elif which == "m2":
            mu, logvar = self.enc2(x)
        else:
            raise ValueError(f"unknown modality '{which}'")
        eps = (noise_seed_rng.standard_normal(mu.data.shape)
               if isinstance(noise_seed_rng, np.random.Generator) else np.asarray(noise_seed_rng))
        z = ad.gaussian_sample(mu, logvar, eps)
        return LatentCode(mu, logvar, z, eps)

    def sample_joint_posterior(self, x1: Tensor, x2: Tensor, noise_rng) -> LatentCode:
        """Mixture draw: per example, expert m fires with probability 1/2 and
        z is drawn from that expert's Gaussian."""
        self._check_tap(x1, "x1")
        self._check_tap(x2, "x2")
        n = x1.data.shape[0]
        d = self.cfg.latent_dim
        mu1, lv1 = self.enc1(x1)
        mu2, lv2 = self.enc2(x2)
        pick1 = noise_rng.random(n) < ALPHA
        eps = noise_rng.standard_normal((n, d))
        m = Tensor(np.repeat(pick1[:, None].astype(np.float64), d, axis=1))
        m_inv = Tensor(1.0 - m.data)
        mu = m * mu1 + m_inv * mu2
        logvar = m * lv1 + m_inv * lv2
        z = ad.gaussian_sample(mu, logvar, eps)
        expert = np.where(pick1, 1, 2)
        return LatentCode(mu, logvar, z, eps, expert)

    def decode(self, z: Tensor) -> Tensor:
        """Latent to tap-shaped block; every output strictly inside (0, 1)."""
        if z.data.ndim != 2 or z.data.shape[1] != self.cfg.latent_dim:
            raise ValueError(f"decode expects [N,{self.cfg.latent_dim}], got {z.data.shape}")
        out = self.dec(z)
        if ad.debug_checks_enabled() and not np.all((out.data > 0) & (out.data < 1)):
            raise FloatingPointError("decoder output left the open interval (0, 1)")
        return out

    def elbo_loss(self, x1: Tensor, x2: Tensor, code: LatentCode, beta: float,
                  xhat: Tensor | None = None) -> Tensor:
        """Negated single-sample ELBO: reconstruction likelihood of the selected
        expert's squashed input, minus-log form, plus beta * closed-form KL."""
        if beta < 0:
            raise ValueError(f"beta must be non-negative, got {beta}")
        if code.expert is None:
            raise ValueError("elbo_loss needs a joint-posterior code (expert record missing)")
        if xhat is None:
            xhat = self.decode(code.z)
        n = x1.data.shape[0]
        pick1 = (code.expert == 1)[:, None, None, None]
        target = np.where(pick1, squash_np(x1.data), squash_np(x2.data))
        recon_nll = ad.sqdiff(xhat, Tensor(target)).sum() * (0.5 / n)
        return recon_nll + gaussian_kl(code.mu, code.logvar) * beta

    def reconstruct_conditional(self, x1: Tensor, noise, k: int = 1) -> Tensor:
        """Expectation over q(z|x1) of the decoded block, estimated with k
        reparameterized draws (k=1 by default).  Only encoder 1 and the decoder
        participate; the second modality is never consulted.  ``noise`` is a
        Generator or a premade [k, N, D] array of standard-normal draws."""
        self._check_tap(x1, "x1")
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        mu, logvar = self.enc1(x1)
        total = None
        for i in range(k):
            if isinstance(noise, np.random.Generator):
                eps = noise.standard_normal(mu.data.shape)
            else:
                eps = np.asarray(noise)[i]
            xhat = self.decode(ad.gaussian_sample(mu, logvar, eps))
            total = xhat if total is None else total + xhat
        return total if k == 1 else total * (1.0 / k)


def recon_loss(xhat2: Tensor, x2: Tensor) -> Tensor:
    """Per-example Euclidean norm of (xhat2 - x2) over the whole block,
    averaged over the batch.  ``x2`` must already be squashed into [0, 1]."""
    if xhat2.data.shape != x2.data.shape:
        raise ValueError(f"recon_loss: shape mismatch {xhat2.data.shape} vs {x2.data.shape}")
    if xhat2.data.ndim != 4:
        raise ValueError(f"recon_loss expects [N,C,H,W] blocks, got {xhat2.data.shape}")
    n = xhat2.data.shape[0]
    norms = ad.sqrt(ad.sqdiff(xhat2, x2).sum(axis=(1, 2, 3)))
    return norms.sum() * (1.0 / n)
