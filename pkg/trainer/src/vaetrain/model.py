"""Convolutional VAE architectures with spatially arranged latent maps.

The encoder stacks stride-2 convolutions interleaved with residual blocks;
the decoder mirrors it with transposed convolutions and crops back to the
input size.  Latents are either Bernoulli (one logit map, trained with the
Gumbel-Softmax relaxation) or Gaussian (mean and log-variance maps).

Architectures:

====== ========== ============== =======================================
name   input      latent (HxWxC) encoder stack
====== ========== ============== =======================================
ref15  128 x 128  15 x 15 x C    conv4/2, RB, conv4/2, RB, conv3/2 pad1
ref4   128 x 128   4 x 4 x C     conv3/2 + RB four times, conv3/2 pad1
desk    32 x 32    8 x 8 x C     conv4/2, RB, conv3/2 pad1
tiny     8 x 8     2 x 2 x C     conv4/4 (miniature, for analysis tests)
====== ========== ============== =======================================
"""

from __future__ import annotations

import torch
from torch import nn

__all__ = ["ResidualBlock", "ConvVae", "build_vae", "ARCHS"]

LEAKY_SLOPE = 0.01
DROPOUT_P = 0.2


class ResidualBlock(nn.Module):
    """BN, LeakyReLU, 3x3 conv, dropout, twice; add input; final LeakyReLU."""

    def __init__(self, channels: int = 64):
        super().__init__()
        self.bn1 = nn.BatchNorm2d(channels)
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.drop1 = nn.Dropout(DROPOUT_P)
        self.bn2 = nn.BatchNorm2d(channels)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)
        self.drop2 = nn.Dropout(DROPOUT_P)
        self.act = nn.LeakyReLU(LEAKY_SLOPE)

    def forward(self, x):
        y = self.drop1(self.conv1(self.act(self.bn1(x))))
        y = self.drop2(self.conv2(self.act(self.bn2(y))))
        return self.act(x + y)


class _Crop(nn.Module):
    def __init__(self, size: int):
        super().__init__()
        self.size = size

    def forward(self, x):
        return x[:, :, : self.size, : self.size]


def _encoder(arch: str, out_channels: int) -> nn.Sequential:
    if arch == "ref15":
        return nn.Sequential(
            nn.Conv2d(1, 64, 4, stride=2),
            ResidualBlock(64),
            nn.Conv2d(64, 64, 4, stride=2),
            ResidualBlock(64),
            nn.Conv2d(64, out_channels, 3, stride=2, padding=1),
        )
    if arch == "ref4":
        layers: list[nn.Module] = []
        channels = 1
        for _ in range(4):
            layers += [nn.Conv2d(channels, 64, 3, stride=2), ResidualBlock(64)]
            channels = 64
        layers.append(nn.Conv2d(64, out_channels, 3, stride=2, padding=1))
        return nn.Sequential(*layers)
    if arch == "desk":
        return nn.Sequential(
            nn.Conv2d(1, 64, 4, stride=2),
            ResidualBlock(64),
            nn.Conv2d(64, out_channels, 3, stride=2, padding=1),
        )
    if arch == "tiny":
        return nn.Sequential(nn.Conv2d(1, out_channels, 4, stride=4))
    raise ValueError(f"unknown architecture {arch!r}")


def _decoder(arch: str, in_channels: int) -> nn.Sequential:
    if arch == "ref15":
        return nn.Sequential(
            nn.ConvTranspose2d(in_channels, 64, 3, stride=2),
            ResidualBlock(64),
            nn.ConvTranspose2d(64, 64, 4, stride=2),
            ResidualBlock(64),
            nn.ConvTranspose2d(64, 1, 4, stride=2),
            _Crop(128),
            nn.Sigmoid(),
        )
    if arch == "ref4":
        layers: list[nn.Module] = [nn.ConvTranspose2d(in_channels, 64, 3, stride=2)]
        for _ in range(3):
            layers += [ResidualBlock(64), nn.ConvTranspose2d(64, 64, 3, stride=2)]
        layers += [
            ResidualBlock(64),
            nn.ConvTranspose2d(64, 1, 3, stride=2),
            _Crop(128),
            nn.Sigmoid(),
        ]
        return nn.Sequential(*layers)
    if arch == "desk":
        return nn.Sequential(
            nn.ConvTranspose2d(in_channels, 64, 3, stride=2),
            ResidualBlock(64),
            nn.ConvTranspose2d(64, 1, 4, stride=2),
            _Crop(32),
            nn.Sigmoid(),
        )
    if arch == "tiny":
        return nn.Sequential(nn.ConvTranspose2d(in_channels, 1, 4, stride=4), nn.Sigmoid())
    raise ValueError(f"unknown architecture {arch!r}")


ARCHS = {
    "ref15": {"input": 128, "latent_hw": 15},
    "ref4": {"input": 128, "latent_hw": 4},
    "desk": {"input": 32, "latent_hw": 8},
    "tiny": {"input": 8, "latent_hw": 2},
}


class ConvVae(nn.Module):
    """Encoder/decoder pair with a Bernoulli or Gaussian latent map.

    ``encode`` returns logits (Bernoulli) or (mean, logvar) (Gaussian);
    ``decode`` maps a latent map to per-pixel Bernoulli means in (0, 1).
    The Bernoulli prior is an independent Bernoulli(prior_mu) per latent;
    the Gaussian prior is a standard normal.
    """

    def __init__(
        self,
        arch: str = "desk",
        latent_channels: int = 20,
        kind: str = "bernoulli",
        prior_mu: float = 0.5,
    ):
        super().__init__()
        if kind not in ("bernoulli", "gaussian"):
            raise ValueError(f"unknown latent kind {kind!r}")
        spec = ARCHS[arch]
        self.arch = arch
        self.kind = kind
        self.prior_mu = prior_mu
        self.latent_channels = latent_channels
        self.input_size = spec["input"]
        self.latent_hw = spec["latent_hw"]
        head = latent_channels if kind == "bernoulli" else 2 * latent_channels
        self.encoder = _encoder(arch, head)
        self.decoder = _decoder(arch, latent_channels)

    @property
    def latent_spec(self) -> tuple[int, int, int]:
        return (self.latent_hw, self.latent_hw, self.latent_channels)

    def encode(self, x: torch.Tensor):
        out = self.encoder(x)
        if self.kind == "bernoulli":
            return out
        mean, logvar = out.chunk(2, dim=1)
        return mean, logvar

    def encode_probs(self, x: torch.Tensor) -> torch.Tensor:
        """Deterministic posterior map used at planning time (no sampling)."""
        if self.kind == "bernoulli":
            return torch.sigmoid(self.encode(x))
        return self.encode(x)[0]

    def decode(self, z: torch.Tensor) -> torch.Tensor:
        return self.decoder(z)


def build_vae(
    arch: str = "desk",
    latent_channels: int = 20,
    kind: str = "bernoulli",
    seed: int | None = None,
) -> ConvVae:
    if seed is not None:
        torch.manual_seed(seed)
    return ConvVae(arch=arch, latent_channels=latent_channels, kind=kind)
