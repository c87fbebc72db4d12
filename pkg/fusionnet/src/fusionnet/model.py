"""Early- and mid-fusion 2D U-Nets with a 6-class softmax output.

Both variants share the block grammar: a block is two 3x3 convolutions, each
followed by batch norm and a leaky ReLU. An encoder is 4 such blocks with
2x2 max-pooling between them plus a two-convolution bottleneck, i.e. exactly
10 convolutional layers per encoder. Early fusion stacks all modalities into
one multichannel input; mid fusion runs one single-channel encoder per
modality and concatenates the branch features after the 10th convolution
(and level-wise for the skip connections), feeding one shared decoder.
"""

from __future__ import annotations

import torch
from torch import nn

from .config import N_BLOCKS, N_CLASSES, ModelConfig

_POOL_FACTOR = 2**N_BLOCKS  # input height/width must be divisible by this


class ConvBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, slope: float):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(in_ch, out_ch, 3, padding=1, bias=False),
            nn.BatchNorm2d(out_ch),
            nn.LeakyReLU(slope, inplace=True),
            nn.Conv2d(out_ch, out_ch, 3, padding=1, bias=False),
            nn.BatchNorm2d(out_ch),
            nn.LeakyReLU(slope, inplace=True),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class Encoder(nn.Module):
    """4 down blocks and the bottleneck block (conv layers 9 and 10)."""

    def __init__(self, in_ch: int, base: int, slope: float):
        super().__init__()
        self.blocks = nn.ModuleList()
        prev = in_ch
        for level in range(N_BLOCKS):
            self.blocks.append(ConvBlock(prev, base * 2**level, slope))
            prev = base * 2**level
        self.pool = nn.MaxPool2d(2)
        self.bottleneck = ConvBlock(prev, base * 2**N_BLOCKS, slope)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, list[torch.Tensor]]:
        skips = []
        for block in self.blocks:
            x = block(x)
            skips.append(x)
            x = self.pool(x)
        return self.bottleneck(x), skips


class Decoder(nn.Module):
    """Shared decoder: transpose-conv upsampling, skip concatenation, 1x1 head."""

    def __init__(self, bottom_ch: int, skip_chs: list[int], base: int, slope: float):
        super().__init__()
        self.ups = nn.ModuleList()
        self.blocks = nn.ModuleList()
        prev = bottom_ch
        for level in reversed(range(N_BLOCKS)):
            out = base * 2**level
            self.ups.append(nn.ConvTranspose2d(prev, out, 2, stride=2))
            self.blocks.append(ConvBlock(out + skip_chs[level], out, slope))
            prev = out
        self.head = nn.Conv2d(prev, N_CLASSES, 1)

    def forward(self, x: torch.Tensor, skips: list[torch.Tensor]) -> torch.Tensor:
        for up, block, skip in zip(self.ups, self.blocks, reversed(skips)):
            x = block(torch.cat([up(x), skip], dim=1))
        return self.head(x)


def _check_input(x: torch.Tensor, n_modalities: int) -> None:
    if x.dim() != 4:
        raise ValueError(f"expected (batch, channels, H, W), got {tuple(x.shape)}")
    if x.shape[1] != n_modalities:
        raise ValueError(f"expected {n_modalities} input channels, got {x.shape[1]}")
    if x.shape[2] % _POOL_FACTOR or x.shape[3] % _POOL_FACTOR:
        raise ValueError(f"height/width must be divisible by {_POOL_FACTOR}, got {tuple(x.shape[2:])}")


class EarlyFusionUNet(nn.Module):
    """One encoder over the modality-stacked multichannel input."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        b = config.base_channels
        self.encoder = Encoder(config.n_modalities, b, config.leaky_slope)
        skip_chs = [b * 2**level for level in range(N_BLOCKS)]
        self.decoder = Decoder(b * 2**N_BLOCKS, skip_chs, b, config.leaky_slope)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        _check_input(x, self.config.n_modalities)
        bottom, skips = self.encoder(x)
        return torch.softmax(self.decoder(bottom, skips), dim=1)


class MidFusionUNet(nn.Module):
    """One single-channel encoder per modality, fused at the bottleneck."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        b, m = config.base_channels, config.n_modalities
        self.branches = nn.ModuleList(
            Encoder(1, b, config.leaky_slope) for _ in range(m)
        )
        skip_chs = [m * b * 2**level for level in range(N_BLOCKS)]
        self.decoder = Decoder(m * b * 2**N_BLOCKS, skip_chs, b, config.leaky_slope)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        _check_input(x, self.config.n_modalities)
        encoded = [branch(x[:, i : i + 1]) for i, branch in enumerate(self.branches)]
        bottom = torch.cat([bottom for bottom, _ in encoded], dim=1)
        skips = [
            torch.cat([enc_skips[level] for _, enc_skips in encoded], dim=1)
            for level in range(N_BLOCKS)
        ]
        return torch.softmax(self.decoder(bottom, skips), dim=1)


def build_model(config: ModelConfig) -> nn.Module:
    if config.fusion == "early":
        return EarlyFusionUNet(config)
    return MidFusionUNet(config)


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
