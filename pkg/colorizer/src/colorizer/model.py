"""Encoder-decoder channel-restoration network.

Two plain 3x3 convolutions feed five channel-doubling downsampling blocks,
mirrored by five upsampling blocks with skip connections, two more 3x3
convolutions, and a final 1x1 projection squashed by tanh. Every convolution
except the first two is followed by batch normalization and a leaky
rectifier. Resolution changes go through anti-aliased (blurred) pooling and
upsampling, which keeps the network shift-tolerant so patch training
transfers to full frames.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

LEAKY_SLOPE = 0.2
_BLUR = torch.tensor([1.0, 2.0, 1.0])


def _blur_kernel(channels: int) -> torch.Tensor:
    k = torch.outer(_BLUR, _BLUR)
    k = k / k.sum()
    return k.expand(channels, 1, 3, 3).clone()


class BlurPool(nn.Module):
    """Binomial blur followed by stride-2 subsampling."""

    def __init__(self, channels: int):
        super().__init__()
        self.register_buffer("kernel", _blur_kernel(channels))
        self.channels = channels

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = F.pad(x, (1, 1, 1, 1), mode="reflect")
        return F.conv2d(x, self.kernel, stride=2, groups=self.channels)


class BlurUpsample(nn.Module):
    """Nearest 2x upsampling smoothed by the same binomial blur."""

    def __init__(self, channels: int):
        super().__init__()
        self.register_buffer("kernel", _blur_kernel(channels))
        self.channels = channels

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = F.interpolate(x, scale_factor=2, mode="nearest")
        x = F.pad(x, (1, 1, 1, 1), mode="reflect")
        return F.conv2d(x, self.kernel, groups=self.channels)


def _conv(in_ch: int, out_ch: int, normalized: bool = True) -> nn.Sequential:
    layers: list[nn.Module] = [nn.Conv2d(in_ch, out_ch, 3, padding=1)]
    if normalized:
        layers += [nn.BatchNorm2d(out_ch), nn.LeakyReLU(LEAKY_SLOPE, inplace=True)]
    return nn.Sequential(*layers)


class DownBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.convs = nn.Sequential(_conv(in_ch, out_ch), _conv(out_ch, out_ch))
        self.pool = BlurPool(out_ch)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        skip = self.convs(x)
        return skip, self.pool(skip)


class UpBlock(nn.Module):
    def __init__(self, in_ch: int, skip_ch: int, out_ch: int):
        super().__init__()
        self.up = BlurUpsample(in_ch)
        self.convs = nn.Sequential(_conv(in_ch + skip_ch, out_ch), _conv(out_ch, out_ch))

    def forward(self, x: torch.Tensor, skip: torch.Tensor) -> torch.Tensor:
        x = self.up(x)
        return self.convs(torch.cat([x, skip], dim=1))


class ChannelRestorer(nn.Module):
    """Fully convolutional restorer; output is affinely mapped tanh in [0, 1].

    Input spatial dimensions must be divisible by 2**depth; callers pad and
    crop (see :mod:`colorizer.infer`).
    """

    def __init__(self, in_channels: int = 2, out_channels: int = 1,
                 base_width: int = 32, depth: int = 5):
        super().__init__()
        if depth < 1 or base_width < 1:
            raise ValueError("depth and base_width must be >= 1")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.base_width = base_width
        self.depth = depth

        # the first two convolutions carry no normalization or activation
        self.stem = nn.Sequential(
            _conv(in_channels, base_width, normalized=False),
            _conv(base_width, base_width, normalized=False),
        )
        widths = [base_width * 2 ** i for i in range(depth + 1)]
        self.downs = nn.ModuleList(
            DownBlock(widths[i], widths[i + 1]) for i in range(depth))
        self.ups = nn.ModuleList(
            UpBlock(widths[i + 1], widths[i + 1], widths[i])
            for i in reversed(range(depth)))
        self.head = nn.Sequential(
            _conv(widths[0], widths[0]), _conv(widths[0], widths[0]),
            nn.Conv2d(widths[0], out_channels, 1))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        stride = 2 ** self.depth
        if x.shape[-1] % stride or x.shape[-2] % stride:
            raise ValueError(
                f"input {tuple(x.shape[-2:])} not divisible by {stride}; pad first")
        x = self.stem(x)
        skips = []
        for down in self.downs:
            skip, x = down(x)
            skips.append(skip)
        for up, skip in zip(self.ups, reversed(skips)):
            x = up(x, skip)
        return 0.5 * (torch.tanh(self.head(x)) + 1.0)
