"""Reference disparity network and checkpoint I/O.

A small 4-level convolutional encoder-decoder with skip connections stands in
for the much larger published baselines; the training machinery only relies
on the contract: image in, bounded strictly positive disparity out,
differentiable in the parameters.
"""

from __future__ import annotations

import os
import random
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from wxdepth.exceptions import ConfigurationError, DataError

CHECKPOINT_FORMAT = "wxdepth-checkpoint-v1"


@dataclass(frozen=True)
class ModelConfig:
    width: int
    height: int
    d_min: float = 0.5
    d_max: float | None = None
    base_channels: int = 16

    def __post_init__(self):
        if self.width % 8 or self.height % 8:
            raise ConfigurationError("width and height must be multiples of 8")
        if self.d_max is None:
            object.__setattr__(self, "d_max", self.width / 3.0)
        if not (0 < self.d_min < self.d_max < self.width):
            raise ConfigurationError("need 0 < d_min < d_max < width")


def _conv_block(c_in: int, c_out: int, stride: int = 1) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1),
        nn.ELU(inplace=True),
        nn.Conv2d(c_out, c_out, 3, padding=1),
        nn.ELU(inplace=True),
    )


class DepthNetwork(nn.Module):
    """Image -> disparity map, strictly inside (d_min, d_max) via a scaled sigmoid."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        c = config.base_channels
        self.enc0 = _conv_block(3, c)
        self.enc1 = _conv_block(c, 2 * c, stride=2)
        self.enc2 = _conv_block(2 * c, 4 * c, stride=2)
        self.enc3 = _conv_block(4 * c, 8 * c, stride=2)
        self.dec2 = _conv_block(8 * c + 4 * c, 4 * c)
        self.dec1 = _conv_block(4 * c + 2 * c, 2 * c)
        self.dec0 = _conv_block(2 * c + c, c)
        self.head = nn.Conv2d(c, 1, 3, padding=1)
        # start near the low end of the disparity range: large initial
        # disparities put the warp far outside the photometric basin
        nn.init.constant_(self.head.bias, -3.0)

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        if image.dim() != 4 or image.shape[1] != 3:
            raise ConfigurationError(f"expected (B, 3, H, W) input, got {tuple(image.shape)}")
        if image.shape[2] != self.config.height or image.shape[3] != self.config.width:
            raise ConfigurationError(
                f"input is {tuple(image.shape[2:])} but the network was built for "
                f"{(self.config.height, self.config.width)}"
            )
        x0 = self.enc0(image)
        x1 = self.enc1(x0)
        x2 = self.enc2(x1)
        x3 = self.enc3(x2)
        u2 = self.dec2(torch.cat([F.interpolate(x3, scale_factor=2, mode="nearest"), x2], 1))
        u1 = self.dec1(torch.cat([F.interpolate(u2, scale_factor=2, mode="nearest"), x1], 1))
        u0 = self.dec0(torch.cat([F.interpolate(u1, scale_factor=2, mode="nearest"), x0], 1))
        gate = torch.sigmoid(self.head(u0))
        return self.config.d_min + (self.config.d_max - self.config.d_min) * gate

    def num_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())


def collect_rng_state() -> dict:
    return {
        "torch": torch.get_rng_state(),
        "numpy": np.random.get_state(),
        "python": random.getstate(),
    }


def _atomic_save(payload: dict, path: Path) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    os.close(fd)
    try:
        torch.save(payload, tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def save_checkpoint(
    path: str | Path,
    net: DepthNetwork,
    optimizer: torch.optim.Optimizer | None = None,
    curriculum: dict | None = None,
    weight_state: dict | None = None,
    epoch: int = 0,
    train_config: dict | None = None,
    extra: dict | None = None,
) -> Path:
    """Write a self-describing training checkpoint atomically."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "model_config": asdict(net.config),
        "model_state": net.state_dict(),
        "optimizer_state": optimizer.state_dict() if optimizer is not None else None,
        "curriculum": curriculum,
        "weight_state": weight_state,
        "epoch": epoch,
        "train_config": train_config,
        "extra": extra or {},
        "rng": collect_rng_state(),
    }
    _atomic_save(payload, path)
    return path


def load_checkpoint(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise DataError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:  # corrupt file
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"{path} is not a recognized checkpoint")
    return payload


def build_network_from_checkpoint(payload: dict) -> DepthNetwork:
    net = DepthNetwork(ModelConfig(**payload["model_config"]))
    net.load_state_dict(payload["model_state"])
    return net


def restore_into(net: DepthNetwork, payload: dict) -> None:
    """Load checkpoint weights into an existing network, verifying the architecture."""
    saved = payload["model_config"]
    current = asdict(net.config)
    for key, value in current.items():
        if saved.get(key) != value:
            raise ConfigurationError(
                f"checkpoint architecture mismatch on '{key}': saved {saved.get(key)!r}, "
                f"current {value!r}"
            )
    net.load_state_dict(payload["model_state"])
