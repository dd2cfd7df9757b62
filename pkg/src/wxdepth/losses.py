"""Photometric reconstruction loss, cross-stage depth contrast, and loss assembly."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import torch
import torch.nn.functional as F

from wxdepth.exceptions import ConfigurationError, DegenerateInputError
from wxdepth.validation import check_same_shape, ensure_bchw

_SSIM_C1 = 0.01 ** 2
_SSIM_C2 = 0.03 ** 2


@dataclass(frozen=True)
class PhotometricParams:
    """Weights of the SSIM and L1 terms plus the SSIM window size."""

    alpha: float = 0.85
    beta: float = 0.15
    ssim_window: int = 3

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta <= 0:
            raise ConfigurationError("alpha, beta must be >= 0 with a positive sum")
        if self.ssim_window < 3 or self.ssim_window % 2 == 0:
            raise ConfigurationError("ssim_window must be an odd integer >= 3")


def ssim(x: torch.Tensor, y: torch.Tensor, window: int = 3) -> torch.Tensor:
    """Per-pixel SSIM map with a box window and reflection padding."""
    pad = window // 2
    x = F.pad(x, (pad, pad, pad, pad), mode="reflect")
    y = F.pad(y, (pad, pad, pad, pad), mode="reflect")
    mu_x = F.avg_pool2d(x, window, 1)
    mu_y = F.avg_pool2d(y, window, 1)
    sigma_x = F.avg_pool2d(x ** 2, window, 1) - mu_x ** 2
    sigma_y = F.avg_pool2d(y ** 2, window, 1) - mu_y ** 2
    sigma_xy = F.avg_pool2d(x * y, window, 1) - mu_x * mu_y
    num = (2 * mu_x * mu_y + _SSIM_C1) * (2 * sigma_xy + _SSIM_C2)
    den = (mu_x ** 2 + mu_y ** 2 + _SSIM_C1) * (sigma_x + sigma_y + _SSIM_C2)
    return num / den


def photometric_loss(
    target: torch.Tensor,
    reconstructed: torch.Tensor,
    valid_mask: torch.Tensor | None = None,
    params: PhotometricParams = PhotometricParams(),
) -> torch.Tensor:
    """alpha * (1 - SSIM) / 2 + beta * L1, averaged over valid pixels."""
    target = ensure_bchw(target)
    reconstructed = ensure_bchw(reconstructed)
    check_same_shape(target, reconstructed, "target and reconstruction")
    ssim_term = torch.clamp((1.0 - ssim(target, reconstructed)) / 2.0, 0.0, 1.0).mean(1, True)
    l1_term = torch.abs(target - reconstructed).mean(1, True)
    per_pixel = params.alpha * ssim_term + params.beta * l1_term
    if valid_mask is None:
        return per_pixel.mean()
    valid_mask = ensure_bchw(valid_mask)
    check_same_shape(per_pixel, valid_mask, "loss map and valid mask")
    n_valid = valid_mask.sum()
    if int(n_valid) == 0:
        raise DegenerateInputError("photometric loss over an empty valid mask")
    return (per_pixel * valid_mask).sum() / n_valid.to(per_pixel.dtype)


def contrastive_loss(
    depth_aug: torch.Tensor,
    depth_cst: torch.Tensor,
    s_aug: int = 1,
    s_cst: int = 1,
    detach_enabled: bool = True,
) -> torch.Tensor:
    """log(|D_aug - D_cst| + 1) averaged over all pixels.

    With detach enabled, gradients are cut through the branch coming from the
    easier (earlier) stage: through ``depth_cst`` when ``s_aug >= s_cst`` and
    through ``depth_aug`` when ``s_cst > s_aug``.  Equal stages detach the
    contrast branch, matching its role as an inference-only reference.
    """
    check_same_shape(depth_aug, depth_cst, "depth maps")
    if s_aug not in (1, 2, 3) or s_cst not in (1, 2, 3):
        raise ConfigurationError("stage indices must be in {1, 2, 3}")
    if detach_enabled:
        if s_cst > s_aug:
            depth_aug = depth_aug.detach()
        else:
            depth_cst = depth_cst.detach()
    return torch.log(torch.abs(depth_aug - depth_cst) + 1.0).mean()


@dataclass(frozen=True)
class LossBundle:
    """The per-batch loss components and their weighted combination."""

    l_model: torch.Tensor
    l_cst: torch.Tensor
    w_curr: float
    l_backward: torch.Tensor

    def __post_init__(self):
        for name in ("l_model", "l_cst", "l_backward"):
            value = getattr(self, name)
            value = float(value.detach() if isinstance(value, torch.Tensor) else value)
            if not math.isfinite(value):
                raise DegenerateInputError(f"{name} is not finite")
            if value < 0:
                raise DegenerateInputError(f"{name} is negative")


def total_loss(l_model: torch.Tensor, l_cst: torch.Tensor, w_curr: float) -> LossBundle:
    """L_backward = L_model + w_curr * L_cst."""
    return LossBundle(l_model=l_model, l_cst=l_cst, w_curr=w_curr, l_backward=l_model + w_curr * l_cst)


@dataclass(frozen=True)
class ContrastWeightState:
    """Epoch-wise schedule of the contrast weight within one curriculum stage.

    The weight starts at ``w_cst`` on a fresh stage and doubles (by ``growth``)
    every ``period`` epochs, capped at ``w_max * w_cst``.  ``use_paper_max``
    replaces the cap with a floor, the literal reading of the published
    recurrence; it jumps straight to the cap and is off by default.
    """

    w_cst: float
    w_max: float = 10.0
    growth: float = 2.0
    period: int = 2
    w_curr: float = None  # type: ignore[assignment]
    r: int = 0
    use_paper_max: bool = False

    def __post_init__(self):
        if self.w_cst < 0 or self.w_max < 1 or self.growth <= 1 or self.period < 1:
            raise ConfigurationError("need w_cst >= 0, w_max >= 1, growth > 1, period >= 1")
        if self.w_curr is None:
            object.__setattr__(self, "w_curr", self.w_cst)
        if not (self.w_cst <= self.w_curr <= self.w_max * self.w_cst + 1e-12):
            raise ConfigurationError("w_curr must lie in [w_cst, w_max * w_cst]")


def update_contrast_weight(state: ContrastWeightState) -> ContrastWeightState:
    """Advance the weight schedule for the epoch with stage counter ``state.r``."""
    if state.r == 0:
        return replace(state, w_curr=state.w_cst)
    if state.r % state.period == 0:
        cap = state.w_max * state.w_cst
        grown = state.growth * state.w_curr
        w = max(cap, grown) if state.use_paper_max else min(cap, grown)
        return replace(state, w_curr=w)
    return state


def smoothness_loss(disparity: torch.Tensor, image: torch.Tensor) -> torch.Tensor:
    """Edge-aware first-order smoothness of mean-normalized disparity."""
    disparity = ensure_bchw(disparity)
    image = ensure_bchw(image)
    norm = disparity / (disparity.mean((2, 3), True) + 1e-7)
    grad_x = torch.abs(norm[:, :, :, :-1] - norm[:, :, :, 1:])
    grad_y = torch.abs(norm[:, :, :-1, :] - norm[:, :, 1:, :])
    img_gx = torch.abs(image[:, :, :, :-1] - image[:, :, :, 1:]).mean(1, True)
    img_gy = torch.abs(image[:, :, :-1, :] - image[:, :, 1:, :]).mean(1, True)
    return (grad_x * torch.exp(-img_gx)).mean() + (grad_y * torch.exp(-img_gy)).mean()
