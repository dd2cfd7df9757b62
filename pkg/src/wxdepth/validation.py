"""Input validation helpers used by the public entry points."""

from __future__ import annotations

import numpy as np
import torch

from wxdepth.exceptions import ConfigurationError, DegenerateInputError


def ensure_bchw(x: torch.Tensor) -> torch.Tensor:
    """Promote an HxW or CxHxW tensor to BxCxHxW."""
    if x.dim() == 2:
        return x[None, None]
    if x.dim() == 3:
        return x[None]
    if x.dim() == 4:
        return x
    raise ConfigurationError(f"expected 2-4 dims, got shape {tuple(x.shape)}")


def check_same_shape(a: torch.Tensor, b: torch.Tensor, what: str = "inputs") -> None:
    if a.shape != b.shape:
        raise ConfigurationError(f"{what} have mismatched shapes {tuple(a.shape)} vs {tuple(b.shape)}")


def check_finite(x: torch.Tensor, what: str) -> None:
    if not torch.isfinite(x).all():
        raise DegenerateInputError(f"{what} contains non-finite values")


def check_disparity(d: torch.Tensor, d_max: float | None = None, eps: float = 1e-6) -> None:
    """Disparity maps must be finite, strictly positive, and below d_max."""
    check_finite(d, "disparity")
    values = d.detach()
    if float(values.min()) <= eps:
        raise DegenerateInputError(f"disparity contains values <= {eps}")
    if d_max is not None and float(values.max()) > d_max:
        raise DegenerateInputError(f"disparity exceeds configured maximum {d_max}")


def check_depth(depth: torch.Tensor) -> None:
    check_finite(depth, "depth")
    if float(depth.detach().min()) <= 0.0:
        raise DegenerateInputError("depth contains non-positive values")


def check_image_array(images: np.ndarray, height: int, width: int) -> np.ndarray:
    """Validate an (N, H, W, 3) float image stack in [0, 1]."""
    arr = np.asarray(images, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4 or arr.shape[-1] != 3:
        raise ConfigurationError(f"expected (N, H, W, 3) images, got shape {arr.shape}")
    if arr.shape[1] != height or arr.shape[2] != width:
        raise ConfigurationError(
            f"images are {arr.shape[1]}x{arr.shape[2]} but the model expects {height}x{width}"
        )
    if not np.isfinite(arr).all():
        raise DegenerateInputError("images contain non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ConfigurationError("image intensities must lie in [0, 1]")
    return arr
