"""Camera model, disparity/depth conversion, and differentiable view synthesis.

All warps assume a rectified stereo rig, so view synthesis reduces to a
horizontal epipolar shift by disparity.  The general backproject-transform-
project path is also provided (``warp`` with ``method="projective"``) and
agrees with the shortcut on rectified rigs.  Sampling is bilinear everywhere;
out-of-bounds samples are border-clamped for values but excluded from the
validity mask.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from wxdepth.exceptions import ConfigurationError
from wxdepth.validation import check_depth, check_disparity, check_same_shape, ensure_bchw

RIGHT_TO_LEFT = "right_to_left"
LEFT_TO_RIGHT = "left_to_right"


def _rectified_transform(baseline: float) -> np.ndarray:
    # right-camera coordinates to left-camera coordinates: X_l = X_r + (b, 0, 0)
    t = np.eye(4, dtype=np.float64)
    t[0, 3] = baseline
    return t


@dataclass
class CameraRig:
    """Intrinsics and stereo extrinsics of a rectified pair.

    ``T_rl`` maps right-camera coordinates into the left-camera frame; the
    left camera is the world origin and the right camera sits ``baseline``
    meters along +x.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    baseline: float
    width: int
    height: int
    T_rl: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self):
        if self.T_rl is None:
            self.T_rl = _rectified_transform(self.baseline)
        self.T_rl = np.asarray(self.T_rl, dtype=np.float64)
        self.validate()

    def validate(self) -> None:
        if self.fx <= 0 or self.fy <= 0 or self.baseline <= 0:
            raise ConfigurationError("fx, fy, and baseline must be positive")
        if not (0 <= self.cx < self.width) or not (0 <= self.cy < self.height):
            raise ConfigurationError("principal point must lie inside the image")
        if self.T_rl.shape != (4, 4):
            raise ConfigurationError("T_rl must be a 4x4 transform")
        round_trip = self.T_rl @ self.T_lr
        if np.abs(round_trip - np.eye(4)).max() > 1e-9:
            raise ConfigurationError("T_rl composed with its inverse is not the identity")

    @property
    def T_lr(self) -> np.ndarray:
        return np.linalg.inv(self.T_rl)

    @property
    def intrinsics(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]],
            dtype=np.float64,
        )

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "baseline": self.baseline,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraRig":
        return cls(
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            baseline=float(d["baseline"]),
            width=int(d["width"]),
            height=int(d["height"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "CameraRig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def default_rig(width: int = 192, height: int = 64) -> CameraRig:
    """Desk-scale rig: a road-scene baseline with the focal length chosen so
    absolute pixel disparities match full-scale rigs (a center crop, not a
    downscale).  Keeps scene disparities inside the network's output range."""
    return CameraRig(
        fx=3.75 * width,
        fy=3.75 * width,
        cx=(width - 1) / 2.0,
        cy=(height - 1) / 2.0,
        baseline=0.54,
        width=width,
        height=height,
    )


def disparity_to_depth(disparity: torch.Tensor, rig: CameraRig, eps: float = 1e-6) -> torch.Tensor:
    """depth = baseline * fx / disparity, elementwise and differentiable."""
    check_disparity(disparity, eps=eps)
    return rig.baseline * rig.fx / disparity


def depth_to_disparity(depth: torch.Tensor, rig: CameraRig) -> torch.Tensor:
    """Inverse of :func:`disparity_to_depth`."""
    check_depth(depth)
    return rig.baseline * rig.fx / depth


def _sample_bilinear(source: torch.Tensor, x: torch.Tensor, y: torch.Tensor):
    """Sample ``source`` (B,C,H,W) at pixel coordinates ``x``/``y`` (B,1,H,W)."""
    _, _, h, w = source.shape
    gx = 2.0 * x / (w - 1) - 1.0
    gy = 2.0 * y / (h - 1) - 1.0
    grid = torch.cat([gx, gy], dim=1).permute(0, 2, 3, 1)
    warped = F.grid_sample(source, grid, mode="bilinear", padding_mode="border", align_corners=True)
    # tolerance absorbs float round-off at the exact border (values there are
    # border-clamped and exact anyway)
    tol = 1e-6
    valid = (x >= -tol) & (x <= w - 1 + tol) & (y >= -tol) & (y <= h - 1 + tol)
    return warped, valid


def _pixel_grid(b: int, h: int, w: int, dtype, device):
    ys, xs = torch.meshgrid(
        torch.arange(h, dtype=dtype, device=device),
        torch.arange(w, dtype=dtype, device=device),
        indexing="ij",
    )
    return xs.expand(b, 1, h, w), ys.expand(b, 1, h, w)


def warp_disparity(source: torch.Tensor, shift: torch.Tensor, direction: str = RIGHT_TO_LEFT):
    """Horizontal epipolar warp of ``source`` by a per-pixel disparity shift.

    ``right_to_left`` reconstructs the left view by sampling the right image
    at ``x - shift``; ``left_to_right`` samples the left image at ``x + shift``.
    A zero shift is the identity.  Returns ``(warped, valid_mask)``.
    """
    source = ensure_bchw(source)
    shift = ensure_bchw(shift)
    b, _, h, w = source.shape
    if shift.shape[0] != b or shift.shape[2:] != (h, w):
        raise ConfigurationError(
            f"disparity shape {tuple(shift.shape)} does not match source {tuple(source.shape)}"
        )
    if direction not in (RIGHT_TO_LEFT, LEFT_TO_RIGHT):
        raise ConfigurationError(f"unknown warp direction '{direction}'")
    xs, ys = _pixel_grid(b, h, w, shift.dtype, shift.device)
    sample_x = xs - shift if direction == RIGHT_TO_LEFT else xs + shift
    return _sample_bilinear(source, sample_x, ys)


def _warp_projective(source: torch.Tensor, depth: torch.Tensor, rig: CameraRig, direction: str):
    """Backproject-transform-project warp; matches the shortcut on rectified rigs."""
    b, _, h, w = source.shape
    dtype, device = depth.dtype, depth.device
    k = torch.as_tensor(rig.intrinsics, dtype=dtype, device=device)
    k_inv = torch.linalg.inv(k)
    # depth lives in the target view; move its points into the source camera
    t = rig.T_lr if direction == RIGHT_TO_LEFT else rig.T_rl
    t = torch.as_tensor(t, dtype=dtype, device=device)

    xs, ys = _pixel_grid(b, h, w, dtype, device)
    ones = torch.ones_like(xs)
    pix = torch.stack([xs, ys, ones], dim=2).reshape(b, 1, 3, h * w)
    rays = k_inv[None, None] @ pix
    points = rays * depth.reshape(b, 1, 1, h * w)
    points_h = torch.cat([points, torch.ones_like(points[:, :, :1])], dim=2)
    moved = (t[None, None] @ points_h)[:, :, :3]
    projected = k[None, None] @ moved
    z = projected[:, :, 2:3].clamp(min=1e-9)
    uv = projected[:, :, :2] / z
    sample_x = uv[:, :, 0].reshape(b, 1, h, w)
    sample_y = uv[:, :, 1].reshape(b, 1, h, w)
    return _sample_bilinear(source, sample_x, sample_y)


def warp(
    source: torch.Tensor,
    depth: torch.Tensor,
    rig: CameraRig,
    direction: str = RIGHT_TO_LEFT,
    method: str = "shift",
):
    """Synthesize the target view from ``source`` using the target-view depth.

    Returns ``(warped, valid_mask)``; differentiable in ``source`` and
    ``depth``.  ``method="shift"`` is the rectified-stereo default,
    ``"projective"`` the general camera path.
    """
    source = ensure_bchw(source)
    depth = ensure_bchw(depth)
    check_depth(depth)
    if source.shape[2] != rig.height or source.shape[3] != rig.width:
        raise ConfigurationError(
            f"source is {tuple(source.shape[2:])} but the rig expects {(rig.height, rig.width)}"
        )
    check_same_shape(source[:, :1], depth, "source and depth")
    if method == "shift":
        return warp_disparity(source, rig.baseline * rig.fx / depth, direction)
    if method == "projective":
        if direction not in (RIGHT_TO_LEFT, LEFT_TO_RIGHT):
            raise ConfigurationError(f"unknown warp direction '{direction}'")
        return _warp_projective(source, depth, rig, direction)
    raise ConfigurationError(f"unknown warp method '{method}'")


def semi_augmented_warp(
    clear_source: torch.Tensor,
    depth_from_augmented: torch.Tensor,
    rig: CameraRig,
    direction: str = RIGHT_TO_LEFT,
    method: str = "shift",
):
    """Warp the clear reference view with depth predicted from an augmented input.

    The computation is exactly :func:`warp`; the contract is that downstream
    photometric comparison also uses the clear target image, so weather only
    enters through the depth prediction, never through appearance.
    """
    return warp(clear_source, depth_from_augmented, rig, direction=direction, method=method)
