"""Standard depth metrics and per-variant evaluation over a dataset."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
import torch

from wxdepth.exceptions import ConfigurationError, DegenerateInputError
from wxdepth.model import DepthNetwork, build_network_from_checkpoint, load_checkpoint
from wxdepth.synthdata import SynthDataset, load_dataset

METRIC_NAMES = ("absrel", "sqrel", "rmse", "rmselog", "a1", "a2", "a3")


@dataclass(frozen=True)
class MetricSet:
    absrel: float
    sqrel: float
    rmse: float
    rmselog: float
    a1: float
    a2: float
    a3: float

    def __post_init__(self):
        if not (self.a1 <= self.a2 <= self.a3):
            raise DegenerateInputError("accuracy ratios must satisfy a1 <= a2 <= a3")
        for name in ("absrel", "sqrel", "rmse", "rmselog"):
            if getattr(self, name) < 0:
                raise DegenerateInputError(f"{name} must be >= 0")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def compute_metrics(
    pred_depth: np.ndarray,
    gt_depth: np.ndarray,
    valid_mask: np.ndarray | None = None,
    depth_min: float = 1e-3,
    depth_max: float = 80.0,
) -> MetricSet:
    """The seven standard depth metrics over valid pixels.

    Both maps are clamped to ``[depth_min, depth_max]`` first; accuracy uses
    the 1.25^k ratio thresholds.
    """
    pred = np.clip(np.asarray(pred_depth, dtype=np.float64), depth_min, depth_max)
    gt = np.clip(np.asarray(gt_depth, dtype=np.float64), depth_min, depth_max)
    if pred.shape != gt.shape:
        raise ConfigurationError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    if valid_mask is not None:
        mask = np.asarray(valid_mask, dtype=bool)
        if mask.shape != gt.shape:
            raise ConfigurationError("valid mask shape does not match the depth maps")
        if not mask.any():
            raise DegenerateInputError("metrics over an empty valid mask")
        pred, gt = pred[mask], gt[mask]
    if pred.size == 0:
        raise DegenerateInputError("metrics over empty depth maps")

    err = pred - gt
    ratio = np.maximum(pred / gt, gt / pred)
    return MetricSet(
        absrel=float(np.mean(np.abs(err) / gt)),
        sqrel=float(np.mean(err ** 2 / gt)),
        rmse=float(np.sqrt(np.mean(err ** 2))),
        rmselog=float(np.sqrt(np.mean((np.log(pred) - np.log(gt)) ** 2))),
        a1=float(np.mean(ratio < 1.25)),
        a2=float(np.mean(ratio < 1.25 ** 2)),
        a3=float(np.mean(ratio < 1.25 ** 3)),
    )


def _mean_metric_set(sets: list) -> MetricSet:
    return MetricSet(**{name: float(np.mean([getattr(s, name) for s in sets])) for name in METRIC_NAMES})


def predict_depth(net: DepthNetwork, image: np.ndarray, rig) -> np.ndarray:
    """Network depth for one (H, W, 3) image in [0, 1]."""
    net.eval()
    with torch.no_grad():
        tensor = torch.from_numpy(np.ascontiguousarray(image.transpose(2, 0, 1))).float()[None]
        disparity = net(tensor)[0, 0].numpy().astype(np.float64)
    return rig.baseline * rig.fx / disparity


def evaluate(
    checkpoint: str | Path | DepthNetwork,
    dataset: str | Path | SynthDataset,
    variants: list | None = None,
    depth_min: float = 1e-3,
    depth_max: float = 80.0,
    median_scaling: bool = False,
) -> dict:
    """Per-variant metric table plus the cross-variant average row.

    Variants absent from the dataset map to ``None`` (reported, not skipped).
    Stereo training is metric-scaled, so median scaling defaults off.
    """
    if isinstance(checkpoint, DepthNetwork):
        net = checkpoint
    else:
        net = build_network_from_checkpoint(load_checkpoint(checkpoint))
    if not isinstance(dataset, SynthDataset):
        dataset = load_dataset(dataset)
    if variants is None:
        variants = list(dataset.variants)

    table: dict[str, MetricSet | None] = {}
    for variant in variants:
        if variant != "clear_0" and not dataset.has_variant(variant):
            table[variant] = None
            continue
        per_sample = []
        for index in range(len(dataset)):
            image = dataset.load_left(index, variant)
            gt = dataset.load_depth(index)
            pred = predict_depth(net, image, dataset.rig)
            if median_scaling:
                pred = pred * (np.median(gt) / np.median(pred))
            per_sample.append(compute_metrics(pred, gt, None, depth_min, depth_max))
        table[variant] = _mean_metric_set(per_sample)

    present = [m for m in table.values() if m is not None]
    table["average"] = _mean_metric_set(present) if present else None
    return table


def write_report(table: dict, path: str | Path) -> None:
    payload = {name: (m.as_dict() if m is not None else None) for name, m in table.items()}
    Path(path).write_text(json.dumps(payload, indent=2))
