"""Epoch/batch training loop: train step, contrast inference, scheduling, checkpoints.

One batch follows the same recipe in every mode: predict disparity from the
(possibly weather-augmented) left image, warp the clear right image with that
depth, and score the reconstruction against the clear left image.  In
``curriculum_contrastive`` mode each batch additionally runs a gradient-free
forward on the batch's contrast variant and penalizes depth disagreement,
weighted by the epoch schedule.  ``curriculum_only`` drops the contrast path;
``mixed`` drops the scheduler too and draws each batch's variant uniformly.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from wxdepth.augmentation import ALL_VARIANTS, CLEAR, jitter
from wxdepth.curriculum import (
    Action,
    ContrastPlan,
    CurriculumState,
    CLEAR_JITTER,
    default_stage_specs,
    record_batch_loss,
    end_of_epoch,
    sample_contrast_plan,
    variant_file_name,
)
from wxdepth.exceptions import ConfigurationError, DataError, DegenerateInputError
from wxdepth.geometry import CameraRig, RIGHT_TO_LEFT, disparity_to_depth, semi_augmented_warp
from wxdepth.losses import (
    ContrastWeightState,
    PhotometricParams,
    contrastive_loss,
    photometric_loss,
    smoothness_loss,
    total_loss,
    update_contrast_weight,
)
from wxdepth.model import (
    DepthNetwork,
    ModelConfig,
    build_network_from_checkpoint,
    load_checkpoint,
    restore_into,
    save_checkpoint,
)
from wxdepth.synthdata import SynthDataset, load_dataset

MODES = ("curriculum_contrastive", "curriculum_only", "mixed")


@dataclass(frozen=True)
class TrainConfig:
    dataset_root: str
    out_dir: str
    mode: str = "curriculum_contrastive"
    epochs: int = 12
    batch_size: int = 8
    learning_rate: float = 1e-4
    p1: int = 1
    p2: int = 1
    p3: int | None = None  # None: the last stage only ends with the epoch budget
    threshold: float = 0.0
    w_cst: float = 0.02
    w_max: float = 10.0
    growth: float = 2.0
    weight_period: int = 2
    detach_enabled: bool = True
    strict_weight_max: bool = False
    smoothness_weight: float = 1e-3
    jitter_strength: float = 0.2
    seed: int = 0
    base_channels: int = 16
    d_min: float = 0.5
    d_max: float | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got '{self.mode}'")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigurationError("batch_size and epochs must be >= 1")

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2))

    @classmethod
    def from_json(cls, path: str | Path) -> "TrainConfig":
        return cls(**json.loads(Path(path).read_text()))


@dataclass
class EpochRecord:
    epoch: int
    level: int
    r: int
    p: int
    w_curr: float
    mean_L_model: float
    mean_L_cst: float
    wall_s: float
    variant_counts: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "epoch": self.epoch,
                "level": self.level,
                "r": self.r,
                "p": self.p,
                "w_curr": self.w_curr,
                "mean_L_model": self.mean_L_model,
                "mean_L_cst": self.mean_L_cst,
                "wall_s": self.wall_s,
                "variant_counts": self.variant_counts,
            }
        )


@dataclass
class TrainResult:
    checkpoint_path: Path
    log_path: Path
    records: list
    recordkey: list  # per-epoch mean L_model, all epochs in order
    final_level: int


def _to_tensor(image: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(image.transpose(2, 0, 1))).float()


def _stack(images: list) -> torch.Tensor:
    return torch.stack([_to_tensor(im) for im in images])


def train_step(
    net: DepthNetwork,
    aug_left: torch.Tensor,
    clear_left: torch.Tensor,
    clear_right: torch.Tensor,
    rig: CameraRig,
    smoothness_weight: float = 1e-3,
    photometric_params: PhotometricParams = PhotometricParams(),
):
    """Forward on the augmented left image, photometric loss against the clear pair.

    Returns ``(depth_aug, l_model)``; gradients flow into the network through
    both the warp and the loss.
    """
    disparity = net(aug_left)
    depth = disparity_to_depth(disparity, rig)
    reconstructed, valid = semi_augmented_warp(clear_right, depth, rig, RIGHT_TO_LEFT)
    l_model = photometric_loss(clear_left, reconstructed, valid, photometric_params)
    if smoothness_weight > 0:
        l_model = l_model + smoothness_weight * smoothness_loss(disparity, clear_left)
    return depth, l_model


def inference_step(net: DepthNetwork, contrast_image: torch.Tensor, rig: CameraRig, track_gradients: bool = False):
    """Depth of the contrast variant; gradient-free unless explicitly tracked."""
    if track_gradients:
        return disparity_to_depth(net(contrast_image), rig)
    with torch.no_grad():
        return disparity_to_depth(net(contrast_image), rig)


def _epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, 9001, epoch]))


def _mixed_variants(dataset: SynthDataset) -> list:
    names = [CLEAR.name] + [v.name for v in ALL_VARIANTS if v.name != CLEAR.name and dataset.has_variant(v.name)]
    return names


def _load_batch_images(dataset: SynthDataset, indices, variant: str, jitter_seeds=None, jitter_strength=0.2):
    images = []
    for k, i in enumerate(indices):
        if variant == CLEAR_JITTER:
            image = jitter(dataset.load_left(i), jitter_seeds[k], strength=jitter_strength)
        elif variant == CLEAR.name:
            image = dataset.load_left(i)
        else:
            image = dataset.load_left(i, variant)
        images.append(image)
    return _stack(images)


def run_training(
    config: TrainConfig,
    net: DepthNetwork | None = None,
    resume_from: str | Path | None = None,
) -> TrainResult:
    """Run the full training loop and return the final checkpoint and report."""
    out_dir = Path(config.out_dir)
    ckpt_dir = out_dir / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "train_log.jsonl"

    dataset = load_dataset(config.dataset_root)
    rig = dataset.rig

    torch.manual_seed(config.seed)
    if net is None:
        net = DepthNetwork(
            ModelConfig(
                width=rig.width,
                height=rig.height,
                d_min=config.d_min,
                d_max=config.d_max,
                base_channels=config.base_channels,
            )
        )
    optimizer = torch.optim.Adam(net.parameters(), lr=config.learning_rate)

    stage_specs = default_stage_specs(config.p1, config.p2, config.p3)
    curriculum = CurriculumState(threshold=config.threshold)
    weight_state = ContrastWeightState(
        w_cst=config.w_cst,
        w_max=config.w_max,
        growth=config.growth,
        period=config.weight_period,
        use_paper_max=config.strict_weight_max,
    )
    start_epoch = 0
    records: list[EpochRecord] = []
    recordkey: list[float] = []

    if resume_from is not None:
        payload = load_checkpoint(resume_from)
        restore_into(net, payload)
        if payload["optimizer_state"] is not None:
            optimizer.load_state_dict(payload["optimizer_state"])
        curriculum = CurriculumState.from_dict(payload["curriculum"])
        weight_state = ContrastWeightState(**payload["weight_state"])
        start_epoch = payload["epoch"] + 1
        recordkey = list(payload.get("extra", {}).get("recordkey", []))
    else:
        log_path.unlink(missing_ok=True)

    use_curriculum = config.mode != "mixed"
    use_contrast = config.mode == "curriculum_contrastive"

    def check_stage_variants(level: int) -> None:
        spec = default_stage_specs()[level]
        needed = set(spec.train_variants)
        if use_contrast:
            needed |= set(spec.contrast_variants)
        dataset.require_variants(sorted({variant_file_name(n) for n in needed} - {CLEAR.name}))

    if use_curriculum:
        check_stage_variants(curriculum.level)

    photometric_params = PhotometricParams()
    mixed_pool = _mixed_variants(dataset) if config.mode == "mixed" else None
    last_ckpt: Path | None = None

    for epoch in range(start_epoch, config.epochs):
        t0 = time.perf_counter()
        rng = _epoch_rng(config.seed, epoch)
        order = rng.permutation(len(dataset))

        w_curr = 0.0
        if use_contrast:
            weight_state = update_contrast_weight(replace(weight_state, r=curriculum.epochs_in_stage))
            w_curr = weight_state.w_curr

        cst_sum, n_batches = 0.0, 0
        variant_counts: dict[str, int] = {}
        for lo in range(0, len(order), config.batch_size):
            indices = order[lo : lo + config.batch_size]
            plan: ContrastPlan | None = None
            if config.mode == "mixed":
                train_variant = mixed_pool[rng.integers(0, len(mixed_pool))]
                jitter_seeds = None
            else:
                plan = sample_contrast_plan(curriculum.level, rng)
                train_variant = plan.train_variant
                jitter_seeds = rng.integers(0, 2 ** 31 - 1, size=len(indices))

            clear_left = _load_batch_images(dataset, indices, CLEAR.name)
            clear_right = _stack([dataset.load_right(i) for i in indices])
            if train_variant == CLEAR_JITTER:
                seeds = [int(plan.train_jitter_seed) + int(s) for s in jitter_seeds]
                aug_left = _load_batch_images(dataset, indices, CLEAR_JITTER, seeds, config.jitter_strength)
            else:
                aug_left = _load_batch_images(dataset, indices, variant_file_name(train_variant))
            variant_counts[variant_file_name(train_variant)] = (
                variant_counts.get(variant_file_name(train_variant), 0) + 1
            )

            try:
                depth_aug, l_model = train_step(
                    net, aug_left, clear_left, clear_right, rig,
                    smoothness_weight=config.smoothness_weight,
                    photometric_params=photometric_params,
                )

                if use_contrast:
                    if plan.contrast_variant == CLEAR_JITTER:
                        seeds = [int(plan.contrast_jitter_seed) + int(s) for s in jitter_seeds]
                        cst_image = _load_batch_images(dataset, indices, CLEAR_JITTER, seeds, config.jitter_strength)
                    else:
                        cst_image = _load_batch_images(dataset, indices, variant_file_name(plan.contrast_variant))
                    depth_cst = inference_step(net, cst_image, rig, track_gradients=not config.detach_enabled)
                    l_cst = contrastive_loss(
                        depth_aug, depth_cst, plan.s_aug, plan.s_cst, detach_enabled=config.detach_enabled
                    )
                else:
                    l_cst = torch.zeros((), dtype=l_model.dtype)
                if not math.isfinite(float(l_model.detach())):
                    raise DegenerateInputError(f"non-finite training loss {float(l_model.detach())!r}")
            except DegenerateInputError as exc:
                raise DataError(
                    f"aborting epoch {epoch}: {exc}; last checkpoint: {last_ckpt}"
                ) from exc
            bundle = total_loss(l_model, l_cst, w_curr)
            optimizer.zero_grad()
            bundle.l_backward.backward()
            optimizer.step()

            curriculum = record_batch_loss(curriculum, float(l_model.detach()))
            cst_sum += float(l_cst.detach())
            n_batches += 1

        level_during_epoch = curriculum.level if use_curriculum else 0
        r_during_epoch = curriculum.epochs_in_stage
        if use_curriculum:
            curriculum, outcome = end_of_epoch(curriculum, stage_specs, epoch=epoch)
            epoch_mean = outcome.epoch_mean
        else:
            epoch_mean = sum(curriculum.batch_losses) / len(curriculum.batch_losses)
            curriculum = replace(curriculum, batch_losses=())
            outcome = None
        recordkey.append(epoch_mean)

        record = EpochRecord(
            epoch=epoch,
            level=level_during_epoch,
            r=r_during_epoch,
            p=curriculum.patience,
            w_curr=w_curr,
            mean_L_model=epoch_mean,
            mean_L_cst=cst_sum / max(n_batches, 1),
            wall_s=time.perf_counter() - t0,
            variant_counts=variant_counts,
        )
        records.append(record)
        with log_path.open("a") as fh:
            fh.write(record.to_json() + "\n")

        last_ckpt = save_checkpoint(
            ckpt_dir / f"epoch_{epoch:04d}.pt",
            net,
            optimizer,
            curriculum=curriculum.to_dict(),
            weight_state=asdict(weight_state),
            epoch=epoch,
            train_config=asdict(config),
            extra={"recordkey": list(recordkey)},
        )

        if outcome is not None and outcome.action is Action.ADVANCE:
            if outcome.reload_best_epoch is not None:
                best = ckpt_dir / f"epoch_{outcome.reload_best_epoch:04d}.pt"
                payload = load_checkpoint(best)
                restore_into(net, payload)
                if payload["optimizer_state"] is not None:
                    optimizer.load_state_dict(payload["optimizer_state"])
            check_stage_variants(curriculum.level)
        if outcome is not None and outcome.action is Action.FINISHED:
            break

    final = ckpt_dir / "last.pt"
    if last_ckpt is None:
        raise DataError("training produced no epochs; nothing to checkpoint")
    final.write_bytes(last_ckpt.read_bytes())
    return TrainResult(
        checkpoint_path=final,
        log_path=log_path,
        records=records,
        recordkey=recordkey,
        final_level=curriculum.level if use_curriculum else 0,
    )
