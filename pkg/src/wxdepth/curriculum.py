"""Three-stage difficulty ladder, contrast-pair sampling, and the patience scheduler.

Stage 1 trains on jittered clear frames and contrasts two jitters of the same
frame (1 mode).  Stage 2 trains on magnitude-1 weather against the clear frame
(3 modes).  Stage 3 trains on magnitude-2 weather against independently chosen
magnitude-1 weather (9 modes).  The scheduler watches the epoch mean of the
self-supervised loss only: an increase beyond ``threshold`` costs one patience
point, and exhausting the stage's patience advances the stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from wxdepth.augmentation import VariantId
from wxdepth.exceptions import ConfigurationError, DegenerateInputError

MAX_LEVEL = 3

CLEAR_JITTER = "clear_jitter"

_TRAIN_VARIANTS = {
    1: (CLEAR_JITTER,),
    2: ("rain_1", "snow_1", "fog_1"),
    3: ("rain_2", "snow_2", "fog_2"),
}
_CONTRAST_VARIANTS = {
    1: (CLEAR_JITTER,),
    2: ("clear_0",),
    3: ("rain_1", "snow_1", "fog_1"),
}


@dataclass(frozen=True)
class StageSpec:
    """Legal training/contrast variants and the patience of one stage."""

    level: int
    train_variants: tuple
    contrast_variants: tuple
    patience: int | None  # None: patience never fires (budget-only stop)

    @property
    def mode_count(self) -> int:
        return len(self.train_variants) * len(self.contrast_variants)


def stage_variants(level: int, patience: int | None = 1) -> StageSpec:
    if level not in (1, 2, 3):
        raise ConfigurationError(f"curriculum level must be 1, 2, or 3, got {level}")
    return StageSpec(
        level=level,
        train_variants=_TRAIN_VARIANTS[level],
        contrast_variants=_CONTRAST_VARIANTS[level],
        patience=patience,
    )


def default_stage_specs(p1: int = 1, p2: int = 1, p3: int | None = None) -> dict:
    return {
        1: stage_variants(1, p1),
        2: stage_variants(2, p2),
        3: stage_variants(3, p3),
    }


@dataclass(frozen=True)
class ContrastPlan:
    """The (training variant, contrast variant) pairing active for one batch."""

    train_variant: str
    contrast_variant: str
    s_aug: int
    s_cst: int
    detach_branch: str = "contrast"
    train_jitter_seed: int | None = None
    contrast_jitter_seed: int | None = None

    @property
    def mode(self) -> tuple:
        return (self.train_variant, self.contrast_variant)

    def __post_init__(self):
        if self.s_cst > self.s_aug:
            raise ConfigurationError("contrast stage must not exceed the training stage")


def variant_file_name(variant: str) -> str:
    """Map a plan variant id to the on-disk variant name (jitter is on the fly)."""
    return "clear_0" if variant == CLEAR_JITTER else variant


def sample_contrast_plan(level: int, rng: np.random.Generator | int) -> ContrastPlan:
    """Draw one of the stage's contrast modes uniformly at random."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    if level == 1:
        seed_a, seed_b = (int(s) for s in rng.integers(0, 2 ** 31 - 1, size=2))
        return ContrastPlan(
            train_variant=CLEAR_JITTER,
            contrast_variant=CLEAR_JITTER,
            s_aug=1,
            s_cst=1,
            train_jitter_seed=seed_a,
            contrast_jitter_seed=seed_b,
        )
    if level == 2:
        train = _TRAIN_VARIANTS[2][rng.integers(0, 3)]
        return ContrastPlan(train_variant=train, contrast_variant="clear_0", s_aug=2, s_cst=1)
    if level == 3:
        train = _TRAIN_VARIANTS[3][rng.integers(0, 3)]
        contrast = _CONTRAST_VARIANTS[3][rng.integers(0, 3)]
        return ContrastPlan(train_variant=train, contrast_variant=contrast, s_aug=3, s_cst=2)
    raise ConfigurationError(f"curriculum level must be 1, 2, or 3, got {level}")


class Action(Enum):
    STAY = "stay"
    ADVANCE = "advance"
    FINISHED = "finished"


@dataclass(frozen=True)
class EpochOutcome:
    action: Action
    epoch_mean: float
    # set when the new stage is the last one and the finished stage had
    # patience >= 3: the trainer should reload this epoch's checkpoint
    reload_best_epoch: int | None = None


@dataclass(frozen=True)
class CurriculumState:
    """Scheduler bookkeeping: stage, patience, and per-stage loss history."""

    level: int = 1
    patience: int = 0
    epochs_in_stage: int = 0  # r
    threshold: float = 0.0
    batch_losses: tuple = field(default_factory=tuple)  # current epoch
    epoch_means: tuple = field(default_factory=tuple)  # current stage
    best_epoch: int | None = None
    best_mean: float | None = None

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "patience": self.patience,
            "epochs_in_stage": self.epochs_in_stage,
            "threshold": self.threshold,
            "batch_losses": list(self.batch_losses),
            "epoch_means": list(self.epoch_means),
            "best_epoch": self.best_epoch,
            "best_mean": self.best_mean,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CurriculumState":
        return cls(
            level=int(d["level"]),
            patience=int(d["patience"]),
            epochs_in_stage=int(d["epochs_in_stage"]),
            threshold=float(d["threshold"]),
            batch_losses=tuple(d["batch_losses"]),
            epoch_means=tuple(d["epoch_means"]),
            best_epoch=d["best_epoch"],
            best_mean=d["best_mean"],
        )


def record_batch_loss(state: CurriculumState, l_model: float) -> CurriculumState:
    value = float(l_model)
    if not math.isfinite(value):
        raise DegenerateInputError(f"non-finite batch loss {value!r}")
    return replace(state, batch_losses=state.batch_losses + (value,))


def end_of_epoch(state: CurriculumState, stage_specs: dict, epoch: int = 0):
    """Close the epoch: update patience and decide stay/advance/finished.

    Epoch means are tracked per stage and cleared on a switch, so the first
    epoch of a stage can never trigger patience.  Only the self-supervised
    loss feeds the decision; the contrast loss never enters.
    """
    if not state.batch_losses:
        raise DegenerateInputError("end_of_epoch called with no recorded batches")
    mean = sum(state.batch_losses) / len(state.batch_losses)
    means = state.epoch_means + (mean,)

    best_epoch, best_mean = state.best_epoch, state.best_mean
    if best_mean is None or mean < best_mean:
        best_epoch, best_mean = epoch, mean

    patience = state.patience
    if len(means) >= 2 and means[-1] - means[-2] > state.threshold:
        patience += 1

    spec = stage_specs[state.level]
    limit = spec.patience
    if limit is not None and patience >= limit:
        if state.level >= max(stage_specs):
            next_state = replace(state, batch_losses=(), epoch_means=means, patience=patience, best_epoch=best_epoch, best_mean=best_mean)
            return next_state, EpochOutcome(Action.FINISHED, mean)
        entering = state.level + 1
        reload_epoch = None
        if entering == max(stage_specs) and limit >= 3:
            reload_epoch = best_epoch
        next_state = replace(
            state,
            level=entering,
            patience=0,
            epochs_in_stage=0,
            batch_losses=(),
            epoch_means=(),
            best_epoch=None,
            best_mean=None,
        )
        return next_state, EpochOutcome(Action.ADVANCE, mean, reload_best_epoch=reload_epoch)

    next_state = replace(
        state,
        patience=patience,
        epochs_in_stage=state.epochs_in_stage + 1,
        batch_losses=(),
        epoch_means=means,
        best_epoch=best_epoch,
        best_mean=best_mean,
    )
    return next_state, EpochOutcome(Action.STAY, mean)


def replay_losses(epoch_means: list, stage_specs: dict, threshold: float = 0.0) -> list:
    """Run the scheduler over a scripted loss sequence.

    Returns one ``(epoch, level_before, action)`` triple per epoch, with
    epochs numbered from 1.  Handy for verifying transition timing without a
    model in the loop.
    """
    state = CurriculumState(threshold=threshold)
    out = []
    for i, value in enumerate(epoch_means, start=1):
        state = record_batch_loss(state, value)
        level_before = state.level
        state, outcome = end_of_epoch(state, stage_specs, epoch=i)
        out.append((i, level_before, outcome.action))
        if outcome.action is Action.FINISHED:
            break
    return out
