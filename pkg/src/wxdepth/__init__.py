"""Self-supervised stereo depth estimation with a staged weather curriculum.

The package trains a small disparity network on procedurally generated
rectified stereo scenes.  Training difficulty is staged: photometric jitter
first, mild weather effects second, strong weather effects last.  A
cross-stage depth-consistency loss with a stop-gradient on the easier branch
keeps earlier knowledge alive, and a patience-based scheduler decides when to
move to the next stage.
"""

from wxdepth.geometry import CameraRig, disparity_to_depth, depth_to_disparity, warp, semi_augmented_warp
from wxdepth.losses import (
    ContrastWeightState,
    LossBundle,
    PhotometricParams,
    contrastive_loss,
    photometric_loss,
    total_loss,
    update_contrast_weight,
)
from wxdepth.curriculum import ContrastPlan, CurriculumState, StageSpec, sample_contrast_plan, stage_variants
from wxdepth.model import DepthNetwork, ModelConfig, load_checkpoint, save_checkpoint
from wxdepth.trainer import TrainConfig, run_training
from wxdepth.evaluation import MetricSet, compute_metrics, evaluate
from wxdepth.estimator import CurriculumDepthEstimator

__version__ = "0.1.0"
