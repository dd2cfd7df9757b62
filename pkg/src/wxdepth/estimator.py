"""Scikit-learn style facade over the training loop.

``fit`` consumes a dataset directory (the package's on-disk contract) and
``predict`` maps image stacks to metric depth maps, so the trained model
slots into pipelines and parameter searches that expect the estimator API.
"""

from __future__ import annotations

import tempfile

import numpy as np
from sklearn.base import BaseEstimator

from wxdepth.evaluation import predict_depth
from wxdepth.exceptions import ConfigurationError
from wxdepth.trainer import TrainConfig, run_training
from wxdepth.synthdata import load_dataset
from wxdepth.validation import check_image_array


class CurriculumDepthEstimator(BaseEstimator):
    """Stereo depth estimator trained with the staged weather curriculum."""

    def __init__(
        self,
        mode: str = "curriculum_contrastive",
        epochs: int = 12,
        batch_size: int = 8,
        learning_rate: float = 1e-4,
        w_cst: float = 0.02,
        w_max: float = 10.0,
        threshold: float = 0.0,
        p1: int = 1,
        p2: int = 1,
        detach_enabled: bool = True,
        smoothness_weight: float = 1e-3,
        base_channels: int = 16,
        seed: int = 0,
        out_dir: str | None = None,
    ):
        self.mode = mode
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.w_cst = w_cst
        self.w_max = w_max
        self.threshold = threshold
        self.p1 = p1
        self.p2 = p2
        self.detach_enabled = detach_enabled
        self.smoothness_weight = smoothness_weight
        self.base_channels = base_channels
        self.seed = seed
        self.out_dir = out_dir

    def fit(self, dataset_root: str, y=None):
        """Train on a dataset directory; returns self."""
        out_dir = self.out_dir or tempfile.mkdtemp(prefix="wxdepth_fit_")
        config = TrainConfig(
            dataset_root=str(dataset_root),
            out_dir=out_dir,
            mode=self.mode,
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            w_cst=self.w_cst,
            w_max=self.w_max,
            threshold=self.threshold,
            p1=self.p1,
            p2=self.p2,
            detach_enabled=self.detach_enabled,
            smoothness_weight=self.smoothness_weight,
            base_channels=self.base_channels,
            seed=self.seed,
        )
        result = run_training(config)
        from wxdepth.model import build_network_from_checkpoint, load_checkpoint

        self.net_ = build_network_from_checkpoint(load_checkpoint(result.checkpoint_path))
        self.rig_ = load_dataset(dataset_root).rig
        self.checkpoint_path_ = result.checkpoint_path
        self.train_records_ = result.records
        return self

    def predict(self, X) -> np.ndarray:
        """Depth maps (N, H, W) in meters for an (N, H, W, 3) image stack in [0, 1]."""
        if not hasattr(self, "net_"):
            raise ConfigurationError("estimator is not fitted; call fit() first")
        images = check_image_array(X, self.rig_.height, self.rig_.width)
        return np.stack([predict_depth(self.net_, image, self.rig_) for image in images])
