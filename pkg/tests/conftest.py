import numpy as np
import pytest
import torch

from wxdepth.geometry import CameraRig, default_rig
from wxdepth.synthdata import (
    Sample,
    augment_dataset,
    generate_dataset,
    generate_scene,
    render_stereo,
)

torch.set_num_threads(2)


def small_rig(width=64, height=32) -> CameraRig:
    return default_rig(width, height)


def to_tensor(image: np.ndarray) -> torch.Tensor:
    """(H, W, C) -> (1, C, H, W) keeping dtype."""
    return torch.from_numpy(np.ascontiguousarray(image.transpose(2, 0, 1)))[None]


@pytest.fixture(scope="session")
def rig():
    return small_rig()


@pytest.fixture(scope="session")
def rendered_sample(rig) -> Sample:
    scene = generate_scene(7, rig)
    return render_stereo(scene, scene_id="scene_00000", frame_id="0000")


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """Six 64x32 scenes with all weather variants; shared by trainer/eval tests."""
    root = tmp_path_factory.mktemp("tiny_dataset")
    generate_dataset(root, num_scenes=6, seed=11, rig=small_rig())
    augment_dataset(root, seed=5)
    return root


@pytest.fixture(scope="session")
def clear_only_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("clear_only")
    generate_dataset(root, num_scenes=3, seed=3, rig=small_rig())
    return root
