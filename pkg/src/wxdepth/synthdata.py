"""Procedural rectified stereo scenes with exact ground-truth depth.

Scenes are stacks of fronto-parallel textured rectangles (standalone planes
and the camera-facing faces of boxes) over a background plane.  Textures are
smooth sums of sinusoids evaluated in world coordinates, so both views sample
the same surface function and ground-truth depth is exact on every pixel:
rasterization assigns each pixel the depth of the frontmost rectangle, with
no interpolation anywhere.  Object depths are snapped to the 1/256 m grid so
the 16-bit depth PNGs round-trip losslessly.

On-disk layout (the stable external contract):

    root/rig.json
    root/<scene>/<frame>_<L|R>_<weather>_<mag>.png   8-bit RGB
    root/<scene>/<frame>_depth.png                   16-bit, meters = raw / 256
    root/<scene>/<frame>_nonocc.png                  optional test-oracle mask
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from PIL import Image

from wxdepth.augmentation import ALL_VARIANTS, CLEAR, VariantId, build_variant
from wxdepth.exceptions import ConfigurationError, DataError, MissingVariantError
from wxdepth.geometry import CameraRig, default_rig

DEPTH_SCALE = 256.0
LEFT, RIGHT = "L", "R"


def _snap_depth(z: float) -> float:
    return round(z * DEPTH_SCALE) / DEPTH_SCALE


@dataclass(frozen=True)
class TextureSpec:
    """Smooth per-channel texture: base color plus shared sinusoid pattern."""

    base: tuple  # per-channel base intensity
    chroma: tuple  # per-channel gain on the pattern
    freq_x: tuple  # cycles per meter, one entry per component
    freq_y: tuple
    phase: tuple
    amplitude: tuple

    def evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        pattern = np.zeros_like(x)
        for fx, fy, ph, a in zip(self.freq_x, self.freq_y, self.phase, self.amplitude):
            pattern += a * np.sin(2.0 * np.pi * (fx * x + fy * y) + ph)
        out = np.empty(x.shape + (3,), dtype=np.float64)
        for c in range(3):
            out[..., c] = self.base[c] + self.chroma[c] * pattern
        return np.clip(out, 0.0, 1.0)


@dataclass(frozen=True)
class SceneObject:
    """A fronto-parallel textured rectangle (a plane or a box front face)."""

    kind: str  # "plane" | "box"
    x: float  # center, left-camera coordinates (meters)
    y: float
    z: float  # depth (meters), snapped to the storage grid
    half_w: float
    half_h: float
    texture: TextureSpec


@dataclass(frozen=True)
class Scene:
    rig: CameraRig
    objects: tuple
    background_z: float
    background: TextureSpec

    def to_dict(self) -> dict:
        return {
            "rig": self.rig.to_dict(),
            "objects": [asdict(o) for o in self.objects],
            "background_z": self.background_z,
            "background": asdict(self.background),
        }


def _smooth_texture(rng: np.random.Generator, z: float, fx: float, checker: bool) -> TextureSpec:
    """Sinusoid mix, band-limited so bilinear warping stays below the 1e-2 oracle bound.

    One low-frequency component carries most of the contrast and two
    mid-frequency components add the local gradient structure the photometric
    loss needs.
    """
    n = 5
    cyc_px = np.concatenate(
        [
            rng.uniform(0.012, 0.035, size=2),
            rng.uniform(0.05, 0.095, size=2),
            rng.uniform(0.12, 0.16, size=1),
        ]
    )
    cyc_m = cyc_px * fx / z
    theta = rng.uniform(0, 2 * np.pi, size=n)
    if checker:
        theta[:2] = (0.0, np.pi / 2)
    amp = rng.uniform(0.5, 1.0, size=n) * np.array([1.5, 1.5, 1.0, 1.0, 0.6])
    amp = 0.34 * amp / amp.sum()
    return TextureSpec(
        base=tuple(rng.uniform(0.40, 0.58, size=3)),
        chroma=tuple(rng.uniform(0.65, 1.0, size=3)),
        freq_x=tuple(cyc_m * np.cos(theta)),
        freq_y=tuple(cyc_m * np.sin(theta)),
        phase=tuple(rng.uniform(0, 2 * np.pi, size=n)),
        amplitude=tuple(amp),
    )


def generate_scene(
    seed: int,
    rig: CameraRig | None = None,
    num_objects: int | None = None,
    min_depth: float = 2.0,
    max_depth: float = 80.0,
) -> Scene:
    """Seeded scene with 3-10 rectangles at distinct depths over a background."""
    rig = rig or default_rig()
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, 77]))
    if num_objects is None:
        num_objects = int(rng.integers(3, 11))
    background_z = _snap_depth(max_depth)

    # keep object disparities comfortably inside the network's output range
    # and occluded strips narrow enough for the photometric oracle
    z_floor = max(min_depth * 2.0, rig.baseline * rig.fx / (0.15 * rig.width))
    z_ceil = max_depth * 0.85
    if z_floor >= z_ceil:
        raise ConfigurationError("depth range too narrow for this rig")

    depths: list[float] = []
    while len(depths) < num_objects:
        # bias far: occluded strips scale with disparity, and the photometric
        # oracle needs them to stay a small fraction of the frame
        u = float(rng.random()) ** 0.6
        z = _snap_depth(z_floor + u * (z_ceil - z_floor))
        if all(abs(z - other) > 1.0 / DEPTH_SCALE for other in depths):
            depths.append(z)

    objects = []
    for z in depths:
        pw = rng.uniform(24, 72)
        ph = rng.uniform(12, 26)
        # place so the object stays visible in the right view too
        disparity = rig.baseline * rig.fx / z
        u = rng.uniform(min(8 + disparity, rig.width - 16), rig.width - 8)
        v = rng.uniform(6, rig.height - 6)
        kind = "box" if rng.random() < 0.5 else "plane"
        objects.append(
            SceneObject(
                kind=kind,
                x=(u - rig.cx) * z / rig.fx,
                y=(v - rig.cy) * z / rig.fy,
                z=z,
                half_w=pw / 2.0 * z / rig.fx,
                half_h=ph / 2.0 * z / rig.fy,
                texture=_smooth_texture(rng, z, rig.fx, checker=kind == "box"),
            )
        )
    background = _smooth_texture(rng, background_z, rig.fx, checker=False)
    return Scene(rig=rig, objects=tuple(objects), background_z=background_z, background=background)


def render_view(scene: Scene, view: str):
    """Rasterize one view; returns (image, depth, surface-id map)."""
    rig = scene.rig
    if view not in (LEFT, RIGHT):
        raise ConfigurationError(f"view must be '{LEFT}' or '{RIGHT}'")
    offset = rig.baseline if view == RIGHT else 0.0
    us, vs = np.meshgrid(np.arange(rig.width), np.arange(rig.height))

    def world(z: float):
        x = (us - rig.cx) * z / rig.fx + offset
        y = (vs - rig.cy) * z / rig.fy
        return x, y

    bx, by = world(scene.background_z)
    image = scene.background.evaluate(bx, by)
    depth = np.full((rig.height, rig.width), scene.background_z, dtype=np.float64)
    ids = np.zeros((rig.height, rig.width), dtype=np.int32)

    order = sorted(range(len(scene.objects)), key=lambda i: scene.objects[i].z, reverse=True)
    for idx in order:
        obj = scene.objects[idx]
        ox, oy = world(obj.z)
        inside = (np.abs(ox - obj.x) <= obj.half_w) & (np.abs(oy - obj.y) <= obj.half_h)
        if not inside.any():
            continue
        tex = obj.texture.evaluate(ox - obj.x, oy - obj.y)
        image[inside] = tex[inside]
        depth[inside] = obj.z
        ids[inside] = idx + 1
    return image, depth, ids


def nonoccluded_mask(id_target: np.ndarray, id_source: np.ndarray, shift: np.ndarray, direction: str) -> np.ndarray:
    """Pixels of the target view whose epipolar sample in the source view hits
    the same surface on both bilinear neighbors."""
    h, w = id_target.shape
    us = np.arange(w)[None, :].repeat(h, axis=0).astype(np.float64)
    q = us - shift if direction == "right_to_left" else us + shift
    in_bounds = (q >= 0) & (q <= w - 1)
    x0 = np.clip(np.floor(q).astype(np.int64), 0, w - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    rows = np.arange(h)[:, None].repeat(w, axis=1)
    same = (id_source[rows, x0] == id_target) & (id_source[rows, x1] == id_target)
    return in_bounds & same


@dataclass
class Sample:
    """One rendered stereo frame plus its weather variants."""

    scene: str
    frame: str
    left: np.ndarray
    right: np.ndarray
    depth: np.ndarray
    nonocc: np.ndarray
    variants: dict = field(default_factory=dict)  # variant name -> left image


def quantize_image(image: np.ndarray) -> np.ndarray:
    return np.round(image * 255.0) / 255.0


def render_stereo(scene: Scene, scene_id: str = "scene", frame_id: str = "0000", quantize: bool = True) -> Sample:
    """Rasterize both views and the exact left depth/disparity/occlusion data."""
    rig = scene.rig
    left, depth, id_left = render_view(scene, LEFT)
    right, _, id_right = render_view(scene, RIGHT)
    disparity = rig.baseline * rig.fx / depth
    nonocc = nonoccluded_mask(id_left, id_right, disparity, "right_to_left")
    if quantize:
        left, right = quantize_image(left), quantize_image(right)
    return Sample(scene=scene_id, frame=frame_id, left=left, right=right, depth=depth, nonocc=nonocc)


# ---------------------------------------------------------------------------
# on-disk dataset


def _image_path(root: Path, scene: str, frame: str, side: str, variant: str) -> Path:
    return root / scene / f"{frame}_{side}_{variant}.png"


def _write_png8(path: Path, image: np.ndarray) -> None:
    Image.fromarray(np.round(image * 255.0).astype(np.uint8)).save(path)


def _read_png8(path: Path) -> np.ndarray:
    if not path.exists():
        raise DataError(f"missing image file: {path}")
    return np.asarray(Image.open(path), dtype=np.float64) / 255.0


def _write_depth(path: Path, depth: np.ndarray) -> None:
    raw = np.round(depth * DEPTH_SCALE)
    if raw.max() > np.iinfo(np.uint16).max:
        raise ConfigurationError("depth exceeds the 16-bit storage range (255.99 m)")
    Image.fromarray(raw.astype(np.uint16)).save(path)


def _read_depth(path: Path) -> np.ndarray:
    if not path.exists():
        raise DataError(f"missing depth file: {path}")
    return np.asarray(Image.open(path), dtype=np.float64) / DEPTH_SCALE


def write_dataset(samples: list, root: str | Path, rig: CameraRig) -> Path:
    """Write samples under the directory contract; returns the root path."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rig.save(root / "rig.json")
    for sample in samples:
        scene_dir = root / sample.scene
        scene_dir.mkdir(exist_ok=True)
        _write_png8(_image_path(root, sample.scene, sample.frame, LEFT, CLEAR.name), sample.left)
        _write_png8(_image_path(root, sample.scene, sample.frame, RIGHT, CLEAR.name), sample.right)
        for name, image in sample.variants.items():
            _write_png8(_image_path(root, sample.scene, sample.frame, LEFT, name), image)
        _write_depth(scene_dir / f"{sample.frame}_depth.png", sample.depth)
        _write_png8(scene_dir / f"{sample.frame}_nonocc.png", sample.nonocc.astype(np.float64)[..., None].repeat(3, -1))
    return root


class SynthDataset:
    """Read-only handle over a dataset directory; images load lazily."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        rig_path = self.root / "rig.json"
        if not rig_path.exists():
            raise DataError(f"missing rig metadata: {rig_path}")
        self.rig = CameraRig.load(rig_path)
        self.records: list[tuple[str, str]] = []
        frame_variants: dict[tuple[str, str], set] = {}
        for scene_dir in sorted(p for p in self.root.iterdir() if p.is_dir()):
            frames = sorted({p.name.split("_")[0] for p in scene_dir.glob("*_depth.png")})
            if not frames:
                raise DataError(f"scene directory without depth maps: {scene_dir}")
            for frame in frames:
                key = (scene_dir.name, frame)
                self.records.append(key)
                found = set()
                for p in scene_dir.glob(f"{frame}_{LEFT}_*.png"):
                    found.add(p.name[len(frame) + 3 : -4])
                frame_variants[key] = found
                for required in (
                    _image_path(self.root, *key, LEFT, CLEAR.name),
                    _image_path(self.root, *key, RIGHT, CLEAR.name),
                ):
                    if not required.exists():
                        raise DataError(f"missing required file: {required}")
        if not self.records:
            raise DataError(f"no samples found under {self.root}")
        self.variants = sorted(set().union(*frame_variants.values()))
        for key, found in frame_variants.items():
            for name in self.variants:
                if name not in found:
                    raise DataError(
                        f"inconsistent dataset: scene '{key[0]}' frame '{key[1]}' lacks variant '{name}'"
                    )

    def __len__(self) -> int:
        return len(self.records)

    def has_variant(self, name: str) -> bool:
        return name in self.variants

    def require_variants(self, names) -> None:
        """Raise MissingVariantError for the first variant absent from the dataset."""
        for name in names:
            if not self.has_variant(name):
                scene, frame = self.records[0]
                raise MissingVariantError(scene, frame, name)

    def load_left(self, index: int, variant: str = CLEAR.name) -> np.ndarray:
        scene, frame = self.records[index]
        path = _image_path(self.root, scene, frame, LEFT, variant)
        if not path.exists():
            raise MissingVariantError(scene, frame, variant)
        return _read_png8(path)

    def load_right(self, index: int) -> np.ndarray:
        scene, frame = self.records[index]
        return _read_png8(_image_path(self.root, scene, frame, RIGHT, CLEAR.name))

    def load_depth(self, index: int) -> np.ndarray:
        scene, frame = self.records[index]
        return _read_depth(self.root / scene / f"{frame}_depth.png")

    def load_nonocc(self, index: int) -> np.ndarray | None:
        scene, frame = self.records[index]
        path = self.root / scene / f"{frame}_nonocc.png"
        if not path.exists():
            return None
        return _read_png8(path)[..., 0] > 0.5

    def load_sample(self, index: int) -> Sample:
        scene, frame = self.records[index]
        nonocc = self.load_nonocc(index)
        if nonocc is None:
            nonocc = np.ones(self.load_depth(index).shape, dtype=bool)
        variants = {
            name: self.load_left(index, name) for name in self.variants if name != CLEAR.name
        }
        return Sample(
            scene=scene,
            frame=frame,
            left=self.load_left(index),
            right=self.load_right(index),
            depth=self.load_depth(index),
            nonocc=nonocc,
            variants=variants,
        )


def load_dataset(root: str | Path) -> SynthDataset:
    return SynthDataset(root)


def generate_dataset(
    root: str | Path,
    num_scenes: int,
    seed: int = 0,
    rig: CameraRig | None = None,
    min_depth: float = 2.0,
    max_depth: float = 80.0,
) -> Path:
    """Generate clear stereo pairs with ground truth for ``num_scenes`` scenes."""
    rig = rig or default_rig()
    samples = []
    for i in range(num_scenes):
        scene = generate_scene(seed + i, rig, min_depth=min_depth, max_depth=max_depth)
        samples.append(render_stereo(scene, scene_id=f"scene_{i:05d}", frame_id="0000"))
    return write_dataset(samples, root, rig)


def augment_dataset(
    root: str | Path,
    weathers=("rain", "snow", "fog"),
    magnitudes=(1, 2),
    seed: int = 0,
    visibility_m1: float = 150.0,
    visibility_m2: float = 75.0,
) -> list[str]:
    """Render weather variants next to the clear images; returns variant names written."""
    dataset = load_dataset(root)
    written = []
    for weather in weathers:
        for magnitude in magnitudes:
            variant = VariantId(weather, int(magnitude))
            written.append(variant.name)
            for index, (scene, frame) in enumerate(dataset.records):
                image = dataset.load_left(index)
                depth = dataset.load_depth(index)
                rendered = build_variant(
                    image,
                    variant,
                    seed=_frame_seed(seed, scene, frame),
                    depth=depth,
                    visibility_m1=visibility_m1,
                    visibility_m2=visibility_m2,
                )
                _write_png8(_image_path(Path(root), scene, frame, LEFT, variant.name), rendered)
    return written


def _frame_seed(seed: int, scene: str, frame: str) -> int:
    digest = 0
    for ch in f"{scene}/{frame}":
        digest = (digest * 131 + ord(ch)) & 0x7FFFFFFF
    return (seed * 1009 + digest) & 0x7FFFFFFF
