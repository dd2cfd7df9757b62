"""Seeded, deterministic weather variants of clear stereo frames.

Each weather type comes in two magnitudes: 1 adds effects that share most of
the image with the clear domain (lens droplets, ground reflections, ground
snow), 2 adds particles and veiling that exist only in strong weather (rain
streaks, snowflakes, dense fog).  Everything is a pure function of
``(image, variant, seed)`` built on numpy generators, so variants can be
pre-rendered in parallel and reproduced bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from wxdepth.exceptions import ConfigurationError, DataError

WEATHERS = ("clear", "rain", "snow", "fog")

# visibility -> extinction with the 2% contrast-threshold convention
KOSCHMIEDER_K = 3.912


@dataclass(frozen=True)
class VariantId:
    """A weather type plus magnitude (0 clear, 1 relative adverse, 2 adverse)."""

    weather: str
    magnitude: int

    def __post_init__(self):
        if self.weather not in WEATHERS:
            raise ConfigurationError(f"unknown weather '{self.weather}'")
        if self.weather == "clear" and self.magnitude != 0:
            raise ConfigurationError("clear implies magnitude 0")
        if self.weather != "clear" and self.magnitude not in (1, 2):
            raise ConfigurationError(f"{self.weather} requires magnitude 1 or 2")

    @property
    def name(self) -> str:
        return f"{self.weather}_{self.magnitude}"

    @classmethod
    def parse(cls, name: str) -> "VariantId":
        try:
            weather, mag = name.rsplit("_", 1)
            return cls(weather, int(mag))
        except (ValueError, TypeError) as exc:
            raise ConfigurationError(f"cannot parse variant id '{name}'") from exc


CLEAR = VariantId("clear", 0)
WEATHER_VARIANTS = tuple(VariantId(w, m) for w in ("rain", "snow", "fog") for m in (1, 2))
ALL_VARIANTS = (CLEAR,) + WEATHER_VARIANTS

_VARIANT_CODE = {v.name: i for i, v in enumerate(ALL_VARIANTS)}


def _rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *keys]))


def _luminance(image: np.ndarray) -> np.ndarray:
    return image[..., 0] * 0.299 + image[..., 1] * 0.587 + image[..., 2] * 0.114


def apply_jitter(image: np.ndarray, brightness: float, contrast: float, saturation: float) -> np.ndarray:
    """Scale brightness, contrast, and saturation; unit scales are the identity."""
    out = image.copy()
    if brightness != 1.0:
        out = out * brightness
    if contrast != 1.0:
        mean = _luminance(out).mean()
        out = mean + (out - mean) * contrast
    if saturation != 1.0:
        gray = _luminance(out)[..., None]
        out = gray + (out - gray) * saturation
    return np.clip(out, 0.0, 1.0)


def jitter(image: np.ndarray, seed: int, strength: float = 0.2) -> np.ndarray:
    """Photometric jitter with scales drawn uniformly from [1-strength, 1+strength]."""
    rng = _rng(seed, 101)
    b, c, s = rng.uniform(1.0 - strength, 1.0 + strength, size=3)
    return apply_jitter(image, b, c, s)


@dataclass(frozen=True)
class FogParams:
    """Homogeneous fog under the atmospheric scattering model."""

    visibility: float
    atmospheric_light: tuple = (0.9, 0.9, 0.92)
    koschmieder_k: float = KOSCHMIEDER_K

    def __post_init__(self):
        if self.visibility <= 0:
            raise ConfigurationError("visibility must be positive")
        if any(not (0.7 <= a <= 1.0) for a in self.atmospheric_light):
            raise ConfigurationError("atmospheric light components must lie in [0.7, 1.0]")

    @property
    def extinction(self) -> float:
        return self.koschmieder_k / self.visibility


def transmittance(depth: np.ndarray, params: FogParams) -> np.ndarray:
    """Per-pixel transmittance exp(-beta * depth)."""
    return np.exp(-params.extinction * np.asarray(depth, dtype=np.float64))


def render_fog(image: np.ndarray, depth: np.ndarray, params: FogParams) -> np.ndarray:
    """image * t + A * (1 - t) with t the scattering transmittance."""
    if depth is None:
        raise DataError("fog rendering requires a depth map")
    if depth.shape != image.shape[:2]:
        raise ConfigurationError(
            f"depth shape {depth.shape} does not match image {image.shape[:2]}"
        )
    t = transmittance(depth, params)[..., None]
    a = np.asarray(params.atmospheric_light, dtype=np.float64)
    return np.clip(image * t + a * (1.0 - t), 0.0, 1.0)


@dataclass(frozen=True)
class RainParams:
    droplet_count: int = 10
    droplet_radius: tuple = (1.5, 4.0)
    reflection_strength: float = 0.35
    streak_count: int = 70
    streak_length: int = 8
    streak_strength: float = 0.45
    veil_strength: float = 0.12
    veil_color: float = 0.78


@dataclass(frozen=True)
class SnowParams:
    ground_strength: float = 0.45
    flake_count: int = 45
    flake_radius: tuple = (0.8, 2.2)
    veil_strength: float = 0.08
    veil_color: float = 0.85


def _box_blur(image: np.ndarray, kx: int, ky: int) -> np.ndarray:
    """Separable box blur with edge padding."""
    out = image
    if kx > 1:
        pad = kx // 2
        padded = np.pad(out, ((0, 0), (pad, pad), (0, 0)), mode="edge")
        csum = np.cumsum(padded, axis=1)
        csum = np.concatenate([np.zeros_like(csum[:, :1]), csum], axis=1)
        out = (csum[:, kx:] - csum[:, :-kx]) / kx
    if ky > 1:
        pad = ky // 2
        padded = np.pad(out, ((pad, pad), (0, 0), (0, 0)), mode="edge")
        csum = np.cumsum(padded, axis=0)
        csum = np.concatenate([np.zeros_like(csum[:1]), csum], axis=0)
        out = (csum[ky:] - csum[:-ky]) / ky
    return out


def _soft_disk(h: int, w: int, cx: float, cy: float, radius: float) -> np.ndarray:
    ys, xs = np.mgrid[0:h, 0:w]
    d2 = (xs - cx) ** 2 + (ys - cy) ** 2
    return np.exp(-d2 / (2.0 * radius ** 2))


def _veil(image: np.ndarray, strength: float, color: float) -> np.ndarray:
    if strength == 0.0:
        return image
    return image * (1.0 - strength) + strength * color


def render_rain(image: np.ndarray, magnitude: int, seed: int, params: RainParams = RainParams()) -> np.ndarray:
    """Magnitude 1: lens droplets and a wet-ground reflection; 2 adds streaks and veiling."""
    if magnitude not in (1, 2):
        raise ConfigurationError("rain magnitude must be 1 or 2")
    # magnitude is not part of the stream so magnitude 2 composites the exact
    # magnitude-1 effects before adding its own
    rng = _rng(seed, 201)
    h, w = image.shape[:2]
    out = image.astype(np.float64, copy=True)

    if params.reflection_strength > 0.0:
        # darkened, vertically smeared lower region standing in for ground water
        y0 = int(0.62 * h)
        lower = out[y0:]
        smeared = _box_blur(lower, 1, 9) * 0.75
        ramp = np.linspace(0.0, 1.0, h - y0)[:, None, None]
        wet = 0.5 + 0.5 * rng.random(w)[None, :, None]
        blend = params.reflection_strength * ramp * wet
        out[y0:] = lower * (1.0 - blend) + smeared * blend

    if params.droplet_count > 0:
        blurred = _box_blur(out, 7, 7)
        for _ in range(params.droplet_count):
            cx, cy = rng.uniform(0, w - 1), rng.uniform(0, h - 1)
            radius = rng.uniform(*params.droplet_radius)
            mask = _soft_disk(h, w, cx, cy, radius)[..., None]
            out = out * (1.0 - mask) + (blurred * 0.92 + 0.08) * mask

    if magnitude == 2:
        if params.streak_count > 0:
            layer = np.zeros((h, w), dtype=np.float64)
            slant = rng.uniform(-0.25, 0.25)
            for _ in range(params.streak_count):
                x, y = rng.uniform(0, w - 1), rng.uniform(0, h - 1)
                intensity = rng.uniform(0.6, 1.0)
                for step in range(params.streak_length):
                    xi, yi = int(round(x + slant * step)), int(round(y + step))
                    if 0 <= xi < w and 0 <= yi < h:
                        layer[yi, xi] = max(layer[yi, xi], intensity)
            layer = _box_blur(layer[..., None], 1, 3)
            out = out + params.streak_strength * layer * (1.0 - out)
        out = _veil(out, params.veil_strength, params.veil_color)

    return np.clip(out, 0.0, 1.0)


def snow_flake_count(params: SnowParams) -> int:
    """Flakes composited per frame; linear in the density parameter."""
    return int(round(params.flake_count))


def render_snow(
    image: np.ndarray,
    magnitude: int,
    seed: int,
    params: SnowParams = SnowParams(),
    depth: np.ndarray | None = None,
) -> np.ndarray:
    """Magnitude 1: ground snow in the lower region; 2 adds flakes and veiling."""
    if magnitude not in (1, 2):
        raise ConfigurationError("snow magnitude must be 1 or 2")
    rng = _rng(seed, 301)
    h, w = image.shape[:2]
    out = image.astype(np.float64, copy=True)

    if params.ground_strength > 0.0:
        y0 = int(0.58 * h)
        ramp = np.linspace(0.0, 1.0, h - y0)[:, None]
        noise = _box_blur(rng.random((h - y0, w))[..., None], 5, 3)[..., 0]
        cover = params.ground_strength * ramp * (0.4 + 0.6 * noise)
        out[y0:] = out[y0:] + cover[..., None] * (0.96 - out[y0:])

    if magnitude == 2:
        for _ in range(snow_flake_count(params)):
            cx, cy = rng.uniform(0, w - 1), rng.uniform(0, h - 1)
            pseudo_distance = rng.uniform(0.35, 1.0)
            radius = rng.uniform(*params.flake_radius) / pseudo_distance
            alpha = 0.85 * _soft_disk(h, w, cx, cy, radius)[..., None]
            out = out + alpha * (0.98 - out)
        out = _veil(out, params.veil_strength, params.veil_color)

    return np.clip(out, 0.0, 1.0)


def build_variant(
    image: np.ndarray,
    variant: VariantId,
    seed: int,
    depth: np.ndarray | None = None,
    visibility_m1: float = 150.0,
    visibility_m2: float = 75.0,
    rain_params: RainParams = RainParams(),
    snow_params: SnowParams = SnowParams(),
    jitter_strength: float = 0.2,
) -> np.ndarray:
    """Render one named weather variant of a clear frame; pure in (image, variant, seed)."""
    if not isinstance(variant, VariantId):
        variant = VariantId.parse(str(variant))
    code = _VARIANT_CODE[variant.name]
    if variant.weather == "clear":
        return jitter(image, _derived_seed(seed, code), strength=jitter_strength)
    if variant.weather == "rain":
        return render_rain(image, variant.magnitude, _derived_seed(seed, code), rain_params)
    if variant.weather == "snow":
        return render_snow(image, variant.magnitude, _derived_seed(seed, code), snow_params, depth)
    visibility = visibility_m1 if variant.magnitude == 1 else visibility_m2
    return render_fog(image, depth, FogParams(visibility=visibility))


def _derived_seed(seed: int, code: int) -> int:
    return (int(seed) * 31 + code) & 0x7FFFFFFF
