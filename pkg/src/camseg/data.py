"""Synthetic camouflage generation, augmentation, and dataset loading.

Images are float32 (3, H, W) arrays in [0, 1]; masks are float32 (1, H, W)
arrays of exactly 0 or 1. A sample hides a smooth shape inside a textured
field by perturbing the texture's contrast and luminance inside the mask;
delta = 0 makes the foreground pixel-identical to the background and delta = 1
makes it plainly visible.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .layers import upsample_to
from .types import ConfigError

log = logging.getLogger(__name__)

TEXTURES = ("noise-octaves", "gabor-field")
SHAPES = ("ellipse", "smooth-blob")

# Fixed per-channel normalization applied to model inputs.
NORM_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
NORM_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)

_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic sample; identical specs yield identical bits."""

    size: tuple[int, int] = (64, 64)
    texture: str = "noise-octaves"
    delta: float = 0.5
    shape: str = "ellipse"
    seed: int = 0

    def __post_init__(self) -> None:
        h, w = self.size
        if h % 32 or w % 32 or h <= 0 or w <= 0:
            raise ConfigError(f"sample size must be positive and divisible by 32, got {self.size}")
        if not 0.0 <= self.delta <= 1.0:
            raise ConfigError(f"delta must be in [0, 1], got {self.delta}")
        if self.texture not in TEXTURES:
            raise ConfigError(f"texture must be one of {TEXTURES}, got {self.texture!r}")
        if self.shape not in SHAPES:
            raise ConfigError(f"shape must be one of {SHAPES}, got {self.shape!r}")


def _normalize01(field: np.ndarray) -> np.ndarray:
    lo, hi = field.min(), field.max()
    if hi - lo < 1e-12:
        return np.full_like(field, 0.5)
    return (field - lo) / (hi - lo)


def _bilinear_grid(grid: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    t = torch.from_numpy(grid.astype(np.float32))[None, None]
    return upsample_to(t, size)[0, 0].numpy()


def _texture_noise(rng: np.random.Generator, size: tuple[int, int], octaves: int = 4) -> np.ndarray:
    acc = np.zeros(size, dtype=np.float64)
    amplitude = 1.0
    for octave in range(octaves):
        cells = 4 * 2 ** octave
        grid = rng.random((cells + 1, cells + 1))
        acc += amplitude * _bilinear_grid(grid, size).astype(np.float64)
        amplitude *= 0.5
    return _normalize01(acc)


def _texture_gabor(rng: np.random.Generator, size: tuple[int, int], components: int = 6) -> np.ndarray:
    h, w = size
    yy, xx = np.mgrid[0:h, 0:w]
    yy = yy / h
    xx = xx / w
    acc = np.zeros(size, dtype=np.float64)
    for _ in range(components):
        theta = rng.uniform(0.0, np.pi)
        freq = rng.uniform(2.0, 8.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.uniform(0.5, 1.0)
        acc += amp * np.cos(2.0 * np.pi * freq * (xx * np.cos(theta) + yy * np.sin(theta)) + phase)
    return _normalize01(acc)


def _mask_ellipse(rng: np.random.Generator, size: tuple[int, int]) -> np.ndarray:
    h, w = size
    scale = min(h, w)
    cy = rng.uniform(0.35, 0.65) * h
    cx = rng.uniform(0.35, 0.65) * w
    a = rng.uniform(0.15, 0.35) * scale
    b = rng.uniform(0.15, 0.35) * scale
    theta = rng.uniform(0.0, np.pi)
    yy, xx = np.mgrid[0:h, 0:w]
    u = (xx - cx) * np.cos(theta) + (yy - cy) * np.sin(theta)
    v = -(xx - cx) * np.sin(theta) + (yy - cy) * np.cos(theta)
    return ((u / a) ** 2 + (v / b) ** 2 <= 1.0).astype(np.float32)


def _mask_blob(rng: np.random.Generator, size: tuple[int, int]) -> np.ndarray:
    h, w = size
    scale = min(h, w)
    cy = rng.uniform(0.4, 0.6) * h
    cx = rng.uniform(0.4, 0.6) * w
    r0 = rng.uniform(0.18, 0.30) * scale
    harmonics = range(2, 6)
    coeffs = [rng.uniform(-0.35, 0.35) / k for k in harmonics]
    phases = [rng.uniform(0.0, 2.0 * np.pi) for _ in harmonics]
    yy, xx = np.mgrid[0:h, 0:w]
    angle = np.arctan2(yy - cy, xx - cx)
    radius = r0 * (1.0 + sum(c * np.cos(k * angle + p)
                             for k, c, p in zip(harmonics, coeffs, phases)))
    dist = np.hypot(yy - cy, xx - cx)
    return (dist <= radius).astype(np.float32)


def generate_sample(spec: SynthSpec) -> tuple[np.ndarray, np.ndarray]:
    """One (image, mask) pair per the spec. The same seed at a different delta
    produces the same scene with only the in-mask perturbation changed."""
    rng = np.random.default_rng(spec.seed)
    texture_fn = _texture_noise if spec.texture == "noise-octaves" else _texture_gabor
    tex = texture_fn(rng, spec.size)
    mask_fn = _mask_ellipse if spec.shape == "ellipse" else _mask_blob
    mask = mask_fn(rng, spec.size)
    contrast_sign = 1.0 if rng.random() < 0.5 else -1.0
    luma_sign = 1.0 if rng.random() < 0.5 else -1.0
    base = rng.uniform(0.10, 0.45, size=3)
    span = rng.uniform(0.40, 0.55, size=3)

    perturbed = (tex - 0.5) * (1.0 + contrast_sign * spec.delta / 2.0) + 0.5 \
        + luma_sign * spec.delta / 4.0
    field = np.where(mask > 0, np.clip(perturbed, 0.0, 1.0), tex)
    image = np.stack([np.clip(base[c] + span[c] * field, 0.0, 1.0) for c in range(3)])
    return image.astype(np.float32), mask[None].astype(np.float32)


def _augment_draws(rng: np.random.Generator, flip_prob: float, jitter: float):
    flip = bool(rng.random() < flip_prob)
    brightness, contrast, saturation = rng.uniform(1.0 - jitter, 1.0 + jitter, size=3)
    return flip, float(brightness), float(contrast), float(saturation)


def hflip(image: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.ascontiguousarray(image[..., ::-1]), np.ascontiguousarray(mask[..., ::-1])


def augment(image: np.ndarray, mask: np.ndarray, seed: int,
            flip_prob: float = 0.5, jitter: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
    """Random horizontal flip plus mild photometric jitter.

    Brightness, contrast and saturation factors are each drawn within
    [1 - jitter, 1 + jitter]; the mask is only ever flipped, never reweighted,
    so it stays strictly binary.
    """
    rng = np.random.default_rng(seed)
    flip, brightness, contrast, saturation = _augment_draws(rng, flip_prob, jitter)
    if flip:
        image, mask = hflip(image, mask)
    out = image * brightness
    mean = out.mean()
    out = (out - mean) * contrast + mean
    gray = (_LUMA[:, None, None] * out).sum(axis=0, keepdims=True)
    out = gray + saturation * (out - gray)
    return np.clip(out, 0.0, 1.0).astype(np.float32), mask


def normalize_image(image: np.ndarray) -> torch.Tensor:
    """[0, 1] RGB array (3, H, W) to a normalized model-input tensor."""
    arr = (image - NORM_MEAN[:, None, None]) / NORM_STD[:, None, None]
    return torch.from_numpy(np.ascontiguousarray(arr, dtype=np.float32))


def make_synthetic_dataset(n: int, size: tuple[int, int] = (64, 64), delta: float = 0.5,
                           texture: str = "noise-octaves", shape: str = "ellipse",
                           seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """n samples with per-item seeds seed + index."""
    return [
        generate_sample(SynthSpec(size=size, texture=texture, delta=delta, shape=shape, seed=seed + i))
        for i in range(n)
    ]


def write_dataset(samples: list[tuple[np.ndarray, np.ndarray]], out_dir: str | Path) -> None:
    """Write samples as PNG pairs under out_dir/images and out_dir/masks."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)
    for i, (image, mask) in enumerate(samples):
        name = f"sample_{i:04d}.png"
        rgb = np.round(image * 255.0).astype(np.uint8).transpose(1, 2, 0)
        Image.fromarray(rgb).save(out_dir / "images" / name)
        m = (mask[0] > 0.5).astype(np.uint8) * 255
        Image.fromarray(m, mode="L").save(out_dir / "masks" / name)


def load_dataset(image_dir: str | Path, mask_dir: str | Path,
                 target_size: tuple[int, int]) -> list[tuple[np.ndarray, np.ndarray]]:
    """Load image/mask pairs matched by basename, resized to target_size.

    Masks binarize at 128/255 before resizing and re-binarize at 0.5 after,
    so they stay strictly binary. Unpaired or unreadable files are logged and
    skipped.
    """
    h, w = target_size
    if h % 32 or w % 32:
        raise ConfigError(f"target_size must be divisible by 32, got {target_size}")
    image_dir, mask_dir = Path(image_dir), Path(mask_dir)
    mask_by_stem = {p.stem: p for p in mask_dir.iterdir() if p.is_file()}
    samples = []
    for img_path in sorted(p for p in image_dir.iterdir() if p.is_file()):
        mask_path = mask_by_stem.get(img_path.stem)
        if mask_path is None:
            log.warning("no mask for image %s, skipping", img_path.name)
            continue
        try:
            with Image.open(img_path) as img:
                rgb = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
            with Image.open(mask_path) as msk:
                m = np.asarray(msk.convert("L"), dtype=np.float32)
        except Exception as exc:
            log.warning("cannot read pair %s: %s, skipping", img_path.stem, exc)
            continue
        image = torch.from_numpy(rgb.transpose(2, 0, 1))[None]
        image = upsample_to(image, (h, w))[0].numpy()
        mask = torch.from_numpy((m >= 128).astype(np.float32))[None, None]
        mask = (upsample_to(mask, (h, w))[0] >= 0.5).float().numpy()
        samples.append((image.astype(np.float32), mask.astype(np.float32)))
    return samples
