"""Image preprocessing and Poisson rate coding.

Images are 2-D ``uint8`` arrays indexed ``[row, col]`` (height x width).
Spike trains are boolean ``(steps, pixels)`` matrices with pixels in
row-major order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ValidationError

LUMA = (0.299, 0.587, 0.114)


def round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5)


def as_image(img) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ValidationError(f"expected a 2-D grayscale image, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise ValidationError("pixel intensities must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


def to_grayscale(rgb: np.ndarray) -> np.ndarray:
    """Luminance-weighted grayscale of an ``(H, W, 3)`` image, rounded to integers."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim == 2:
        return as_image(rgb)
    if rgb.ndim != 3 or rgb.shape[2] < 3:
        raise ValidationError(f"expected an (H, W, 3) color image, got shape {rgb.shape}")
    y = LUMA[0] * rgb[..., 0] + LUMA[1] * rgb[..., 1] + LUMA[2] * rgb[..., 2]
    return np.clip(round_half_up(y), 0, 255).astype(np.uint8)


def _area_matrix(n_in: int, n_out: int) -> np.ndarray:
    # row j averages source cells over [j*s, (j+1)*s) weighted by overlap
    scale = n_in / n_out
    A = np.zeros((n_out, n_in))
    for j in range(n_out):
        lo, hi = j * scale, (j + 1) * scale
        for i in range(int(math.floor(lo)), min(int(math.ceil(hi)), n_in)):
            overlap = min(hi, i + 1) - max(lo, i)
            if overlap > 0:
                A[j, i] = overlap / scale
    return A


def _bilinear_matrix(n_in: int, n_out: int) -> np.ndarray:
    A = np.zeros((n_out, n_in))
    for j in range(n_out):
        src = min(max((j + 0.5) * n_in / n_out - 0.5, 0.0), n_in - 1.0)
        i0 = int(math.floor(src))
        i1 = min(i0 + 1, n_in - 1)
        frac = src - i0
        A[j, i0] += 1.0 - frac
        A[j, i1] += frac
    return A


def _axis_matrix(n_in: int, n_out: int) -> np.ndarray:
    if n_out <= n_in:
        return _area_matrix(n_in, n_out)
    return _bilinear_matrix(n_in, n_out)


def resize(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Resize with box-filter area averaging when shrinking and bilinear when growing.

    Each axis is handled independently; results are rounded half-up.
    """
    img = as_image(img)
    if out_w < 1 or out_h < 1:
        raise ValidationError(f"output size must be >= 1, got {out_w}x{out_h}")
    h, w = img.shape
    if (h, w) == (out_h, out_w):
        return img.copy()
    out = _axis_matrix(h, out_h) @ img.astype(np.float64) @ _axis_matrix(w, out_w).T
    return np.clip(round_half_up(out), 0, 255).astype(np.uint8)


def _patch_view(x: np.ndarray, patch_w: int, patch_h: int) -> np.ndarray:
    h, w = x.shape
    if patch_w < 1 or patch_h < 1 or w % patch_w or h % patch_h:
        raise ValidationError(
            f"patch size {patch_w}x{patch_h} does not tile a {w}x{h} image"
        )
    # (rows of patches, patch_h, cols of patches, patch_w)
    return x.reshape(h // patch_h, patch_h, w // patch_w, patch_w)


def patch_zscores(img: np.ndarray, patch_w: int, patch_h: int) -> np.ndarray:
    """Per-patch ``(x - mean) / std`` (population std); constant patches give 0."""
    x = np.asarray(img, dtype=np.float64)
    p = _patch_view(x, patch_w, patch_h)
    mean = p.mean(axis=(1, 3), keepdims=True)
    std = p.std(axis=(1, 3), keepdims=True)
    z = np.divide(p - mean, std, out=np.zeros_like(p), where=std > 0)
    return z.reshape(x.shape)


def patch_normalize(img: np.ndarray, patch_w: int = 7, patch_h: int = 7) -> np.ndarray:
    """Z-score every non-overlapping patch, then stretch the whole image to [0, 255].

    A constant result (for example a constant input image) maps to all zeros.
    """
    img = as_image(img)
    z = patch_zscores(img, patch_w, patch_h)
    lo, hi = z.min(), z.max()
    if hi == lo:
        return np.zeros_like(img)
    return round_half_up((z - lo) / (hi - lo) * 255.0).astype(np.uint8)


def preprocess(img: np.ndarray, size: tuple[int, int] = (28, 28),
               patch: tuple[int, int] = (7, 7)) -> np.ndarray:
    """Resize to ``size`` (width, height) and patch-normalize with ``patch`` (width, height)."""
    return patch_normalize(resize(img, size[0], size[1]), patch[0], patch[1])


@dataclass(frozen=True)
class EncodingConfig:
    max_rate: float = 63.75
    t_present: float = 350.0
    t_rest: float = 150.0
    dt: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not self.max_rate > 0:
            raise ConfigError("max_rate", f"must be > 0, got {self.max_rate}")
        if not self.t_present > 0:
            raise ConfigError("t_present", f"must be > 0, got {self.t_present}")
        if not self.t_rest >= 0:
            raise ConfigError("t_rest", f"must be >= 0, got {self.t_rest}")
        if not self.dt > 0:
            raise ConfigError("dt", f"must be > 0, got {self.dt}")
        if self.max_rate * self.dt / 1000.0 > 1.0:
            raise ConfigError("max_rate", "rate * dt exceeds one spike per step")

    @property
    def n_present_steps(self) -> int:
        return math.ceil(self.t_present / self.dt - 1e-9)


def firing_rates(img: np.ndarray, max_rate: float) -> np.ndarray:
    """Per-pixel rates in Hz, linear in intensity: 255 maps to ``max_rate``."""
    return as_image(img).reshape(-1).astype(np.float64) / 255.0 * max_rate


def encode_poisson(img: np.ndarray, cfg: EncodingConfig, presentation_seed,
                   rate_boost: float = 0.0) -> np.ndarray:
    """Bernoulli-per-step approximation of a Poisson spike train for each pixel.

    ``rate_boost`` raises the full-intensity rate above ``cfg.max_rate``; it
    is only used to re-present images that failed to recruit any neurons.
    The train for pixel ``j`` depends only on that pixel's intensity and on
    column ``j`` of the seeded uniform draw.
    """
    p = firing_rates(img, cfg.max_rate + rate_boost) * (cfg.dt / 1000.0)
    if p.size and p.max() > 1.0:
        raise ConfigError("max_rate", f"spike probability per step {p.max():.3f} exceeds 1")
    rng = np.random.default_rng(presentation_seed)
    u = rng.random((cfg.n_present_steps, p.size))
    return u < p
