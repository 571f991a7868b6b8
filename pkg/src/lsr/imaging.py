"""Luma images, resampling kernels and quality metrics.

Provides the YImage raster used throughout the package, full-range BT.601
colour conversion, separable bicubic down-sampling and Lanczos up-sampling
with center-aligned coordinates and clamp-to-edge borders, modcrop, and the
PSNR/SSIM metrics used for evaluation. PNG reading and writing go through
Pillow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np
from PIL import Image
from skimage.metrics import structural_similarity

PIXEL_MAX = 255.0
BICUBIC_A = -0.5
LANCZOS_A = 3

# Gaussian SSIM window: sigma 1.5 truncated at 3.5 sigma gives 11x11.
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


class DimensionError(ValueError):
    """Exception raised when image or patch dimensions are inconsistent."""

    pass


@dataclass
class YImage:
    """Single-channel luminance raster.

    Attributes:
        data: 2-D float64 array of shape (height, width), row-major, nominal
            range [0, 255]. Values may leave that range during processing.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise DimensionError(f"luma image must be 2-D, got shape {self.data.shape}")
        if self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise DimensionError(f"luma image must be non-empty, got shape {self.data.shape}")

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    @classmethod
    def constant(cls, height: int, width: int, value: float) -> "YImage":
        return cls(np.full((height, width), float(value)))

    def clamp(self) -> "YImage":
        """Return a copy with values clipped to [0, 255]."""
        return YImage(np.clip(self.data, 0.0, PIXEL_MAX))

    def to_uint8(self) -> np.ndarray:
        """Clamp, round half away from zero, and convert to 8-bit."""
        clipped = np.clip(self.data, 0.0, PIXEL_MAX)
        return np.floor(clipped + 0.5).astype(np.uint8)


@dataclass
class ImagePair:
    """HR image with its bicubic-down-sampled LR and Lanczos-interpolated ILR.

    Attributes:
        hr: Ground-truth high-resolution luma.
        ilr: Interpolated low-resolution luma, same size as ``hr``.
        lr: Low-resolution luma, ``hr`` size divided by ``scale``.
        scale: Integer scale factor.
    """

    hr: YImage
    ilr: YImage
    lr: YImage
    scale: int = 2

    def __post_init__(self) -> None:
        if self.ilr.shape != self.hr.shape:
            raise DimensionError(f"ILR shape {self.ilr.shape} differs from HR shape {self.hr.shape}")
        if (self.hr.height, self.hr.width) != (
            self.scale * self.lr.height,
            self.scale * self.lr.width,
        ):
            raise DimensionError(
                f"HR shape {self.hr.shape} is not {self.scale} x LR shape {self.lr.shape}"
            )

    @classmethod
    def from_hr(cls, hr: YImage, scale: int = 2) -> "ImagePair":
        """Build a self-supervised pair: modcrop, bicubic down, Lanczos up."""
        cropped = modcrop(hr, scale)
        lr = bicubic_downsample(cropped, scale)
        ilr = lanczos_upscale(lr, scale)
        return cls(hr=cropped, ilr=ilr, lr=lr, scale=scale)


# ---------------------------------------------------------------------------
# Colour conversion
# ---------------------------------------------------------------------------


def rgb_to_luma(r, g, b, height: int, width: int) -> YImage:
    """Convert 8-bit RGB channels to full-range BT.601 luma.

    Args:
        r, g, b: Channel values, any array-like of length height * width (or
            already shaped (height, width)).
        height: Image height in pixels.
        width: Image width in pixels.

    Returns:
        YImage with Y = 0.299 R + 0.587 G + 0.114 B.

    Raises:
        DimensionError: If a channel does not hold height * width values.
    """
    channels = []
    for name, channel in (("r", r), ("g", g), ("b", b)):
        arr = np.asarray(channel, dtype=np.float64).ravel()
        if arr.size != height * width:
            raise DimensionError(
                f"channel {name} has {arr.size} values, expected {height} x {width}"
            )
        channels.append(arr.reshape(height, width))
    red, green, blue = channels
    return YImage(0.299 * red + 0.587 * green + 0.114 * blue)


def rgb_to_ycbcr(rgb: np.ndarray) -> Tuple[YImage, np.ndarray, np.ndarray]:
    """Split an (H, W, 3) RGB array into luma and full-range Cb/Cr planes."""
    rgb = np.asarray(rgb, dtype=np.float64)
    red, green, blue = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    luma = rgb_to_luma(red, green, blue, rgb.shape[0], rgb.shape[1])
    cb = 128.0 - 0.168736 * red - 0.331264 * green + 0.5 * blue
    cr = 128.0 + 0.5 * red - 0.418688 * green - 0.081312 * blue
    return luma, cb, cr


def ycbcr_to_rgb(luma: YImage, cb: np.ndarray, cr: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rgb_to_ycbcr`; returns an (H, W, 3) uint8 array."""
    y = luma.data
    red = y + 1.402 * (cr - 128.0)
    green = y - 0.344136 * (cb - 128.0) - 0.714136 * (cr - 128.0)
    blue = y + 1.772 * (cb - 128.0)
    rgb = np.stack([red, green, blue], axis=-1)
    return np.floor(np.clip(rgb, 0.0, PIXEL_MAX) + 0.5).astype(np.uint8)


# ---------------------------------------------------------------------------
# Resampling
# ---------------------------------------------------------------------------


def cubic_kernel(x: np.ndarray, a: float = BICUBIC_A) -> np.ndarray:
    """Keys cubic-convolution kernel (support [-2, 2])."""
    ax = np.abs(np.asarray(x, dtype=np.float64))
    ax2 = ax * ax
    ax3 = ax2 * ax
    near = (a + 2.0) * ax3 - (a + 3.0) * ax2 + 1.0
    far = a * ax3 - 5.0 * a * ax2 + 8.0 * a * ax - 4.0 * a
    return np.where(ax <= 1.0, near, np.where(ax < 2.0, far, 0.0))


def lanczos_kernel(x: np.ndarray, a: int = LANCZOS_A) -> np.ndarray:
    """Windowed-sinc Lanczos kernel with window ``a`` (support [-a, a])."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(np.abs(x) < a, np.sinc(x) * np.sinc(x / a), 0.0)


def resample_matrix(
    n_in: int,
    n_out: int,
    kernel: Callable[[np.ndarray], np.ndarray],
    support: float,
    antialias: bool = False,
) -> np.ndarray:
    """Build the (n_out, n_in) matrix of a 1-D separable resampler.

    Output sample i sits at input coordinate (i + 0.5) * n_in / n_out - 0.5.
    Taps falling outside the signal are clamped to the nearest edge sample,
    and each row is normalized to sum to one.

    Args:
        n_in: Input length.
        n_out: Output length.
        kernel: Interpolation kernel evaluated at tap distances.
        support: Kernel half-width in input samples.
        antialias: When down-sampling, stretch the kernel by the scale factor.

    Returns:
        Dense weight matrix; ``out = W @ signal``.
    """
    if n_in < 1 or n_out < 1:
        raise DimensionError(f"cannot resample length {n_in} to {n_out}")
    ratio = n_in / n_out
    stretch = ratio if (antialias and ratio > 1.0) else 1.0
    radius = support * stretch

    centers = (np.arange(n_out) + 0.5) * ratio - 0.5
    reach = int(math.ceil(radius))
    offsets = np.arange(-reach, reach + 2)
    taps = np.floor(centers)[:, None].astype(np.int64) + offsets[None, :]
    weights = kernel((centers[:, None] - taps) / stretch) / stretch
    weights /= weights.sum(axis=1, keepdims=True)

    matrix = np.zeros((n_out, n_in))
    rows = np.repeat(np.arange(n_out), taps.shape[1])
    np.add.at(matrix, (rows, np.clip(taps, 0, n_in - 1).ravel()), weights.ravel())
    return matrix


def _resize(data: np.ndarray, height: int, width: int, kernel, support, antialias) -> np.ndarray:
    rows = resample_matrix(data.shape[0], height, kernel, support, antialias)
    cols = resample_matrix(data.shape[1], width, kernel, support, antialias)
    return rows @ data @ cols.T


def bicubic_downsample(img: YImage, scale: int, antialias: bool = True) -> YImage:
    """Down-sample by an integer factor with the a = -0.5 cubic kernel.

    Args:
        img: Input image whose dimensions are divisible by ``scale``.
        scale: Integer down-sampling factor.
        antialias: Stretch the kernel by ``scale`` (the usual SR degradation).

    Raises:
        DimensionError: If a dimension is not divisible by ``scale``.
    """
    if scale < 1:
        raise DimensionError(f"scale must be >= 1, got {scale}")
    if img.height % scale or img.width % scale:
        raise DimensionError(f"image {img.shape} is not divisible by scale {scale}; modcrop first")
    if scale == 1:
        return YImage(img.data.copy())
    return YImage(
        _resize(img.data, img.height // scale, img.width // scale, cubic_kernel, 2.0, antialias)
    )


def lanczos_upscale(img: YImage, scale: int) -> YImage:
    """Up-sample by an integer factor with the Lanczos-3 kernel."""
    if scale < 1:
        raise DimensionError(f"scale must be >= 1, got {scale}")
    if scale == 1:
        return YImage(img.data.copy())
    return YImage(
        _resize(img.data, img.height * scale, img.width * scale, lanczos_kernel, LANCZOS_A, False)
    )


def lanczos_resize_patches(patches: np.ndarray, size: int) -> np.ndarray:
    """Resample a stack of square patches (N, n, n) to (N, size, size)."""
    patches = np.asarray(patches, dtype=np.float64)
    matrix = resample_matrix(patches.shape[-1], size, lanczos_kernel, LANCZOS_A)
    return np.einsum("ij,njk,lk->nil", matrix, patches, matrix, optimize=True)


def modcrop(img: YImage, scale: int) -> YImage:
    """Crop bottom rows and right columns so both dimensions divide ``scale``."""
    if scale < 1:
        raise DimensionError(f"scale must be >= 1, got {scale}")
    height = img.height - img.height % scale
    width = img.width - img.width % scale
    if height == 0 or width == 0:
        raise DimensionError(f"modcrop of {img.shape} by {scale} leaves an empty image")
    return YImage(img.data[:height, :width].copy())


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def _shaved(ref: YImage, test: YImage, shave: int) -> Tuple[np.ndarray, np.ndarray]:
    if ref.shape != test.shape:
        raise DimensionError(f"shape mismatch: {ref.shape} vs {test.shape}")
    if shave < 0 or 2 * shave >= min(ref.shape):
        raise DimensionError(f"shave {shave} leaves nothing of a {ref.shape} image")
    if shave == 0:
        return ref.data, test.data
    return ref.data[shave:-shave, shave:-shave], test.data[shave:-shave, shave:-shave]


def psnr(ref: YImage, test: YImage, shave: int = 2) -> float:
    """Peak signal-to-noise ratio in dB over the shaved region.

    Identical images give ``math.inf``.
    """
    a, b = _shaved(ref, test, shave)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(PIXEL_MAX**2 / mse)


def ssim(ref: YImage, test: YImage, shave: int = 2) -> float:
    """Mean structural similarity with an 11x11 Gaussian window (sigma 1.5).

    Raises:
        DimensionError: If the shaved images are smaller than the window.
    """
    a, b = _shaved(ref, test, shave)
    if min(a.shape) < SSIM_WINDOW:
        raise DimensionError(f"image {a.shape} after shaving is smaller than the SSIM window")
    value = structural_similarity(
        a,
        b,
        gaussian_weights=True,
        sigma=SSIM_SIGMA,
        use_sample_covariance=False,
        data_range=PIXEL_MAX,
    )
    return float(value)


# ---------------------------------------------------------------------------
# PNG I/O
# ---------------------------------------------------------------------------


def read_image(path: str | Path) -> Tuple[YImage, Optional[np.ndarray]]:
    """Read a PNG (or any Pillow-readable image) as luma.

    Returns:
        Tuple of (luma, rgb) where ``rgb`` is the (H, W, 3) uint8 array for
        colour inputs and None for grayscale ones.
    """
    with Image.open(path) as im:
        if im.mode in ("L", "I;16", "I", "F"):
            return YImage(np.asarray(im.convert("L"), dtype=np.float64)), None
        rgb = np.asarray(im.convert("RGB"))
    luma = rgb_to_luma(rgb[..., 0], rgb[..., 1], rgb[..., 2], rgb.shape[0], rgb.shape[1])
    return luma, rgb


def write_luma_png(img: YImage, path: str | Path) -> None:
    """Write luma as 8-bit grayscale PNG (clamped, rounded half away from zero)."""
    Image.fromarray(img.to_uint8()).save(path, format="PNG")


def write_rgb_png(rgb: np.ndarray, path: str | Path) -> None:
    Image.fromarray(np.ascontiguousarray(rgb, dtype=np.uint8)).save(path, format="PNG")
