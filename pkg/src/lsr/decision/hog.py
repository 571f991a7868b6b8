"""Histogram of oriented gradients on 16x16 patches.

Gradients are central differences with replicate borders. The patch is cut
into four 8x8 cells and each cell accumulates gradient magnitude into 8
unsigned orientation bins over [0, pi) with hard assignment. The resulting
32 values (cells row-major, bins within a cell) are l2-normalized together.
"""

from __future__ import annotations

import numpy as np

HOG_PATCH_SIZE = 16
CELL_SIZE = 8
ORIENTATION_BINS = 8
DESCRIPTOR_LENGTH = (HOG_PATCH_SIZE // CELL_SIZE) ** 2 * ORIENTATION_BINS
NORM_EPS = 1e-12


def gradients(stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference (gx, gy) of an (N, n, n) stack; rows grow downward."""
    padded = np.pad(stack, ((0, 0), (1, 1), (1, 1)), mode="edge")
    gx = padded[:, 1:-1, 2:] - padded[:, 1:-1, :-2]
    gy = padded[:, 2:, 1:-1] - padded[:, :-2, 1:-1]
    return gx, gy


def hog_batch(patches16: np.ndarray) -> np.ndarray:
    """Descriptors of an (N, 16, 16) stack as an (N, 32) matrix."""
    stack = np.asarray(patches16, dtype=np.float64)
    if stack.ndim != 3 or stack.shape[1:] != (HOG_PATCH_SIZE, HOG_PATCH_SIZE):
        raise ValueError(f"expected (N, 16, 16) patches, got {stack.shape}")
    n = len(stack)
    gx, gy = gradients(stack)
    magnitude = np.hypot(gx, gy)
    angle = np.mod(np.arctan2(gy, gx), np.pi)
    bins = np.clip((angle / (np.pi / ORIENTATION_BINS)).astype(np.int64), 0, ORIENTATION_BINS - 1)

    cells_per_side = HOG_PATCH_SIZE // CELL_SIZE
    rows = np.arange(HOG_PATCH_SIZE) // CELL_SIZE
    cell = rows[:, None] * cells_per_side + rows[None, :]
    slot = (cell[None] * ORIENTATION_BINS + bins).reshape(n, -1)
    slot = slot + (np.arange(n) * DESCRIPTOR_LENGTH)[:, None]
    hist = np.bincount(
        slot.ravel(), weights=magnitude.reshape(-1), minlength=n * DESCRIPTOR_LENGTH
    ).reshape(n, DESCRIPTOR_LENGTH)
    return hist / (np.linalg.norm(hist, axis=1, keepdims=True) + NORM_EPS)


def hog(patch16: np.ndarray) -> np.ndarray:
    """32-value HOG descriptor of one 16x16 patch."""
    return hog_batch(np.asarray(patch16)[None])[0]
