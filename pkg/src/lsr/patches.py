"""Training and inference samples built from ILR/HR image pairs.

Every sample is the 15x15 ILR neighborhood of a target pixel (replicate
padding at the borders), optionally its residual target HR - ILR, the
population variance of the neighborhood and the resulting easy/hard label.
The 16x16 companion patch used for HOG is a Lanczos resample of the 15x15
patch and is computed on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from lsr.imaging import DimensionError, ImagePair, YImage, lanczos_resize_patches

PATCH_SIZE = 15
HOG_PATCH_SIZE = 16
HALF = PATCH_SIZE // 2
VARIANCE_THRESHOLD = 180.0
DIHEDRAL_MODES = tuple(range(8))


class Hardness(IntEnum):
    EASY = 0
    HARD = 1


@dataclass
class PatchSample:
    """One training or inference unit.

    Attributes:
        patch15: (15, 15) ILR neighborhood centered on the target pixel.
        patch16: (16, 16) Lanczos resample of ``patch15`` for HOG.
        residual: HR - ILR at the center (None at inference).
        hardness: Easy or hard label derived from ``variance``.
        variance: Population variance of ``patch15``.
        position: (row, col) of the center pixel in the ILR image.
    """

    patch15: np.ndarray
    patch16: np.ndarray
    residual: Optional[float]
    hardness: Hardness
    variance: float
    position: Tuple[int, int]


def patch_variance(patch15: np.ndarray) -> float:
    """Population variance (divide by N) of a 15x15 patch.

    Values are summed in sorted order so the result does not depend on the
    pixel arrangement.
    """
    flat = np.asarray(patch15, dtype=np.float64).ravel()
    if flat.size != PATCH_SIZE * PATCH_SIZE:
        raise DimensionError(f"expected {PATCH_SIZE * PATCH_SIZE} values, got {flat.size}")
    return float(row_variances(flat[None, :])[0])


def row_variances(flat: np.ndarray) -> np.ndarray:
    ordered = np.sort(flat, axis=1)
    mean = ordered.sum(axis=1) / ordered.shape[1]
    return ((ordered - mean[:, None]) ** 2).sum(axis=1) / ordered.shape[1]


def classify_hardness(variance: float, threshold: float = VARIANCE_THRESHOLD) -> Hardness:
    """Hard iff ``variance >= threshold``; the boundary value itself is hard."""
    return Hardness.HARD if variance >= threshold else Hardness.EASY


def dihedral(patch: np.ndarray, mode: int) -> np.ndarray:
    """Apply one of the 8 square symmetries.

    ``mode = k + 4 * flip``: rotate by k x 90 degrees counter-clockwise, then
    mirror left-right when ``flip`` is set. Works on a single (n, n) patch or
    on a stack (N, n, n).

    Raises:
        DimensionError: If the patch is not square.
        ValueError: If ``mode`` is outside 0..7.
    """
    patch = np.asarray(patch)
    if patch.shape[-1] != patch.shape[-2]:
        raise DimensionError(f"dihedral transform needs a square patch, got {patch.shape}")
    return _dihedral_any(patch, mode)


def _dihedral_any(array: np.ndarray, mode: int) -> np.ndarray:
    if mode not in DIHEDRAL_MODES:
        raise ValueError(f"dihedral mode must be in 0..7, got {mode}")
    out = np.rot90(array, k=mode % 4, axes=(-2, -1))
    if mode >= 4:
        out = np.flip(out, axis=-1)
    return np.ascontiguousarray(out)


def sample_positions(height: int, width: int, stride: int) -> np.ndarray:
    """Centers on the stride grid, row-major, as an (N, 2) int array."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    rows = np.arange(0, height, stride)
    cols = np.arange(0, width, stride)
    grid = np.stack(np.meshgrid(rows, cols, indexing="ij"), axis=-1)
    return grid.reshape(-1, 2)


def pad_image(ilr: YImage) -> np.ndarray:
    """Replicate-pad by 7 so the patch centered on (r, c) starts at (r, c)."""
    return np.pad(ilr.data, HALF, mode="edge")


def extract_patches(ilr: YImage, positions: np.ndarray) -> np.ndarray:
    """Gather 15x15 replicate-padded neighborhoods at the given centers."""
    padded = pad_image(ilr)
    windows = sliding_window_view(padded, (PATCH_SIZE, PATCH_SIZE))
    return windows[positions[:, 0], positions[:, 1]].copy()


def dihedral_layout(
    padded: np.ndarray, positions: np.ndarray, mode: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Dihedral transform of a padded image and where its patches went.

    Returns the transformed image and, for every center in ``positions``,
    the top-left corner at which ``dihedral(patch, mode)`` of that center's
    patch sits in it. Edge padding commutes with the transform, so these
    are exactly the padded neighborhoods of the transformed image.
    """
    image = _dihedral_any(padded, mode)
    index = _dihedral_any(np.arange(padded.size).reshape(padded.shape), mode)
    where = np.empty(padded.size, dtype=np.int64)
    where[index.ravel()] = np.arange(padded.size)
    centers = where[(positions[:, 0] + HALF) * padded.shape[1] + positions[:, 1] + HALF]
    rows, cols = np.divmod(centers, image.shape[1])
    return image, np.stack([rows - HALF, cols - HALF], axis=1)


@dataclass
class Dataset:
    """Columnar collection of samples.

    Attributes:
        patches15: (N, 15, 15) neighborhoods.
        residuals: (N,) targets, NaN when built for inference.
        variances: (N,) neighborhood variances.
        hard: (N,) bool, True for hard samples.
        positions: (N, 2) centers in the source ILR image.
        origins: (N,) index into ``sources``.
        sources: Source-image identifiers.
        augmented: True once the 8 dihedral copies have been added.
    """

    patches15: np.ndarray
    residuals: np.ndarray
    variances: np.ndarray
    hard: np.ndarray
    positions: np.ndarray
    origins: np.ndarray
    sources: List[str] = field(default_factory=list)
    augmented: bool = False

    def __len__(self) -> int:
        return int(self.patches15.shape[0])

    def __getitem__(self, index: int) -> PatchSample:
        residual = float(self.residuals[index])
        return PatchSample(
            patch15=self.patches15[index],
            patch16=self.patches16[index],
            residual=None if np.isnan(residual) else residual,
            hardness=Hardness.HARD if self.hard[index] else Hardness.EASY,
            variance=float(self.variances[index]),
            position=(int(self.positions[index, 0]), int(self.positions[index, 1])),
        )

    @property
    def samples(self) -> List[PatchSample]:
        return [self[i] for i in range(len(self))]

    @cached_property
    def patches16(self) -> np.ndarray:
        """(N, 16, 16) HOG companions, computed on first access."""
        if len(self) == 0:
            return np.zeros((0, HOG_PATCH_SIZE, HOG_PATCH_SIZE))
        return lanczos_resize_patches(self.patches15, HOG_PATCH_SIZE)

    @property
    def hard_ratio(self) -> float:
        return float(self.hard.mean()) if len(self) else 0.0

    def subset(self, index: np.ndarray) -> "Dataset":
        """Samples selected by a boolean mask or an index array."""
        return Dataset(
            patches15=self.patches15[index],
            residuals=self.residuals[index],
            variances=self.variances[index],
            hard=self.hard[index],
            positions=self.positions[index],
            origins=self.origins[index],
            sources=list(self.sources),
            augmented=self.augmented,
        )

    def split(self) -> Tuple["Dataset", "Dataset"]:
        """Return (easy, hard) subsets."""
        return self.subset(~self.hard), self.subset(self.hard)

    def subsample(self, max_count: int, rng: np.random.Generator) -> "Dataset":
        """Uniform subsample without replacement, original order kept."""
        if len(self) <= max_count:
            return self
        keep = np.sort(rng.choice(len(self), size=max_count, replace=False))
        return self.subset(keep)

    @classmethod
    def empty(cls) -> "Dataset":
        return cls(
            patches15=np.zeros((0, PATCH_SIZE, PATCH_SIZE)),
            residuals=np.zeros(0),
            variances=np.zeros(0),
            hard=np.zeros(0, dtype=bool),
            positions=np.zeros((0, 2), dtype=np.int64),
            origins=np.zeros(0, dtype=np.int64),
        )

    @classmethod
    def concat(cls, parts: Sequence["Dataset"]) -> "Dataset":
        """Concatenate datasets, re-indexing their source lists."""
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty()
        sources: List[str] = []
        origins = []
        for part in parts:
            origins.append(part.origins + len(sources))
            sources.extend(part.sources)
        return cls(
            patches15=np.concatenate([p.patches15 for p in parts]),
            residuals=np.concatenate([p.residuals for p in parts]),
            variances=np.concatenate([p.variances for p in parts]),
            hard=np.concatenate([p.hard for p in parts]),
            positions=np.concatenate([p.positions for p in parts]),
            origins=np.concatenate(origins),
            sources=sources,
            augmented=all(p.augmented for p in parts),
        )


def build_dataset(
    ilr: YImage,
    positions: np.ndarray,
    residuals: Optional[np.ndarray] = None,
    threshold: float = VARIANCE_THRESHOLD,
    source: str = "",
) -> Dataset:
    """Assemble a Dataset for the given centers of an ILR image."""
    patches = extract_patches(ilr, positions)
    variances = row_variances(patches.reshape(len(patches), PATCH_SIZE * PATCH_SIZE))
    if residuals is None:
        residuals = np.full(len(patches), np.nan)
    return Dataset(
        patches15=patches,
        residuals=np.asarray(residuals, dtype=np.float64),
        variances=variances,
        hard=variances >= threshold,
        positions=positions.astype(np.int64),
        origins=np.zeros(len(patches), dtype=np.int64),
        sources=[source],
    )


def extract_samples(
    pair: ImagePair,
    stride: int = 1,
    for_training: bool = True,
    threshold: float = VARIANCE_THRESHOLD,
    source: str = "",
) -> Dataset:
    """One sample per center on the stride grid of the ILR image.

    Args:
        pair: HR/ILR/LR triple.
        stride: Grid step in pixels.
        for_training: Fill residual targets from the HR image.
        threshold: Easy/hard variance boundary.
        source: Identifier recorded as the samples' origin.
    """
    if pair.ilr.shape != pair.hr.shape:
        raise DimensionError("ILR and HR must have identical dimensions")
    positions = sample_positions(pair.ilr.height, pair.ilr.width, stride)
    residuals = None
    if for_training:
        rows, cols = positions[:, 0], positions[:, 1]
        residuals = pair.hr.data[rows, cols] - pair.ilr.data[rows, cols]
    return build_dataset(pair.ilr, positions, residuals, threshold, source)


def augment(dataset: Dataset) -> Dataset:
    """Add the 8 dihedral copies of every sample (mode-major order).

    Residuals, variances and labels are shared by all copies since every
    mode keeps the center pixel of an odd-sized patch in place.
    """
    if dataset.augmented:
        return dataset
    copies = [dihedral(dataset.patches15, mode) for mode in DIHEDRAL_MODES]
    reps = len(DIHEDRAL_MODES)
    return Dataset(
        patches15=np.concatenate(copies),
        residuals=np.tile(dataset.residuals, reps),
        variances=np.tile(dataset.variances, reps),
        hard=np.tile(dataset.hard, reps),
        positions=np.tile(dataset.positions, (reps, 1)),
        origins=np.tile(dataset.origins, reps),
        sources=list(dataset.sources),
        augmented=True,
    )
