"""Unsupervised representation pool (Types 1-5) for 15x15 ILR patches.

Type 1 is the raw patch. Type 2 applies Saab transforms to the central 5x5
and 7x7 windows. Type 3 applies a 3x3 Saab transform at 9 stride-1 positions
over the central 5x5 region and at 24 stride-3 positions on the outer ring.
Types 4 and 5 filter with the 2x2 Haar and 3x3 Laws filterbanks and append a
cross-channel PCA of the responses at every position.

The apply functions accept a single patch (15, 15) or a stack (N, 15, 15) and
return one row of features per patch. For a whole image the same transforms
run once per window location (RepresentationMaps) and patches gather their
rows from those maps, with values equal to the per-patch path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.linalg import eigh

from lsr.config import ConfigurationError

PATCH_SIZE = 15

TYPE_WIDTHS: Dict[int, int] = {1: 225, 2: 74, 3: 297, 4: 392, 5: 450}
TYPE_NAMES: Dict[int, str] = {
    1: "spatial",
    2: "central Saab",
    3: "ringwise Saab",
    4: "Haar & PCA",
    5: "Laws & PCA",
}

# Top-left corners of the windows each type reads.
CENTRAL_5 = (5, 5)
CENTRAL_7 = (4, 4)
RING_INNER = [(r, c) for r in (5, 6, 7) for c in (5, 6, 7)]
RING_OUTER = [(r, c) for r in range(0, 15, 3) for c in range(0, 15, 3) if (r, c) != (6, 6)]
RING_POSITIONS = RING_INNER + RING_OUTER
HAAR_POSITIONS = [(r, c) for r in range(0, 14, 2) for c in range(0, 14, 2)]
LAWS_POSITIONS = [(r, c) for r in range(0, 15, 3) for c in range(0, 15, 3)]

RANK_TOL = 1e-10


class TransformFitError(ValueError):
    """Exception raised when a transform cannot be fitted from the given data."""

    pass


def haar_filters() -> np.ndarray:
    """The 2x2 Haar filterbank (LL, LH, HL, HH), entries +-1/2, as a (4, 4) matrix."""
    ll = np.array([[1, 1], [1, 1]])
    lh = np.array([[1, 1], [-1, -1]])
    hl = np.array([[1, -1], [1, -1]])
    hh = np.array([[1, -1], [-1, 1]])
    return np.stack([f.ravel() for f in (ll, lh, hl, hh)]).astype(np.float64) / 2.0


def laws_kernels() -> np.ndarray:
    """The nine integer 3x3 Laws kernels (L3, E3, S3 outer products) as a (9, 9) matrix."""
    vectors = (
        np.array([1.0, 2.0, 1.0]),
        np.array([-1.0, 0.0, 1.0]),
        np.array([-1.0, 2.0, -1.0]),
    )
    return np.stack([np.outer(v, h).ravel() for v in vectors for h in vectors])


def _project_taps(taps: Iterable[np.ndarray], matrix: np.ndarray) -> np.ndarray:
    out = None
    for k, tap in enumerate(taps):
        term = tap[..., None] * matrix[:, k]
        out = term if out is None else out + term
    return out


def project(rows: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Rows (..., K) onto the rows of a (C, K) matrix, giving (..., C).

    Terms are accumulated in tap order with elementwise operations, so a
    value does not depend on the shape or memory layout of the batch it is
    computed in.
    """
    rows = np.asarray(rows, dtype=np.float64)
    return _project_taps((rows[..., k] for k in range(matrix.shape[1])), matrix)


def project_windows(image: np.ndarray, size: int, matrix: np.ndarray) -> np.ndarray:
    """Project every size x size window of a 2D array; (H', W', C) by top-left corner."""
    height = image.shape[0] - size + 1
    width = image.shape[1] - size + 1
    if height < 1 or width < 1:
        raise ValueError(f"a {image.shape} array has no {size}x{size} window")
    taps = (image[i : i + height, j : j + width] for i in range(size) for j in range(size))
    return _project_taps(taps, matrix)


HAAR = haar_filters()
LAWS_KERNELS = laws_kernels()
LAWS_NORMS = np.linalg.norm(LAWS_KERNELS, axis=1)


# ---------------------------------------------------------------------------
# Fitted transforms
# ---------------------------------------------------------------------------


@dataclass
class SaabKernelSet:
    """Orthonormal Saab kernels for an n x n window.

    Attributes:
        window: Side length n.
        kernels: (n^2, n^2) matrix; row 0 is the DC kernel (every entry 1/n),
            rows 1.. are AC kernels by descending eigenvalue.
        eigenvalues: Variances captured by the AC kernels.
        rank_deficient: True if some AC kernels span directions absent from
            the fitting data.
    """

    window: int
    kernels: np.ndarray
    eigenvalues: np.ndarray
    rank_deficient: bool = False

    def transform(self, windows: np.ndarray) -> np.ndarray:
        """Coefficients of flattened windows (..., n^2) -> (..., n^2)."""
        return project(windows, self.kernels)


@dataclass
class ChannelPcaSet:
    """Cross-channel PCA applied to the C filter responses at each position.

    Attributes:
        channels: C.
        matrix: (C, C) orthonormal projection, rows by descending eigenvalue.
        mean: (C,) response mean subtracted before projection.
        eigenvalues: (C,) variances along the rows of ``matrix``.
        rank_deficient: True if the responses did not span all C channels.
    """

    channels: int
    matrix: np.ndarray
    mean: np.ndarray
    eigenvalues: np.ndarray
    rank_deficient: bool = False

    def transform(self, responses: np.ndarray) -> np.ndarray:
        return project(responses - self.mean, self.matrix)


def _fix_signs(rows: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude element is positive."""
    pivots = np.argmax(np.abs(rows), axis=1)
    signs = np.where(rows[np.arange(len(rows)), pivots] < 0, -1.0, 1.0)
    return rows * signs[:, None]


def _pca_rows(
    samples: np.ndarray, basis: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvectors of the sample covariance as rows, by descending eigenvalue.

    When ``basis`` (d, m) is given, the covariance is restricted to its column
    span and the returned rows are expressed back in the original d dims.
    """
    centered = samples - samples.mean(axis=0)
    cov = centered.T @ centered / max(len(samples), 1)
    if basis is not None:
        cov = basis.T @ cov @ basis
    values, vectors = eigh(cov)
    order = np.argsort(values, kind="stable")[::-1]
    values = np.clip(values[order], 0.0, None)
    vectors = vectors[:, order]
    if basis is not None:
        vectors = basis @ vectors
    return _fix_signs(vectors.T), values


def _rank_deficient(values: np.ndarray, n_samples: int) -> bool:
    scale = max(float(values.max(initial=0.0)), 1.0)
    return n_samples <= len(values) or bool(np.any(values <= RANK_TOL * scale))


def fit_saab(windows: np.ndarray, n: int) -> SaabKernelSet:
    """Learn an n x n Saab transform.

    The DC kernel is the unit-norm constant. AC kernels are the principal
    components of the windows after removing each window's DC component,
    computed inside the orthogonal complement of the DC kernel so the full
    set is orthonormal even for rank-deficient data.

    Args:
        windows: (M, n, n) or (M, n*n) training windows.
        n: Window side length.

    Raises:
        TransformFitError: If no windows are given or their size is wrong.
    """
    dim = n * n
    flat = np.asarray(windows, dtype=np.float64).reshape(-1, dim) if np.size(windows) else None
    if flat is None or len(flat) == 0:
        raise TransformFitError(f"cannot fit a {n}x{n} Saab transform without windows")

    dc = np.full(dim, 1.0 / n)
    ac_data = flat - flat.mean(axis=1, keepdims=True)
    q, _ = np.linalg.qr(np.column_stack([dc, np.eye(dim)]))
    complement = q[:, 1:dim]
    ac, values = _pca_rows(ac_data, basis=complement)
    kernels = np.vstack([dc, ac])
    return SaabKernelSet(
        window=n,
        kernels=kernels,
        eigenvalues=values,
        rank_deficient=_rank_deficient(values, len(flat)),
    )


def fit_channel_pca(responses: np.ndarray, channels: int) -> ChannelPcaSet:
    """Mean-centered PCA across the C channel responses.

    Args:
        responses: (M, C) response vectors (one per position and patch).
        channels: C.
    """
    flat = np.asarray(responses, dtype=np.float64).reshape(-1, channels)
    if len(flat) == 0:
        raise TransformFitError(f"cannot fit a {channels}-channel PCA without responses")
    matrix, values = _pca_rows(flat)
    return ChannelPcaSet(
        channels=channels,
        matrix=matrix,
        mean=flat.mean(axis=0),
        eigenvalues=values,
        rank_deficient=_rank_deficient(values, len(flat)),
    )


# ---------------------------------------------------------------------------
# Window gathering
# ---------------------------------------------------------------------------


def _as_stack(patch15: np.ndarray) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(patch15, dtype=np.float64)
    single = arr.ndim == 2
    stack = arr[None] if single else arr
    if stack.shape[1:] != (PATCH_SIZE, PATCH_SIZE):
        raise ValueError(f"expected 15x15 patches, got {stack.shape[1:]}")
    return stack, single


def gather_windows(stack: np.ndarray, size: int, corners: Sequence[Tuple[int, int]]) -> np.ndarray:
    """(N, 15, 15) -> (N, len(corners), size*size) flattened windows."""
    view = sliding_window_view(stack, (size, size), axis=(1, 2))
    rows = np.array([r for r, _ in corners])
    cols = np.array([c for _, c in corners])
    return view[:, rows, cols].reshape(len(stack), len(corners), size * size)


def _finish(features: np.ndarray, single: bool) -> np.ndarray:
    return features[0] if single else features


def apply_central_saab(patch15: np.ndarray, k5: SaabKernelSet, k7: SaabKernelSet) -> np.ndarray:
    """Type 2: 25 coefficients of the central 5x5 window, then 49 of the 7x7 one."""
    if k5.window != 5 or k7.window != 7:
        raise ConfigurationError("central Saab needs 5x5 and 7x7 kernel sets")
    stack, single = _as_stack(patch15)
    w5 = gather_windows(stack, 5, [CENTRAL_5])[:, 0]
    w7 = gather_windows(stack, 7, [CENTRAL_7])[:, 0]
    return _finish(np.concatenate([k5.transform(w5), k7.transform(w7)], axis=1), single)


def apply_ringwise_saab(patch15: np.ndarray, k3: SaabKernelSet) -> np.ndarray:
    """Type 3: 3x3 Saab at 33 positions, 9 coefficients each (297 values)."""
    if k3.window != 3:
        raise ConfigurationError("ring-wise Saab needs a 3x3 kernel set")
    stack, single = _as_stack(patch15)
    coeffs = k3.transform(gather_windows(stack, 3, RING_POSITIONS))
    return _finish(coeffs.reshape(len(stack), -1), single)


def haar_responses(stack: np.ndarray) -> np.ndarray:
    """(N, 49, 4) Haar responses at the stride-2 grid."""
    return project(gather_windows(stack, 2, HAAR_POSITIONS), HAAR)


def laws_responses(stack: np.ndarray) -> np.ndarray:
    """(N, 25, 9) Laws responses at the stride-3 grid.

    Integer kernels are applied first and the norms divided out after, so
    zero-sum filters give exactly 0 on constant integer patches.
    """
    return project(gather_windows(stack, 3, LAWS_POSITIONS), LAWS_KERNELS) / LAWS_NORMS


def _raw_and_pca(raw: np.ndarray, pca: ChannelPcaSet) -> np.ndarray:
    both = np.concatenate([raw, pca.transform(raw)], axis=2)
    return both.reshape(len(raw), -1)


def apply_type4(patch15: np.ndarray, pca4: ChannelPcaSet) -> np.ndarray:
    """Type 4: per position, 4 raw Haar responses then their 4 PCA coefficients."""
    if pca4.channels != 4:
        raise ConfigurationError("Type 4 needs a 4-channel PCA")
    stack, single = _as_stack(patch15)
    return _finish(_raw_and_pca(haar_responses(stack), pca4), single)


def apply_type5(patch15: np.ndarray, pca9: ChannelPcaSet) -> np.ndarray:
    """Type 5: per position, 9 raw Laws responses then their 9 PCA coefficients."""
    if pca9.channels != 9:
        raise ConfigurationError("Type 5 needs a 9-channel PCA")
    stack, single = _as_stack(patch15)
    return _finish(_raw_and_pca(laws_responses(stack), pca9), single)


# ---------------------------------------------------------------------------
# Pool
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RepresentationSpec:
    """Which representation types make up a pool, in type order."""

    enabled_types: Tuple[int, ...]

    def __post_init__(self) -> None:
        types = tuple(sorted(set(int(t) for t in self.enabled_types)))
        if not types or not set(types) <= set(TYPE_WIDTHS):
            raise ConfigurationError(f"representation types must be a subset of 1..5, got {types}")
        object.__setattr__(self, "enabled_types", types)

    @property
    def width(self) -> int:
        return sum(TYPE_WIDTHS[t] for t in self.enabled_types)

    def feature_layout(self) -> List[Tuple[int, int]]:
        """Feature id -> (type, index within the type), the stable id scheme."""
        return [(t, i) for t in self.enabled_types for i in range(TYPE_WIDTHS[t])]

    def offsets(self) -> Dict[int, int]:
        """First feature id of each enabled type."""
        out, start = {}, 0
        for t in self.enabled_types:
            out[t] = start
            start += TYPE_WIDTHS[t]
        return out

    def types_for(self, ids: Optional[np.ndarray] = None) -> Tuple[int, ...]:
        """Enabled types holding at least one of the feature ``ids`` (all when None)."""
        if ids is None:
            return self.enabled_types
        ids = np.asarray(ids, dtype=np.int64)
        offsets = self.offsets()
        return tuple(
            t
            for t in self.enabled_types
            if np.any((ids >= offsets[t]) & (ids < offsets[t] + TYPE_WIDTHS[t]))
        )


@dataclass
class RepresentationPool:
    """A representation spec together with its fitted transforms."""

    spec: RepresentationSpec
    saab5: Optional[SaabKernelSet] = None
    saab7: Optional[SaabKernelSet] = None
    saab3: Optional[SaabKernelSet] = None
    pca4: Optional[ChannelPcaSet] = None
    pca9: Optional[ChannelPcaSet] = None
    fit_counts: Dict[str, int] = field(default_factory=dict)

    @property
    def rank_deficient(self) -> bool:
        parts = (self.saab5, self.saab7, self.saab3, self.pca4, self.pca9)
        return any(p.rank_deficient for p in parts if p is not None)

    @classmethod
    def fit(
        cls,
        patches: np.ndarray,
        types: Iterable[int],
        max_windows: int = 100000,
        rng: Optional[np.random.Generator] = None,
    ) -> "RepresentationPool":
        """Fit every transform the enabled types need from training patches.

        Args:
            patches: (N, 15, 15) training patches.
            types: Enabled representation types.
            max_windows: Cap on windows/responses used per transform.
            rng: Generator for subsampling beyond ``max_windows``.
        """
        spec = RepresentationSpec(tuple(types))
        stack = np.asarray(patches, dtype=np.float64).reshape(-1, PATCH_SIZE, PATCH_SIZE)
        if len(stack) == 0:
            raise TransformFitError("no patches to fit representation transforms on")
        rng = rng if rng is not None else np.random.default_rng(0)

        def capped(rows: np.ndarray) -> np.ndarray:
            if len(rows) <= max_windows:
                return rows
            return rows[np.sort(rng.choice(len(rows), size=max_windows, replace=False))]

        pool = cls(spec=spec)
        if 2 in spec.enabled_types:
            w5 = capped(gather_windows(stack, 5, [CENTRAL_5])[:, 0])
            w7 = capped(gather_windows(stack, 7, [CENTRAL_7])[:, 0])
            pool.saab5 = fit_saab(w5, 5)
            pool.saab7 = fit_saab(w7, 7)
            pool.fit_counts.update(saab5=len(w5), saab7=len(w7))
        if 3 in spec.enabled_types:
            w3 = capped(gather_windows(stack, 3, RING_POSITIONS).reshape(-1, 9))
            pool.saab3 = fit_saab(w3, 3)
            pool.fit_counts["saab3"] = len(w3)
        if 4 in spec.enabled_types:
            r4 = capped(haar_responses(stack).reshape(-1, 4))
            pool.pca4 = fit_channel_pca(r4, 4)
            pool.fit_counts["pca4"] = len(r4)
        if 5 in spec.enabled_types:
            r9 = capped(laws_responses(stack).reshape(-1, 9))
            pool.pca9 = fit_channel_pca(r9, 9)
            pool.fit_counts["pca9"] = len(r9)
        return pool

    def _require(self, name: str):
        value = getattr(self, name)
        if value is None:
            raise ConfigurationError(f"representation transform {name} is not fitted")
        return value

    def build(self, patches: np.ndarray, select: Optional[np.ndarray] = None) -> np.ndarray:
        """Pool matrix (N, width), or only the ``select`` columns."""
        stack, single = _as_stack(patches)
        blocks = []
        for t in self.spec.enabled_types:
            if t == 1:
                blocks.append(stack.reshape(len(stack), -1))
            elif t == 2:
                blocks.append(
                    apply_central_saab(stack, self._require("saab5"), self._require("saab7"))
                )
            elif t == 3:
                blocks.append(apply_ringwise_saab(stack, self._require("saab3")))
            elif t == 4:
                blocks.append(apply_type4(stack, self._require("pca4")))
            else:
                blocks.append(apply_type5(stack, self._require("pca9")))
        pool = np.concatenate(blocks, axis=1)
        if select is not None:
            pool = pool[:, np.asarray(select, dtype=np.int64)]
        return _finish(pool, single)

    def build_chunked(
        self, patches: np.ndarray, select: Optional[np.ndarray] = None, chunk_size: int = 4096
    ) -> np.ndarray:
        """Same as :meth:`build` for a large stack, computed ``chunk_size`` at a time."""
        stack = np.asarray(patches, dtype=np.float64).reshape(-1, PATCH_SIZE, PATCH_SIZE)
        width = self.spec.width if select is None else len(select)
        out = np.empty((len(stack), width))
        for start in range(0, len(stack), chunk_size):
            out[start : start + chunk_size] = self.build(stack[start : start + chunk_size], select)
        return out

    def image_maps(
        self, padded: np.ndarray, types: Optional[Sequence[int]] = None
    ) -> "RepresentationMaps":
        """Transform outputs at every window position of a padded image.

        Args:
            padded: 2D array; the patch with top-left corner (r, c) is
                ``padded[r:r+15, c:c+15]``.
            types: Types to compute maps for, by default all enabled ones.
        """
        padded = np.asarray(padded, dtype=np.float64)
        if padded.ndim != 2 or min(padded.shape) < PATCH_SIZE:
            raise ValueError(f"expected a 2D array of at least 15x15, got {padded.shape}")
        types = self.spec.enabled_types if types is None else tuple(types)
        maps: Dict[str, np.ndarray] = {}
        if 2 in types:
            maps["saab5"] = project_windows(padded, 5, self._require("saab5").kernels)
            maps["saab7"] = project_windows(padded, 7, self._require("saab7").kernels)
        if 3 in types:
            maps["saab3"] = project_windows(padded, 3, self._require("saab3").kernels)
        if 4 in types:
            raw = project_windows(padded, 2, HAAR)
            maps["haar"] = np.concatenate([raw, self._require("pca4").transform(raw)], axis=2)
        if 5 in types:
            raw = project_windows(padded, 3, LAWS_KERNELS) / LAWS_NORMS
            maps["laws"] = np.concatenate([raw, self._require("pca9").transform(raw)], axis=2)
        return RepresentationMaps(spec=self.spec, padded=padded, maps=maps, types=types)

    def build_image(
        self, image: np.ndarray, positions: np.ndarray, select: Optional[np.ndarray] = None
    ) -> np.ndarray:
        """Pool rows for the 15x15 neighborhoods of ``positions`` in a whole image.

        Gives the same values as :meth:`build` on the replicate-padded patches
        of the same centers, but every transform runs once per image location.
        """
        padded = np.pad(np.asarray(image, dtype=np.float64), PATCH_SIZE // 2, mode="edge")
        maps = self.image_maps(padded, self.spec.types_for(select))
        return maps.gather(np.asarray(positions, dtype=np.int64), select)



@dataclass
class RepresentationMaps:
    """Per-location transform outputs of a pool over one padded image.

    Every map is indexed by the top-left corner of its window in ``padded``
    and holds the coefficients of that window on its last axis.
    """

    spec: RepresentationSpec
    padded: np.ndarray
    maps: Dict[str, np.ndarray]
    types: Tuple[int, ...]

    def patches(self, corners: np.ndarray) -> np.ndarray:
        """(N, 15, 15) patches with the given top-left corners."""
        offsets = np.arange(PATCH_SIZE)
        rows = corners[:, 0, None, None] + offsets[None, :, None]
        cols = corners[:, 1, None, None] + offsets[None, None, :]
        return self.padded[rows, cols]

    def _at(self, name: str, corners: np.ndarray, windows: Sequence[Tuple[int, int]]) -> np.ndarray:
        if name not in self.maps:
            raise ConfigurationError(f"representation map {name} was not computed")
        rows = corners[:, 0, None] + np.array([r for r, _ in windows])[None, :]
        cols = corners[:, 1, None] + np.array([c for _, c in windows])[None, :]
        return self.maps[name][rows, cols].reshape(len(corners), -1)

    def _block(self, t: int, corners: np.ndarray) -> np.ndarray:
        if t not in self.types:
            raise ConfigurationError(f"representation maps of Type {t} were not computed")
        if t == 1:
            return self.patches(corners).reshape(len(corners), -1)
        if t == 2:
            return np.concatenate(
                [self._at("saab5", corners, [CENTRAL_5]), self._at("saab7", corners, [CENTRAL_7])],
                axis=1,
            )
        if t == 3:
            return self._at("saab3", corners, RING_POSITIONS)
        if t == 4:
            return self._at("haar", corners, HAAR_POSITIONS)
        return self._at("laws", corners, LAWS_POSITIONS)

    def gather(self, corners: np.ndarray, select: Optional[np.ndarray] = None) -> np.ndarray:
        """Pool matrix of the patches at ``corners``, or only its ``select`` columns."""
        corners = np.asarray(corners, dtype=np.int64).reshape(-1, 2)
        types = self.spec.types_for(select)
        matrix = np.concatenate([self._block(t, corners) for t in types], axis=1)
        if select is None:
            return matrix
        column = np.full(self.spec.width, -1, dtype=np.int64)
        offsets, start = self.spec.offsets(), 0
        for t in types:
            width = TYPE_WIDTHS[t]
            column[offsets[t] : offsets[t] + width] = np.arange(start, start + width)
            start += width
        return matrix[:, column[np.asarray(select, dtype=np.int64)]]


def build_pool(patch, spec: RepresentationSpec, transforms: RepresentationPool) -> np.ndarray:
    """Representation vector of one sample (a PatchSample or a 15x15 array)."""
    patch15 = getattr(patch, "patch15", patch)
    if transforms.spec != spec:
        transforms = RepresentationPool(
            spec=spec,
            saab5=transforms.saab5,
            saab7=transforms.saab7,
            saab3=transforms.saab3,
            pca4=transforms.pca4,
            pca9=transforms.pca9,
        )
    return transforms.build(patch15)
