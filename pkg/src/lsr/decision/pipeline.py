"""LSR training and inference.

Training: modcrop, bicubic down-sampling and Lanczos up-sampling give an
HR/ILR pair per image; 15x15 ILR patches around every pixel on the stride
grid become samples with residual targets HR - ILR. Samples are split by
patch variance into an easy and a hard branch. Each branch fits its
representation transforms, keeps the lowest-loss features by the relevant
feature test and trains boosted trees on them; the hard branch first
clusters its samples by HOG descriptor and trains one ensemble per cluster.

Inference: every ILR pixel is routed to its branch; hard pixels are
predicted on f dihedral siblings of their patch (each assigned to its own
cluster) and the f predictions are averaged. The HR estimate is the ILR plus
the predicted residual map.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from rich.progress import Progress, SpinnerColumn, TextColumn

from lsr.config import RunConfig
from lsr.decision.gbtRegressor import GbtRegressor, gbt_train
from lsr.decision.hog import hog_batch
from lsr.decision.kmeans import ClusteringError, KMeansModel, kmeans_fit
from lsr.imaging import (
    ImagePair,
    YImage,
    lanczos_resize_patches,
    lanczos_upscale,
    read_image,
    rgb_to_ycbcr,
    ycbcr_to_rgb,
)
from lsr.patches import (
    HOG_PATCH_SIZE,
    PATCH_SIZE,
    Dataset,
    Hardness,
    PatchSample,
    augment,
    build_dataset,
    dihedral,
    dihedral_layout,
    extract_patches,
    pad_image,
    row_variances,
    sample_positions,
)
from lsr.representations import RepresentationPool
from lsr.rft import select_features
from lsr.utils.parallel import ThreadBudget

MODEL_VERSION = 1
IMAGE_SUFFIXES = (".png", ".bmp", ".jpg", ".jpeg", ".tif", ".tiff")

# Dihedral modes of the fusion siblings; all of them keep the center pixel.
FUSION_MODES = {1: (0,), 2: (0, 4), 4: (0, 4, 2, 6)}

ImageInput = Union[YImage, Tuple[str, YImage], str, Path]


class TrainingError(RuntimeError):
    """Exception raised when a model cannot be trained from the given data."""

    pass


@dataclass
class BranchModel:
    """Everything one branch (easy or hard) needs at inference.

    Attributes:
        name: "easy" or "hard".
        pool: Representation spec with its fitted transforms.
        selected_ids: Pool columns fed to the regressors, ascending RFT loss.
        rft_curve: Sorted RFT losses of the whole pool.
        rft_curve_ids: Feature ids in ``rft_curve`` order.
        regressors: One ensemble per cluster (a single one without clustering).
        kmeans: HOG centroids, None when the branch is not clustered.
        fusion_factor: Number of dihedral siblings averaged at inference.
        train_samples: Training samples (after augmentation) per cluster.
    """

    name: str
    pool: RepresentationPool
    selected_ids: np.ndarray
    rft_curve: np.ndarray
    rft_curve_ids: np.ndarray
    regressors: List[GbtRegressor]
    kmeans: Optional[KMeansModel] = None
    fusion_factor: int = 1
    train_samples: List[int] = field(default_factory=list)

    @property
    def types(self) -> Tuple[int, ...]:
        return self.pool.spec.enabled_types

    @property
    def feature_count(self) -> int:
        return int(len(self.selected_ids))

    @property
    def clusters(self) -> int:
        return self.kmeans.k if self.kmeans is not None else 1

    def features(self, patches15: np.ndarray, chunk_size: int = 4096) -> np.ndarray:
        return self.pool.build_chunked(patches15, self.selected_ids, chunk_size)

    def _predict_once(self, patches15: np.ndarray, patches16: np.ndarray, chunk_size: int):
        return self._regress(self.features(patches15, chunk_size), patches16)

    def _regress(self, x: np.ndarray, patches16: np.ndarray) -> np.ndarray:
        if self.kmeans is None:
            return self.regressors[0].predict(x)
        labels = self.kmeans.assign(hog_batch(patches16))
        out = np.empty(len(x))
        for cluster in np.unique(labels):
            rows = labels == cluster
            out[rows] = self.regressors[cluster].predict(x[rows])
        return out

    def predict(
        self, patches15: np.ndarray, patches16: np.ndarray, chunk_size: int = 4096
    ) -> np.ndarray:
        """Residual predictions averaged over the fusion siblings."""
        if len(patches15) == 0:
            return np.zeros(0)
        total = np.zeros(len(patches15))
        for mode in FUSION_MODES[self.fusion_factor]:
            total += self._predict_once(
                dihedral(patches15, mode), dihedral(patches16, mode), chunk_size
            )
        return total / self.fusion_factor

    def predict_image(
        self, ilr: YImage, positions: np.ndarray, chunk_size: int = 4096
    ) -> np.ndarray:
        """Same as :meth:`predict` for the patches of ``positions`` in ``ilr``.

        Each fusion sibling reads its features from whole-image maps of the
        dihedrally transformed ILR image, computed one band of patch rows at
        a time.
        """
        if len(positions) == 0:
            return np.zeros(0)
        padded = pad_image(ilr)
        types = self.pool.spec.types_for(self.selected_ids)
        total = np.zeros(len(positions))
        for mode in FUSION_MODES[self.fusion_factor]:
            image, corners = dihedral_layout(padded, positions, mode)
            band = max(PATCH_SIZE, chunk_size // image.shape[1])

            def run(start: int, image=image, corners=corners, mode=mode):
                rows = np.flatnonzero((corners[:, 0] >= start) & (corners[:, 0] < start + band))
                if not len(rows):
                    return rows, np.zeros(0)
                maps = self.pool.image_maps(image[start : start + band + PATCH_SIZE - 1], types)
                x = maps.gather(corners[rows] - np.array([start, 0]), self.selected_ids)
                patches16 = None
                if self.kmeans is not None:
                    patches15 = extract_patches(ilr, positions[rows])
                    patches16 = dihedral(lanczos_resize_patches(patches15, HOG_PATCH_SIZE), mode)
                return rows, self._regress(x, patches16)

            starts = range(0, image.shape[0] - PATCH_SIZE + 1, band)
            for rows, values in ThreadBudget().map(run, starts):
                total[rows] += values
        return total / self.fusion_factor


@dataclass
class LsrModel:
    """A trained model: run configuration plus the easy and hard branches.

    Either branch may be missing when the training corpus had no samples of
    that class; its pixels are then predicted by the other branch.
    """

    config: RunConfig
    easy: Optional[BranchModel]
    hard: Optional[BranchModel]
    version: int = MODEL_VERSION
    warnings: List[str] = field(default_factory=list)

    @property
    def variant(self) -> str:
        return self.config.variant

    def branch_for(self, hardness: Hardness) -> BranchModel:
        preferred, other = (self.hard, self.easy) if hardness else (self.easy, self.hard)
        branch = preferred if preferred is not None else other
        if branch is None:
            raise TrainingError("model has neither an easy nor a hard branch")
        return branch

    def with_fusion_factor(self, factor: int) -> "LsrModel":
        """Copy whose hard branch averages ``factor`` siblings (1, 2 or 4)."""
        if factor not in FUSION_MODES:
            raise ValueError(f"fusion factor must be one of {sorted(FUSION_MODES)}, got {factor}")
        hard = replace(self.hard, fusion_factor=factor) if self.hard is not None else None
        return replace(self, hard=hard)


# ---------------------------------------------------------------------------
# Images
# ---------------------------------------------------------------------------


def list_images(directory: Union[str, Path]) -> List[Path]:
    """Image files directly inside ``directory``, sorted by name."""
    root = Path(directory)
    return sorted(p for p in root.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


def _named_images(images: Sequence[ImageInput], warnings: List[str]) -> List[Tuple[str, YImage]]:
    named = []
    for i, item in enumerate(images):
        if isinstance(item, YImage):
            named.append((f"image{i}", item))
        elif isinstance(item, tuple):
            named.append((str(item[0]), item[1]))
        else:
            try:
                luma, _ = read_image(item)
            except (OSError, ValueError) as e:
                warnings.append(f"skipping unreadable image {item}: {e}")
                continue
            named.append((Path(item).name, luma))
    return named


def _scan_image(pair: ImagePair, stride: int, chunk_size: int) -> Tuple[np.ndarray, np.ndarray]:
    """Stride-grid centers of a pair and the variance of each neighborhood."""
    positions = sample_positions(pair.ilr.height, pair.ilr.width, stride)
    return positions, _patch_variances(pair.ilr, positions, chunk_size)


def _patch_variances(ilr: YImage, positions: np.ndarray, chunk_size: int) -> np.ndarray:
    variances = np.empty(len(positions))
    for start in range(0, len(positions), chunk_size):
        chunk = extract_patches(ilr, positions[start : start + chunk_size])
        variances[start : start + chunk_size] = row_variances(chunk.reshape(len(chunk), -1))
    return variances


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


class LsrTrainer:
    """Builds an LsrModel from training images.

    Attributes:
        config: Hyperparameters of the run.
        verbose: Narrate stages and sample counts.
        warnings: Non-fatal problems found while training.
    """

    def __init__(self, config: Optional[RunConfig] = None, verbose: bool = False):
        self.config = config if config is not None else RunConfig.from_settings()
        self.verbose = verbose
        self.warnings: List[str] = []
        self._rng = np.random.default_rng(self.config.seed)

    def _log(self, message: str) -> None:
        if self.verbose:
            print(message)

    def _warn(self, message: str) -> None:
        self.warnings.append(message)
        self._log(f"Warning: {message}")

    def _progress(self) -> Progress:
        return Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            transient=True,
            disable=not self.verbose,
        )

    @property
    def branch_cap(self) -> int:
        """Samples per branch kept before augmentation."""
        cap = self.config.max_train_samples
        return max(1, cap // 8) if self.config.augment else cap

    def collect(self, images: Sequence[Tuple[str, YImage]]) -> Tuple[Dataset, Dataset]:
        """Sample every image and return the (easy, hard) training sets."""
        cfg = self.config
        easy_parts, hard_parts = [], []
        for name, hr in images:
            pair = ImagePair.from_hr(hr, cfg.scale)
            positions, variances = _scan_image(pair, cfg.train_stride, cfg.chunk_size)
            hard_mask = variances >= cfg.variance_threshold
            for mask, parts in ((~hard_mask, easy_parts), (hard_mask, hard_parts)):
                index = np.flatnonzero(mask)
                if not len(index):
                    continue
                if len(index) > self.branch_cap:
                    index = np.sort(self._rng.choice(index, size=self.branch_cap, replace=False))
                chosen = positions[index]
                rows, cols = chosen[:, 0], chosen[:, 1]
                residuals = pair.hr.data[rows, cols] - pair.ilr.data[rows, cols]
                parts.append(
                    build_dataset(pair.ilr, chosen, residuals, cfg.variance_threshold, name)
                )
            self._log(f"{name}: {len(positions)} samples, {int(hard_mask.sum())} hard")

        easy = Dataset.concat(easy_parts).subsample(self.branch_cap, self._rng)
        hard = Dataset.concat(hard_parts).subsample(self.branch_cap, self._rng)
        if cfg.augment:
            easy, hard = augment(easy), augment(hard)
        total = len(easy) + len(hard)
        if total:
            ratio = f"{len(easy) / total:.2f}:{len(hard) / total:.2f}"
            self._log(f"Training set: {len(easy)} easy, {len(hard)} hard (easy:hard = {ratio})")
        return easy, hard

    def _fit_selection(self, dataset: Dataset, types: Sequence[int], count: int, name: str):
        cfg = self.config
        pool = RepresentationPool.fit(dataset.patches15, types, cfg.saab_max_windows, self._rng)
        if pool.rank_deficient:
            self._warn(f"{name} branch: representation transforms are rank deficient")
        scored = dataset.subsample(cfg.rft_max_samples, self._rng)
        matrix = pool.build_chunked(scored.patches15, chunk_size=cfg.chunk_size)
        selection = select_features(
            matrix, scored.residuals, cfg.selection_mode, count=count, bins=cfg.rft_bins
        )
        self._log(
            f"{name} branch: kept {selection.count} of {pool.spec.width} features "
            f"(RFT loss {selection.full_curve[0]:.3f} .. "
            f"{selection.full_curve[selection.count - 1]:.3f})"
        )
        return pool, selection

    def _train_regressor(self, x: np.ndarray, y: np.ndarray, n_trees: int) -> GbtRegressor:
        cfg = self.config
        return gbt_train(x, y, n_trees, cfg.max_depth, cfg.learning_rate, cfg.reg_lambda)

    def train_branch(self, dataset: Dataset, hard: bool) -> BranchModel:
        """Fit transforms, select features and train the regressors of one branch."""
        cfg = self.config
        name = "hard" if hard else "easy"
        types = cfg.hard_types if hard else cfg.easy_types
        count = cfg.hard_features if hard else cfg.easy_features
        n_trees = cfg.hard_trees if hard else cfg.easy_trees

        with self._progress() as progress:
            progress.add_task(description=f"Selecting {name} features...", total=None)
            pool, selection = self._fit_selection(dataset, types, count, name)
            x = pool.build_chunked(dataset.patches15, selection.selected_ids, cfg.chunk_size)
        y = dataset.residuals

        kmeans = None
        labels = np.zeros(len(dataset), dtype=np.int64)
        clusters = 1
        if hard and cfg.use_clustering:
            clusters = cfg.hard_clusters
            descriptors = hog_batch(dataset.patches16)
            try:
                kmeans = kmeans_fit(
                    descriptors, clusters, cfg.seed, cfg.kmeans_max_iters, cfg.kmeans_tol
                )
            except ClusteringError as e:
                raise TrainingError(
                    f"{e}; add training images or lower the cluster count"
                ) from e
            labels = kmeans.assign(descriptors)

        sizes = np.bincount(labels, minlength=clusters)
        for cluster, size in enumerate(sizes):
            if size < 2:
                raise TrainingError(
                    f"{name} cluster {cluster} has {size} training samples; "
                    "add training images or lower the cluster count"
                )
        if kmeans is not None:
            self._log(f"{name} branch clusters: {sizes.tolist()}")

        with self._progress() as progress:
            progress.add_task(description=f"Training {name} regressors...", total=None)
            regressors = ThreadBudget().map(
                lambda c: self._train_regressor(x[labels == c], y[labels == c], n_trees),
                range(clusters),
            )
        return BranchModel(
            name=name,
            pool=pool,
            selected_ids=selection.selected_ids,
            rft_curve=selection.full_curve,
            rft_curve_ids=selection.curve_ids,
            regressors=regressors,
            kmeans=kmeans,
            fusion_factor=cfg.fusion_factor if hard else 1,
            train_samples=sizes.tolist(),
        )

    def train(self, images: Sequence[ImageInput]) -> LsrModel:
        """Train both branches.

        Raises:
            TrainingError: If no image is usable or a cluster ends up empty.
        """
        named = _named_images(images, self.warnings)
        if not named:
            raise TrainingError("no usable training images")
        return self.train_datasets(*self.collect(named))

    def train_samples(self, dataset: Dataset) -> LsrModel:
        """Train from prepared samples, e.g. a reloaded sample cache."""
        if len(dataset) == 0:
            raise TrainingError("the sample set is empty")
        self._log(f"Training on {len(dataset)} prepared samples ({dataset.hard_ratio:.2f} hard)")
        return self.train_datasets(*dataset.split())

    def train_datasets(self, easy_set: Dataset, hard_set: Dataset) -> LsrModel:
        """Train both branches from already collected (easy, hard) sets."""
        targets = np.concatenate([easy_set.residuals, hard_set.residuals])
        if len(targets) and np.ptp(targets) == 0.0:
            self._warn("all residual targets are equal; the model will predict a constant")

        branches = {}
        for dataset, hard in ((easy_set, False), (hard_set, True)):
            name = "hard" if hard else "easy"
            if len(dataset) < 2:
                self._warn(f"no {name} training samples; {name} pixels use the other branch")
                branches[name] = None
                continue
            branches[name] = self.train_branch(dataset, hard)
        if branches["easy"] is None and branches["hard"] is None:
            raise TrainingError("too few training samples for either branch")
        return LsrModel(
            config=self.config,
            easy=branches["easy"],
            hard=branches["hard"],
            warnings=list(self.warnings),
        )


def train_lsr(
    images: Sequence[ImageInput], config: Optional[RunConfig] = None, verbose: bool = False
) -> LsrModel:
    """Train an LSR model on HR training images (arrays, named arrays or paths)."""
    return LsrTrainer(config, verbose=verbose).train(images)


# ---------------------------------------------------------------------------
# Inference
# ---------------------------------------------------------------------------


def predict_residuals(model: LsrModel, dataset: Dataset) -> np.ndarray:
    """Residual prediction for every sample of ``dataset``."""
    out = np.zeros(len(dataset))
    chunk = model.config.chunk_size
    for hardness, mask in ((Hardness.EASY, ~dataset.hard), (Hardness.HARD, dataset.hard)):
        if not mask.any():
            continue
        part = dataset.subset(mask)
        out[mask] = model.branch_for(hardness).predict(part.patches15, part.patches16, chunk)
    return out


def predict_residual(model: LsrModel, sample: PatchSample) -> float:
    """Residual prediction for one sample."""
    branch = model.branch_for(sample.hardness)
    value = branch.predict(np.asarray(sample.patch15)[None], np.asarray(sample.patch16)[None])
    return float(value[0])


def predict_residual_map(model: LsrModel, ilr: YImage) -> np.ndarray:
    """Predicted residual for every ILR pixel as an (H, W) array.

    Features come from whole-image representation maps and match those
    :func:`predict_residuals` computes patch by patch.
    """
    cfg = model.config
    positions = sample_positions(ilr.height, ilr.width, 1)
    hard = _patch_variances(ilr, positions, cfg.chunk_size) >= cfg.variance_threshold
    out = np.zeros(len(positions))
    for hardness, mask in ((Hardness.EASY, ~hard), (Hardness.HARD, hard)):
        if mask.any():
            branch = model.branch_for(hardness)
            out[mask] = branch.predict_image(ilr, positions[mask], cfg.chunk_size)
    return out.reshape(ilr.height, ilr.width)


def superresolve(model: LsrModel, lr: YImage, clamp: bool = True) -> YImage:
    """x2 super-resolution of a luma image.

    Args:
        model: Trained model.
        lr: Low-resolution input.
        clamp: Clip the result to [0, 255]; ``False`` returns ILR + residual
            exactly.
    """
    ilr = lanczos_upscale(lr, model.config.scale)
    hr = YImage(ilr.data + predict_residual_map(model, ilr))
    return hr.clamp() if clamp else hr


def superresolve_color(model: LsrModel, rgb: np.ndarray) -> np.ndarray:
    """Super-resolve the luma of an RGB image; chroma is Lanczos-upscaled."""
    luma, cb, cr = rgb_to_ycbcr(rgb)
    scale = model.config.scale
    hr_luma = superresolve(model, luma)
    cb_up = lanczos_upscale(YImage(cb), scale).data
    cr_up = lanczos_upscale(YImage(cr), scale).data
    return ycbcr_to_rgb(hr_luma, cb_up, cr_up)


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


def dataset_statistics(
    images: Sequence[ImageInput], config: Optional[RunConfig] = None
) -> pd.DataFrame:
    """Easy/hard sample counts and initial residual MSE per image.

    Returns:
        One row per image plus a final ``total`` row with columns
        ``image, samples, easy, hard, hard_ratio, easy_mse, hard_mse`` where
        the MSE columns are the mean squared ILR residual of each class.
    """
    cfg = config if config is not None else RunConfig.from_settings()
    warnings: List[str] = []
    rows = []
    sums = {"samples": 0, "easy": 0, "hard": 0, "easy_sq": 0.0, "hard_sq": 0.0}
    for name, hr in _named_images(images, warnings):
        pair = ImagePair.from_hr(hr, cfg.scale)
        positions, variances = _scan_image(pair, cfg.train_stride, cfg.chunk_size)
        residual = (pair.hr.data - pair.ilr.data)[positions[:, 0], positions[:, 1]]
        hard = variances >= cfg.variance_threshold
        easy_sq, hard_sq = float((residual[~hard] ** 2).sum()), float((residual[hard] ** 2).sum())
        n_easy, n_hard = int((~hard).sum()), int(hard.sum())
        rows.append(_stats_row(name, n_easy, n_hard, easy_sq, hard_sq))
        for key, value in zip(sums, (len(hard), n_easy, n_hard, easy_sq, hard_sq)):
            sums[key] += value
    rows.append(_stats_row("total", sums["easy"], sums["hard"], sums["easy_sq"], sums["hard_sq"]))
    return pd.DataFrame(rows)


def _stats_row(name: str, n_easy: int, n_hard: int, easy_sq: float, hard_sq: float) -> dict:
    samples = n_easy + n_hard
    return {
        "image": name,
        "samples": samples,
        "easy": n_easy,
        "hard": n_hard,
        "hard_ratio": n_hard / samples if samples else 0.0,
        "easy_mse": easy_sq / n_easy if n_easy else float("nan"),
        "hard_mse": hard_sq / n_hard if n_hard else float("nan"),
    }
