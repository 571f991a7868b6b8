"""Inference FLOPs and model-size calculus.

Every method is described as an ordered list of steps, each wrapping one
typical operation (pixel-wise arithmetic, matrix multiplication, 3-D
convolution, channel-wise filtering, cluster prediction, boosted-tree
prediction, sibling fusion, feature indexing). Evaluating a method yields
per-step FLOPs ``F``, FLOPs per predicted HR pixel ``F_p`` and parameter
count ``M``, procedure sub-totals and totals.

LSR partitions its pixels into easy and hard ones; its total ``F_p`` is the
weighted sum of the two partition sub-totals, rounded to an integer, while
``M`` sums both partitions. ``F_p`` values are kept as exact fractions and
only rounded for display.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd

from lsr.config import settings

PIXEL_BASIS = (
    int(settings.get("complexity_height", 344)),
    int(settings.get("complexity_width", 228)),
)
LSR_WEIGHTS = (
    Fraction(str(settings.get("easy_weight", 0.56))),
    Fraction(str(settings.get("hard_weight", 0.44))),
)
APLUS_PATCHES = 18480
HOG_DIM = 32

Number = Union[int, Fraction]


class ComplexityError(ValueError):
    """Exception raised for malformed descriptors or unknown methods."""

    pass


def _check_counts(**counts: int) -> None:
    for name, value in counts.items():
        if value < 0:
            raise ComplexityError(f"{name} must be >= 0, got {value}")


def _check_fusion(f: int) -> None:
    if f < 1:
        raise ComplexityError(f"fusion factor must be >= 1, got {f}")


# ---------------------------------------------------------------------------
# Typical operations
# ---------------------------------------------------------------------------


def eval_pixelwise(height: int, width: int, channels: int, n: int) -> int:
    """One addition or multiplication on N images of H x W x C."""
    _check_counts(height=height, width=width, channels=channels, n=n)
    return height * width * channels * n


def eval_matmul(t_h: int, t_w: int, n: int) -> Tuple[int, int]:
    """(T_h x T_w) matrix times (T_w x N) samples: T_w mults, T_w - 1 adds each."""
    _check_counts(t_h=t_h, t_w=t_w, n=n)
    flops = (2 * t_w - 1) * t_h * n if t_w else 0
    return flops, t_h * t_w


def eval_conv3d(
    c_i: int, k_h: int, k_w: int, h_o: int, w_o: int, c_o: int, bias: bool = False
) -> Tuple[int, int]:
    """3-D convolution producing C_o maps of H_o x W_o."""
    _check_counts(c_i=c_i, k_h=k_h, k_w=k_w, h_o=h_o, w_o=w_o, c_o=c_o)
    taps = c_i * k_h * k_w
    if bias:
        return 2 * taps * h_o * w_o * c_o, (taps + 1) * c_o
    return max(2 * taps - 1, 0) * h_o * w_o * c_o, taps * c_o


def eval_channelwise(
    c_i: int, k_h: int, k_w: int, c_o: int, n_type: int, f: int = 1
) -> Tuple[int, int]:
    """Channel-wise 2-D filtering per pixel; N_type counts filter plus PCA stages."""
    _check_counts(c_i=c_i, k_h=k_h, k_w=k_w, c_o=c_o, n_type=n_type)
    _check_fusion(f)
    taps = k_h * k_w
    return c_i * (2 * taps - 1) * c_o * n_type * f, c_i * taps * c_o * n_type


def eval_cluster_pred(n_fc: int, n_c: int, f: int = 1) -> Tuple[int, int]:
    """Squared L2 distance of an N_fc descriptor to N_c centroids, per sibling."""
    _check_counts(n_fc=n_fc, n_c=n_c)
    _check_fusion(f)
    return max((3 * n_fc - 1) * n_c, 0) * f, n_fc * n_c


def eval_gbt_pred(n_tree: int, d_m: int, f: int = 1, n_c: int = 1) -> Tuple[int, int]:
    """Upper bound for N_tree trees of depth d_M, one ensemble per cluster."""
    _check_counts(n_tree=n_tree, d_m=d_m, n_c=n_c)
    _check_fusion(f)
    n_leaf = 2**d_m
    n_parent = 2**d_m - 1
    return d_m * n_tree * f, (2 * n_parent + n_leaf) * n_tree * n_c


def eval_fusion(f: int) -> int:
    """f - 1 additions and one division to average f siblings (0 for f = 1)."""
    _check_fusion(f)
    return f if f > 1 else 0


# ---------------------------------------------------------------------------
# Op descriptors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cost:
    """FLOPs over the whole image, FLOPs per HR pixel and parameter count."""

    flops: Number = 0
    flops_per_pixel: Fraction = Fraction(0)
    params: int = 0

    def __add__(self, other: "Cost") -> "Cost":
        return Cost(
            self.flops + other.flops,
            self.flops_per_pixel + other.flops_per_pixel,
            self.params + other.params,
        )


def _image_cost(flops: int, params: int, basis: int) -> Cost:
    return Cost(flops, Fraction(flops, basis), params)


def _pixel_cost(per_pixel: int, params: int, basis: int) -> Cost:
    return Cost(per_pixel * basis, Fraction(per_pixel), params)


@dataclass(frozen=True)
class Pixelwise:
    height: int
    width: int
    channels: int = 1
    n: int = 1

    def evaluate(self, basis: int) -> Cost:
        flops = eval_pixelwise(self.height, self.width, self.channels, self.n)
        return _image_cost(flops, 0, basis)


@dataclass(frozen=True)
class MatMul:
    """Matrix multiplication; ``copies`` stored matrices of which one is applied."""

    t_h: int
    t_w: int
    n: int
    copies: int = 1

    def evaluate(self, basis: int) -> Cost:
        _check_counts(copies=self.copies)
        flops, params = eval_matmul(self.t_h, self.t_w, self.n)
        return _image_cost(flops, params * self.copies, basis)


@dataclass(frozen=True)
class Conv3d:
    """Convolution layer(s).

    ``bias_in_flops`` and ``bias_in_params`` choose the bias convention
    separately for F and M; ``layers`` repeats identical layers.
    """

    c_i: int
    k_h: int
    k_w: int
    h_o: int
    w_o: int
    c_o: int
    bias_in_flops: bool = True
    bias_in_params: bool = True
    layers: int = 1

    def evaluate(self, basis: int) -> Cost:
        _check_counts(layers=self.layers)
        dims = (self.c_i, self.k_h, self.k_w, self.h_o, self.w_o, self.c_o)
        flops, _ = eval_conv3d(*dims, bias=self.bias_in_flops)
        _, params = eval_conv3d(*dims, bias=self.bias_in_params)
        return _image_cost(flops * self.layers, params * self.layers, basis)


@dataclass(frozen=True)
class Channelwise:
    c_i: int
    k_h: int
    k_w: int
    c_o: int
    n_type: int
    f: int = 1

    def evaluate(self, basis: int) -> Cost:
        per_pixel, params = eval_channelwise(
            self.c_i, self.k_h, self.k_w, self.c_o, self.n_type, self.f
        )
        return _pixel_cost(per_pixel, params, basis)


@dataclass(frozen=True)
class ClusterPred:
    n_fc: int
    n_c: int
    f: int = 1

    def evaluate(self, basis: int) -> Cost:
        return _pixel_cost(*eval_cluster_pred(self.n_fc, self.n_c, self.f), basis)


@dataclass(frozen=True)
class GbtPred:
    n_tree: int
    d_m: int
    f: int = 1
    n_c: int = 1

    def evaluate(self, basis: int) -> Cost:
        return _pixel_cost(*eval_gbt_pred(self.n_tree, self.d_m, self.f, self.n_c), basis)


@dataclass(frozen=True)
class Fusion:
    f: int

    def evaluate(self, basis: int) -> Cost:
        return _pixel_cost(eval_fusion(self.f), 0, basis)


@dataclass(frozen=True)
class FeatureIndex:
    """Stored indices of the N_fr selected features; no arithmetic."""

    n_fr: int

    def evaluate(self, basis: int) -> Cost:
        _check_counts(n_fr=self.n_fr)
        return _pixel_cost(0, self.n_fr, basis)


OpDescriptor = Union[
    Pixelwise, MatMul, Conv3d, Channelwise, ClusterPred, GbtPred, Fusion, FeatureIndex
]


# ---------------------------------------------------------------------------
# Methods and reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Step:
    label: str
    op: OpDescriptor
    procedure: str = ""
    partition: Optional[str] = None


@dataclass
class MethodDescriptor:
    """A named list of steps over a pixel basis.

    Attributes:
        name: Method name ("aplus", "lsr-v1", ...).
        steps: Ordered steps; LSR steps carry their partition.
        pixel_basis: (H, W) of the predicted HR image.
        weights: Partition -> weight for partitioned methods (must sum to 1).
        notes: Conventions worth flagging in reports.
    """

    name: str
    steps: List[Step]
    pixel_basis: Tuple[int, int] = PIXEL_BASIS
    weights: Dict[str, Fraction] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    @property
    def pixels(self) -> int:
        return self.pixel_basis[0] * self.pixel_basis[1]

    def validate(self) -> None:
        if self.pixel_basis[0] <= 0 or self.pixel_basis[1] <= 0:
            raise ComplexityError(f"pixel basis must be positive, got {self.pixel_basis}")
        if self.weights:
            if sum(self.weights.values()) != 1:
                raise ComplexityError(f"{self.name}: partition weights must sum to 1")
            unknown = {s.partition for s in self.steps} - set(self.weights)
            if unknown:
                raise ComplexityError(f"{self.name}: steps in unweighted partitions {unknown}")


@dataclass
class StepCost:
    step: Step
    cost: Cost


@dataclass
class ComplexityReport:
    """Evaluated method.

    Attributes:
        method: Method name.
        pixel_basis: (H, W) used for F_p.
        steps: Cost of every step, in descriptor order.
        subtotals: (partition, procedure) -> summed cost.
        partition_totals: Partition -> summed cost (partitioned methods only).
        total: Method total.
        notes: Copied from the descriptor.
    """

    method: str
    pixel_basis: Tuple[int, int]
    steps: List[StepCost]
    subtotals: Dict[Tuple[Optional[str], str], Cost]
    partition_totals: Dict[str, Cost]
    total: Cost
    notes: List[str] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        """Step, sub-total and total rows with columns step, label, F, F_p, M."""
        rows = []
        for item in self.steps:
            name = _procedure_name(item.step.partition, item.step.procedure)
            rows.append(_row(name, item.step.label, item.cost))
        for (partition, procedure), cost in self.subtotals.items():
            rows.append(_row(_procedure_name(partition, procedure), "Sub-total", cost))
        for partition, cost in self.partition_totals.items():
            rows.append(_row(partition, "Sub-total", cost))
        rows.append(_row("Total", "", self.total))
        return pd.DataFrame(rows, columns=["step", "label", "F", "F_p", "M"])

    def to_csv(self, path=None) -> Optional[str]:
        return self.to_frame().to_csv(path, index=False, lineterminator="\n")


def _procedure_name(partition: Optional[str], procedure: str) -> str:
    return f"{partition}/{procedure}" if partition else procedure


def _row(step: str, label: str, cost: Cost) -> dict:
    return {
        "step": step,
        "label": label,
        "F": int(round(cost.flops)),
        "F_p": round(float(cost.flops_per_pixel), 2),
        "M": int(cost.params),
    }


def format_count(value: Number) -> str:
    """Short form used in tables: 78.43k, 90.35M, 1.23B."""
    value = float(value)
    for limit, suffix in ((1e9, "B"), (1e6, "M"), (1e3, "k")):
        if abs(value) >= limit:
            return f"{value / limit:.2f}{suffix}"
    return f"{value:.0f}"


def eval_method(descriptor: MethodDescriptor) -> ComplexityReport:
    """Evaluate every step and aggregate.

    Unpartitioned methods sum F, F_p and M over all steps. Partitioned
    methods weight the partition F_p sub-totals, round the result to an
    integer and sum M over partitions.
    """
    descriptor.validate()
    basis = descriptor.pixels
    steps = [StepCost(step, step.op.evaluate(basis)) for step in descriptor.steps]

    subtotals: Dict[Tuple[Optional[str], str], Cost] = {}
    partitions: Dict[str, Cost] = {}
    for item in steps:
        key = (item.step.partition, item.step.procedure)
        subtotals[key] = subtotals.get(key, Cost()) + item.cost
        if item.step.partition is not None:
            partitions[item.step.partition] = partitions.get(item.step.partition, Cost()) + item.cost

    if descriptor.weights:
        weighted = sum(
            (w * partitions.get(p, Cost()).flops_per_pixel for p, w in descriptor.weights.items()),
            Fraction(0),
        )
        per_pixel = Fraction(round(weighted))
        params = sum(c.params for c in partitions.values())
        total = Cost(per_pixel * basis, per_pixel, params)
    else:
        total = sum((item.cost for item in steps), Cost())

    return ComplexityReport(
        method=descriptor.name,
        pixel_basis=descriptor.pixel_basis,
        steps=steps,
        subtotals=subtotals,
        partition_totals=partitions,
        total=total,
        notes=list(descriptor.notes),
    )


# ---------------------------------------------------------------------------
# Method descriptors
# ---------------------------------------------------------------------------

# Channel-wise filters per representation type: (label, C_i, K_h, K_w, C_o, N_type)
TYPE_FILTERS: Dict[int, List[Tuple[str, int, int, int, int, int]]] = {
    1: [("Type 1, Spatial", 1, 1, 1, 1, 0)],
    2: [("Type 2, Central Saab 5x5", 1, 5, 5, 25, 1), ("Type 2, Central Saab 7x7", 1, 7, 7, 49, 1)],
    3: [("Type 3, Ringwise Saab", 1, 3, 3, 9, 1)],
    4: [("Type 4, Haar & PCA", 1, 2, 2, 4, 2)],
    5: [("Type 5, Laws & PCA", 1, 3, 3, 9, 2)],
}


def aplus_descriptor(pixel_basis: Tuple[int, int] = PIXEL_BASIS) -> MethodDescriptor:
    """A+ with 6x6 patches and a 1024-atom dictionary."""
    h, w = pixel_basis
    patches = round(APLUS_PATCHES * h * w / (PIXEL_BASIS[0] * PIXEL_BASIS[1]))
    derivative = [("D1_w", 1, 3), ("D1_h", 3, 1), ("D2_w", 1, 5), ("D2_h", 5, 1)]
    steps = [
        Step(label, Conv3d(1, k_h, k_w, h, w, 1, False, False), "IFE")
        for label, k_h, k_w in derivative
    ]
    steps += [
        Step("ILR Feat. Dim. Red.", MatMul(28, 144, patches), "RPP"),
        Step("Dist. to ILR Atoms", MatMul(1024, 28, patches), "RPP"),
        Step("Regression Prediction", MatMul(36, 28, patches, copies=1024), "RPP"),
        Step("Add. ILR to pred. Res.", Pixelwise(6, 6, 1, patches), "HIP"),
        Step("Cumu. of pixel values", Pixelwise(6, 6, 1, patches), "HIP"),
        Step("Div. by pixel counter", Pixelwise(h, w, 1, 1), "HIP"),
    ]
    notes = [f"{patches} 6x6 patches"]
    return MethodDescriptor("aplus", steps, pixel_basis, notes=notes)


def srcnn_descriptor(pixel_basis: Tuple[int, int] = PIXEL_BASIS) -> MethodDescriptor:
    """SRCNN 9-5-5 with bias."""
    h, w = pixel_basis
    steps = [
        Step("conv1", Conv3d(1, 9, 9, h, w, 64)),
        Step("conv2", Conv3d(64, 5, 5, h, w, 32)),
        Step("conv3", Conv3d(32, 5, 5, h, w, 1)),
    ]
    return MethodDescriptor("srcnn", steps, pixel_basis)


def vdsr_descriptor(pixel_basis: Tuple[int, int] = PIXEL_BASIS) -> MethodDescriptor:
    """VDSR, 20 layers of 3x3 plus the residual addition."""
    h, w = pixel_basis
    steps = [
        Step("conv1", Conv3d(1, 3, 3, h, w, 64, bias_in_params=False)),
        Step("conv2 - 19", Conv3d(64, 3, 3, h, w, 64, bias_in_params=False, layers=18)),
        Step("conv20", Conv3d(64, 3, 3, h, w, 1, bias_in_params=False)),
        Step("post-process", Pixelwise(h, w, 1, 1)),
    ]
    notes = ["bias counted in FLOPs but not in model size"]
    return MethodDescriptor("vdsr", steps, pixel_basis, notes=notes)


def _lsr_partition(
    partition: str,
    types: Sequence[int],
    n_features: int,
    n_trees: int,
    max_depth: int,
    clusters: int,
    fusion: int,
    hog_dim: int,
    pixel_basis: Tuple[int, int],
) -> List[Step]:
    steps = []
    for t in sorted(set(types)):
        for label, c_i, k_h, k_w, c_o, n_type in TYPE_FILTERS[t]:
            op = Channelwise(c_i, k_h, k_w, c_o, n_type, fusion)
            steps.append(Step(label, op, "URL", partition))
    steps.append(Step("RFT feature indices", FeatureIndex(n_features), "SFL", partition))
    n_fc = hog_dim if clusters > 1 else 0
    steps += [
        Step("Cluster Pred.", ClusterPred(n_fc, clusters, fusion), "SDL", partition),
        Step("Regressor Pred.", GbtPred(n_trees, max_depth, fusion, clusters), "SDL", partition),
        Step("Prediction Fusion", Fusion(fusion), "SDL", partition),
        Step("Post-process", Pixelwise(*pixel_basis, 1, 1), "Post", partition),
    ]
    return steps


def lsr_descriptor(
    name: str,
    easy_types: Sequence[int] = (1, 3),
    hard_types: Sequence[int] = (1, 2, 3, 4, 5),
    easy_features: int = 105,
    hard_features: int = 374,
    easy_trees: int = 50,
    hard_trees: int = 500,
    max_depth: int = 6,
    clusters: int = 8,
    fusion: int = 2,
    hog_dim: int = HOG_DIM,
    weights: Tuple[Fraction, Fraction] = LSR_WEIGHTS,
    pixel_basis: Tuple[int, int] = PIXEL_BASIS,
) -> MethodDescriptor:
    """LSR with an easy and a hard partition.

    The easy partition is never clustered and never fused. A hard partition
    with ``clusters == 1`` has no cluster prediction step.
    """
    steps = _lsr_partition(
        "easy", easy_types, easy_features, easy_trees, max_depth, 1, 1, hog_dim, pixel_basis
    )
    steps += _lsr_partition(
        "hard", hard_types, hard_features, hard_trees, max_depth, clusters, fusion, hog_dim,
        pixel_basis,
    )
    easy_w, hard_w = (Fraction(str(v)) for v in weights)
    return MethodDescriptor(name, steps, pixel_basis, {"easy": easy_w, "hard": hard_w})


def builtin_methods(pixel_basis: Tuple[int, int] = PIXEL_BASIS) -> List[MethodDescriptor]:
    """A+, SRCNN, VDSR, LSR V1 and LSR V2 with their reference parameters."""
    return [
        aplus_descriptor(pixel_basis),
        srcnn_descriptor(pixel_basis),
        vdsr_descriptor(pixel_basis),
        lsr_descriptor("lsr-v1", pixel_basis=pixel_basis),
        lsr_descriptor("lsr-v2", hard_types=(5,), hard_features=135, pixel_basis=pixel_basis),
    ]


def method_names() -> List[str]:
    return [d.name for d in builtin_methods()]


def get_method(name: str, pixel_basis: Tuple[int, int] = PIXEL_BASIS) -> MethodDescriptor:
    """Builtin descriptor by (case-insensitive) name."""
    for descriptor in builtin_methods(pixel_basis):
        if descriptor.name == name.lower():
            return descriptor
    raise ComplexityError(f"unknown method {name!r}; expected one of {method_names()}")


def descriptor_from_config(
    config, pixel_basis: Tuple[int, int] = PIXEL_BASIS, weights: Tuple = LSR_WEIGHTS
) -> MethodDescriptor:
    """LSR descriptor implied by a RunConfig before any training."""
    return lsr_descriptor(
        f"lsr-{config.variant.lower()}",
        easy_types=config.easy_types,
        hard_types=config.hard_types,
        easy_features=config.easy_features,
        hard_features=config.hard_features,
        easy_trees=config.easy_trees,
        hard_trees=config.hard_trees,
        max_depth=config.max_depth,
        clusters=config.hard_clusters,
        fusion=config.fusion_factor,
        weights=weights,
        pixel_basis=pixel_basis,
    )


def descriptor_from_model(
    model, pixel_basis: Tuple[int, int] = PIXEL_BASIS, weights: Tuple = LSR_WEIGHTS
) -> MethodDescriptor:
    """LSR descriptor regenerated from a trained model's live parameters.

    A branch the model does not have hands its weight to the other branch.
    """
    cfg = model.config
    branches = {"easy": model.easy, "hard": model.hard}
    steps: List[Step] = []
    weight_map = dict(zip(("easy", "hard"), (Fraction(str(w)) for w in weights)))
    for name, branch in branches.items():
        if branch is None:
            other = "hard" if name == "easy" else "easy"
            weight_map[other] += weight_map.pop(name)
            continue
        n_trees = max((reg.n_trees for reg in branch.regressors), default=0)
        hog_dim = branch.kmeans.dim if branch.kmeans is not None else HOG_DIM
        steps += _lsr_partition(
            name,
            branch.types,
            branch.feature_count,
            n_trees,
            cfg.max_depth,
            branch.clusters,
            branch.fusion_factor,
            hog_dim,
            pixel_basis,
        )
    return MethodDescriptor(f"lsr-{cfg.variant.lower()}", steps, pixel_basis, weight_map)


def compare_methods(reports: Sequence[ComplexityReport]) -> pd.DataFrame:
    """F_p and M of each method relative to the cheapest and smallest one."""
    if not reports:
        raise ComplexityError("nothing to compare")
    per_pixel = [float(r.total.flops_per_pixel) for r in reports]
    params = [int(r.total.params) for r in reports]
    min_fp = min(v for v in per_pixel if v > 0) if any(per_pixel) else 1.0
    min_m = min(v for v in params if v > 0) if any(params) else 1
    return pd.DataFrame(
        {
            "method": [r.method for r in reports],
            "F_p": [round(v, 2) for v in per_pixel],
            "M": params,
            "F_p_ratio": [round(v / min_fp, 2) for v in per_pixel],
            "M_ratio": [round(v / min_m, 2) for v in params],
        }
    )
