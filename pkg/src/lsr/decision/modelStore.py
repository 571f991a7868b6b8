"""LSR1 model file.

Layout (little-endian)::

    magic "LSR1" | u32 version | 8-byte variant tag (ASCII, NUL padded)
    u32 section count
    per section:
        u16 name length | name (UTF-8)
        u8 kind (0 float64, 1 int64, 2 UTF-8 text)
        u8 ndim | u64 * ndim shape
        u64 payload length | payload

The ``manifest`` section is YAML text with every hyperparameter of the run.
Branch sections are prefixed with ``easy.`` or ``hard.``; trees are stored
as pre-order node arrays concatenated per regressor.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import yaml

from lsr.config import ConfigurationError, RunConfig
from lsr.decision.gbtRegressor import GbtRegressor, RegressionTree
from lsr.decision.kmeans import KMeansModel
from lsr.decision.pipeline import FUSION_MODES, MODEL_VERSION, BranchModel, LsrModel
from lsr.representations import ChannelPcaSet, RepresentationPool, RepresentationSpec, SaabKernelSet

MAGIC = b"LSR1"
HEADER = struct.Struct("<4sI8sI")
KIND_F64, KIND_I64, KIND_TEXT = 0, 1, 2

Section = Union[np.ndarray, str]


class ModelFormatError(RuntimeError):
    """Exception raised for unreadable or inconsistent model files."""

    pass


# ---------------------------------------------------------------------------
# Section encoding
# ---------------------------------------------------------------------------


def _encode_section(name: str, value: Section) -> bytes:
    raw_name = name.encode("utf-8")
    if isinstance(value, str):
        kind, shape, payload = KIND_TEXT, (), value.encode("utf-8")
    else:
        arr = np.asarray(value)
        if np.issubdtype(arr.dtype, np.integer) or arr.dtype == np.bool_:
            kind, arr = KIND_I64, arr.astype("<i8")
        else:
            kind, arr = KIND_F64, arr.astype("<f8")
        shape, payload = arr.shape, np.ascontiguousarray(arr).tobytes()
    head = struct.pack("<H", len(raw_name)) + raw_name
    head += struct.pack("<BB", kind, len(shape)) + struct.pack(f"<{len(shape)}Q", *shape)
    return head + struct.pack("<Q", len(payload)) + payload


class _Reader:
    def __init__(self, blob: bytes, source: str):
        self.blob = blob
        self.offset = 0
        self.source = source

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.blob):
            raise ModelFormatError(f"{self.source}: truncated model file")
        values = struct.unpack_from(fmt, self.blob, self.offset)
        self.offset += size
        return values

    def take_bytes(self, size: int) -> bytes:
        if self.offset + size > len(self.blob):
            raise ModelFormatError(f"{self.source}: truncated model file")
        out = self.blob[self.offset : self.offset + size]
        self.offset += size
        return out

    def text(self, raw: bytes, what: str, encoding: str = "utf-8") -> str:
        try:
            return raw.decode(encoding)
        except UnicodeDecodeError as e:
            raise ModelFormatError(f"{self.source}: {what} is not valid {encoding}") from e

    def section(self):
        (name_len,) = self.take("<H")
        name = self.text(self.take_bytes(name_len), "a section name")
        kind, ndim = self.take("<BB")
        shape = self.take(f"<{ndim}Q") if ndim else ()
        (length,) = self.take("<Q")
        payload = self.take_bytes(length)
        if kind == KIND_TEXT:
            return name, self.text(payload, f"section {name}")
        if kind not in (KIND_F64, KIND_I64):
            raise ModelFormatError(f"{self.source}: section {name} has unknown kind {kind}")
        dtype = "<f8" if kind == KIND_F64 else "<i8"
        if length != int(np.prod(shape, dtype=np.int64)) * 8:
            raise ModelFormatError(f"{self.source}: section {name} size does not match its shape")
        return name, np.frombuffer(payload, dtype=dtype).reshape(shape).copy()


# ---------------------------------------------------------------------------
# Model <-> sections
# ---------------------------------------------------------------------------


def _saab_sections(prefix: str, kernels: Optional[SaabKernelSet], out: Dict[str, Section]):
    if kernels is None:
        return
    out[f"{prefix}.kernels"] = kernels.kernels
    out[f"{prefix}.eigenvalues"] = kernels.eigenvalues
    out[f"{prefix}.info"] = np.array([kernels.window, int(kernels.rank_deficient)])


def _pca_sections(prefix: str, pca: Optional[ChannelPcaSet], out: Dict[str, Section]):
    if pca is None:
        return
    out[f"{prefix}.matrix"] = pca.matrix
    out[f"{prefix}.mean"] = pca.mean
    out[f"{prefix}.eigenvalues"] = pca.eigenvalues
    out[f"{prefix}.info"] = np.array([pca.channels, int(pca.rank_deficient)])


def _regressor_sections(prefix: str, reg: GbtRegressor, out: Dict[str, Section]):
    out[f"{prefix}.meta"] = np.array(
        [reg.base_score, reg.learning_rate, reg.max_depth, reg.reg_lambda, reg.n_features],
        dtype=np.float64,
    )
    out[f"{prefix}.sizes"] = np.array([t.n_nodes for t in reg.trees], dtype=np.int64)
    for attr in ("feature", "left", "right"):
        out[f"{prefix}.{attr}"] = np.concatenate(
            [getattr(t, attr) for t in reg.trees] or [np.zeros(0, dtype=np.int64)]
        )
    for attr in ("threshold", "value"):
        out[f"{prefix}.{attr}"] = np.concatenate(
            [getattr(t, attr) for t in reg.trees] or [np.zeros(0)]
        )


def _branch_sections(branch: BranchModel, out: Dict[str, Section]) -> None:
    p = branch.name
    pool = branch.pool
    out[f"{p}.types"] = np.array(branch.types, dtype=np.int64)
    _saab_sections(f"{p}.saab5", pool.saab5, out)
    _saab_sections(f"{p}.saab7", pool.saab7, out)
    _saab_sections(f"{p}.saab3", pool.saab3, out)
    _pca_sections(f"{p}.pca4", pool.pca4, out)
    _pca_sections(f"{p}.pca9", pool.pca9, out)
    out[f"{p}.selected_ids"] = branch.selected_ids
    out[f"{p}.rft_curve"] = branch.rft_curve
    out[f"{p}.rft_curve_ids"] = branch.rft_curve_ids
    out[f"{p}.fusion_factor"] = np.array([branch.fusion_factor], dtype=np.int64)
    out[f"{p}.train_samples"] = np.array(branch.train_samples, dtype=np.int64)
    out[f"{p}.regressors"] = np.array([len(branch.regressors)], dtype=np.int64)
    if branch.kmeans is not None:
        out[f"{p}.centroids"] = branch.kmeans.centroids
        out[f"{p}.kmeans_info"] = np.array(
            [branch.kmeans.iterations, branch.kmeans.inertia], dtype=np.float64
        )
    for c, reg in enumerate(branch.regressors):
        _regressor_sections(f"{p}.reg{c}", reg, out)


def _manifest(model: LsrModel) -> str:
    branches = {}
    for branch in (model.easy, model.hard):
        if branch is None:
            continue
        branches[branch.name] = {
            "types": list(branch.types),
            "features": branch.feature_count,
            "clusters": branch.clusters,
            "trees": [reg.n_trees for reg in branch.regressors],
            "fusion_factor": branch.fusion_factor,
            "train_samples": list(branch.train_samples),
        }
    data = {
        "format_version": model.version,
        "variant": model.variant,
        "config": model.config.to_manifest(),
        "branches": branches,
        "warnings": list(model.warnings),
    }
    return yaml.safe_dump(data, sort_keys=False)


def _need(sections: Dict[str, Section], name: str, source: str):
    if name not in sections:
        raise ModelFormatError(f"{source}: missing section {name}")
    return sections[name]


def _load_saab(sections, prefix, source) -> Optional[SaabKernelSet]:
    if f"{prefix}.kernels" not in sections:
        return None
    info = _need(sections, f"{prefix}.info", source)
    return SaabKernelSet(
        window=int(info[0]),
        kernels=_need(sections, f"{prefix}.kernels", source),
        eigenvalues=_need(sections, f"{prefix}.eigenvalues", source),
        rank_deficient=bool(info[1]),
    )


def _load_pca(sections, prefix, source) -> Optional[ChannelPcaSet]:
    if f"{prefix}.matrix" not in sections:
        return None
    info = _need(sections, f"{prefix}.info", source)
    return ChannelPcaSet(
        channels=int(info[0]),
        matrix=_need(sections, f"{prefix}.matrix", source),
        mean=_need(sections, f"{prefix}.mean", source),
        eigenvalues=_need(sections, f"{prefix}.eigenvalues", source),
        rank_deficient=bool(info[1]),
    )


def _load_regressor(sections, prefix, source) -> GbtRegressor:
    meta = _need(sections, f"{prefix}.meta", source)
    sizes = _need(sections, f"{prefix}.sizes", source)
    arrays = {
        attr: _need(sections, f"{prefix}.{attr}", source)
        for attr in ("feature", "threshold", "left", "right", "value")
    }
    if any(len(a) != int(sizes.sum()) for a in arrays.values()):
        raise ModelFormatError(f"{source}: {prefix} node arrays do not match tree sizes")
    trees = []
    start = 0
    for size in sizes:
        stop = start + int(size)
        trees.append(RegressionTree(**{k: v[start:stop].copy() for k, v in arrays.items()}))
        start = stop
    return GbtRegressor(
        trees=trees,
        base_score=float(meta[0]),
        learning_rate=float(meta[1]),
        max_depth=int(meta[2]),
        reg_lambda=float(meta[3]),
        n_features=int(meta[4]),
    )


def _load_branch(sections, name: str, source: str) -> Optional[BranchModel]:
    if f"{name}.types" not in sections:
        return None
    types = tuple(int(t) for t in _need(sections, f"{name}.types", source))
    try:
        spec = RepresentationSpec(types)
    except ConfigurationError as e:
        raise ModelFormatError(f"{source}: {e}") from e
    pool = RepresentationPool(
        spec=spec,
        saab5=_load_saab(sections, f"{name}.saab5", source),
        saab7=_load_saab(sections, f"{name}.saab7", source),
        saab3=_load_saab(sections, f"{name}.saab3", source),
        pca4=_load_pca(sections, f"{name}.pca4", source),
        pca9=_load_pca(sections, f"{name}.pca9", source),
    )
    selected = _need(sections, f"{name}.selected_ids", source)
    count = int(_need(sections, f"{name}.regressors", source)[0])
    regressors = [_load_regressor(sections, f"{name}.reg{c}", source) for c in range(count)]
    for reg in regressors:
        if reg.max_feature_index() >= len(selected):
            raise ModelFormatError(f"{source}: {name} tree indexes past the selected features")
    if len(selected) and (selected.min() < 0 or selected.max() >= spec.width):
        raise ModelFormatError(f"{source}: {name} selected ids outside the pool")

    fusion_factor = int(_need(sections, f"{name}.fusion_factor", source)[0])
    if fusion_factor not in FUSION_MODES:
        raise ModelFormatError(f"{source}: {name} fusion factor {fusion_factor} is not 1, 2 or 4")

    kmeans = None
    if f"{name}.centroids" in sections:
        info = _need(sections, f"{name}.kmeans_info", source)
        kmeans = KMeansModel(
            centroids=sections[f"{name}.centroids"], iterations=int(info[0]), inertia=float(info[1])
        )
        if kmeans.k != count:
            raise ModelFormatError(f"{source}: {kmeans.k} centroids for {count} regressors")
    return BranchModel(
        name=name,
        pool=pool,
        selected_ids=selected,
        rft_curve=_need(sections, f"{name}.rft_curve", source),
        rft_curve_ids=_need(sections, f"{name}.rft_curve_ids", source),
        regressors=regressors,
        kmeans=kmeans,
        fusion_factor=fusion_factor,
        train_samples=[int(v) for v in _need(sections, f"{name}.train_samples", source)],
    )


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------


def save_model(model: LsrModel, path: Union[str, Path]) -> None:
    """Write ``model`` to ``path`` in the LSR1 format."""
    sections: Dict[str, Section] = {"manifest": _manifest(model)}
    for branch in (model.easy, model.hard):
        if branch is not None:
            _branch_sections(branch, sections)
    variant = model.variant.encode("ascii")[:8]
    parts: List[bytes] = [HEADER.pack(MAGIC, model.version, variant, len(sections))]
    parts.extend(_encode_section(name, value) for name, value in sections.items())
    Path(path).write_bytes(b"".join(parts))


def read_sections(path: Union[str, Path]) -> Dict[str, Section]:
    """Raw sections of a model file (``manifest`` text and named arrays)."""
    source = str(path)
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise ModelFormatError(f"cannot read model file {source}: {e}") from e
    reader = _Reader(blob, source)
    magic, version, variant, count = reader.take(HEADER.format)
    if magic != MAGIC:
        raise ModelFormatError(f"{source}: not an LSR model (magic {magic!r})")
    if version != MODEL_VERSION:
        raise ModelFormatError(f"{source}: unsupported model version {version}")
    variant = reader.text(variant.rstrip(b"\0"), "the variant tag", "ascii")
    sections: Dict[str, Section] = {"variant": variant}
    for _ in range(count):
        name, value = reader.section()
        sections[name] = value
    if reader.offset != len(blob):
        raise ModelFormatError(f"{source}: trailing bytes after the last section")
    return sections


def _parse_manifest(sections: Dict[str, Section], source: str) -> dict:
    try:
        manifest = yaml.safe_load(_need(sections, "manifest", source))
    except yaml.YAMLError as e:
        raise ModelFormatError(f"{source}: malformed manifest: {e}") from e
    if not isinstance(manifest, dict) or "config" not in manifest:
        raise ModelFormatError(f"{source}: manifest has no config")
    return manifest


def read_manifest(path: Union[str, Path]) -> dict:
    """Parsed YAML manifest of a model file."""
    return _parse_manifest(read_sections(path), str(path))


def load_model(path: Union[str, Path]) -> LsrModel:
    """Read a model written by :func:`save_model`.

    Raises:
        ModelFormatError: On bad magic, unknown version, truncation, missing
            sections or inconsistent contents.
    """
    source = str(path)
    sections = read_sections(path)
    manifest = _parse_manifest(sections, source)
    try:
        config = RunConfig.from_manifest(manifest["config"])
    except (ConfigurationError, TypeError) as e:
        raise ModelFormatError(f"{source}: invalid configuration in manifest: {e}") from e
    if config.variant != sections["variant"]:
        raise ModelFormatError(f"{source}: header variant differs from the manifest")
    easy = _load_branch(sections, "easy", source)
    hard = _load_branch(sections, "hard", source)
    if easy is None and hard is None:
        raise ModelFormatError(f"{source}: model has no branches")
    return LsrModel(
        config=config,
        easy=easy,
        hard=hard,
        warnings=list(manifest.get("warnings") or []),
    )
