"""Binary sample cache.

Layout (little-endian): magic ``LSRD``, u32 version, u64 count, then one
fixed-size record per sample: 225 f32 (15x15 patch), 256 f32 (16x16 patch),
f32 residual, u8 hardness, u32 row, u32 col. Values are stored as 32-bit
floats, so a reloaded dataset matches the original to float32 precision.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from lsr.patches import HOG_PATCH_SIZE, PATCH_SIZE, Dataset, row_variances

MAGIC = b"LSRD"
VERSION = 1
HEADER = struct.Struct("<4sIQ")

RECORD = np.dtype(
    [
        ("patch15", "<f4", (PATCH_SIZE * PATCH_SIZE,)),
        ("patch16", "<f4", (HOG_PATCH_SIZE * HOG_PATCH_SIZE,)),
        ("residual", "<f4"),
        ("hardness", "u1"),
        ("row", "<u4"),
        ("col", "<u4"),
    ]
)


class SampleCacheError(RuntimeError):
    """Exception raised for malformed sample-cache files."""

    pass


def save_samples(dataset: Dataset, path: str | Path) -> None:
    """Write every sample of ``dataset`` to ``path``."""
    records = np.zeros(len(dataset), dtype=RECORD)
    records["patch15"] = dataset.patches15.reshape(len(dataset), -1)
    records["patch16"] = dataset.patches16.reshape(len(dataset), -1)
    records["residual"] = dataset.residuals
    records["hardness"] = dataset.hard.astype(np.uint8)
    records["row"] = dataset.positions[:, 0]
    records["col"] = dataset.positions[:, 1]
    with Path(path).open("wb") as f:
        f.write(HEADER.pack(MAGIC, VERSION, len(dataset)))
        f.write(records.tobytes())


def load_samples(path: str | Path) -> Dataset:
    """Read a cache written by :func:`save_samples`.

    Raises:
        SampleCacheError: On a bad magic, unknown version or truncated body.
    """
    blob = Path(path).read_bytes()
    if len(blob) < HEADER.size:
        raise SampleCacheError(f"{path}: file too short for a sample-cache header")
    magic, version, count = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise SampleCacheError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise SampleCacheError(f"{path}: unsupported version {version}")
    body = blob[HEADER.size :]
    if len(body) != count * RECORD.itemsize:
        raise SampleCacheError(f"{path}: expected {count} records, body has {len(body)} bytes")

    records = np.frombuffer(body, dtype=RECORD, count=count)
    patches15 = records["patch15"].astype(np.float64).reshape(count, PATCH_SIZE, PATCH_SIZE)
    dataset = Dataset(
        patches15=patches15,
        residuals=records["residual"].astype(np.float64),
        variances=row_variances(patches15.reshape(count, -1)),
        hard=records["hardness"].astype(bool),
        positions=np.stack([records["row"], records["col"]], axis=1).astype(np.int64),
        origins=np.zeros(count, dtype=np.int64),
        sources=[str(path)],
    )
    dataset.__dict__["patches16"] = (
        records["patch16"].astype(np.float64).reshape(count, HOG_PATCH_SIZE, HOG_PATCH_SIZE)
    )
    return dataset
