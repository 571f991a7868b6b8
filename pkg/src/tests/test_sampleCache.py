import numpy as np
import pytest

from lsr.imaging import ImagePair
from lsr.patches import extract_samples
from lsr.sampleCache import HEADER, RECORD, SampleCacheError, load_samples, save_samples


@pytest.fixture
def dataset(image):
    return extract_samples(ImagePair.from_hr(image), stride=5, source="img.png")


def test_round_trip_at_float32_precision(tmp_path, dataset):
    path = tmp_path / "samples.lsrd"
    save_samples(dataset, path)
    loaded = load_samples(path)
    assert len(loaded) == len(dataset)
    np.testing.assert_array_equal(loaded.patches15, dataset.patches15.astype(np.float32))
    np.testing.assert_array_equal(loaded.patches16, dataset.patches16.astype(np.float32))
    np.testing.assert_array_equal(loaded.residuals, dataset.residuals.astype(np.float32))
    np.testing.assert_array_equal(loaded.hard, dataset.hard)
    np.testing.assert_array_equal(loaded.positions, dataset.positions)


def test_file_size(tmp_path, dataset):
    path = tmp_path / "samples.lsrd"
    save_samples(dataset, path)
    assert path.stat().st_size == HEADER.size + len(dataset) * RECORD.itemsize
    assert path.read_bytes()[:4] == b"LSRD"


def test_bad_magic(tmp_path, dataset):
    path = tmp_path / "samples.lsrd"
    save_samples(dataset, path)
    blob = bytearray(path.read_bytes())
    blob[:4] = b"NOPE"
    path.write_bytes(bytes(blob))
    with pytest.raises(SampleCacheError):
        load_samples(path)


def test_truncated_body(tmp_path, dataset):
    path = tmp_path / "samples.lsrd"
    save_samples(dataset, path)
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(SampleCacheError):
        load_samples(path)


def test_too_short_for_header(tmp_path):
    path = tmp_path / "empty.lsrd"
    path.write_bytes(b"LS")
    with pytest.raises(SampleCacheError):
        load_samples(path)
