"""IDX container round trips and validation."""
import numpy as np
import pytest

from mnist_export import idx


def test_images_round_trip(tmp_path):
    images = np.random.default_rng(0).integers(0, 256, (7, 28, 28), dtype=np.uint8)
    path = tmp_path / "imgs-idx3-ubyte.gz"
    idx.write_images(path, images)
    assert np.array_equal(idx.read_images(path), images)


def test_labels_round_trip_uncompressed(tmp_path):
    labels = np.arange(10, dtype=np.uint8)
    path = tmp_path / "labels-idx1-ubyte"
    idx.write_labels(path, labels)
    assert np.array_equal(idx.read_labels(path), labels)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bogus-idx3-ubyte"
    path.write_bytes(b"\x00\x00\x08\x01" + b"\x00" * 12)
    with pytest.raises(ValueError):
        idx.read_images(path)


def test_truncated_payload_rejected(tmp_path):
    import struct
    path = tmp_path / "short-idx3-ubyte"
    path.write_bytes(struct.pack(">IIII", 0x803, 2, 28, 28) + b"\x00" * 10)
    with pytest.raises(ValueError):
        idx.read_images(path)
