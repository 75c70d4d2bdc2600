"""Dataset procurement: real MNIST IDX files when present, an offline
handwritten-digit substitute otherwise.

The exporter only ever reads IDX files from a data directory.  When the
standard MNIST files are absent, ``prepare_dataset`` synthesizes IDX files
from scikit-learn's bundled 1797 handwritten digits: each 8x8 image is
upsampled to 28x28 and the training split is expanded with small random
affine jitters.  Models trained on either source exhibit the property the
export contract cares about: a softmax head stays confident on rotated
digits while an evidential head does not.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import idx

TRAIN_IMAGES = "train-images-idx3-ubyte.gz"
TRAIN_LABELS = "train-labels-idx1-ubyte.gz"
TEST_IMAGES = "t10k-images-idx3-ubyte.gz"
TEST_LABELS = "t10k-labels-idx1-ubyte.gz"

_CANDIDATE_NAMES = {
    "train_images": (TRAIN_IMAGES, "train-images-idx3-ubyte", "train-images.idx3-ubyte"),
    "train_labels": (TRAIN_LABELS, "train-labels-idx1-ubyte", "train-labels.idx1-ubyte"),
    "test_images": (TEST_IMAGES, "t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"),
    "test_labels": (TEST_LABELS, "t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"),
}


@dataclass(frozen=True)
class Dataset:
    train_images: np.ndarray
    train_labels: np.ndarray
    test_images: np.ndarray
    test_labels: np.ndarray
    source: str


def _find(data_dir: Path, key: str) -> Path | None:
    for name in _CANDIDATE_NAMES[key]:
        p = data_dir / name
        if p.exists():
            return p
    return None


def _upsample(images8: np.ndarray) -> np.ndarray:
    """8x8 (0..16) -> 28x28 (0..255) with bilinear-ish smoothing."""
    n = len(images8)
    out = np.zeros((n, 28, 28), dtype=np.float32)
    scaled = np.kron(images8.astype(np.float32) / 16.0, np.ones((1, 3, 3)))  # 24x24
    out[:, 2:26, 2:26] = scaled
    # light box blur to soften the kron blocks
    blurred = out.copy()
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            blurred += np.roll(np.roll(out, dr, axis=1), dc, axis=2)
    blurred /= 10.0
    return np.clip(blurred * 255.0, 0, 255).astype(np.uint8)


def _affine_jitter(images: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Small random shifts of whole images (cheap augmentation)."""
    out = np.empty_like(images)
    for i, img in enumerate(images):
        dr = int(rng.integers(-2, 3))
        dc = int(rng.integers(-2, 3))
        out[i] = np.roll(np.roll(img, dr, axis=0), dc, axis=1)
    return out


def synthesize_from_sklearn(data_dir: Path, seed: int = 0,
                            train_copies: int = 8) -> None:
    """Write IDX files built from the bundled handwritten-digit set."""
    from sklearn.datasets import load_digits
    digits = load_digits()
    images = _upsample(digits.images)
    labels = digits.target.astype(np.uint8)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(images))
    images, labels = images[order], labels[order]
    n_test = 500
    test_x, test_y = images[:n_test], labels[:n_test]
    base_x, base_y = images[n_test:], labels[n_test:]
    train_parts = [base_x]
    label_parts = [base_y]
    for _ in range(train_copies - 1):
        train_parts.append(_affine_jitter(base_x, rng))
        label_parts.append(base_y)
    train_x = np.concatenate(train_parts)
    train_y = np.concatenate(label_parts)
    data_dir.mkdir(parents=True, exist_ok=True)
    idx.write_images(data_dir / TRAIN_IMAGES, train_x)
    idx.write_labels(data_dir / TRAIN_LABELS, train_y)
    idx.write_images(data_dir / TEST_IMAGES, test_x)
    idx.write_labels(data_dir / TEST_LABELS, test_y)
    (data_dir / "SOURCE.txt").write_text(
        "sklearn-digits substitute (8x8 handwritten digits upsampled to 28x28);\n"
        "drop real MNIST IDX files into this directory to use them instead.\n")


def prepare_dataset(data_dir: str | Path, seed: int = 0) -> Dataset:
    """Load IDX files from ``data_dir``, synthesizing the offline substitute
    first when no files are present."""
    data_dir = Path(data_dir)
    if _find(data_dir, "train_images") is None:
        synthesize_from_sklearn(data_dir, seed=seed)
        source = "sklearn-digits"
    else:
        source = "mnist" if not (data_dir / "SOURCE.txt").exists() else "sklearn-digits"
    ds = Dataset(
        train_images=idx.read_images(_find(data_dir, "train_images")),
        train_labels=idx.read_labels(_find(data_dir, "train_labels")),
        test_images=idx.read_images(_find(data_dir, "test_images")),
        test_labels=idx.read_labels(_find(data_dir, "test_labels")),
        source=source,
    )
    if ds.train_images.shape[1:] != (28, 28):
        raise ValueError(f"expected 28x28 images, got {ds.train_images.shape[1:]}")
    return ds


def rotate_clockwise(images: np.ndarray) -> np.ndarray:
    """90-degree clockwise rotation: the run-time perturbation."""
    return np.rot90(images, k=-1, axes=(1, 2)).copy()
