"""Prediction export in the upstream wire format.

One line-delimited JSON record per (example, slot): the full 10-class
probability vector, the true digit, and whether the image was rotated.
A manifest maps dataset images onto example slots; without one, each test
image becomes its own single-slot example.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import prepare_dataset, rotate_clockwise
from .models import load_model, predict_probs


@dataclass(frozen=True)
class SlotSpec:
    example_id: str
    feature: str
    alpha: str | None
    image_index: int        # into the chosen split
    perturbed: bool


@dataclass(frozen=True)
class ExportJob:
    variant: str                    # softmax | edl_gen
    data_dir: str
    model_dir: str
    out_path: str
    split: str = "test"             # train | test
    rotate_fraction: float = 0.0    # used when no manifest is given
    manifest_path: str | None = None
    limit: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.split not in ("train", "test"):
            raise ValueError(f"unknown split {self.split!r}")
        if not 0.0 <= self.rotate_fraction <= 1.0:
            raise ValueError("rotate_fraction outside [0, 1]")


def read_manifest(path: str | Path) -> list[SlotSpec]:
    """CSV columns: example_id, feature, alpha (may be empty), image_index,
    perturbed (true/false)."""
    specs = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            specs.append(SlotSpec(
                row["example_id"], row["feature"], row.get("alpha") or None,
                int(row["image_index"]),
                row.get("perturbed", "false").strip().lower() in ("1", "true", "yes")))
    return specs


def default_slots(n_images: int, rotate_fraction: float, seed: int,
                  limit: int | None) -> list[SlotSpec]:
    count = n_images if limit is None else min(limit, n_images)
    rng = np.random.default_rng(seed)
    n_rot = int(rotate_fraction * count)
    rotated = set(rng.choice(count, size=n_rot, replace=False).tolist())
    return [SlotSpec(f"mnist{i}", "digit", None, i, i in rotated)
            for i in range(count)]


def export_predictions(job: ExportJob) -> Path:
    """Run the fixed-weight model over the selected images and write the
    prediction file.  Returns the output path."""
    ds = prepare_dataset(job.data_dir, seed=job.seed)
    images = ds.test_images if job.split == "test" else ds.train_images
    labels = ds.test_labels if job.split == "test" else ds.train_labels
    if job.manifest_path:
        slots = read_manifest(job.manifest_path)
    else:
        slots = default_slots(len(images), job.rotate_fraction, job.seed, job.limit)
    for s in slots:
        if not 0 <= s.image_index < len(images):
            raise ValueError(f"image index {s.image_index} outside the "
                             f"{job.split} split of {len(images)} images")

    model = load_model(job.model_dir, job.variant)
    batch = np.stack([images[s.image_index] for s in slots])
    rotate_mask = np.array([s.perturbed for s in slots])
    if rotate_mask.any():
        batch[rotate_mask] = rotate_clockwise(batch[rotate_mask])
    probs = predict_probs(model, job.variant, batch)

    out = Path(job.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    mean_conf = float(probs.max(axis=1).mean())
    acc = float((probs.argmax(axis=1)
                 == np.array([labels[s.image_index] for s in slots])).mean())
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(f"# exporter: {job.variant} on {ds.source} ({job.split} split)\n")
        fh.write(f"# records: {len(slots)}  mean argmax confidence: "
                 f"{mean_conf:.4f}  argmax accuracy: {acc:.4f}\n")
        for s, p in zip(slots, probs):
            rec = {"example_id": s.example_id, "feature": s.feature,
                   "k": 10, "probs": [float(v) for v in p],
                   "true_value": int(labels[s.image_index]),
                   "perturbed": s.perturbed}
            if s.alpha is not None:
                rec["alpha"] = s.alpha
            fh.write(json.dumps(rec) + "\n")
    return out
