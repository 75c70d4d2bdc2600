"""Shared fixtures: dataset and trained models, built once per session.

Training runs once into a session temp directory (about two minutes on one
CPU); every test reuses the fixed weights, mirroring how the exporter is
deployed.
"""
import pytest

from mnist_export.data import prepare_dataset
from mnist_export.models import VARIANTS, save_model, train_model


@pytest.fixture(scope="session")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("mnist_export")


@pytest.fixture(scope="session")
def dataset(workdir):
    return prepare_dataset(workdir / "data", seed=0)


@pytest.fixture(scope="session")
def model_dir(workdir, dataset):
    for variant in VARIANTS:
        model = train_model(variant, dataset.train_images, dataset.train_labels,
                            seed=0, epochs=16)
        save_model(model, workdir / "models", variant)
    return workdir / "models"
