"""Shipped fixture pack: a RedWine-style table and one pre-trained model per family.

The table is synthetic (seeded, same columns and label histogram as the UCI
red-wine quality data). ``scripts/make_fixtures.py`` regenerates everything and
records reference accuracies computed by its own fixed-point evaluator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .model import (Dataset, FixedPointSpec, QuantizedModel, RealModel, load_dataset, quantize_inputs,
                    quantize_model, real_model_from_dict, split_normalize)

NAMES = ("mlp_c", "mlp_r", "svm_c", "svm_r")


@dataclass
class Fixture:
    name: str
    real: RealModel
    quantized: QuantizedModel
    train: Dataset
    test: Dataset
    train_X: np.ndarray
    test_X: np.ndarray
    meta: dict

    @property
    def reference(self) -> dict:
        return self.meta["reference"]


def fixture_dir() -> Path:
    return Path(str(resources.files("bespoke_approx") / "data" / "redwine"))


def model_path(name: str) -> Path:
    if name not in NAMES:
        raise KeyError(f"unknown fixture {name!r}; choose from {', '.join(NAMES)}")
    return fixture_dir() / f"{name}.json"


def load_fixture(name: str) -> Fixture:
    """Model, split and integer input matrices for one fixture, as recorded in its metadata."""
    doc = json.loads(model_path(name).read_text())
    meta = doc["meta"]
    real = real_model_from_dict(doc)
    spec = FixedPointSpec(**meta["spec"])
    data = load_dataset(fixture_dir() / meta["dataset"], meta["schema"])
    train, test, _ = split_normalize(data, meta["split"]["ratio"], meta["split"]["seed"])
    q = quantize_model(real, spec)
    return Fixture(name, real, q, train, test, quantize_inputs(train, spec.u), quantize_inputs(test, spec.u), meta)
