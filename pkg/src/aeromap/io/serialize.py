"""Self-describing JSON documents for fitted models.

Floats are written with ``repr`` precision so a reload predicts bit-identically.
"""

from __future__ import annotations

import json
from pathlib import Path

from aeromap.io.grid import atomic_write_text
from aeromap.models.linear import LINEAR_KINDS, LinearModel
from aeromap.models.trees import Tree, TreeEnsemble

SCHEMA_VERSION = 1


class ModelFormatError(ValueError):
    pass


def model_to_dict(model, metadata=None) -> dict:
    doc = {"schema_version": SCHEMA_VERSION, "kind": model.kind,
           "features": list(model.features), "metadata": metadata or {}}
    if isinstance(model, LinearModel):
        doc["linear"] = model.to_dict()
    elif isinstance(model, TreeEnsemble):
        doc["hyperparameters"] = model.params
        doc["learning_rate"] = model.learning_rate
        doc["base_score"] = model.base_score
        doc["trees"] = [t.to_dict() for t in model.trees]
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return doc


def model_from_dict(doc: dict):
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ModelFormatError(f"model schema version {version!r} is not supported "
                               f"(expected {SCHEMA_VERSION})")
    kind = doc.get("kind")
    if kind in LINEAR_KINDS:
        return LinearModel.from_dict(doc["linear"])
    if kind in ("RandomForest", "ExtraTrees", "GradientBoosting"):
        return TreeEnsemble(kind, tuple(doc["features"]), [Tree.from_dict(t) for t in doc["trees"]],
                            doc.get("hyperparameters", {}), float(doc["learning_rate"]),
                            float(doc["base_score"]))
    raise ModelFormatError(f"unknown model kind {kind!r}")


def save_model(model, path, metadata=None) -> None:
    atomic_write_text(path, json.dumps(model_to_dict(model, metadata), sort_keys=True) + "\n")


def load_model(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: {exc}") from None
    return model_from_dict(doc)


def load_model_metadata(path) -> dict:
    return json.loads(Path(path).read_text()).get("metadata", {})
