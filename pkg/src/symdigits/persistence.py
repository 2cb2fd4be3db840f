"""Model files: JSON with exact-round-trip weights and the feature map.

Floats are serialized with Python's shortest-round-trip repr, so a saved
model reloads bit-for-bit.  A PermutationProduct map stores both its seed
and the explicit permutation; they must agree at load time.
"""

from __future__ import annotations

import json

import numpy as np

from .features import (FeatureMapKind, Identity, NeighborProduct,
                       PermutationProduct, Square, make_permutation)
from .network import Layer, Mlp

FORMAT = "symdigits-model-v1"


def feature_map_to_dict(kind: FeatureMapKind) -> dict:
    if isinstance(kind, PermutationProduct):
        return {
            "kind": kind.name,
            "seed": kind.seed,
            "permutation": kind.perm.tolist(),
            "fixed_points": kind.fixed_points,
        }
    return {"kind": kind.name}


def feature_map_from_dict(d: dict) -> FeatureMapKind:
    kind = d.get("kind")
    if kind == "identity":
        return Identity()
    if kind == "square":
        return Square()
    if kind == "neighbor":
        return NeighborProduct()
    if kind == "perm":
        fm = PermutationProduct(int(d["seed"]))
        stored = np.asarray(d["permutation"], dtype=np.int64)
        if not np.array_equal(stored, make_permutation(fm.seed)):
            raise ValueError("stored permutation does not match its seed")
        return fm
    raise ValueError(f"unknown feature map kind {kind!r}")


def model_to_dict(mlp: Mlp, feature_map: FeatureMapKind) -> dict:
    return {
        "format": FORMAT,
        "dims": list(mlp.dims),
        "use_bias": mlp.use_bias,
        "feature_map": feature_map_to_dict(feature_map),
        "layers": [
            {
                "weights": layer.weights.tolist(),  # row-major (fan_out rows)
                "bias": None if layer.bias is None else layer.bias.tolist(),
            }
            for layer in mlp.layers
        ],
    }


def model_from_dict(d: dict) -> tuple[Mlp, FeatureMapKind]:
    if d.get("format") != FORMAT:
        raise ValueError(f"not a {FORMAT} file")
    layers = [
        Layer(np.array(entry["weights"], dtype=np.float64),
              None if entry["bias"] is None else np.array(entry["bias"], dtype=np.float64))
        for entry in d["layers"]
    ]
    mlp = Mlp(layers)  # validates dimension chaining
    if list(mlp.dims) != list(d["dims"]):
        raise ValueError(f"stored dims {d['dims']} do not match weight shapes {list(mlp.dims)}")
    if mlp.use_bias != bool(d["use_bias"]):
        raise ValueError("stored bias flag does not match layer contents")
    return mlp, feature_map_from_dict(d["feature_map"])


def save_model(path, mlp: Mlp, feature_map: FeatureMapKind) -> None:
    with open(path, "w", encoding="ascii") as f:
        json.dump(model_to_dict(mlp, feature_map), f, indent=1)
        f.write("\n")


def load_model(path) -> tuple[Mlp, FeatureMapKind]:
    with open(path, "r", encoding="ascii") as f:
        return model_from_dict(json.load(f))
