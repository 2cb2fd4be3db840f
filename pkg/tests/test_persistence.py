import json

import numpy as np
import pytest

from symdigits.features import Identity, NeighborProduct, PermutationProduct
from symdigits.network import init_mlp
from symdigits.persistence import load_model, save_model


@pytest.mark.parametrize("use_bias", [False, True])
@pytest.mark.parametrize("kind", [Identity(), NeighborProduct(), PermutationProduct(4)])
def test_round_trip_is_bit_exact(tmp_path, use_bias, kind):
    mlp = init_mlp((64, 10, 5, 10), use_bias, 13)
    for layer in mlp.layers:  # make biases nontrivial too
        if layer.bias is not None:
            layer.bias += np.random.default_rng(1).normal(size=layer.bias.shape)
    path = tmp_path / "model.json"
    save_model(path, mlp, kind)
    loaded, loaded_kind = load_model(path)
    assert loaded_kind == kind
    assert loaded.dims == mlp.dims and loaded.use_bias == use_bias
    for got, want in zip(loaded.layers, mlp.layers):
        assert np.array_equal(got.weights, want.weights)
        if want.bias is None:
            assert got.bias is None
        else:
            assert np.array_equal(got.bias, want.bias)


def test_permutation_seed_mismatch_is_a_load_error(tmp_path):
    mlp = init_mlp((64, 4, 10), False, 0)
    path = tmp_path / "model.json"
    save_model(path, mlp, PermutationProduct(2))
    doc = json.loads(path.read_text())
    doc["feature_map"]["permutation"][:2] = doc["feature_map"]["permutation"][1::-1]
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="permutation"):
        load_model(path)


def test_tampered_dims_rejected(tmp_path):
    mlp = init_mlp((64, 4, 10), False, 0)
    path = tmp_path / "model.json"
    save_model(path, mlp, Identity())
    doc = json.loads(path.read_text())
    doc["dims"] = [64, 5, 10]
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="dims"):
        load_model(path)


def test_unknown_format_rejected(tmp_path):
    path = tmp_path / "model.json"
    path.write_text(json.dumps({"format": "something-else"}))
    with pytest.raises(ValueError, match="format|file"):
        load_model(path)
