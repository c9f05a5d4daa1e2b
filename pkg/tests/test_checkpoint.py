"""Checkpoint format: exact round trips and malformed-input errors."""

import numpy as np
import pytest

from sralearn import checkpoint
from sralearn.exceptions import DataError
from sralearn.models import init_model


def _randomized(kind, task="binary", seed=17):
    rng = np.random.default_rng(seed)
    m = init_model(kind, p=4, d_k=8, seed=seed, task=task)
    for name in m.params:
        # adversarial values: non-dyadic decimals, tiny and large magnitudes
        m.params[name] = rng.normal(size=m.params[name].shape) * 10.0 ** rng.integers(
            -8, 8, size=m.params[name].shape
        )
    return m


@pytest.mark.parametrize("kind", ["sralinear", "lr", "mlp"])
def test_write_read_write_byte_identical(tmp_path, kind):
    m = _randomized(kind)
    first = checkpoint.dumps(m)
    again = checkpoint.dumps(checkpoint.loads(first))
    assert first == again


@pytest.mark.parametrize("kind,task", [("sralinear", "binary"), ("lr", "regression"),
                                       ("mlp", "binary")])
def test_loaded_model_predicts_identically(tmp_path, kind, task):
    m = _randomized(kind, task=task)
    path = tmp_path / "model.ckpt"
    checkpoint.save(m, path)
    loaded = checkpoint.load(path)
    X = np.random.default_rng(3).normal(size=(9, 4))
    np.testing.assert_array_equal(loaded.decision_function(X), m.decision_function(X))
    assert loaded.kind == kind and loaded.task == task


def test_header_carries_config(tmp_path):
    m = init_model("sralinear", p=6, d_k=12, seed=0, task="regression")
    text = checkpoint.dumps(m)
    assert text.splitlines()[0] == (
        "sralearn-checkpoint v1 kind=sralinear p=6 d_k=12 task=regression"
    )


def test_dk_zero_for_kinds_without_attention():
    text = checkpoint.dumps(init_model("lr", p=2))
    assert "d_k=0" in text.splitlines()[0]


def test_exact_float_round_trip():
    m = init_model("lr", p=3)
    m.params["beta"] = np.array([0.1, 1 / 3, np.finfo(np.float64).tiny])
    m.params["intercept"] = np.asarray(-1e300)
    loaded = checkpoint.loads(checkpoint.dumps(m))
    np.testing.assert_array_equal(loaded.params["beta"], m.params["beta"])
    assert loaded.params["intercept"] == m.params["intercept"]


def test_rejects_wrong_magic():
    with pytest.raises(DataError, match="header"):
        checkpoint.loads("model-file v9 kind=lr p=2 d_k=0 task=binary\n")


def test_rejects_wrong_version():
    with pytest.raises(DataError, match="version"):
        checkpoint.loads("sralearn-checkpoint v9 kind=lr p=2 d_k=0 task=binary\n")


def test_rejects_truncated_tensor():
    m = init_model("lr", p=2)
    text = checkpoint.dumps(m)
    truncated = "\n".join(text.splitlines()[:-1])  # drop last value line
    with pytest.raises(DataError, match="missing value"):
        checkpoint.loads(truncated)


def test_rejects_value_count_mismatch():
    m = init_model("lr", p=2)
    text = checkpoint.dumps(m).replace("tensor beta 1 2", "tensor beta 1 3")
    with pytest.raises(DataError, match="expected 3 values"):
        checkpoint.loads(text)


def test_rejects_unknown_parameter_set():
    m = init_model("lr", p=2)
    text = checkpoint.dumps(m).replace("tensor beta", "tensor gamma")
    with pytest.raises(DataError, match="mismatch"):
        checkpoint.loads(text)


def test_empty_file():
    with pytest.raises(DataError, match="empty"):
        checkpoint.loads("")
