import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from coverlens.errors import FeatureFileError
from coverlens.features import FeatureKind, FeatureVector
from coverlens.serialize import (
    config_hash,
    dumps,
    read_features,
    read_features_binary,
    read_features_jsonl,
    write_features_binary,
    write_features_jsonl,
    write_stamp,
)


def test_dumps_format():
    assert dumps({"b": 1, "a": [0.1, 2.0, np.float64(1e300)], "n": None, "t": True}) == (
        '{"b": 1, "a": [0.10000000000000001, 2.0, 1.0000000000000001e+300], "n": null, "t": true}'
    )
    assert dumps([float("nan"), float("inf")]) == "[null, null]"
    assert json.loads(dumps({"x": np.arange(3.0)})) == {"x": [0.0, 1.0, 2.0]}
    with pytest.raises(TypeError):
        dumps(object())


@settings(max_examples=200)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_roundtrip(x):
    assert json.loads(dumps(x)) == x


def test_config_hash_stable():
    assert config_hash({"a": 1}) == config_hash({"a": 1}) != config_hash({"a": 2})
    assert len(config_hash({})) == 16


def test_stamp(tmp_path):
    p = write_stamp(tmp_path, "train", 7, {"lr": 0.01})
    rec = json.loads(p.read_text())
    assert rec["seed"] == 7 and rec["subcommand"] == "train" and rec["kernel_backend"] in ("cython", "python")
    assert rec["config_hash"] == config_hash({"lr": 0.01})


vec = arrays(np.float64, 5, elements=st.floats(-1e12, 1e12, allow_nan=False))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.text(min_size=1, max_size=8), st.integers(1, 2 ** 31), vec), min_size=1, max_size=5))
def test_feature_files_roundtrip(tmp_path_factory, records):
    d = tmp_path_factory.mktemp("f")
    feats = [FeatureVector(FeatureKind.CHROMA, v, pid, k) for pid, k, v in records]
    write_features_jsonl(feats, d / "f.jsonl")
    write_features_binary(feats, d / "f.clfv")
    for back in (read_features_jsonl(d / "f.jsonl"), read_features_binary(d / "f.clfv"), read_features(d / "f.clfv")):
        assert [(f.pair_id, f.k, f.kind) for f in back] == [(f.pair_id, f.k, f.kind) for f in feats]
        for a, b in zip(back, feats):
            assert a.values.tobytes() == b.values.tobytes()


def test_binary_errors(tmp_path):
    feats = [FeatureVector("temporal", [1.0, 2.0, 3.0, 4.0], "a", 1)]
    write_features_binary(feats, tmp_path / "f.clfv")
    data = (tmp_path / "f.clfv").read_bytes()
    (tmp_path / "trunc.clfv").write_bytes(data[:-3])
    (tmp_path / "extra.clfv").write_bytes(data + b"\x00")
    (tmp_path / "magic.clfv").write_bytes(b"XXXX" + data[4:])
    for name in ("trunc", "extra", "magic"):
        with pytest.raises(FeatureFileError):
            read_features_binary(tmp_path / f"{name}.clfv")
    with pytest.raises(FeatureFileError):
        write_features_binary(feats + [FeatureVector("mfcc", [1.0], "b", 1)], tmp_path / "mixed.clfv")


def test_jsonl_errors(tmp_path):
    (tmp_path / "f.jsonl").write_text('{"pair_id": "a", "k": 1, "kind": "mfcc", "vector": [1.0]}\n{"pair_id": "a"}\n')
    with pytest.raises(FeatureFileError, match="f.jsonl:2"):
        read_features_jsonl(tmp_path / "f.jsonl")
