import os

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pmanifold.errors import IntegrityError, InvalidInputError, UnsupportedVersionError
from pmanifold.io import (
    config_hash,
    convert,
    csv_text,
    decode_checkpoint,
    decode_sample_set,
    encode_checkpoint,
    encode_sample_set,
    read_sample_set,
    sample_set_from_csv,
    sample_set_to_csv,
    write_sample_set,
)
from pmanifold.model import init_mlp
from pmanifold.numerics import seeded_rng
from pmanifold.samples import SampleSet


@pytest.fixture
def sample_set():
    return SampleSet(seeded_rng(0).random((100, 64)), {"class": 2, "seed": 7, "source": "noise"})


def test_binary_round_trip_bit_identical(sample_set, tmp_path):
    p = tmp_path / "s.pmss"
    write_sample_set(p, sample_set)
    back = read_sample_set(p)
    assert back.points.tobytes() == sample_set.points.tobytes()
    assert back.meta == sample_set.meta
    assert not os.path.exists(f"{p}.tmp")


@given(st.integers(0, 50), st.integers(1, 10), st.integers(0, 10_000))
def test_round_trip_any_shape(n, d, seed):
    x = seeded_rng(seed).normal(size=(n, d)) * 10.0 ** seeded_rng(seed + 1).integers(-300, 300, size=(n, d))
    ss = SampleSet(x, {})
    assert decode_sample_set(encode_sample_set(ss)).points.tobytes() == x.tobytes()
    assert sample_set_from_csv(sample_set_to_csv(ss)).points.tobytes() == x.tobytes()


def test_truncated_and_corrupt(sample_set):
    blob = encode_sample_set(sample_set)
    for bad in (blob[:-1], blob[:10], blob[:3]):
        with pytest.raises(IntegrityError):
            decode_sample_set(bad)
    flipped = bytearray(blob)
    flipped[200] ^= 1
    with pytest.raises(IntegrityError):
        decode_sample_set(bytes(flipped))
    with pytest.raises(IntegrityError):
        decode_sample_set(b"XXXX" + blob[4:])


def test_version_bump(sample_set):
    blob = bytearray(encode_sample_set(sample_set))
    blob[4] = 2
    with pytest.raises(UnsupportedVersionError):
        decode_sample_set(bytes(blob))


def test_missing_file_is_invalid_input(tmp_path):
    with pytest.raises(InvalidInputError):
        read_sample_set(tmp_path / "nope.pmss")


def test_checkpoint_round_trip():
    m = init_mlp((8, 5, 4, 3), activation="relu", seed=9)
    back = decode_checkpoint(encode_checkpoint(m))
    assert back.layer_dims == m.layer_dims and back.activation == "relu" and back.seed == 9
    for a, b in zip(m.weights + m.biases, back.weights + back.biases):
        assert a.tobytes() == b.tobytes()
    blob = bytearray(encode_checkpoint(m))
    blob[-40] ^= 4
    with pytest.raises(IntegrityError):
        decode_checkpoint(bytes(blob))


def test_convert_round_trip(sample_set, tmp_path):
    b1, c, b2 = tmp_path / "a.pmss", tmp_path / "a.csv", tmp_path / "b.pmss"
    write_sample_set(b1, sample_set)
    convert(b1, c)
    convert(c, b2)
    assert b1.read_bytes() == b2.read_bytes()


def test_csv_has_hash_column():
    h = config_hash({"b": 1, "a": [1, 2]})
    assert h == config_hash({"a": [1, 2], "b": 1}) and len(h) == 16
    text = csv_text([{"x": 0.1, "ok": True}], h)
    assert text.splitlines() == ["x,ok,config_hash", f"0.1,1,{h}"]
