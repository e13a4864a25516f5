import numpy as np
import pytest

from somcode.dataio import (
    FeatureMatrix,
    load_codes,
    load_features,
    load_model,
    pack_codes,
    save_codes,
    save_features,
    save_model,
    unpack_codes,
)
from somcode.errors import ParseError, VersionMismatchError
from somcode.filters import HyperParams
from somcode.structures import build_two_class, expand_to_samples
from somcode.trainer import train_som


def small_model(seed=0):
    rng = np.random.default_rng(seed)
    shift = np.zeros((6, 1))
    shift[0] = 2.5
    x = np.hstack([rng.normal(scale=0.3, size=(6, 8)) + shift,
                   rng.normal(scale=0.3, size=(6, 8)) - shift])
    labels = np.repeat([0, 1], 8)
    structure = expand_to_samples(build_two_class(4), labels)
    return train_som(x, labels, structure, HyperParams(seed=seed))


# ---------------------------------------------------------------------------
# bit packing
# ---------------------------------------------------------------------------

def test_pack_codes_lsb_first():
    codes = -np.ones((8, 1), dtype=np.int8)
    codes[0, 0] = 1  # bit 0 set -> byte value 1
    assert pack_codes(codes)[0, 0] == 1
    codes[3, 0] = 1  # bits 0 and 3 -> 0b1001
    assert pack_codes(codes)[0, 0] == 9


def test_pack_unpack_round_trip():
    rng = np.random.default_rng(1)
    for m in (1, 5, 8, 13, 32):
        codes = rng.choice(np.array([-1, 1], dtype=np.int8), size=(m, 7))
        assert np.array_equal(unpack_codes(pack_codes(codes), m), codes)


# ---------------------------------------------------------------------------
# features
# ---------------------------------------------------------------------------

def test_features_round_trip_exact(tmp_path):
    rng = np.random.default_rng(2)
    fm = FeatureMatrix(rng.normal(size=(5, 9)), rng.integers(0, 3, 9), np.arange(9) // 3)
    path = tmp_path / "f.csv"
    save_features(fm, path)
    back = load_features(path)
    assert np.array_equal(back.x, fm.x)  # repr round-trip is exact
    assert np.array_equal(back.labels, fm.labels)
    assert np.array_equal(back.clip_ids, fm.clip_ids)


def test_features_without_labels(tmp_path):
    fm = FeatureMatrix(np.ones((2, 3)))
    path = tmp_path / "f.csv"
    save_features(fm, path)
    back = load_features(path)
    assert back.labels is None and back.clip_ids is None


def test_features_bad_header(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ParseError):
        load_features(path)


def test_features_truncated_row_names_line(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("label,clip_id,f1,f2\n0,0,1.0,2.0\n0,0,1.0\n")
    with pytest.raises(ParseError) as err:
        load_features(path)
    assert err.value.line == 3


def test_features_non_numeric_field(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("label,clip_id,f1\n0,0,zap\n")
    with pytest.raises(ParseError) as err:
        load_features(path)
    assert err.value.line == 2


# ---------------------------------------------------------------------------
# codes
# ---------------------------------------------------------------------------

def test_codes_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    codes = rng.choice(np.array([-1, 1], dtype=np.int8), size=(13, 6))
    clips = np.array([0, 0, 1, 1, 2, 2])
    labels = np.array([4, 4, 1, 1, 0, 0])
    path = tmp_path / "p.codes"
    save_codes(codes, clips, path, labels=labels)
    text = path.read_text()
    assert text.startswith("# SOMCODES1 m=13\n")
    back_codes, back_clips, back_labels = load_codes(path)
    assert np.array_equal(back_codes, codes)
    assert np.array_equal(back_clips, clips)
    assert np.array_equal(back_labels, labels)
    # byte-identical re-serialization
    path2 = tmp_path / "q.codes"
    save_codes(back_codes, back_clips, path2, labels=back_labels)
    assert path2.read_bytes() == path.read_bytes()


def test_codes_without_labels(tmp_path):
    codes = np.ones((4, 2), dtype=np.int8)
    path = tmp_path / "p.codes"
    save_codes(codes, [7, 7], path)
    _, clips, labels = load_codes(path)
    assert labels is None
    assert np.array_equal(clips, [7, 7])


def test_codes_header_version_check(tmp_path):
    path = tmp_path / "p.codes"
    path.write_text("# SOMCODES9 m=4\n0,,0f\n")
    with pytest.raises(VersionMismatchError):
        load_codes(path)


def test_codes_bad_hex_line_number(tmp_path):
    path = tmp_path / "p.codes"
    path.write_text("# SOMCODES1 m=4\n0,0,0f\n1,0,zz\n")
    with pytest.raises(ParseError) as err:
        load_codes(path)
    assert err.value.line == 3


def test_codes_wrong_byte_count(tmp_path):
    path = tmp_path / "p.codes"
    path.write_text("# SOMCODES1 m=16\n0,0,0f\n")
    with pytest.raises(ParseError) as err:
        load_codes(path)
    assert err.value.line == 2


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

def test_model_round_trip_byte_identical(tmp_path):
    model = small_model()
    p1 = tmp_path / "m.som"
    p2 = tmp_path / "m2.som"
    save_model(model, p1)
    back = load_model(p1)
    save_model(back, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert np.array_equal(back.bank.weights, model.bank.weights)
    assert np.array_equal(back.bank.biases, model.bank.biases)
    assert np.array_equal(back.gallery_codes, model.gallery_codes)
    assert np.array_equal(back.gallery_labels, model.gallery_labels)
    assert back.hp == model.hp
    assert back.converged == model.converged
    assert len(back.diagnostics) == len(model.diagnostics)


def test_model_magic_check(tmp_path):
    path = tmp_path / "m.som"
    path.write_bytes(b"NOTAMODEL\n123")
    with pytest.raises(VersionMismatchError):
        load_model(path)


def test_model_truncated(tmp_path):
    model = small_model()
    path = tmp_path / "m.som"
    save_model(model, path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-5])
    with pytest.raises(ParseError):
        load_model(path)
