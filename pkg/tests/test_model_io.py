import json
import struct

import numpy as np
import pytest

from rnntdec import convert_to_lookup, init_weights, load, load_lookup, read_archive, save, save_lookup
from rnntdec.errors import (
    ArchiveError,
    CorruptArchiveError,
    UnsupportedFormatError,
    ValidationError,
)
from rnntdec.weights import init_encoder_stub, trainable_tensors

from helpers import tiny_config


ALL_VARIANT_CONFIGS = [
    tiny_config("reduced", tied=True),
    tiny_config("reduced", d_h=6),
    tiny_config("stateless1emb"),
    tiny_config("concat2emb"),
    tiny_config("lstm"),
]


def rewrite_manifest(path, mutate):
    raw = open(path, "rb").read()
    (mlen,) = struct.unpack("<Q", raw[:8])
    manifest = json.loads(raw[8 : 8 + mlen])
    mutate(manifest)
    enc = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
    open(path, "wb").write(struct.pack("<Q", len(enc)) + enc + raw[8 + mlen :])


@pytest.mark.parametrize("cfg", ALL_VARIANT_CONFIGS, ids=lambda c: f"{c.variant}-{'t' if c.tied else 'u'}")
def test_round_trip_bit_exact(cfg, tmp_path):
    w = init_weights(cfg, seed=3)
    w.enc_stub = init_encoder_stub(4, cfg.d_enc, 5)
    path = str(tmp_path / "model.rnnt")
    save(w, cfg, path, seed=3)
    loaded, loaded_cfg = load(path)
    assert loaded_cfg == cfg
    for name, arr in trainable_tensors(w).items():
        np.testing.assert_array_equal(arr, trainable_tensors(loaded)[name])
    np.testing.assert_array_equal(w.emb, loaded.emb)
    if cfg.variant == "reduced":
        np.testing.assert_array_equal(w.positions, loaded.positions)
    if cfg.tied:
        assert loaded.out_w.base is not None
        loaded.emb[0, 0] = 42.0
        assert loaded.out_w[0, 0] == 42.0


def test_two_saves_byte_identical(tmp_path):
    cfg = tiny_config(tied=True)
    w = init_weights(cfg, seed=1)
    p1, p2 = str(tmp_path / "a"), str(tmp_path / "b")
    save(w, cfg, p1)
    save(w, cfg, p2)
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_tied_blob_smaller_by_exact_slot_count(tmp_path):
    tied_cfg = tiny_config(tied=True)
    untied_cfg = tied_cfg.with_tied(False)
    tied_path, untied_path = str(tmp_path / "t"), str(tmp_path / "u")
    save(init_weights(tied_cfg, seed=1), tied_cfg, tied_path)
    save(init_weights(untied_cfg, seed=1), untied_cfg, untied_path)
    tied_blob = len(read_archive(tied_path).blob)
    untied_blob = len(read_archive(untied_path).blob)
    slot_bytes = 8  # float64 archives
    assert untied_blob - tied_blob == tied_cfg.d_h * tied_cfg.vocab_size * slot_bytes


def test_truncated_blob_is_corruption_error(tmp_path):
    cfg = tiny_config()
    path = str(tmp_path / "m")
    save(init_weights(cfg, seed=0), cfg, path)
    raw = open(path, "rb").read()
    open(path, "wb").write(raw[:-1])
    with pytest.raises(CorruptArchiveError):
        load(path)


def test_version_mismatch(tmp_path):
    cfg = tiny_config()
    path = str(tmp_path / "m")
    save(init_weights(cfg, seed=0), cfg, path)
    rewrite_manifest(path, lambda m: m.update(format_version=99))
    with pytest.raises(UnsupportedFormatError):
        load(path)


def test_unknown_required_capability(tmp_path):
    cfg = tiny_config()
    path = str(tmp_path / "m")
    save(init_weights(cfg, seed=0), cfg, path)
    rewrite_manifest(path, lambda m: m.update(requires=["sparse-blobs"]))
    with pytest.raises(UnsupportedFormatError):
        load(path)


def test_tied_dim_mismatch_is_validation_error(tmp_path):
    cfg = tiny_config(tied=True)
    path = str(tmp_path / "m")
    save(init_weights(cfg, seed=0), cfg, path)
    rewrite_manifest(path, lambda m: m["config"].update(d_h=cfg.d_h + 1))
    with pytest.raises(ValidationError):
        load(path)


def test_nonzero_pad_row_is_validation_error(tmp_path):
    cfg = tiny_config()
    w = init_weights(cfg, seed=0)
    path = str(tmp_path / "m")
    save(w, cfg, path)
    raw = bytearray(open(path, "rb").read())
    (mlen,) = struct.unpack("<Q", raw[:8])
    manifest = json.loads(raw[8 : 8 + mlen])
    entry = manifest["tensors"]["emb"]
    # poke the first pad-row float in the blob
    pad_offset = 8 + mlen + entry["offset"] + cfg.pad_id * cfg.d_e * 8
    raw[pad_offset : pad_offset + 8] = struct.pack("<d", 1.0)
    open(path, "wb").write(bytes(raw))
    with pytest.raises(ValidationError, match="pad"):
        load(path)


def test_unknown_optional_fields_survive_resave(tmp_path):
    cfg = tiny_config()
    w = init_weights(cfg, seed=0)
    path = str(tmp_path / "m")
    save(w, cfg, path, extra={"training_note": "toy run 7"})
    archive = read_archive(path)
    assert archive.extra == {"training_note": "toy run 7"}
    loaded, loaded_cfg = load(path)
    path2 = str(tmp_path / "m2")
    save(loaded, loaded_cfg, path2, extra=archive.extra)
    assert read_archive(path2).extra == {"training_note": "toy run 7"}


def test_reserved_extra_key_rejected(tmp_path):
    cfg = tiny_config()
    w = init_weights(cfg, seed=0)
    with pytest.raises(ArchiveError):
        save(w, cfg, str(tmp_path / "m"), extra={"tensors": {}})


def test_missing_file_is_archive_error(tmp_path):
    with pytest.raises(ArchiveError):
        load(str(tmp_path / "nope"))


def test_float32_round_trip(tmp_path):
    cfg = tiny_config(tied=True)
    w = init_weights(cfg, seed=2, dtype=np.float32)
    path = str(tmp_path / "m32")
    save(w, cfg, path)
    archive = read_archive(path)
    assert archive.manifest["tensors"]["emb"]["dtype"] == "<f4"
    loaded, _ = load(path)
    assert loaded.emb.dtype == np.float32
    np.testing.assert_array_equal(loaded.emb, w.emb)


def test_lookup_archive_round_trip(tmp_path):
    cfg = tiny_config(vocab_size=3, history_len=2, num_heads=1)
    w = init_weights(cfg, seed=4)
    table = convert_to_lookup(w, cfg)
    path = str(tmp_path / "table")
    save_lookup(table, cfg, path)
    loaded, loaded_cfg = load_lookup(path)
    assert loaded_cfg == cfg
    np.testing.assert_array_equal(loaded.table, table.table)
    with pytest.raises(UnsupportedFormatError):
        load(path)  # model loader refuses a lookup archive
