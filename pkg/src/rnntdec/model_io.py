"""Single-file model archives: length-prefixed JSON manifest + raw blob.

Layout:  ``[u64 LE manifest length][manifest JSON, UTF-8][blob]``.

The manifest lists every stored tensor with its byte offset, shape, and
dtype; the blob is their little-endian raw data back to back.  Tied models
store the embedding matrix once and record the output-layer alias in the
manifest, so a tied archive is exactly ``d_h * vocab_size`` float slots
smaller than its untied twin.  Saving is byte-deterministic: sorted manifest
keys, fixed tensor order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .config import LSTM, REDUCED, DecoderConfig
from .decoding import LookupTable
from .errors import (
    ArchiveError,
    ConfigError,
    CorruptArchiveError,
    UnsupportedFormatError,
    ValidationError,
)
from .weights import EncoderStub, LstmLayer, ModelWeights

FORMAT_VERSION = 1
_KNOWN_KEYS = {"format_version", "kind", "requires", "config", "tensors", "aliases", "seed"}
_DTYPES = {"<f8": np.dtype("<f8"), "<f4": np.dtype("<f4")}


@dataclass
class ModelArchive:
    """Parsed archive: manifest dict plus raw blob bytes."""

    manifest: dict
    blob: bytes

    @property
    def extra(self) -> dict:
        """Unknown optional manifest fields (preserved on re-save)."""
        return {k: v for k, v in self.manifest.items() if k not in _KNOWN_KEYS}


def _named_tensors(weights: ModelWeights) -> list[tuple[str, np.ndarray, tuple[int, int]]]:
    """(name, array, (rows, cols)) in fixed archive order; alias excluded."""
    cfg = weights.config
    out = [("emb", weights.emb, weights.emb.shape)]
    if cfg.variant == REDUCED:
        h, n, d = weights.positions.shape
        out.append(("positions", weights.positions, (h * n, d)))
        out.append(("proj_w", weights.proj_w, weights.proj_w.shape))
        out.append(("proj_b", weights.proj_b, (1, weights.proj_b.shape[0])))
        out.append(("ln_gamma", weights.ln_gamma, (1, weights.ln_gamma.shape[0])))
        out.append(("ln_beta", weights.ln_beta, (1, weights.ln_beta.shape[0])))
    elif cfg.variant == LSTM:
        for i, layer in enumerate(weights.lstm):
            out.append((f"lstm{i}_w_x", layer.w_x, layer.w_x.shape))
            out.append((f"lstm{i}_w_h", layer.w_h, layer.w_h.shape))
            out.append((f"lstm{i}_bias", layer.bias, (1, layer.bias.shape[0])))
            out.append((f"lstm{i}_w_p", layer.w_p, layer.w_p.shape))
    out.append(("enc_w", weights.enc_w, weights.enc_w.shape))
    out.append(("pred_w", weights.pred_w, weights.pred_w.shape))
    out.append(("joint_b", weights.joint_b, (1, weights.joint_b.shape[0])))
    if not cfg.tied:
        out.append(("out_w", weights.out_w, weights.out_w.shape))
    out.append(("blank_w", weights.blank_w, (1, weights.blank_w.shape[0])))
    out.append(("out_b", weights.out_b, (1, weights.out_b.shape[0])))
    if weights.enc_stub is not None:
        out.append(("enc_stub_w", weights.enc_stub.w, weights.enc_stub.w.shape))
        out.append(("enc_stub_b", weights.enc_stub.b, (1, weights.enc_stub.b.shape[0])))
    return out


def _dtype_tag(arr: np.ndarray) -> str:
    tag = {8: "<f8", 4: "<f4"}.get(arr.dtype.itemsize)
    if tag is None or arr.dtype.kind != "f":
        raise ArchiveError(f"unsupported tensor dtype {arr.dtype}")
    return tag


def _build_archive(tensors, manifest_base: dict) -> bytes:
    directory = {}
    blob = bytearray()
    for name, arr, (rows, cols) in tensors:
        tag = _dtype_tag(arr)
        data = np.ascontiguousarray(arr, dtype=_DTYPES[tag]).tobytes()
        directory[name] = {"offset": len(blob), "rows": rows, "cols": cols, "dtype": tag}
        blob.extend(data)
    manifest = dict(manifest_base)
    manifest["tensors"] = directory
    raw = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return struct.pack("<Q", len(raw)) + raw + bytes(blob)


def save(
    weights: ModelWeights,
    config: DecoderConfig,
    path: str,
    seed: int | None = None,
    extra: dict | None = None,
) -> None:
    """Write a model archive; byte-identical output for identical inputs."""
    weights.validate()
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": "model",
        "requires": [],
        "config": config.to_dict(),
        "seed": seed,
    }
    if config.tied:
        manifest["aliases"] = {"out_w": "emb"}
    if extra:
        overlap = set(extra) & _KNOWN_KEYS
        if overlap:
            raise ArchiveError(f"extra manifest keys clash with reserved ones: {sorted(overlap)}")
        manifest.update(extra)
    data = _build_archive(_named_tensors(weights), manifest)
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as e:
        raise ArchiveError(f"cannot write archive {path}: {e}") from e


def read_archive(path: str) -> ModelArchive:
    """Read and structurally check an archive without materializing tensors."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as e:
        raise ArchiveError(f"cannot read archive {path}: {e}") from e
    if len(raw) < 8:
        raise CorruptArchiveError(f"{path}: shorter than the manifest length prefix")
    (manifest_len,) = struct.unpack("<Q", raw[:8])
    if len(raw) < 8 + manifest_len:
        raise CorruptArchiveError(f"{path}: truncated manifest")
    try:
        manifest = json.loads(raw[8 : 8 + manifest_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptArchiveError(f"{path}: manifest is not valid JSON: {e}") from e
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedFormatError(
            f"{path}: format_version {version!r} not supported (expected {FORMAT_VERSION})"
        )
    unknown_required = [r for r in manifest.get("requires", [])]
    if unknown_required:
        raise UnsupportedFormatError(
            f"{path}: archive requires unsupported capabilities {unknown_required}"
        )
    blob = raw[8 + manifest_len :]
    for name, entry in manifest.get("tensors", {}).items():
        end = entry["offset"] + entry["rows"] * entry["cols"] * _DTYPES[entry["dtype"]].itemsize
        if end > len(blob):
            raise CorruptArchiveError(
                f"{path}: tensor {name!r} extends past the end of the blob "
                f"(needs {end} bytes, blob has {len(blob)})"
            )
    return ModelArchive(manifest, blob)


def _read_tensor(archive: ModelArchive, name: str, flat: bool = False) -> np.ndarray:
    try:
        entry = archive.manifest["tensors"][name]
    except KeyError:
        raise CorruptArchiveError(f"archive is missing tensor {name!r}") from None
    dtype = _DTYPES[entry["dtype"]]
    count = entry["rows"] * entry["cols"]
    arr = np.frombuffer(archive.blob, dtype=dtype, count=count, offset=entry["offset"]).copy()
    if flat:
        return arr
    return arr.reshape(entry["rows"], entry["cols"])


def load(path: str) -> tuple[ModelWeights, DecoderConfig]:
    """Reconstruct weights (including the tying alias) and their config.

    Raises UnsupportedFormatError on version mismatch, CorruptArchiveError on
    truncation, ValidationError when a model invariant fails.
    """
    archive = read_archive(path)
    if archive.manifest.get("kind") != "model":
        raise UnsupportedFormatError(f"{path}: not a model archive")
    try:
        config = DecoderConfig.from_dict(archive.manifest["config"])
    except (ConfigError, KeyError) as e:
        raise ValidationError(f"{path}: invalid stored config: {e}") from None

    def vec(name):
        return _read_tensor(archive, name, flat=True)

    weights = ModelWeights(
        config=config,
        emb=_read_tensor(archive, "emb"),
        enc_w=_read_tensor(archive, "enc_w"),
        pred_w=_read_tensor(archive, "pred_w"),
        joint_b=vec("joint_b"),
        out_w=np.zeros((0, 0)),  # installed below
        blank_w=vec("blank_w"),
        out_b=vec("out_b"),
    )
    if config.variant == REDUCED:
        weights.positions = _read_tensor(archive, "positions").reshape(
            config.num_heads, config.history_len, config.d_e
        )
        weights.proj_w = _read_tensor(archive, "proj_w")
        weights.proj_b = vec("proj_b")
        weights.ln_gamma = vec("ln_gamma")
        weights.ln_beta = vec("ln_beta")
    elif config.variant == LSTM:
        weights.lstm = [
            LstmLayer(
                w_x=_read_tensor(archive, f"lstm{i}_w_x"),
                w_h=_read_tensor(archive, f"lstm{i}_w_h"),
                bias=vec(f"lstm{i}_bias"),
                w_p=_read_tensor(archive, f"lstm{i}_w_p"),
            )
            for i in range(config.lstm_layers)
        ]
    if "enc_stub_w" in archive.manifest["tensors"]:
        weights.enc_stub = EncoderStub(
            w=_read_tensor(archive, "enc_stub_w"), b=vec("enc_stub_b")
        )
    if config.tied:
        if archive.manifest.get("aliases", {}).get("out_w") != "emb":
            raise ValidationError(f"{path}: tied model must record the out_w -> emb alias")
        weights.tie_output()
    else:
        weights.out_w = _read_tensor(archive, "out_w")

    _check_shapes(weights, config, path)
    weights.validate()
    return weights, config


def _check_shapes(weights: ModelWeights, config: DecoderConfig, path: str) -> None:
    expected = {
        "enc_w": (config.d_enc, config.d_h),
        "pred_w": (config.pn_out_dim, config.d_h),
        "joint_b": (config.d_h,),
        "blank_w": (config.d_h,),
        "out_b": (config.vocab_ext,),
    }
    for name, shape in expected.items():
        actual = getattr(weights, name).shape
        if actual != shape:
            raise ValidationError(f"{path}: tensor {name} has shape {actual}, expected {shape}")


def save_lookup(table: LookupTable, config: DecoderConfig, path: str) -> None:
    """Store a precomputed prediction-network table in the same container."""
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": "lookup",
        "requires": [],
        "config": config.to_dict(),
        "seed": None,
    }
    tensors = [("table", table.table, table.table.shape)]
    data = _build_archive(tensors, manifest)
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as e:
        raise ArchiveError(f"cannot write lookup archive {path}: {e}") from e


def load_lookup(path: str) -> tuple[LookupTable, DecoderConfig]:
    archive = read_archive(path)
    if archive.manifest.get("kind") != "lookup":
        raise UnsupportedFormatError(f"{path}: not a lookup archive")
    try:
        config = DecoderConfig.from_dict(archive.manifest["config"])
    except (ConfigError, KeyError) as e:
        raise ValidationError(f"{path}: invalid stored config: {e}") from None
    table = _read_tensor(archive, "table")
    expected_rows = config.vocab_ext**config.history_len
    if table.shape != (expected_rows, config.pn_out_dim):
        raise ValidationError(
            f"{path}: lookup table shape {table.shape} != "
            f"{(expected_rows, config.pn_out_dim)}"
        )
    return LookupTable(config.history_len, config.vocab_ext, table), config
