"""Model file format: magic "BDNN", layer table, float32 weights, CRC32.

Layout (integers and floats little-endian):

    magic "BDNN" (4) | format version u8 | bucketizer threshold f32 |
    key_layer_index u8 | layer count u8 | layer table | weight blob |
    crc32 u32 over all preceding bytes

Layer table entries are a kind octet plus kind-specific shape fields;
the weight blob holds each parameterized layer's weight then bias as
float32 in C order. Loading verifies magic, version, and CRC, and must
consume the byte stream exactly; loaded models reproduce forward outputs
bit-for-bit because weights are stored at their in-memory precision.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from ..core import EnvsealError
from .layers import Affine, Conv, Dropout, Layer, Pool, Relu, Sigmoid, Softmax
from .model import BucketizerConfig, NetworkModel

__all__ = ["ModelFileError", "save_model", "load_model"]

MAGIC = b"BDNN"
FORMAT_VERSION = 1

_KIND_CONV = 1
_KIND_RELU = 2
_KIND_POOL = 3
_KIND_AFFINE = 4
_KIND_DROPOUT = 5
_KIND_SIGMOID = 6
_KIND_SOFTMAX = 7


class ModelFileError(EnvsealError):
    """The model file is malformed, truncated, or of a foreign version."""


def save_model(model: NetworkModel, path: str | Path) -> None:
    parts = [
        MAGIC,
        struct.pack("<BfBB", FORMAT_VERSION, model.bucketizer.threshold,
                    model.key_layer_index, len(model.layers)),
    ]
    for layer in model.layers:
        parts.append(_encode_layer(layer))
    for layer in model.layers:
        for name in ("w", "b"):
            if name in layer.params:
                parts.append(np.ascontiguousarray(layer.params[name], dtype=np.float32)
                             .tobytes())
    blob = b"".join(parts)
    Path(path).write_bytes(blob + struct.pack("<I", zlib.crc32(blob)))


def load_model(path: str | Path) -> NetworkModel:
    blob = Path(path).read_bytes()
    if len(blob) < 4 or blob[:4] != MAGIC:
        raise ModelFileError("bad magic; not a model file")
    if len(blob) < 17:
        raise ModelFileError("checksum mismatch: file truncated")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise ModelFileError("checksum mismatch: file corrupted or truncated")
    version, threshold, key_index, n_layers = struct.unpack("<BfBB", body[4:11])
    if version != FORMAT_VERSION:
        raise ModelFileError(f"unsupported model format version {version}")

    pos = 11
    builders = []
    for _ in range(n_layers):
        builder, pos = _decode_layer(body, pos)
        builders.append(builder)
    layers: list[Layer] = []
    for make, nparams in builders:
        arrays = []
        for shape in nparams:
            count = int(np.prod(shape))
            raw = body[pos : pos + 4 * count]
            if len(raw) != 4 * count:
                raise ModelFileError("checksum mismatch: weight blob truncated")
            arrays.append(np.frombuffer(raw, dtype="<f4").reshape(shape).copy())
            pos += 4 * count
        layers.append(make(*arrays))
    if pos != len(body):
        raise ModelFileError(f"{len(body) - pos} trailing bytes after weights")
    return NetworkModel(layers, key_index, BucketizerConfig(float(threshold)))


def _encode_layer(layer: Layer) -> bytes:
    if isinstance(layer, Conv):
        o, c, kh, kw = layer.params["w"].shape
        return struct.pack("<BHHBBBB", _KIND_CONV, o, c, kh, kw, layer.stride, layer.pad)
    if isinstance(layer, Relu):
        return struct.pack("<B", _KIND_RELU)
    if isinstance(layer, Pool):
        return struct.pack("<B", _KIND_POOL)
    if isinstance(layer, Affine):
        n_in, n_out = layer.params["w"].shape
        return struct.pack("<BII", _KIND_AFFINE, n_in, n_out)
    if isinstance(layer, Dropout):
        return struct.pack("<Bf", _KIND_DROPOUT, layer.rate)
    if isinstance(layer, Sigmoid):
        return struct.pack("<B", _KIND_SIGMOID)
    if isinstance(layer, Softmax):
        return struct.pack("<B", _KIND_SOFTMAX)
    raise ModelFileError(f"cannot serialize layer type {type(layer).__name__}")


def _decode_layer(body: bytes, pos: int):
    """Returns ((constructor, param shapes), next position)."""
    try:
        kind = body[pos]
        if kind == _KIND_CONV:
            o, c, kh, kw, stride, pad = struct.unpack_from("<HHBBBB", body, pos + 1)
            make = lambda w, b, s=stride, p=pad: Conv(w, b, s, p)
            return (make, [(o, c, kh, kw), (o,)]), pos + 9
        if kind == _KIND_AFFINE:
            n_in, n_out = struct.unpack_from("<II", body, pos + 1)
            return (Affine, [(n_in, n_out), (n_out,)]), pos + 9
        if kind == _KIND_DROPOUT:
            (rate,) = struct.unpack_from("<f", body, pos + 1)
            return (lambda *a, r=rate: Dropout(float(r)), []), pos + 5
        simple = {_KIND_RELU: Relu, _KIND_POOL: Pool, _KIND_SIGMOID: Sigmoid,
                  _KIND_SOFTMAX: Softmax}
        if kind in simple:
            return (simple[kind], []), pos + 1
    except (IndexError, struct.error) as exc:
        raise ModelFileError(f"layer table truncated at offset {pos}") from exc
    raise ModelFileError(f"unknown layer kind {body[pos]} at offset {pos}")
