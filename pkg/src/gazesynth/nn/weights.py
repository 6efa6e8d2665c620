"""Flat binary weight files.

Layout (all integers little-endian)::

    b"GFW1"                      magic + format version 1
    uint32  n_layers
    per layer:
        uint8   kind id          (see ``layers.KIND_IDS``)
        uint8   n_tensors        parameters first, then buffers
        per tensor:
            uint8   ndim
            uint32  dims[ndim]
            float64 payload[prod(dims)]   row-major

Loading writes into an already-built architecture and checks every kind id
and shape against it.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .layers import Layer, ShapeError

MAGIC = b"GFW1"


class WeightFormatError(ValueError):
    pass


def dumps(layers: list[Layer]) -> bytes:
    out = [MAGIC, struct.pack("<I", len(layers))]
    for layer in layers:
        tensors = layer.tensors()
        out.append(struct.pack("<BB", layer.kind_id, len(tensors)))
        for t in tensors:
            out.append(struct.pack("<B", t.ndim))
            out.append(struct.pack(f"<{t.ndim}I", *t.shape))
            out.append(np.ascontiguousarray(t, dtype="<f8").tobytes())
    return b"".join(out)


def loads(blob: bytes) -> list[tuple[int, list[np.ndarray]]]:
    if blob[:4] != MAGIC:
        raise WeightFormatError("not a GFW1 weight file")
    pos = 4

    def take(fmt):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(blob):
            raise WeightFormatError("truncated weight file")
        vals = struct.unpack_from(fmt, blob, pos)
        pos += size
        return vals

    (n_layers,) = take("<I")
    entries = []
    for _ in range(n_layers):
        kind_id, n_tensors = take("<BB")
        tensors = []
        for _ in range(n_tensors):
            (ndim,) = take("<B")
            shape = take(f"<{ndim}I") if ndim else ()
            count = int(np.prod(shape)) if ndim else 1
            nbytes = 8 * count
            if pos + nbytes > len(blob):
                raise WeightFormatError("truncated tensor payload")
            tensors.append(np.frombuffer(blob, "<f8", count, pos).reshape(shape).astype(np.float64))
            pos += nbytes
        entries.append((kind_id, tensors))
    if pos != len(blob):
        raise WeightFormatError("trailing bytes after the last layer")
    return entries


def save_weights(path, layers: list[Layer]) -> None:
    Path(path).write_bytes(dumps(layers))


def load_weights(path, layers: list[Layer]) -> None:
    entries = loads(Path(path).read_bytes())
    if len(entries) != len(layers):
        raise WeightFormatError(f"file has {len(entries)} layers, architecture has {len(layers)}")
    for i, (layer, (kind_id, tensors)) in enumerate(zip(layers, entries)):
        if kind_id != layer.kind_id:
            raise WeightFormatError(f"layer {i}: kind id {kind_id} != {layer.kind_id} ({layer.kind})")
        if len(tensors) != len(layer.tensors()):
            raise WeightFormatError(f"layer {i}: tensor count mismatch")
        try:
            layer.set_tensors(tensors)
        except ShapeError as exc:
            raise WeightFormatError(f"layer {i}: {exc}") from None
