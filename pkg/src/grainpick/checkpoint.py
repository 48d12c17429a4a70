"""Policy checkpoint file format.

Layout (all integers little-endian uint32, floats little-endian float64):

    magic   8 bytes  b"GEOTACT1"
    count   uint32   total layer count (actor layers then critic layers)
    headers count x (rows uint32, cols uint32)
    data    per layer, in header order: W row-major (rows*cols), then b (rows)
    crc     uint32   zlib.crc32 of every preceding byte

Round-trips must be bit-exact; loading validates magic, checksum, and the
expected actor/critic architecture.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .agent import N_LAYERS, MlpParams

MAGIC = b"GEOTACT1"


class CheckpointError(ValueError):
    pass


def save_params(params: MlpParams, path) -> None:
    params.validate()
    layers = params.actor + params.critic
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", len(layers))
    for W, _ in layers:
        blob += struct.pack("<II", W.shape[0], W.shape[1])
    for W, b in layers:
        blob += np.ascontiguousarray(W, dtype="<f8").tobytes()
        blob += np.ascontiguousarray(b, dtype="<f8").tobytes()
    blob += struct.pack("<I", zlib.crc32(bytes(blob)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(blob))


def load_params(path) -> MlpParams:
    blob = Path(path).read_bytes()
    if len(blob) < len(MAGIC) + 8 or blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a policy checkpoint")
    body, crc_bytes = blob[:-4], blob[-4:]
    (crc,) = struct.unpack("<I", crc_bytes)
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise CheckpointError(f"{path}: checksum mismatch")
    off = len(MAGIC)
    (count,) = struct.unpack_from("<I", body, off)
    off += 4
    shapes = []
    for _ in range(count):
        rows, cols = struct.unpack_from("<II", body, off)
        off += 8
        shapes.append((rows, cols))
    layers = []
    for rows, cols in shapes:
        w_n = rows * cols * 8
        W = np.frombuffer(body, dtype="<f8", count=rows * cols, offset=off)
        off += w_n
        b = np.frombuffer(body, dtype="<f8", count=rows, offset=off)
        off += rows * 8
        layers.append((W.reshape(rows, cols).copy(), b.copy()))
    if off != len(body):
        raise CheckpointError(f"{path}: trailing bytes in checkpoint")
    if count != 2 * N_LAYERS:
        raise CheckpointError(f"{path}: expected {2 * N_LAYERS} layers, got {count}")
    params = MlpParams(layers[:N_LAYERS], layers[N_LAYERS:])
    try:
        params.validate()
    except ValueError as e:
        raise CheckpointError(f"{path}: {e}") from None
    return params
