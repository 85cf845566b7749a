"""Little-endian file formats for dense tensors (.pqtd) and quantized tensors (.piqt)."""

import logging
import math
import os
import struct
import tempfile
from pathlib import Path
from typing import Union

import numpy as np

from pi_quant.errors import BadMagicError, FormatError, TruncatedFileError, UnsupportedVersionError
from pi_quant.models import PackedCodes, PackMode, QuantizedTensor
from pi_quant.packing import pack_codes, unpack_codes
from pi_quant.rotation_codec import MAX_LAMBDA, MIN_LAMBDA, precision_config
from pi_quant.tensor_quant import as_dense, check_structure

logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]

DENSE_MAGIC = b"PQTD"
QUANTIZED_MAGIC = b"PIQT"
FORMAT_VERSION = 1
DTYPE_FLOAT64 = 0
MAX_GROUP_SIZE = 64

PACK_MODE_IDS = {PackMode.BYTE_ALIGNED: 0, PackMode.GROUP_PACKED: 1}
PACK_MODES_BY_ID = {value: key for key, value in PACK_MODE_IDS.items()}

_DENSE_HEAD = struct.Struct("<4sBBB")
_QUANTIZED_HEAD = struct.Struct("<4sBBBBHB")
_QUANTIZED_TAIL = struct.Struct("<QdQ")


def atomic_write_bytes(path: PathLike, data: bytes) -> None:
    """Write to a temporary sibling and rename it into place only once complete."""
    target = Path(path)
    handle, temp_name = tempfile.mkstemp(dir=target.parent or ".", prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(handle, "wb") as stream:
            stream.write(data)
        os.replace(temp_name, target)
    except BaseException:
        if os.path.exists(temp_name):
            os.unlink(temp_name)
        raise


class _Cursor:
    def __init__(self, data: bytes, name: str):
        self.data = data
        self.name = name
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise TruncatedFileError(f"{self.name}: file ends after {len(self.data)} bytes")
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, layout: struct.Struct) -> tuple:
        return layout.unpack(self.take(layout.size))

    def finish(self) -> None:
        if self.offset != len(self.data):
            raise FormatError(f"{self.name}: {len(self.data) - self.offset} trailing bytes")


def _check_header(magic: bytes, version: int, expected: bytes, name: str) -> None:
    if magic != expected:
        raise BadMagicError(f"{name}: expected magic {expected!r}, found {magic!r}")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"{name}: unsupported version {version}")


def _dims(shape: tuple[int, ...]) -> bytes:
    return struct.pack(f"<{len(shape)}Q", *shape)


def encode_dense(t) -> bytes:
    values = as_dense(t)
    if values.ndim > 255:
        raise FormatError("rank above 255 cannot be stored")
    head = _DENSE_HEAD.pack(DENSE_MAGIC, FORMAT_VERSION, DTYPE_FLOAT64, values.ndim)
    return head + _dims(values.shape) + values.astype("<f8").tobytes()


def decode_dense(data: bytes, name: str = "<bytes>") -> np.ndarray:
    cursor = _Cursor(data, name)
    magic, version, dtype, rank = cursor.unpack(_DENSE_HEAD)
    _check_header(magic, version, DENSE_MAGIC, name)
    if dtype != DTYPE_FLOAT64:
        raise FormatError(f"{name}: unknown dtype id {dtype}")
    shape = struct.unpack(f"<{rank}Q", cursor.take(8 * rank))
    count = math.prod(shape)
    values = np.frombuffer(cursor.take(8 * count), dtype="<f8").astype(np.float64)
    cursor.finish()
    return values.reshape(shape)


def encode_quantized(q: QuantizedTensor) -> bytes:
    check_structure(q)
    cfg = precision_config(q.lambda_)
    packed = pack_codes(q.codes, cfg, q.pack_mode)
    head = _QUANTIZED_HEAD.pack(
        QUANTIZED_MAGIC, FORMAT_VERSION, q.lambda_, PACK_MODE_IDS[q.pack_mode],
        int(q.padded), packed.group_size, len(q.shape),
    )
    tail = _QUANTIZED_TAIL.pack(q.original_len, q.scale_w, packed.bit_length)
    return head + _dims(q.shape) + tail + packed.payload


def decode_quantized(data: bytes, name: str = "<bytes>") -> QuantizedTensor:
    cursor = _Cursor(data, name)
    magic, version, lam, mode_id, padded, group_size, rank = cursor.unpack(_QUANTIZED_HEAD)
    _check_header(magic, version, QUANTIZED_MAGIC, name)
    if not MIN_LAMBDA <= lam <= MAX_LAMBDA:
        raise FormatError(f"{name}: lambda {lam} out of range")
    if mode_id not in PACK_MODES_BY_ID:
        raise FormatError(f"{name}: unknown pack mode id {mode_id}")
    if not 1 <= group_size <= MAX_GROUP_SIZE:
        raise FormatError(f"{name}: group size {group_size} out of range")
    shape = struct.unpack(f"<{rank}Q", cursor.take(8 * rank))
    original_len, scale_w, bit_length = cursor.unpack(_QUANTIZED_TAIL)
    if not np.isfinite(scale_w) or scale_w < 0.0:
        raise FormatError(f"{name}: invalid scale {scale_w}")
    payload = cursor.take((bit_length + 7) // 8)
    cursor.finish()

    mode = PACK_MODES_BY_ID[mode_id]
    packed = PackedCodes(pack_mode=mode, group_size=group_size, payload=payload, bit_length=bit_length)
    codes = unpack_codes(packed, precision_config(lam), count=(original_len + 1) // 2)
    q = QuantizedTensor(
        lambda_=lam,
        scale_w=scale_w,
        original_len=original_len,
        padded=bool(padded),
        shape=tuple(shape),
        codes=codes,
        pack_mode=mode,
    )
    check_structure(q)
    return q


def write_dense(path: PathLike, t) -> None:
    atomic_write_bytes(path, encode_dense(t))
    logger.info("wrote dense tensor to %s", path)


def read_dense(path: PathLike) -> np.ndarray:
    return decode_dense(Path(path).read_bytes(), str(path))


def write_quantized(path: PathLike, q: QuantizedTensor) -> None:
    atomic_write_bytes(path, encode_quantized(q))
    logger.info("wrote quantized tensor to %s", path)


def read_quantized(path: PathLike) -> QuantizedTensor:
    return decode_quantized(Path(path).read_bytes(), str(path))
