"""Lossless packing of rotation codes.

``byte_aligned`` stores every code in the smallest whole number of bytes.
``group_packed`` reads a group of G codes as the base-10^{2 lambda} digits of
one integer and stores that integer in exactly ceil(log2(10^{2 lambda G})) bits;
groups are concatenated least significant bit first.
"""

import math
from typing import Optional

import numpy as np

from pi_quant.errors import FormatError
from pi_quant.models import PackedCodes, PackMode, PrecisionConfig

BYTE_DTYPES = {1: np.dtype("<u1"), 2: np.dtype("<u2"), 3: np.dtype("<u4"), 4: np.dtype("<u4")}
ACCUMULATOR_BITS = 128


def default_group_size(lam: int) -> int:
    """Largest G whose radix value still fits a 128-bit accumulator."""
    size = 1
    while 10 ** (2 * lam * (size + 1)) < 2 ** ACCUMULATOR_BITS:
        size += 1
    return size


def group_bits(count: int, lam: int) -> int:
    if count == 0:
        return 0
    return (10 ** (2 * lam * count) - 1).bit_length()


def code_bits(lam: int) -> float:
    return 2 * lam * math.log2(10)


def _check_codes(codes: np.ndarray, cfg: PrecisionConfig) -> None:
    if codes.size and (codes.min() < 0 or codes.max() >= cfg.code_modulus):
        raise FormatError(f"rotation code outside [0, {cfg.code_modulus})")


def _to_bits(value: int, width: int) -> np.ndarray:
    raw = np.frombuffer(value.to_bytes((width + 7) // 8, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:width]


def _from_bits(bits: np.ndarray) -> int:
    return int.from_bytes(np.packbits(bits, bitorder="little").tobytes(), "little")


def packed_bit_length(count: int, lam: int, mode: PackMode = PackMode.GROUP_PACKED,
                      group_size: Optional[int] = None) -> int:
    """Bits ``pack_codes`` produces for ``count`` codes, without packing them."""
    if mode == PackMode.BYTE_ALIGNED:
        return 8 * BYTE_DTYPES[lam].itemsize * count
    size = group_size or default_group_size(lam)
    full, tail = divmod(count, size)
    return full * group_bits(size, lam) + group_bits(tail, lam)


def pack_codes(codes, cfg: PrecisionConfig, mode: PackMode = PackMode.GROUP_PACKED,
               group_size: Optional[int] = None) -> PackedCodes:
    codes = np.asarray(codes, dtype=np.int64).ravel()
    _check_codes(codes, cfg)

    if mode == PackMode.BYTE_ALIGNED:
        payload = codes.astype(BYTE_DTYPES[cfg.lambda_]).tobytes()
        return PackedCodes(pack_mode=mode, group_size=1, payload=payload, bit_length=8 * len(payload))

    size = group_size or default_group_size(cfg.lambda_)
    radix = cfg.code_modulus
    values = codes.tolist()
    fields = []
    for start in range(0, len(values), size):
        chunk = values[start:start + size]
        value = 0
        for code in reversed(chunk):
            value = value * radix + code
        fields.append(_to_bits(value, group_bits(len(chunk), cfg.lambda_)))
    stream = np.concatenate(fields) if fields else np.zeros(0, dtype=np.uint8)
    payload = np.packbits(stream, bitorder="little").tobytes()
    return PackedCodes(pack_mode=mode, group_size=size, payload=payload, bit_length=int(stream.size))


def _group_count(bit_length: int, size: int, lam: int) -> int:
    full_bits = group_bits(size, lam)
    full, remainder = divmod(bit_length, full_bits)
    if remainder == 0:
        return full * size
    for tail in range(1, size):
        if group_bits(tail, lam) == remainder:
            return full * size + tail
    raise FormatError(f"bit length {bit_length} does not match any code count")


def unpack_codes(p: PackedCodes, cfg: PrecisionConfig, count: Optional[int] = None) -> np.ndarray:
    if p.pack_mode == PackMode.BYTE_ALIGNED:
        dtype = BYTE_DTYPES[cfg.lambda_]
        if len(p.payload) % dtype.itemsize or p.bit_length != 8 * len(p.payload):
            raise FormatError("byte-aligned payload length is not a whole number of codes")
        codes = np.frombuffer(p.payload, dtype=dtype).astype(np.int64)
    else:
        if len(p.payload) != (p.bit_length + 7) // 8:
            raise FormatError(f"payload holds {len(p.payload)} bytes, bit length says {p.bit_length} bits")
        total = _group_count(p.bit_length, p.group_size, cfg.lambda_)
        stream = np.unpackbits(np.frombuffer(p.payload, dtype=np.uint8), bitorder="little")
        if stream[p.bit_length:].any():
            raise FormatError("payload has bits set past its bit length")
        radix = cfg.code_modulus
        values = []
        offset = 0
        for start in range(0, total, p.group_size):
            width = min(p.group_size, total - start)
            bits = group_bits(width, cfg.lambda_)
            value = _from_bits(stream[offset:offset + bits])
            offset += bits
            if value >= radix ** width:
                raise FormatError("group value exceeds its digit capacity")
            for _ in range(width):
                value, code = divmod(value, radix)
                values.append(code)
        codes = np.array(values, dtype=np.int64)

    _check_codes(codes, cfg)
    if count is not None and codes.size != count:
        raise FormatError(f"expected {count} codes, payload holds {codes.size}")
    return codes


def bits_per_parameter(bit_length: int, parameter_count: int) -> float:
    if parameter_count == 0:
        return 0.0
    return bit_length / parameter_count
