"""Uniform min/max quantizer used as the baseline for optimizer-state compression."""

import numpy as np

from pi_quant.errors import ConfigurationError, FormatError
from pi_quant.models import LinearQuantTensor
from pi_quant.tensor_quant import as_dense

MIN_BITS = 2
MAX_BITS = 16


def _levels(bits: int) -> int:
    if not MIN_BITS <= bits <= MAX_BITS:
        raise ConfigurationError(f"bits must be in [{MIN_BITS}, {MAX_BITS}], got {bits}")
    return 2 ** bits - 1


def linear_quantize(t, bits: int = 8) -> LinearQuantTensor:
    levels = _levels(bits)
    values = as_dense(t)
    flat = values.ravel()
    lo = float(flat.min()) if flat.size else 0.0
    hi = float(flat.max()) if flat.size else 0.0

    if hi == lo:
        codes = np.zeros(flat.size, dtype=np.int64)
    else:
        codes = np.rint((flat - lo) / (hi - lo) * levels).astype(np.int64)
        codes = np.clip(codes, 0, levels)

    return LinearQuantTensor(
        bits=bits,
        lo=lo,
        hi=hi,
        codes=codes,
        original_len=int(flat.size),
        shape=tuple(int(dim) for dim in values.shape),
    )


def linear_dequantize(q: LinearQuantTensor) -> np.ndarray:
    levels = _levels(q.bits)
    codes = np.asarray(q.codes, dtype=np.int64)
    if codes.size != q.original_len:
        raise FormatError(f"expected {q.original_len} codes, got {codes.size}")
    if codes.size and (codes.min() < 0 or codes.max() > levels):
        raise FormatError(f"linear code outside [0, {levels}]")
    if q.hi < q.lo:
        raise FormatError("range has hi < lo")

    if q.hi == q.lo:
        flat = np.full(codes.size, q.lo, dtype=np.float64)
    else:
        step = (q.hi - q.lo) / levels
        # top code maps to hi exactly
        flat = np.where(codes == levels, q.hi, q.lo + codes * step)
        flat = np.clip(flat, q.lo, q.hi)
    return flat.reshape(q.shape)
