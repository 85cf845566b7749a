import logging
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from pi_quant.errors import FormatError, InputError
from pi_quant.models import PackMode, PrecisionConfig, QuantizedTensor
from pi_quant.rotation_codec import decode_arrays, encode_arrays, precision_config, zero_code

logger = logging.getLogger(__name__)

MIN_CHUNK = 4096


def as_dense(values) -> np.ndarray:
    """Return ``values`` as a finite float64 array, keeping its shape."""
    array = np.array(values, dtype=np.float64)
    if not np.all(np.isfinite(array)):
        raise InputError("tensor contains NaN or Inf")
    return array


def split_tensor(t) -> tuple[np.ndarray, np.ndarray, bool]:
    """First half of the flattened tensor is the real part, the rest the imaginary part."""
    flat = as_dense(t).ravel()
    half = (flat.size + 1) // 2
    real = flat[:half].copy()
    imag = flat[half:].copy()
    padded = flat.size % 2 == 1
    if padded:
        imag = np.append(imag, 0.0)
    return real, imag, padded


def _encode_chunks(real: np.ndarray, imag: np.ndarray, cfg: PrecisionConfig, workers: int) -> np.ndarray:
    if workers <= 1 or real.size < 2 * MIN_CHUNK:
        return encode_arrays(real, imag, cfg)
    bounds = np.linspace(0, real.size, workers + 1).astype(int)
    spans = [(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda span: encode_arrays(real[span[0]:span[1]], imag[span[0]:span[1]], cfg), spans))
    return np.concatenate(parts)


def quantize_tensor(t, cfg: PrecisionConfig, pack_mode: PackMode = PackMode.GROUP_PACKED,
                    workers: int = 1) -> QuantizedTensor:
    values = as_dense(t)
    real, imag, padded = split_tensor(values)
    scale = float(np.max(np.abs(values))) if values.size else 0.0

    if scale == 0.0:
        codes = np.full(real.size, zero_code(cfg), dtype=np.int64)
    else:
        codes = _encode_chunks(real / scale, imag / scale, cfg, workers)

    logger.debug("quantized %d elements at lambda=%d, w=%g", values.size, cfg.lambda_, scale)
    return QuantizedTensor(
        lambda_=cfg.lambda_,
        scale_w=scale,
        original_len=int(values.size),
        padded=padded,
        shape=tuple(int(dim) for dim in values.shape),
        codes=codes,
        pack_mode=pack_mode,
    )


def check_structure(q: QuantizedTensor) -> None:
    expected_codes = (q.original_len + 1) // 2
    if q.codes.ndim != 1 or q.codes.size != expected_codes:
        raise FormatError(f"expected {expected_codes} codes for {q.original_len} elements, got {q.codes.size}")
    if math.prod(q.shape) != q.original_len:
        raise FormatError(f"shape {q.shape} does not hold {q.original_len} elements")
    if q.padded != (q.original_len % 2 == 1):
        raise FormatError("padding flag disagrees with the element count")


def dequantize_tensor(q: QuantizedTensor) -> np.ndarray:
    check_structure(q)
    cfg = precision_config(q.lambda_)
    real, imag = decode_arrays(q.codes, cfg)
    flat = np.concatenate([real * q.scale_w, imag * q.scale_w])[: q.original_len]
    return flat.reshape(q.shape)
