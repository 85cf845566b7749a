"""Adam with compressed moments, plus the full-precision and SGD baselines.

Moments go through a ``MomentCodec`` between steps: the identity codec keeps
them dense, ``PiQuantCodec`` stores them as rotation codes and
``LinearQuantCodec`` as uniform k-bit codes. Parameters and gradients always
stay full precision.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from pi_quant.containers import PathLike, atomic_write_bytes, read_dense, read_quantized, write_dense, write_quantized
from pi_quant.errors import ConfigurationError, FormatError, InputError
from pi_quant.linear_quant import linear_dequantize, linear_quantize
from pi_quant.models import (
    AdamConfig,
    AdamState,
    OptimizerKind,
    PackMode,
    QuantKind,
    QuantizedTensor,
    StateManifest,
)
from pi_quant.rotation_codec import err_max, precision_config
from pi_quant.tensor_quant import dequantize_tensor, quantize_tensor

logger = logging.getLogger(__name__)

STATE_SCHEMA = "pi_quant.optimizer_state/2"
MANIFEST_NAME = "manifest.json"


class MomentCodec:
    """Storage form of the Adam moments between steps.

    ``encode``/``decode`` carry the first moment; the second moment goes through
    ``encode_second``/``decode_second``, which never restores a negative value.
    """

    def encode(self, t: np.ndarray) -> Any:
        raise NotImplementedError

    def decode(self, state: Any) -> np.ndarray:
        raise NotImplementedError

    def encode_second(self, v: np.ndarray) -> Any:
        return self.encode(v)

    def decode_second(self, state: Any) -> np.ndarray:
        return np.maximum(self.decode(state), 0.0)


class IdentityCodec(MomentCodec):
    def encode(self, t: np.ndarray) -> np.ndarray:
        return np.array(t, dtype=np.float64)

    def decode(self, state: Any) -> np.ndarray:
        return np.array(state, dtype=np.float64)


class PiQuantCodec(MomentCodec):
    """Rotation-code storage.

    Decoding rescales so the largest restored magnitude equals the stored scale.
    The second moment is stored as its square root; restored roots are floored
    at ``min(err_max, 1) * scale`` before squaring, so no coordinate whose
    variance decodes to zero is divided by epsilon alone.
    """

    def __init__(self, lam: int, pack_mode: PackMode = PackMode.GROUP_PACKED, workers: int = 1):
        self.cfg = precision_config(lam)
        self.pack_mode = pack_mode
        self.workers = workers
        self.root_floor = min(err_max(self.cfg), 1.0)

    def encode(self, t: np.ndarray) -> QuantizedTensor:
        return quantize_tensor(t, self.cfg, self.pack_mode, self.workers)

    def decode(self, state: QuantizedTensor) -> np.ndarray:
        if state.lambda_ != self.cfg.lambda_:
            raise FormatError(f"moment stored at lambda={state.lambda_}, codec expects {self.cfg.lambda_}")
        restored = dequantize_tensor(state)
        peak = float(np.max(np.abs(restored))) if restored.size else 0.0
        if peak > 0.0:
            restored = restored * (state.scale_w / peak)
        return restored

    def encode_second(self, v: np.ndarray) -> QuantizedTensor:
        return self.encode(np.sqrt(np.maximum(v, 0.0)))

    def decode_second(self, state: QuantizedTensor) -> np.ndarray:
        root = np.maximum(self.decode(state), self.root_floor * state.scale_w)
        return root * root


class LinearQuantCodec(MomentCodec):
    def __init__(self, bits: int):
        self.bits = bits

    def encode(self, t: np.ndarray):
        return linear_quantize(t, self.bits)

    def decode(self, state) -> np.ndarray:
        return linear_dequantize(state)


def codec_for(cfg: AdamConfig, workers: int = 1) -> MomentCodec:
    if cfg.quant_mode == QuantKind.PI_QUANT:
        return PiQuantCodec(cfg.lambda_, workers=workers)
    if cfg.quant_mode == QuantKind.LINEAR_QUANT:
        return LinearQuantCodec(cfg.bits)
    return IdentityCodec()


def _check_step_inputs(params, grads) -> tuple[np.ndarray, np.ndarray]:
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape:
        raise InputError(f"gradient shape {grads.shape} does not match parameter shape {params.shape}")
    if not np.all(np.isfinite(grads)):
        raise InputError("gradient contains NaN or Inf")
    return params, grads


def init_adam_state(params, codec: Optional[MomentCodec] = None) -> AdamState:
    """Zero moments (quantized when a codec is given) and t = 0."""
    codec = codec or IdentityCodec()
    zeros = np.zeros_like(np.asarray(params, dtype=np.float64))
    return AdamState(m_state=codec.encode(zeros), v_state=codec.encode_second(zeros), t=0)


def _adam_arithmetic(params: np.ndarray, grads: np.ndarray, m: np.ndarray, v: np.ndarray, t: int,
                     cfg: AdamConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grads
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grads * grads
    m_hat = m / (1.0 - cfg.beta1 ** t)
    v_hat = v / (1.0 - cfg.beta2 ** t)
    params = params - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    return params, m, v


def _check_moment_shape(moment: np.ndarray, params: np.ndarray) -> None:
    if moment.shape != params.shape:
        raise InputError(f"state shape {moment.shape} does not match parameter shape {params.shape}")


def adam_step(params, grads, state: AdamState, cfg: AdamConfig) -> tuple[np.ndarray, AdamState]:
    params, grads = _check_step_inputs(params, grads)
    m = np.asarray(state.m_state, dtype=np.float64)
    v = np.asarray(state.v_state, dtype=np.float64)
    _check_moment_shape(m, params)
    _check_moment_shape(v, params)
    t = state.t + 1
    params, m, v = _adam_arithmetic(params, grads, m, v, t, cfg)
    return params, AdamState(m_state=m, v_state=v, t=t)


def restore_moments(state: AdamState, codec: MomentCodec) -> tuple[np.ndarray, np.ndarray]:
    m = codec.decode(state.m_state)
    v = codec.decode_second(state.v_state)
    return m, v


def quantized_adam_step(params, grads, state: AdamState, cfg: AdamConfig,
                        codec: MomentCodec) -> tuple[np.ndarray, AdamState]:
    """Restore, run the full-precision update, then re-encode the biased moments."""
    params, grads = _check_step_inputs(params, grads)
    m, v = restore_moments(state, codec)
    _check_moment_shape(m, params)
    _check_moment_shape(v, params)
    t = state.t + 1
    params, m, v = _adam_arithmetic(params, grads, m, v, t, cfg)
    return params, AdamState(m_state=codec.encode(m), v_state=codec.encode_second(v), t=t)


def pi_adam_step(params, grads, state: AdamState, cfg: AdamConfig,
                 codec: Optional[MomentCodec] = None) -> tuple[np.ndarray, AdamState]:
    return quantized_adam_step(params, grads, state, cfg, codec or PiQuantCodec(cfg.lambda_))


def sgd_rate(lr: float) -> float:
    if not np.isfinite(lr) or lr < 0:
        raise ConfigurationError(f"learning rate must be finite and >= 0, got {lr}")
    return float(lr)


def sgd_step(params, grads, lr: float) -> np.ndarray:
    lr = sgd_rate(lr)
    params, grads = _check_step_inputs(params, grads)
    return params - lr * grads


class Optimizer:
    """Steps a list of parameter tensors, one state per tensor."""

    def __init__(self, kind: OptimizerKind, config: AdamConfig, workers: int = 1,
                 learning_rate: Optional[float] = None):
        self.kind = OptimizerKind(kind)
        self.config = config
        self.learning_rate = config.learning_rate if learning_rate is None else learning_rate
        self.workers = workers
        self.codec = codec_for(config, workers) if self.kind != OptimizerKind.SGD else None
        self.states: list[AdamState] = []

    @classmethod
    def create(cls, name: str, learning_rate: float, lam: int = 2, bits: int = 8,
               workers: int = 1) -> "Optimizer":
        try:
            kind = OptimizerKind(name)
        except ValueError:
            names = ", ".join(k.value for k in OptimizerKind)
            raise ConfigurationError(f"unknown optimizer {name!r}, expected one of: {names}") from None
        quant_mode = {
            OptimizerKind.PI_ADAM: QuantKind.PI_QUANT,
            OptimizerKind.LINEAR_ADAM: QuantKind.LINEAR_QUANT,
        }.get(kind, QuantKind.NONE)
        if kind == OptimizerKind.SGD:
            # plain SGD also accepts a zero step
            return cls(kind, AdamConfig(), workers, learning_rate=sgd_rate(learning_rate))
        try:
            config = AdamConfig(learning_rate=learning_rate, quant_mode=quant_mode, lambda_=lam, bits=bits)
        except ValidationError as exc:
            raise ConfigurationError(str(exc)) from exc
        return cls(kind, config, workers)

    @property
    def step_count(self) -> int:
        return self.states[0].t if self.states else 0

    def _step_one(self, index: int, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
        if self.kind == OptimizerKind.SGD:
            return sgd_step(params, grads, self.learning_rate)
        state = self.states[index]
        if self.kind == OptimizerKind.ADAM:
            params, state = adam_step(params, grads, state, self.config)
        else:
            params, state = quantized_adam_step(params, grads, state, self.config, self.codec)
        self.states[index] = state
        return params

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> list[np.ndarray]:
        if len(params) != len(grads):
            raise InputError(f"{len(params)} parameter tensors but {len(grads)} gradients")
        if self.kind != OptimizerKind.SGD and not self.states:
            self.states = [init_adam_state(p, self.codec) for p in params]
        if self.states and len(self.states) != len(params):
            raise InputError(f"optimizer holds {len(self.states)} states, got {len(params)} tensors")

        indices = range(len(params))
        if self.workers > 1 and len(params) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(self._step_one, indices, params, grads))
        return [self._step_one(i, p, g) for i, p, g in zip(indices, params, grads)]


def _write_moment(directory: Path, name: str, moment: Any, codec: MomentCodec) -> str:
    if isinstance(moment, QuantizedTensor):
        filename = f"{name}.piqt"
        write_quantized(directory / filename, moment)
    else:
        filename = f"{name}.pqtd"
        write_dense(directory / filename, codec.decode(moment))
    return filename


def _read_moment(path: Path, codec: MomentCodec) -> Any:
    if path.suffix == ".piqt":
        return read_quantized(path)
    return codec.encode(read_dense(path))


def save_state(directory: PathLike, optimizer: Optimizer) -> Path:
    """One container file per moment per tensor plus ``manifest.json``."""
    if optimizer.kind == OptimizerKind.SGD:
        raise ConfigurationError("sgd keeps no state to save")
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    files = []
    for index, state in enumerate(optimizer.states):
        files.append((
            _write_moment(target, f"m_{index}", state.m_state, optimizer.codec),
            _write_moment(target, f"v_{index}", state.v_state, optimizer.codec),
        ))
    manifest = StateManifest(
        format_id=STATE_SCHEMA,
        kind=optimizer.kind,
        config=optimizer.config,
        steps=[state.t for state in optimizer.states],
        moment_files=files,
    )
    atomic_write_bytes(target / MANIFEST_NAME, manifest.model_dump_json(by_alias=True, indent=2).encode())
    logger.info("saved %d optimizer states to %s", len(files), target)
    return target


def load_state(directory: PathLike, workers: int = 1) -> Optimizer:
    source = Path(directory)
    try:
        manifest = StateManifest.model_validate_json((source / MANIFEST_NAME).read_text())
    except ValidationError as exc:
        raise FormatError(f"{source / MANIFEST_NAME}: {exc}") from exc
    if manifest.format_id != STATE_SCHEMA:
        raise FormatError(f"unsupported optimizer state schema {manifest.format_id!r}")
    if len(manifest.steps) != len(manifest.moment_files):
        raise FormatError("manifest lists a different number of steps and moment files")

    optimizer = Optimizer(manifest.kind, manifest.config, workers)
    optimizer.states = [
        AdamState(
            m_state=_read_moment(source / m_name, optimizer.codec),
            v_state=_read_moment(source / v_name, optimizer.codec),
            t=t,
        )
        for t, (m_name, v_name) in zip(manifest.steps, manifest.moment_files)
    ]
    return optimizer
