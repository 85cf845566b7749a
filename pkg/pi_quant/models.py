import math
from enum import Enum
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class PrecisionConfig(BaseModel):
    """Digit budget and the irrational coefficient it implies.

    Build instances with ``rotation_codec.precision_config`` so that ``pibar``
    always matches ``lambda_``.
    """

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lambda_: int = Field(alias="lambda", ge=1, le=4)
    pibar: float = Field(gt=0.0, lt=0.2)

    @property
    def digit_modulus(self) -> int:
        return 10 ** self.lambda_

    @property
    def code_modulus(self) -> int:
        return 10 ** (2 * self.lambda_)

    @property
    def angle_unit(self) -> float:
        return 2.0 * math.pi / self.digit_modulus


class PlanarPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: float
    y: float


class GeometricSolution(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float
    beta: float
    delta: float
    omega: float
    m: int
    g: int


class RotationCode(BaseModel):
    model_config = ConfigDict(frozen=True)

    theta_tilde: int = Field(ge=0)


class PackMode(str, Enum):
    BYTE_ALIGNED = "byte_aligned"
    GROUP_PACKED = "group_packed"


class QuantizedTensor(BaseModel):
    """Quantized tensor: one rotation code per element pair plus the scale."""

    model_config = ConfigDict(frozen=True, populate_by_name=True, arbitrary_types_allowed=True)

    lambda_: int = Field(alias="lambda", ge=1, le=4)
    scale_w: float = Field(ge=0.0)
    original_len: int = Field(ge=0)
    padded: bool
    shape: tuple[int, ...]
    codes: np.ndarray
    pack_mode: PackMode = PackMode.GROUP_PACKED

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, QuantizedTensor):
            return NotImplemented
        return (
            self.lambda_ == other.lambda_
            and self.scale_w == other.scale_w
            and self.original_len == other.original_len
            and self.padded == other.padded
            and self.shape == other.shape
            and self.pack_mode == other.pack_mode
            and np.array_equal(self.codes, other.codes)
        )

    __hash__ = None


class PackedCodes(BaseModel):
    model_config = ConfigDict(frozen=True)

    pack_mode: PackMode
    group_size: int = Field(ge=1)
    payload: bytes
    bit_length: int = Field(ge=0)


class QuantKind(str, Enum):
    NONE = "none"
    PI_QUANT = "pi_quant"
    LINEAR_QUANT = "linear_quant"


class AdamConfig(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    learning_rate: float = Field(default=1e-3, gt=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    epsilon: float = Field(default=1e-8, gt=0.0)
    quant_mode: QuantKind = QuantKind.NONE
    lambda_: int = Field(default=2, alias="lambda", ge=1, le=4)
    bits: int = Field(default=8, ge=2, le=16)


class AdamState(BaseModel):
    """Adam moments in whatever form the active codec stores them."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    m_state: Any
    v_state: Any
    t: int = Field(default=0, ge=0)


class LinearQuantTensor(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    bits: int = Field(ge=2, le=16)
    lo: float
    hi: float
    codes: np.ndarray
    original_len: int = Field(ge=0)
    shape: tuple[int, ...]


class Distribution(str, Enum):
    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"
    GAUSSIAN_SCALED = "gaussian_scaled"


class ErrorStats(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lambda_: int = Field(alias="lambda")
    distribution: Distribution
    sample_count: int
    mean_abs_err_x: float = Field(ge=0.0)
    mean_abs_err_y: float = Field(ge=0.0)
    max_abs_err: float = Field(ge=0.0)
    bound_decimal: float
    bound_grid: float

    @property
    def mean_abs_err(self) -> float:
        return 0.5 * (self.mean_abs_err_x + self.mean_abs_err_y)


class GridReport(BaseModel):
    """Per-cell error and code density over [-1, 1]^2, indexed ``[ix, iy]``."""

    model_config = ConfigDict(frozen=True, populate_by_name=True, arbitrary_types_allowed=True)

    lambda_: int = Field(alias="lambda")
    resolution: int = Field(ge=16)
    mean_err: np.ndarray
    density: np.ndarray
    code_count_in_domain: int
    code_stride: int = 1


class AblationRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    variant: str
    distribution: Distribution
    pibar: float
    mean_error: float
    mean_sq_error: float = 0.0


class DescentRun(BaseModel):
    model_config = ConfigDict(frozen=True)

    optimizer: str
    start: tuple[float, float]
    start_id: int = 0
    steps: int
    trajectory: list[tuple[float, float, float]]
    final_f: float
    diverged: bool = False


class ToyModel(BaseModel):
    """Fully connected tanh network; the last layer is linear."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def parameters(self) -> list[np.ndarray]:
        params = []
        for weight, bias in zip(self.weights, self.biases):
            params.extend([weight, bias])
        return params

    def with_parameters(self, params: list[np.ndarray]) -> "ToyModel":
        return ToyModel(layer_sizes=self.layer_sizes, weights=list(params[0::2]), biases=list(params[1::2]))


class TrainingRun(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    task: str
    optimizer: str
    lambda_: Optional[int] = Field(default=None, alias="lambda")
    seed: int
    losses: list[float]
    diverged: bool = False


class CliConfig(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    subcommand: str
    lambda_: int = Field(default=2, alias="lambda", ge=1, le=4)
    seed: int = Field(default=42, ge=0, lt=2 ** 64)
    input: Optional[str] = None
    output: Optional[str] = None
    format: str = Field(default="csv", pattern="^(csv|json)$")
    threads: int = Field(default=1, ge=1)


class OptimizerKind(str, Enum):
    SGD = "sgd"
    ADAM = "adam"
    PI_ADAM = "pi_adam"
    LINEAR_ADAM = "linear_adam"


class StateManifest(BaseModel):
    """Sidecar describing a saved optimizer state directory."""

    model_config = ConfigDict(populate_by_name=True)

    format_id: str = Field(alias="schema")
    kind: OptimizerKind
    config: AdamConfig
    steps: list[int]
    moment_files: list[tuple[str, str]]
