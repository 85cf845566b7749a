"""Pair-to-angle rotation codec.

A point ``(x, y)`` with ``x^2 + y^2 <= 4`` is written as
``e^{i theta} + e^{i pibar theta}``. The encoder finds ``theta`` from the
isosceles-triangle geometry of the two unit rotations and stores it as the
integer ``m * 10^lambda + g``; the decoder evaluates the two rotations again.

The array functions are the workhorses; the scalar operations wrap them for
single pairs.
"""

import logging
import math
from decimal import Decimal
from functools import lru_cache
from typing import Optional

import numpy as np
from pydantic import ValidationError

from pi_quant.errors import ConfigurationError, DomainError, FormatError
from pi_quant.models import GeometricSolution, PlanarPoint, PrecisionConfig, RotationCode

logger = logging.getLogger(__name__)

MIN_LAMBDA = 1
MAX_LAMBDA = 4
TWO_PI = 2.0 * math.pi
RADIUS_SQ_LIMIT = 4.0

# frac(pi * 10^8): the decimals of pi from the ninth place on
PI_TAIL = Decimal("0.35897932384626433832795028841971693993751058209749")

# re-encoding an exactly decoded point must land on the same g
G_SNAP = 1e-9


def _check_lambda(lam: int) -> None:
    if isinstance(lam, bool) or not isinstance(lam, (int, np.integer)):
        raise ConfigurationError(f"lambda must be an integer, got {lam!r}")
    if not MIN_LAMBDA <= lam <= MAX_LAMBDA:
        raise ConfigurationError(f"lambda must be in [{MIN_LAMBDA}, {MAX_LAMBDA}], got {lam}")


def build_pibar(lam: int) -> float:
    """Return 10^-lambda + 10^-2lambda * frac(pi * 10^8), correctly rounded to binary64."""
    _check_lambda(lam)
    step = Decimal(10) ** -int(lam)
    return float(step + step * step * PI_TAIL)


@lru_cache(maxsize=None)
def precision_config(lam: int) -> PrecisionConfig:
    _check_lambda(lam)
    try:
        return PrecisionConfig(lambda_=int(lam), pibar=build_pibar(lam))
    except ValidationError as exc:
        raise ConfigurationError(str(exc)) from exc


def frac(values):
    """Fractional part in [0, 1), also for negative inputs."""
    return values - np.floor(values)


def err_max(cfg: PrecisionConfig) -> float:
    """Pointwise roundtrip envelope: both rotations are off by at most one grid step each."""
    return 2.0 * cfg.angle_unit * (1.0 + cfg.pibar)


def _coefficient(cfg: PrecisionConfig, pibar: Optional[float]) -> float:
    return cfg.pibar if pibar is None else float(pibar)


def solve_geometry_arrays(x, y, cfg: PrecisionConfig, pibar: Optional[float] = None):
    """Vectorised geometric solver.

    Returns ``(alpha, beta, delta, omega, m, g)`` as arrays; ``m`` and ``g`` are int64.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DomainError("codec input contains NaN or Inf")
    radius_sq = x * x + y * y
    if np.any(radius_sq > RADIUS_SQ_LIMIT):
        raise DomainError("codec input has x^2 + y^2 > 4")

    coefficient = _coefficient(cfg, pibar)
    digits = cfg.digit_modulus

    alpha = np.arctan2(y, x)
    alpha = np.where(alpha == -math.pi, math.pi, alpha)
    # any alpha works at the origin; pin it
    alpha = np.where(radius_sq == 0.0, 0.0, alpha)
    beta = np.arccos(np.sqrt(radius_sq) / 2.0)

    delta = np.mod(alpha - beta, TWO_PI)
    g = np.floor(delta / TWO_PI * digits + G_SNAP)
    wrapped = g >= digits
    delta = np.where(wrapped, 0.0, delta)
    g = np.where(wrapped, 0.0, g).astype(np.int64)

    omega = ((alpha + beta) - coefficient * delta) / TWO_PI
    m = np.minimum(np.floor(frac(omega) * digits), digits - 1).astype(np.int64)
    return alpha, beta, delta, omega, m, g


def encode_arrays(x, y, cfg: PrecisionConfig, pibar: Optional[float] = None) -> np.ndarray:
    *_, m, g = solve_geometry_arrays(x, y, cfg, pibar)
    return m * cfg.digit_modulus + g


def decode_arrays(codes, cfg: PrecisionConfig, pibar: Optional[float] = None):
    """Evaluate ``cos t + cos(pibar t), sin t + sin(pibar t)`` for ``t = code * angle_unit``."""
    codes = np.asarray(codes, dtype=np.int64)
    if codes.size and (codes.min() < 0 or codes.max() >= cfg.code_modulus):
        raise FormatError(f"rotation code outside [0, {cfg.code_modulus})")
    coefficient = _coefficient(cfg, pibar)
    theta = codes * cfg.angle_unit
    # first rotation only depends on the g digits
    first = (codes % cfg.digit_modulus) * cfg.angle_unit
    second = coefficient * theta
    return np.cos(first) + np.cos(second), np.sin(first) + np.sin(second)


def solve_geometry(p: PlanarPoint, cfg: PrecisionConfig) -> GeometricSolution:
    alpha, beta, delta, omega, m, g = solve_geometry_arrays([p.x], [p.y], cfg)
    return GeometricSolution(
        alpha=float(alpha[0]),
        beta=float(beta[0]),
        delta=float(delta[0]),
        omega=float(omega[0]),
        m=int(m[0]),
        g=int(g[0]),
    )


def solve_m(omega: float, cfg: PrecisionConfig) -> int:
    """First lambda decimals of frac(omega)."""
    if not math.isfinite(omega):
        raise DomainError("omega must be finite")
    digits = cfg.digit_modulus
    return min(int(math.floor(frac(omega) * digits)), digits - 1)


def solve_m_residual(m: int, omega: float, cfg: PrecisionConfig) -> float:
    """Distance between frac(m * pibar) and frac(omega) on the unit circle, in [0, 0.5]."""
    if not math.isfinite(omega):
        raise DomainError("omega must be finite")
    if not 0 <= m < cfg.digit_modulus:
        raise DomainError(f"m must be in [0, {cfg.digit_modulus}), got {m}")
    gap = abs(frac(m * cfg.pibar) - frac(omega))
    return float(min(gap, 1.0 - gap))


def encode_pair(p: PlanarPoint, cfg: PrecisionConfig) -> RotationCode:
    solution = solve_geometry(p, cfg)
    return RotationCode(theta_tilde=solution.m * cfg.digit_modulus + solution.g)


def decode_code(code: RotationCode, cfg: PrecisionConfig) -> PlanarPoint:
    x, y = decode_arrays([code.theta_tilde], cfg)
    return PlanarPoint(x=float(x[0]), y=float(y[0]))


def roundtrip_error(p: PlanarPoint, cfg: PrecisionConfig) -> float:
    """Chebyshev distance between ``p`` and ``decode(encode(p))``."""
    restored = decode_code(encode_pair(p, cfg), cfg)
    return max(abs(restored.x - p.x), abs(restored.y - p.y))


def zero_code(cfg: PrecisionConfig) -> int:
    return encode_pair(PlanarPoint(x=0.0, y=0.0), cfg).theta_tilde
