"""Empirical checks of the codec: error statistics, brute-force oracle, grids,
coefficient ablation and the continuous trajectory of the rotation curve."""

import logging
import math
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from pi_quant.errors import ConfigurationError, InputError
from pi_quant.models import AblationRow, Distribution, ErrorStats, GridReport, PlanarPoint, PrecisionConfig
from pi_quant.rotation_codec import TWO_PI, decode_arrays, encode_arrays, precision_config, solve_geometry_arrays

logger = logging.getLogger(__name__)

ORACLE_MAX_LAMBDA = 2
ORACLE_CHUNK = 256
DENSITY_CODE_LIMIT = 10 ** 4
DISK_RADIUS = math.sqrt(2.0)

ABLATION_VARIANTS = ("pibar", "pibar_rational", "pibar_integer3")


def sample_points(dist: Distribution, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` points in [-1, 1]^2.

    ``gaussian`` clips N(0, 1) at the square, ``gaussian_scaled`` divides by the
    joint max the way tensor quantization does.
    """
    if n < 1:
        raise InputError(f"sample count must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    dist = Distribution(dist)
    if dist == Distribution.UNIFORM:
        x, y = rng.uniform(-1.0, 1.0, size=(2, n))
    elif dist == Distribution.GAUSSIAN:
        x, y = np.clip(rng.standard_normal(size=(2, n)), -1.0, 1.0)
    else:
        z = rng.standard_normal(size=(2, n))
        x, y = z / np.max(np.abs(z))
    return x, y


def roundtrip_arrays(x, y, cfg: PrecisionConfig, pibar: Optional[float] = None) -> tuple[np.ndarray, np.ndarray]:
    """Componentwise absolute roundtrip errors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    restored_x, restored_y = decode_arrays(encode_arrays(x, y, cfg, pibar), cfg, pibar)
    return np.abs(restored_x - x), np.abs(restored_y - y)


def decimal_step_bound(cfg: PrecisionConfig) -> float:
    return 2.0 * (1.0 + cfg.pibar) * 10.0 ** -cfg.lambda_ / math.pi


def grid_bound(cfg: PrecisionConfig) -> float:
    """Average-error bound with the angular step measured in code-grid units."""
    return 2.0 * (1.0 + cfg.pibar) * cfg.angle_unit / math.pi


def empirical_error_stats(dist: Distribution, n: int, cfg: PrecisionConfig, seed: int,
                          pibar: Optional[float] = None) -> ErrorStats:
    x, y = sample_points(dist, n, seed)
    err_x, err_y = roundtrip_arrays(x, y, cfg, pibar)
    return ErrorStats(
        lambda_=cfg.lambda_,
        distribution=dist,
        sample_count=n,
        mean_abs_err_x=float(np.mean(err_x)),
        mean_abs_err_y=float(np.mean(err_y)),
        max_abs_err=float(max(err_x.max(), err_y.max())),
        bound_decimal=decimal_step_bound(cfg),
        bound_grid=grid_bound(cfg),
    )


def check_bound(stats: ErrorStats, slack: float) -> bool:
    return stats.mean_abs_err <= stats.bound_grid * slack


def error_slope(stats: Sequence[ErrorStats]) -> float:
    """Least-squares slope of log10(mean error) against lambda."""
    if len(stats) < 2:
        raise InputError("need at least two lambdas for a slope")
    lambdas = np.array([s.lambda_ for s in stats], dtype=np.float64)
    errors = np.log10([s.mean_abs_err for s in stats])
    return float(np.polyfit(lambdas, errors, 1)[0])


@lru_cache(maxsize=ORACLE_MAX_LAMBDA)
def _all_decoded(lam: int) -> tuple[np.ndarray, np.ndarray]:
    cfg = precision_config(lam)
    return decode_arrays(np.arange(cfg.code_modulus), cfg)


def _check_oracle_lambda(cfg: PrecisionConfig) -> None:
    if cfg.lambda_ > ORACLE_MAX_LAMBDA:
        raise ConfigurationError(f"exhaustive oracle refuses lambda={cfg.lambda_} (limit {ORACLE_MAX_LAMBDA})")


def oracle_nearest_code(p: PlanarPoint, cfg: PrecisionConfig) -> tuple[int, float]:
    """Decode every code and return the one closest to ``p`` with its distance."""
    _check_oracle_lambda(cfg)
    all_x, all_y = _all_decoded(cfg.lambda_)
    distances = np.hypot(all_x - p.x, all_y - p.y)
    best = int(np.argmin(distances))
    return best, float(distances[best])


def oracle_errors(x, y, cfg: PrecisionConfig) -> np.ndarray:
    """Optimal Euclidean distance to the code set for each point."""
    _check_oracle_lambda(cfg)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    all_x, all_y = _all_decoded(cfg.lambda_)
    best = np.empty(x.size)
    for start in range(0, x.size, ORACLE_CHUNK):
        stop = start + ORACLE_CHUNK
        distances = np.hypot(x[start:stop, None] - all_x[None, :], y[start:stop, None] - all_y[None, :])
        best[start:stop] = distances.min(axis=1)
    return best


def encoder_errors(x, y, cfg: PrecisionConfig) -> np.ndarray:
    """Euclidean roundtrip error of the geometric encoder, comparable with ``oracle_errors``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    restored_x, restored_y = decode_arrays(encode_arrays(x, y, cfg), cfg)
    return np.hypot(restored_x - x, restored_y - y)


def _wrapped(angle: np.ndarray) -> np.ndarray:
    return np.abs(np.mod(angle + math.pi, TWO_PI) - math.pi)


def angular_envelope(x, y, cfg: PrecisionConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Componentwise errors and the measured angular deviation that bounds them.

    The source point is ``e^{i(alpha - beta)} + e^{i(alpha + beta)}``; each decoded
    rotation can only move by its own angular deviation, so the coordinate error
    is at most their sum.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    alpha, beta, _, _, m, g = solve_geometry_arrays(x, y, cfg)
    codes = m * cfg.digit_modulus + g
    first = g * cfg.angle_unit
    second = cfg.pibar * codes * cfg.angle_unit
    deviation = _wrapped(first - (alpha - beta)) + _wrapped(second - (alpha + beta))
    restored_x, restored_y = decode_arrays(codes, cfg)
    return np.abs(restored_x - x), np.abs(restored_y - y), deviation


def radial_error_profile(cfg: PrecisionConfig, n: int, seed: int,
                         edges: Sequence[float] = (0.0, 0.3, 0.6, 0.9, 1.2, DISK_RADIUS + 1e-12),
                         dist: Distribution = Distribution.UNIFORM) -> list[tuple[float, float, float, int]]:
    """Rows ``(r_lo, r_hi, mean_err, count)`` of Chebyshev roundtrip error by radius band."""
    x, y = sample_points(dist, n, seed)
    err_x, err_y = roundtrip_arrays(x, y, cfg)
    errors = np.maximum(err_x, err_y)
    radius = np.hypot(x, y)
    rows = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        inside = (radius >= lo) & (radius < hi)
        count = int(inside.sum())
        mean = float(errors[inside].mean()) if count else float("nan")
        rows.append((float(lo), float(hi), mean, count))
    return rows


def error_grid(cfg: PrecisionConfig, resolution: int = 64, subsamples: int = 4) -> GridReport:
    """Per-cell mean error over [-1, 1]^2 and the count of decoded codes per cell.

    Each cell is sampled at ``subsamples``^2 interior points. At lambda >= 3 the
    density layer uses every ``code_stride``-th code.
    """
    if resolution < 16:
        raise InputError(f"resolution must be >= 16, got {resolution}")
    points_per_side = resolution * subsamples
    centers = -1.0 + (np.arange(points_per_side) + 0.5) * (2.0 / points_per_side)
    grid_x, grid_y = np.meshgrid(centers, centers, indexing="ij")
    err_x, err_y = roundtrip_arrays(grid_x.ravel(), grid_y.ravel(), cfg)
    errors = np.maximum(err_x, err_y).reshape(resolution, subsamples, resolution, subsamples)
    mean_err = errors.mean(axis=(1, 3))

    stride = max(1, cfg.code_modulus // DENSITY_CODE_LIMIT)
    decoded_x, decoded_y = decode_arrays(np.arange(0, cfg.code_modulus, stride), cfg)
    density, _, _ = np.histogram2d(decoded_x, decoded_y, bins=resolution, range=[[-1.0, 1.0], [-1.0, 1.0]])
    in_domain = (np.abs(decoded_x) <= 1.0) & (np.abs(decoded_y) <= 1.0)

    logger.debug("error grid lambda=%d resolution=%d stride=%d", cfg.lambda_, resolution, stride)
    return GridReport(
        lambda_=cfg.lambda_,
        resolution=resolution,
        mean_err=mean_err,
        density=density.astype(np.int64),
        code_count_in_domain=int(in_domain.sum()),
        code_stride=stride,
    )


def ablation_coefficient(variant: str, cfg: PrecisionConfig) -> float:
    if variant == "pibar":
        return cfg.pibar
    if variant == "pibar_rational":
        return 10.0 ** -cfg.lambda_
    if variant == "pibar_integer3":
        return 3.0 + cfg.pibar
    raise ConfigurationError(f"unknown ablation variant {variant!r}")


def pibar_ablation(n: int, seed: int, lam: int = 3,
                   distributions: Sequence[Distribution] = (Distribution.GAUSSIAN, Distribution.UNIFORM),
                   ) -> list[AblationRow]:
    """Swap the irrational coefficient and compare errors on shared samples."""
    cfg = precision_config(lam)
    rows = []
    for dist in distributions:
        x, y = sample_points(dist, n, seed)
        for variant in ABLATION_VARIANTS:
            coefficient = ablation_coefficient(variant, cfg)
            err_x, err_y = roundtrip_arrays(x, y, cfg, coefficient)
            rows.append(AblationRow(
                variant=variant,
                distribution=dist,
                pibar=coefficient,
                mean_error=float(0.5 * (err_x.mean() + err_y.mean())),
                mean_sq_error=float(np.mean(err_x ** 2 + err_y ** 2)),
            ))
    return rows


def trajectory_samples(theta_max: float, n: int, cfg: PrecisionConfig) -> np.ndarray:
    """``n`` rows ``(theta, x, y)`` of the continuous curve, uniform in [0, theta_max]."""
    if n < 2:
        raise InputError(f"need at least two samples, got {n}")
    if not math.isfinite(theta_max) or theta_max <= 0:
        raise InputError(f"theta_max must be finite and positive, got {theta_max}")
    theta = np.linspace(0.0, theta_max, n)
    second = cfg.pibar * theta
    x = np.cos(theta) + np.cos(second)
    y = np.sin(theta) + np.sin(second)
    return np.column_stack([theta, x, y])


def trajectory_coverage(samples: np.ndarray, resolution: int = 64, radius: float = DISK_RADIUS) -> float:
    """Fraction of grid cells whose center lies in the disk that the curve visits."""
    edges = np.linspace(-radius, radius, resolution + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    center_x, center_y = np.meshgrid(centers, centers, indexing="ij")
    in_disk = np.hypot(center_x, center_y) <= radius

    visits, _, _ = np.histogram2d(samples[:, 1], samples[:, 2], bins=[edges, edges])
    return float(np.count_nonzero((visits > 0) & in_disk) / np.count_nonzero(in_disk))
