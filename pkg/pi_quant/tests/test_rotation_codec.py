"""Unit tests for the pair-to-angle rotation codec."""

import math
from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings, strategies as st

from pi_quant.errors import ConfigurationError, DomainError, FormatError
from pi_quant.models import PlanarPoint, RotationCode
from pi_quant.rotation_codec import (
    PI_TAIL,
    build_pibar,
    decode_arrays,
    decode_code,
    encode_arrays,
    encode_pair,
    err_max,
    frac,
    precision_config,
    roundtrip_error,
    solve_geometry,
    solve_geometry_arrays,
    solve_m,
    solve_m_residual,
    zero_code,
)

unit = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False)


def test_build_pibar_lambda4():
    """Test the four-digit coefficient carries the decimals of pi from the ninth place."""
    assert math.isclose(build_pibar(4), 1e-4 + 1e-8 * 0.35897932384626433, rel_tol=1e-15)


def test_build_pibar_lambda1():
    """Test the one-digit coefficient."""
    assert math.isclose(build_pibar(1), 0.10358979323846264, rel_tol=1e-15)


@pytest.mark.parametrize("lam", [1, 2, 3, 4])
def test_build_pibar_defining_identity(lam):
    """Test pibar matches 10^-lambda + 10^-2lambda * frac(pi * 10^8) within 4 ulps."""
    step = Decimal(10) ** -lam
    exact = step + step * step * PI_TAIL
    pibar = build_pibar(lam)
    assert abs(Decimal(pibar) - exact) <= 4 * Decimal(math.ulp(pibar))
    assert 0.0 < pibar < 0.2


@pytest.mark.parametrize("lam", [0, 5, -1, True, 2.0])
def test_build_pibar_rejects_bad_lambda(lam):
    """Test lambda outside 1..4 or not an integer is a configuration error."""
    with pytest.raises(ConfigurationError):
        build_pibar(lam)


def test_precision_config_derived_fields(cfg):
    """Test the moduli and angle unit agree."""
    assert cfg.code_modulus == cfg.digit_modulus ** 2
    assert math.isclose(cfg.angle_unit * cfg.digit_modulus, 2 * math.pi, rel_tol=1e-15)
    assert cfg.pibar == build_pibar(cfg.lambda_)


def test_precision_config_cached():
    """Test configs are shared per lambda."""
    assert precision_config(3) is precision_config(3)


def test_solve_geometry_origin(cfg):
    """Test the origin uses alpha = 0 and beta = pi/2."""
    solution = solve_geometry(PlanarPoint(x=0.0, y=0.0), cfg)
    assert solution.alpha == 0.0
    assert solution.beta == pytest.approx(math.pi / 2, abs=1e-15)


def test_solve_geometry_one_one():
    """Test (1, 1) gives alpha = beta = pi/4, delta = 0 and omega = 1/4."""
    cfg = precision_config(1)
    solution = solve_geometry(PlanarPoint(x=1.0, y=1.0), cfg)
    assert solution.alpha == pytest.approx(math.pi / 4, abs=1e-12)
    assert solution.beta == pytest.approx(math.pi / 4, abs=1e-12)
    assert solution.delta <= 1e-12
    assert solution.omega == pytest.approx(0.25, abs=1e-12)
    assert (solution.m, solution.g) == (2, 0)


def test_solve_geometry_negative_half_plane():
    """Test alpha is quadrant aware."""
    solution = solve_geometry(PlanarPoint(x=-1.0, y=-0.5), precision_config(2))
    assert solution.alpha == pytest.approx(math.atan2(-0.5, -1.0))
    assert 0.0 <= solution.delta < 2 * math.pi


def test_solve_geometry_negative_pi_normalized():
    """Test alpha = -pi is reported as pi."""
    solution = solve_geometry(PlanarPoint(x=-1.0, y=-0.0), precision_config(2))
    assert solution.alpha == math.pi


@pytest.mark.parametrize("x, y", [(2.0, 1.0), (1.5, 1.5), (float("nan"), 0.0), (0.0, float("inf"))])
def test_solve_geometry_domain_errors(x, y):
    """Test points outside the radius-2 disk or non-finite points are rejected."""
    with pytest.raises(DomainError):
        solve_geometry(PlanarPoint(x=x, y=y), precision_config(2))


def test_solve_m_worked_example():
    """Test the four-digit worked example: m = 9752."""
    assert solve_m(0.97525751858, precision_config(4)) == 9752


def test_solve_m_residual_worked_example():
    """Test the four-digit worked example residual 0.000022510916."""
    residual = solve_m_residual(9752, 0.97525751858, precision_config(4))
    assert residual == pytest.approx(0.000022510916, abs=1e-9)


def test_solve_m_residual_zero():
    """Test m = 0 and omega = 0 leave no residual."""
    assert solve_m_residual(0, 0.0, precision_config(3)) == 0.0


def test_solve_m_residual_lambda1():
    """Test the residual for m = 2, frac(omega) = 0.25."""
    expected = abs(2 * build_pibar(1) - 0.25)
    assert solve_m_residual(2, 0.25, precision_config(1)) == pytest.approx(expected, abs=1e-15)
    assert expected == pytest.approx(0.042820413523, abs=1e-11)


def test_solve_m_residual_is_folded():
    """Test residuals fold onto [0, 0.5]."""
    assert solve_m_residual(0, 0.9, precision_config(1)) == pytest.approx(0.1)


def test_solve_m_residual_errors():
    """Test out-of-range m and non-finite omega are domain errors."""
    cfg = precision_config(1)
    with pytest.raises(DomainError):
        solve_m_residual(10, 0.1, cfg)
    with pytest.raises(DomainError):
        solve_m_residual(1, float("nan"), cfg)


def test_encode_one_one_lambda1():
    """Test (1, 1) encodes to code 20 at lambda = 1."""
    assert encode_pair(PlanarPoint(x=1.0, y=1.0), precision_config(1)).theta_tilde == 20


def test_decode_code_zero():
    """Test code 0 decodes to (2, 0)."""
    point = decode_code(RotationCode(theta_tilde=0), precision_config(3))
    assert (point.x, point.y) == (2.0, 0.0)


def test_decode_code_twenty():
    """Test code 20 at lambda = 1 evaluates both rotations at 4 pi."""
    pibar = build_pibar(1)
    point = decode_code(RotationCode(theta_tilde=20), precision_config(1))
    assert point.x == pytest.approx(1.0 + math.cos(pibar * 4 * math.pi), abs=1e-12)
    assert point.y == pytest.approx(math.sin(pibar * 4 * math.pi), abs=1e-12)


def test_decode_last_code_radius_identity(cfg):
    """Test the largest code satisfies x^2 + y^2 = 2 + 2 cos((1 - pibar) theta)."""
    code = cfg.code_modulus - 1
    point = decode_code(RotationCode(theta_tilde=code), cfg)
    theta = code * cfg.angle_unit
    expected = 2.0 + 2.0 * math.cos((1.0 - cfg.pibar) * theta)
    assert point.x ** 2 + point.y ** 2 == pytest.approx(expected, abs=1e-8)


def test_decode_code_out_of_range():
    """Test codes past 10^(2 lambda) are format errors."""
    with pytest.raises(FormatError):
        decode_code(RotationCode(theta_tilde=100), precision_config(1))


def test_decode_range_all_codes():
    """Test every code at lambda <= 2 decodes inside the radius-2 disk."""
    for lam in (1, 2):
        cfg = precision_config(lam)
        x, y = decode_arrays(np.arange(cfg.code_modulus), cfg)
        assert np.all(x * x + y * y <= 4.0 + 1e-12)


@hyp_settings(max_examples=200, deadline=None)
@given(x=unit, y=unit, lam=st.integers(min_value=1, max_value=4))
def test_digit_layout(x, y, lam):
    """Test the code is m * 10^lambda + g."""
    cfg = precision_config(lam)
    point = PlanarPoint(x=x, y=y)
    solution = solve_geometry(point, cfg)
    code = encode_pair(point, cfg).theta_tilde
    assert divmod(code, cfg.digit_modulus) == (solution.m, solution.g)
    assert 0 <= code < cfg.code_modulus


@hyp_settings(max_examples=200, deadline=None)
@given(x=unit, y=unit)
def test_encode_is_deterministic(x, y):
    """Test encoding and decoding are pure."""
    cfg = precision_config(3)
    point = PlanarPoint(x=x, y=y)
    assert encode_pair(point, cfg) == encode_pair(point, cfg)
    assert decode_code(encode_pair(point, cfg), cfg) == decode_code(encode_pair(point, cfg), cfg)


def test_scalar_and_array_paths_agree(cfg, rng):
    """Test encode_pair matches the vectorised encoder."""
    x, y = rng.uniform(-1.0, 1.0, size=(2, 50))
    codes = encode_arrays(x, y, cfg)
    assert [encode_pair(PlanarPoint(x=a, y=b), cfg).theta_tilde for a, b in zip(x, y)] == codes.tolist()


def test_m_residual_bound(cfg, rng):
    """Test frac(m * pibar) stays within 10^-lambda of frac(omega) for 10^5 points."""
    x, y = rng.uniform(-1.0, 1.0, size=(2, 100_000))
    *_, omega, m, _ = solve_geometry_arrays(x, y, cfg)
    gap = np.abs(frac(m * cfg.pibar) - frac(omega))
    residual = np.minimum(gap, 1.0 - gap)
    assert np.all(residual < 10.0 ** -cfg.lambda_)


def test_pointwise_error_bound(cfg, rng):
    """Test every roundtrip stays inside the pointwise envelope."""
    x, y = rng.uniform(-1.0, 1.0, size=(2, 100_000))
    restored_x, restored_y = decode_arrays(encode_arrays(x, y, cfg), cfg)
    worst = np.maximum(np.abs(restored_x - x), np.abs(restored_y - y)).max()
    assert worst <= err_max(cfg) + 1e-12


def test_roundtrip_error_origin(cfg):
    """Test the origin roundtrips within two grid steps."""
    assert roundtrip_error(PlanarPoint(x=0.0, y=0.0), cfg) <= 2 * cfg.angle_unit * (1 + cfg.pibar)


def test_roundtrip_error_scaled_point():
    """Test (2, 0) scaled by w = 2 roundtrips within the envelope."""
    cfg = precision_config(2)
    assert roundtrip_error(PlanarPoint(x=1.0, y=0.0), cfg) <= err_max(cfg)


def test_roundtrip_of_decoded_points():
    """Test re-encoding every decodable point at lambda = 1 stays within the envelope."""
    cfg = precision_config(1)
    x, y = decode_arrays(np.arange(cfg.code_modulus), cfg)
    inside = x * x + y * y <= 4.0
    for a, b in zip(x[inside], y[inside]):
        assert roundtrip_error(PlanarPoint(x=a, y=b), cfg) <= err_max(cfg) + 1e-12


def test_zero_code_decodes_near_origin(cfg):
    """Test the canonical zero code lands close to the origin."""
    point = decode_code(RotationCode(theta_tilde=zero_code(cfg)), cfg)
    assert math.hypot(point.x, point.y) <= err_max(cfg)


def test_rational_coefficient_roundtrip():
    """Test a coefficient override used on both sides still roundtrips within the envelope."""
    cfg = precision_config(3)
    x, y = np.array([0.3]), np.array([-0.4])
    restored = decode_arrays(encode_arrays(x, y, cfg, pibar=1e-3), cfg, pibar=1e-3)
    assert abs(restored[0][0] - 0.3) <= err_max(cfg) + 1e-12
