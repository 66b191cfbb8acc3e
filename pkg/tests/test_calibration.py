"""Pixel-to-metre calibration: free-fall fits, stature and object scales."""

import numpy as np
import pytest

from kinecap import body25
from kinecap.calibration import (GRAVITY_MPS2, GravityFit, PtmScale,
                                 apply_scale, fit_free_fall, ptm_from_gravity,
                                 ptm_from_height, ptm_from_object)
from kinecap.errors import CalibrationError
from kinecap.kinemetrics import jump_height
from kinecap.preprocess import Signal

from conftest import flight_trace, standing_series


# ---------------------------------------------------------------------------
# gravity calibration
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("fps", [30.0, 100.0])
def test_gravity_fit_recovers_scale_noiseless(fps):
    ptm = 0.002
    trace = flight_trace(fps, ptm)
    scale = ptm_from_gravity(trace, fps, mode="fit")
    assert scale.method == "gravity"
    assert abs(scale.metres_per_pixel - ptm) / ptm < 1e-6


@pytest.mark.parametrize("fps", [30.0, 100.0])
def test_gravity_ratio_mode_recovers_scale_noiseless(fps):
    ptm = 0.002
    trace = flight_trace(fps, ptm)
    scale = ptm_from_gravity(trace, fps, mode="ratio")
    assert abs(scale.metres_per_pixel - ptm) / ptm < 0.005


def test_gravity_ratio_matches_its_own_arithmetic():
    trace = flight_trace(30.0, 0.002)
    fit = fit_free_fall(trace, 30.0)
    apex, end = fit.apex_index, fit.fall_window[1]
    t = (end - apex) / 30.0
    fall_px = trace[apex] - trace[end]
    expected = (GRAVITY_MPS2 / 2.0) * t * t / fall_px
    scale = ptm_from_gravity(trace, 30.0, mode="ratio")
    assert scale.metres_per_pixel == pytest.approx(expected, rel=1e-12)


def test_gravity_fit_scales_inversely_with_pixel_density():
    # Halving metres-per-pixel doubles the pixel parabola; the fitted
    # scale must track exactly since the estimator is scale-equivariant.
    base = ptm_from_gravity(flight_trace(30.0, 0.002), 30.0).metres_per_pixel
    for k in (0.5, 2.0, 3.7):
        scaled = ptm_from_gravity(flight_trace(30.0, 0.002 * k),
                                  30.0).metres_per_pixel
        assert abs(scaled / base - k) / k < 1e-9


def test_gravity_fit_under_pixel_noise():
    ptm = 0.002
    for seed in range(10):
        trace = flight_trace(30.0, ptm, sigma_px=1.0, seed=seed)
        scale = ptm_from_gravity(trace, 30.0, mode="fit")
        assert abs(scale.metres_per_pixel - ptm) / ptm < 0.05


def test_gravity_fit_diagnostics_are_consistent():
    fit = fit_free_fall(flight_trace(30.0, 0.002), 30.0)
    start, end = fit.fall_window
    assert 0 <= start < end
    assert fit.n_frames == end - start + 1
    assert fit.quadratic_coeff > 0
    assert fit.residual is not None and fit.residual < 0.1
    # apex of the trace is inside the rest-to-landing span
    assert fit.apex_index <= end


def test_gravity_rejects_short_signal():
    with pytest.raises(CalibrationError, match="too short"):
        fit_free_fall(np.zeros(5), 30.0)


def test_gravity_rejects_monotone_rise():
    with pytest.raises(CalibrationError, match="no descent"):
        fit_free_fall(np.linspace(0.0, 100.0, 60), 30.0)


def test_gravity_rejects_flat_signal():
    with pytest.raises(CalibrationError):
        fit_free_fall(np.full(90, 550.0), 30.0)


def test_gravity_rejects_noise_only_signal():
    rng = np.random.default_rng(0)
    with pytest.raises(CalibrationError):
        fit_free_fall(rng.normal(550.0, 80.0, 90), 30.0)


def test_gravity_mode_validation():
    with pytest.raises(ValueError, match="mode"):
        ptm_from_gravity(flight_trace(30.0, 0.002), 30.0, mode="guess")


# ---------------------------------------------------------------------------
# height calibration
# ---------------------------------------------------------------------------

def test_height_scale_from_standing_pose():
    # 675 px shoulder-to-toe span -> 900 px stature; 1.80 m / 900 px.
    scale = ptm_from_height(standing_series(), height_m=1.80)
    assert scale.method == "height"
    assert scale.metres_per_pixel == pytest.approx(0.002, abs=1e-12)


def test_height_scale_ignores_frames_after_rest_phase():
    series = standing_series(n_frames=60)
    series.data[20:, body25.R_SHOULDER, 1] = 10.0
    series.data[20:, body25.L_SHOULDER, 1] = 10.0
    scale = ptm_from_height(series, height_m=1.80)
    assert scale.metres_per_pixel == pytest.approx(0.002, abs=1e-12)


def test_height_scale_works_with_one_confident_side():
    series = standing_series()
    series.data[:, body25.L_SHOULDER, 2] = 0.1
    scale = ptm_from_height(series, height_m=1.80)
    assert scale.metres_per_pixel == pytest.approx(0.002, abs=1e-12)


def test_height_scale_requires_positive_height():
    with pytest.raises(CalibrationError, match="height"):
        ptm_from_height(standing_series(), height_m=0.0)


def test_height_scale_requires_confident_landmarks():
    with pytest.raises(CalibrationError, match="no rest frame"):
        ptm_from_height(standing_series(confidence=0.1), height_m=1.80)


def test_height_scale_rejects_degenerate_span():
    series = standing_series()
    series.data[:, body25.R_SHOULDER, 1] = 975.0
    series.data[:, body25.L_SHOULDER, 1] = 975.0
    with pytest.raises(CalibrationError, match="degenerate"):
        ptm_from_height(series, height_m=1.80)


# ---------------------------------------------------------------------------
# object calibration
# ---------------------------------------------------------------------------

def test_object_scale():
    assert ptm_from_object(450.0, 1.125).metres_per_pixel == \
        pytest.approx(0.0025, abs=1e-15)
    assert ptm_from_object(1.125, 1.125).metres_per_pixel == 1.0
    # default physical length is the calibration bar
    assert ptm_from_object(1125.0).metres_per_pixel == \
        pytest.approx(0.001, abs=1e-15)


def test_object_scale_validation():
    with pytest.raises(CalibrationError, match="pixel length"):
        ptm_from_object(0.0, 1.125)
    with pytest.raises(CalibrationError, match="physical length"):
        ptm_from_object(450.0, -1.0)


# ---------------------------------------------------------------------------
# applying a scale
# ---------------------------------------------------------------------------

def test_apply_scale_converts_units():
    sig = Signal(values=np.array([0.0, 100.0, 400.0]), fps=30.0, unit="px")
    scale = PtmScale(metres_per_pixel=0.002, method="object")
    out = apply_scale(sig, scale)
    assert out.unit == "m"
    assert out.fps == 30.0
    assert np.allclose(out.values, [0.0, 0.2, 0.8], atol=1e-15)


def test_apply_scale_rejects_non_pixel_signal():
    sig = Signal(values=np.zeros(3), fps=30.0, unit="m")
    with pytest.raises(ValueError, match="pixel signal"):
        apply_scale(sig, PtmScale(metres_per_pixel=1.0, method="object"))


def test_jump_height_is_linear_in_scale():
    ptm = 0.002
    trace = flight_trace(30.0, ptm)
    sig = Signal(values=trace, fps=30.0, unit="px")
    scale = PtmScale(metres_per_pixel=ptm, method="gravity")
    metrics = jump_height(apply_scale(sig, scale))
    rest = np.median(trace[:9])
    assert metrics.height_m == pytest.approx(
        ptm * (np.max(trace) - rest), abs=1e-12)


def test_ptm_scale_validation():
    with pytest.raises(ValueError, match="positive"):
        PtmScale(metres_per_pixel=0.0, method="gravity")
    with pytest.raises(ValueError, match="method"):
        PtmScale(metres_per_pixel=1.0, method="banana")


def test_gravity_fit_record_is_frozen():
    fit = GravityFit(apex_index=10, fall_window=(8, 14),
                     quadratic_coeff=2452.0, residual=0.01)
    assert fit.n_frames == 7
    with pytest.raises(AttributeError):
        fit.apex_index = 3
