"""Jump, velocity, temporal and angular metric computations."""

import numpy as np
import pytest

from kinecap import body25
from kinecap.calibration import GRAVITY_MPS2
from kinecap.errors import QualityError
from kinecap.kinemetrics import (JumpMetrics, acute_angle_slopes_deg,
                                 acute_angle_vectors_deg, concentric_window,
                                 elevation_series, flight_contact_dropjump,
                                 flight_contact_rjt, hip_rotation_rom,
                                 joint_angle_series, jump_height,
                                 mean_angular_velocity, midhip_elevation,
                                 rjt_hop_heights, rom_from_angle_series,
                                 toe_elevation, vector_angle_deg,
                                 vector_displacement_series, velocity_metrics,
                                 wrist_elevation)
from kinecap.preprocess import Signal

from conftest import standing_series


def _metres(values, fps=30.0):
    return Signal(values=np.asarray(values, dtype=float), fps=fps, unit="m")


def _degrees(values, fps=30.0):
    return Signal(values=np.asarray(values, dtype=float), fps=fps, unit="deg")


# ---------------------------------------------------------------------------
# signal extraction
# ---------------------------------------------------------------------------

def test_toe_and_midhip_elevation_negate_image_y():
    series = standing_series()
    toes = toe_elevation(series)
    assert toes.unit == "px" and toes.fps == 30.0
    assert np.all(toes.values == -975.0)
    assert np.all(toe_elevation(series, bilateral=False,
                                side="right").values == -975.0)
    assert np.all(midhip_elevation(series).values == -600.0)


def test_elevation_skips_keypoints_without_confident_frames():
    series = standing_series()
    series.data[:, body25.L_BIG_TOE, 2] = 0.0
    series.data[:, body25.R_BIG_TOE, 1] = 900.0
    toes = toe_elevation(series)
    assert np.all(toes.values == -900.0)


def test_elevation_raises_when_no_keypoint_usable():
    series = standing_series()
    series.data[:, body25.L_BIG_TOE, 2] = 0.0
    series.data[:, body25.R_BIG_TOE, 2] = 0.0
    with pytest.raises(QualityError, match="big_toe"):
        toe_elevation(series)


def test_wrist_elevation_follows_confidence():
    series = standing_series(n_frames=3)
    series.data[:, body25.L_WRIST, 1] = 400.0
    series.data[:, body25.R_WRIST, 1] = 500.0
    series.data[1, body25.R_WRIST, 2] = 0.1
    series.data[2, body25.L_WRIST, 2] = 0.1
    wrists = wrist_elevation(series)
    assert wrists.values[0] == -450.0  # both confident: average
    assert wrists.values[1] == -400.0  # right dropped out: follow left
    assert wrists.values[2] == -500.0


def test_wrist_elevation_requires_some_confidence():
    series = standing_series()
    series.data[:, body25.L_WRIST, 2] = 0.0
    series.data[:, body25.R_WRIST, 2] = 0.0
    with pytest.raises(QualityError, match="wrist"):
        wrist_elevation(series)


# ---------------------------------------------------------------------------
# jump height
# ---------------------------------------------------------------------------

def test_jump_height_exact():
    values = np.zeros(30)
    values[15] = 0.3
    assert jump_height(_metres(values)).height_m == pytest.approx(
        0.3, abs=1e-15)


def test_jump_height_translation_and_scale():
    values = np.zeros(30)
    values[15] = 0.3
    shifted = jump_height(_metres(values + 5.0)).height_m
    doubled = jump_height(_metres(values * 2.0)).height_m
    assert shifted == pytest.approx(0.3, abs=1e-12)
    assert doubled == pytest.approx(0.6, abs=1e-12)


def test_jump_height_uses_median_rest_level():
    values = np.zeros(30)
    values[0] = -0.5  # one dropped rest frame must not move the median
    values[15] = 0.3
    assert jump_height(_metres(values)).height_m == pytest.approx(
        0.3, abs=1e-12)


def test_jump_height_rejects_rest_only_signal():
    with pytest.raises(QualityError, match="rest phase"):
        jump_height(_metres(np.zeros(5)))


def test_jump_height_rejects_peak_in_rest_window():
    values = np.zeros(30)
    values[2] = 1.0
    with pytest.raises(QualityError, match="rest window"):
        jump_height(_metres(values))


def test_jump_height_requires_metres():
    with pytest.raises(ValueError, match="metres"):
        jump_height(Signal(values=np.zeros(30), fps=30.0, unit="px"))


# ---------------------------------------------------------------------------
# lift velocity
# ---------------------------------------------------------------------------

def test_concentric_window_v_shape():
    values = np.array([3.0, 2.0, 1.0, 0.0, 1.0, 2.0, 3.0, 4.0])
    assert concentric_window(_metres(values)) == (3, 7)


def test_concentric_window_monotone_fall_raises():
    with pytest.raises(QualityError, match="no rise"):
        concentric_window(_metres(np.linspace(5.0, 1.0, 20)))


def test_velocity_constant_slope_is_exact():
    values = 0.05 * np.arange(11)
    vm = velocity_metrics(_metres(values, fps=100.0), (0, 10))
    assert vm.peak_mps == pytest.approx(5.0, abs=1e-12)
    assert vm.mean_mps == pytest.approx(5.0, abs=1e-12)
    assert vm.window == (0, 10)


def test_velocity_mean_telescopes_to_net_displacement():
    # Trapezoidal mean of central differences reduces exactly to
    # (y[end] - y[start]) * fps / (end - start): amplitude over duration.
    amplitude, duration, fps = 0.6, 1.0, 100.0
    t = np.arange(int(duration * fps) + 1) / fps
    y = amplitude * 0.5 * (1.0 - np.cos(np.pi * t / duration))
    vm = velocity_metrics(_metres(y, fps=fps), (0, len(y) - 1))
    assert vm.mean_mps == pytest.approx(amplitude / duration, abs=1e-9)
    analytic_peak = amplitude * np.pi / (2.0 * duration)
    assert abs(vm.peak_mps - analytic_peak) / analytic_peak < 0.01
    assert vm.peak_mps >= vm.mean_mps


def test_velocity_window_validation():
    sig = _metres(np.arange(20.0))
    with pytest.raises(ValueError, match="outside signal bounds"):
        velocity_metrics(sig, (5, 2))
    with pytest.raises(ValueError, match="outside signal bounds"):
        velocity_metrics(sig, (0, 200))
    with pytest.raises(ValueError, match="at least 3"):
        velocity_metrics(sig, (0, 1))
    with pytest.raises(ValueError, match="metres"):
        velocity_metrics(Signal(values=np.arange(20.0), fps=30.0,
                                unit="px"), (0, 19))


# ---------------------------------------------------------------------------
# repeated jumps and drop jumps
# ---------------------------------------------------------------------------

def _hop_train(heights, fps=30.0):
    values = np.zeros(60)
    for (start, end), h in zip(((10, 15), (25, 30), (40, 45)), heights):
        values[start:end + 1] = h
    return _metres(values, fps=fps)


def test_rjt_flight_and_contact_times():
    records = flight_contact_rjt(_hop_train([0.3, 0.35, 0.4]))
    assert len(records) == 2
    for tm in records:
        assert tm.flight_s == pytest.approx(6.0 / 30.0, abs=1e-12)
        assert tm.contact_s == pytest.approx(9.0 / 30.0, abs=1e-12)


def test_rjt_times_fit_inside_recording():
    sig = _hop_train([0.3, 0.35, 0.4])
    records = flight_contact_rjt(sig)
    total = sum(tm.flight_s + tm.contact_s for tm in records)
    assert total <= sig.duration_s


def test_rjt_hop_heights_per_run():
    heights = rjt_hop_heights(_hop_train([0.3, 0.35, 0.4]))
    assert heights == pytest.approx([0.3, 0.35, 0.4], abs=1e-12)


def test_rjt_requires_two_airborne_phases():
    with pytest.raises(QualityError, match="at least 2 airborne"):
        flight_contact_rjt(_metres(np.zeros(60)))
    one = np.zeros(60)
    one[10:16] = 0.3
    with pytest.raises(QualityError, match="found 1"):
        flight_contact_rjt(_metres(one))
    with pytest.raises(QualityError, match="no airborne"):
        rjt_hop_heights(_metres(np.zeros(60)))


def _dropjump_trace(fps=30.0):
    # Platform drop 0.2 s, ground contact 0.3 s, flight 0.5 s. Event
    # frames at this rate: touchdown 36, push-off 45, landing 60.
    g2 = GRAVITY_MPS2 / 2.0
    drop_s, contact_s, flight_s = 0.2, 0.3, 0.5
    h_platform = g2 * drop_s ** 2
    v_up = GRAVITY_MPS2 * flight_s / 2.0
    t = np.arange(int(round(2.5 * fps)) + 1) / fps
    t_down, t_up = 1.0 + drop_s, 1.0 + drop_s + contact_s
    z = np.select(
        [t < 1.0,
         t < t_down,
         t <= t_up,
         t < t_up + flight_s],
        [h_platform,
         h_platform - g2 * (t - 1.0) ** 2,
         0.0,
         v_up * (t - t_up) - g2 * (t - t_up) ** 2],
        default=0.0,
    )
    return _metres(z, fps=fps)


def test_dropjump_times_within_one_frame():
    tm = flight_contact_dropjump(_dropjump_trace())
    frame = 1.0 / 30.0
    assert abs(tm.contact_s - 0.3) <= frame + 1e-9
    assert abs(tm.flight_s - 0.5) <= frame + 1e-9


def test_dropjump_truncated_recording_raises():
    full = _dropjump_trace()
    cut = Signal(values=full.values[:50], fps=full.fps, unit="m")
    with pytest.raises(QualityError, match="toe-speed peaks"):
        flight_contact_dropjump(cut)


def test_dropjump_static_trace_raises():
    with pytest.raises(QualityError, match="never moves"):
        flight_contact_dropjump(_metres(np.full(60, 0.5)))


# ---------------------------------------------------------------------------
# planar angles
# ---------------------------------------------------------------------------

def test_acute_angle_exact_values():
    assert acute_angle_slopes_deg((1, 0), (1, 1)) == pytest.approx(
        45.0, abs=1e-9)
    assert acute_angle_slopes_deg((1, 0), (0, 1)) == pytest.approx(
        90.0, abs=1e-9)
    assert acute_angle_slopes_deg((1, 1), (-1, 1)) == pytest.approx(
        90.0, abs=1e-9)
    assert acute_angle_vectors_deg((1, 0), (2, 0)) == 0.0
    assert acute_angle_vectors_deg((1, 0), (0, 3)) == pytest.approx(
        90.0, abs=1e-9)


def test_acute_angle_is_sign_insensitive():
    u, v = (3.0, 1.0), (1.0, 2.0)
    base = acute_angle_vectors_deg(u, v)
    for uu, vv in (((-3, -1), v), (u, (-1, -2)), ((-3, -1), (-1, -2))):
        assert acute_angle_vectors_deg(uu, vv) == pytest.approx(
            base, abs=1e-12)
        assert acute_angle_slopes_deg(uu, vv) == pytest.approx(
            base, abs=1e-9)


def test_acute_angle_forms_agree_on_random_directions():
    rng = np.random.default_rng(11)
    for _ in range(500):
        u = rng.uniform(-5, 5, 2)
        v = rng.uniform(-5, 5, 2)
        if min(np.linalg.norm(u), np.linalg.norm(v)) < 1e-3:
            continue
        a = acute_angle_slopes_deg(u, v)
        b = acute_angle_vectors_deg(u, v)
        assert abs(a - b) < 1e-9
        assert 0.0 <= a <= 90.0 + 1e-12


def test_acute_angle_zero_vector_raises():
    with pytest.raises(ValueError, match="zero-length"):
        acute_angle_slopes_deg((0, 0), (1, 0))
    with pytest.raises(ValueError, match="zero-length"):
        acute_angle_vectors_deg((0, 0), (0, 0))


def test_vector_angle_full_range():
    assert vector_angle_deg((1, 0), (-1, 0)) == pytest.approx(180.0)
    assert vector_angle_deg((1, 0), (1, 0)) == 0.0
    assert vector_angle_deg((1, 0, 0), (0, 1, 0)) == pytest.approx(90.0)
    with pytest.raises(ValueError, match="zero-length"):
        vector_angle_deg((0, 0), (1, 0))


# ---------------------------------------------------------------------------
# hip rotation
# ---------------------------------------------------------------------------

def _rotation_trial(internal_deg=30.0, external_deg=20.0, mirror=False):
    n = 30
    knee = np.tile([360.0, 500.0], (n, 1))
    ankle = np.tile([360.0, 600.0], (n, 1))
    for t in range(10, 20):  # internal: right ankle sweeps toward -x
        rad = np.radians(internal_deg)
        ankle[t] = knee[t] + 100.0 * np.array([-np.sin(rad), np.cos(rad)])
    for t in range(20, 30):
        rad = np.radians(external_deg)
        ankle[t] = knee[t] + 100.0 * np.array([np.sin(rad), np.cos(rad)])
    if mirror:
        knee[:, 0] = 720.0 - knee[:, 0]
        ankle[:, 0] = 720.0 - ankle[:, 0]
    return knee, ankle


def test_hip_rotation_rom_sums_internal_and_external():
    knee, ankle = _rotation_trial()
    am = hip_rotation_rom(knee, ankle, (0, 10), dominant_side="right")
    assert am.internal_deg == pytest.approx(30.0, abs=1e-9)
    assert am.external_deg == pytest.approx(20.0, abs=1e-9)
    assert am.rom_deg == pytest.approx(50.0, abs=1e-9)


def test_hip_rotation_mirror_symmetry():
    knee, ankle = _rotation_trial()
    mk, ma = _rotation_trial(mirror=True)
    right = hip_rotation_rom(knee, ankle, (0, 10), dominant_side="right")
    left = hip_rotation_rom(mk, ma, (0, 10), dominant_side="left")
    assert left.internal_deg == pytest.approx(right.internal_deg, abs=1e-9)
    assert left.external_deg == pytest.approx(right.external_deg, abs=1e-9)


def test_hip_rotation_skips_degenerate_frames():
    knee, ankle = _rotation_trial()
    ankle[15] = knee[15]  # tracker collapse on one internal frame
    am = hip_rotation_rom(knee, ankle, (0, 10), dominant_side="right")
    assert am.rom_deg == pytest.approx(50.0, abs=1e-9)


def test_hip_rotation_validation():
    knee, ankle = _rotation_trial()
    with pytest.raises(QualityError, match="rest window"):
        hip_rotation_rom(knee, ankle, (5, 5))
    with pytest.raises(QualityError, match="degenerate"):
        hip_rotation_rom(knee, knee.copy(), (0, 10))
    with pytest.raises(ValueError, match="dominant_side"):
        hip_rotation_rom(knee, ankle, (0, 10), dominant_side="up")
    with pytest.raises(ValueError, match="n, 2"):
        hip_rotation_rom(knee[:, :1], ankle[:, :1], (0, 10))


# ---------------------------------------------------------------------------
# joint angle series
# ---------------------------------------------------------------------------

def test_joint_angle_series_exact_angles():
    p = np.tile([0.0, 0.0], (3, 1))
    j = np.tile([0.0, 1.0], (3, 1))
    d = np.array([[0.0, 2.0], [1.0, 1.0], [0.0, 0.0]])
    sig = joint_angle_series(p, j, d, fps=30.0)
    assert sig.unit == "deg"
    assert sig.values[0] == pytest.approx(180.0, abs=1e-9)
    assert sig.values[1] == pytest.approx(90.0, abs=1e-9)
    assert sig.values[2] == pytest.approx(0.0, abs=1e-9)


def test_joint_angle_series_interpolates_collapsed_frames():
    p = np.tile([0.0, 0.0], (3, 1))
    j = np.tile([0.0, 1.0], (3, 1))
    d = np.array([[0.0, 2.0], [0.0, 1.0], [1.0, 1.0]])  # middle frame: d == j
    sig = joint_angle_series(p, j, d, fps=30.0)
    assert sig.values[1] == pytest.approx(135.0, abs=1e-9)


def test_joint_angle_series_all_degenerate_raises():
    p = np.zeros((4, 2))
    with pytest.raises(QualityError, match="well-defined"):
        joint_angle_series(p, p, p, fps=30.0)
    with pytest.raises(ValueError, match="shape"):
        joint_angle_series(p, p[:2], p, fps=30.0)


def test_vector_displacement_series():
    n = 20
    p = np.zeros((n, 2))
    d = np.tile([0.0, 100.0], (n, 1))
    d[10:] = (100.0 / np.sqrt(2.0), 100.0 / np.sqrt(2.0))
    sig = vector_displacement_series(p, d, (0, 10), fps=30.0)
    assert np.allclose(sig.values[:10], 0.0, atol=1e-9)
    assert np.allclose(sig.values[10:], 45.0, atol=1e-9)


def test_vector_displacement_holds_degenerate_frames():
    n = 20
    p = np.zeros((n, 2))
    d = np.tile([0.0, 100.0], (n, 1))
    d[10:] = (100.0, 0.0)
    d[12] = (0.0, 0.0)  # collapsed frame holds the previous angle
    sig = vector_displacement_series(p, d, (0, 10), fps=30.0)
    assert sig.values[12] == sig.values[11]


# ---------------------------------------------------------------------------
# range of motion and angular velocity
# ---------------------------------------------------------------------------

def test_rom_from_angle_series():
    values = np.full(40, 180.0)
    values[20:25] = 90.0
    assert rom_from_angle_series(_degrees(values), (0, 10)) == \
        pytest.approx(90.0, abs=1e-12)
    with pytest.raises(ValueError, match="degrees"):
        rom_from_angle_series(_metres(values), (0, 10))
    with pytest.raises(QualityError, match="rest window"):
        rom_from_angle_series(_degrees(values), (30, 10))


def test_mean_angular_velocity_constant_rate():
    # constant 90 deg/s ramp: onset == peak, so the sample value returns
    sig = _degrees(3.0 * np.arange(30), fps=30.0)
    assert mean_angular_velocity(sig) == pytest.approx(90.0, abs=1e-9)


def test_mean_angular_velocity_half_sine_profile():
    fps, amplitude, period = 1000.0, 45.0, 1.0
    t = np.arange(int(fps * period) + 1) / fps
    theta = amplitude * np.sin(np.pi * t / period) ** 2
    sig = _degrees(theta, fps=fps)
    measured = mean_angular_velocity(sig)

    omega = np.abs(np.gradient(theta) * fps)
    onset = int(np.argmax(omega > 0.05 * np.max(omega)))
    peak = int(np.argmax(omega))
    # independent window oracle: chord slope of the angle curve itself
    analytic = (theta[peak] - theta[onset]) / ((peak - onset) / fps)
    assert abs(measured - analytic) / analytic < 0.02

    # exact telescoped form of the trapezoidal mean of central differences
    closed = (theta[peak - 1] + 2.0 * theta[peak] + theta[peak + 1]
              - theta[onset - 1] - 2.0 * theta[onset]
              - theta[onset + 1]) * fps / (4.0 * (peak - onset))
    assert measured == pytest.approx(closed, rel=1e-9)


def test_mean_angular_velocity_validation():
    with pytest.raises(QualityError, match="no angular motion"):
        mean_angular_velocity(_degrees(np.full(30, 10.0)))
    with pytest.raises(ValueError, match="too short"):
        mean_angular_velocity(_degrees(np.zeros(2)))
    with pytest.raises(ValueError, match="degrees"):
        mean_angular_velocity(_metres(np.zeros(30)))


def test_metric_records_are_frozen():
    jm = JumpMetrics(height_m=0.3)
    with pytest.raises(AttributeError):
        jm.height_m = 0.5
