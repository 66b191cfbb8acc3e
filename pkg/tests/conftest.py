"""Shared fixtures: hand-built keypoint series and ballistic pixel traces."""

import numpy as np
import pytest

from kinecap import body25
from kinecap.calibration import GRAVITY_MPS2
from kinecap.mocap_io import KeypointSeries

# Standing pose in image coordinates (x grows right, y grows DOWN).
# Shoulders sit at y=300 and big toes at y=975, so the shoulder-to-toe
# span is 675 px and the implied stature 675 / (6/8) = 900 px.
STANDING = {
    body25.NOSE: (360.0, 210.0),
    body25.NECK: (360.0, 280.0),
    body25.R_SHOULDER: (300.0, 300.0),
    body25.L_SHOULDER: (420.0, 300.0),
    body25.R_ELBOW: (285.0, 430.0),
    body25.L_ELBOW: (435.0, 430.0),
    body25.R_WRIST: (275.0, 560.0),
    body25.L_WRIST: (445.0, 560.0),
    body25.MID_HIP: (360.0, 600.0),
    body25.R_HIP: (330.0, 600.0),
    body25.L_HIP: (390.0, 600.0),
    body25.R_KNEE: (325.0, 790.0),
    body25.L_KNEE: (395.0, 790.0),
    body25.R_ANKLE: (320.0, 950.0),
    body25.L_ANKLE: (400.0, 950.0),
    body25.R_EYE: (350.0, 195.0),
    body25.L_EYE: (370.0, 195.0),
    body25.R_EAR: (340.0, 205.0),
    body25.L_EAR: (380.0, 205.0),
    body25.L_BIG_TOE: (410.0, 975.0),
    body25.L_SMALL_TOE: (425.0, 975.0),
    body25.L_HEEL: (395.0, 965.0),
    body25.R_BIG_TOE: (310.0, 975.0),
    body25.R_SMALL_TOE: (295.0, 975.0),
    body25.R_HEEL: (325.0, 965.0),
}


def standing_series(n_frames: int = 30, fps: float = 30.0,
                    confidence: float = 0.9) -> KeypointSeries:
    """A motionless standing figure with uniform keypoint confidence."""
    data = np.zeros((n_frames, body25.N_KEYPOINTS, 3))
    for kp, (x, y) in STANDING.items():
        data[:, kp, 0] = x
        data[:, kp, 1] = y
    data[:, :, 2] = confidence
    return KeypointSeries(data=data, fps=fps)


def flight_trace(fps: float, ptm: float, flight_s: float = 0.6,
                 rest_s: float = 1.0, tail_s: float = 1.0,
                 base_px: float = 550.0, sigma_px: float = 0.0,
                 seed: int = 0) -> np.ndarray:
    """Upward-positive mid-hip pixel elevation of a standing jump.

    Rest at ``base_px``, one ballistic flight of ``flight_s`` seconds
    rendered at ``ptm`` metres per pixel, rest again. Optional additive
    Gaussian pixel noise.
    """
    n = int(round((rest_s + flight_s + tail_s) * fps))
    t = np.arange(n) / fps
    tau = t - rest_s
    vz = GRAVITY_MPS2 * flight_s / 2.0
    z = np.where((tau > 0) & (tau < flight_s),
                 vz * tau - GRAVITY_MPS2 * tau * tau / 2.0, 0.0)
    values = base_px + z / ptm
    if sigma_px > 0:
        values = values + np.random.default_rng(seed).normal(
            0.0, sigma_px, n)
    return values


@pytest.fixture
def standing() -> KeypointSeries:
    return standing_series()
