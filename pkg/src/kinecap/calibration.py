"""Pixel-to-metre scale estimation.

Three ways to anchor pixel measurements to metres, selectable per run:

- gravity: during a ballistic flight the centre of mass traces a
  parabola with curvature g/2 in metres, so fitting a quadratic to the
  mid-hip pixel trajectory around the flight apex gives the pixel
  curvature and hence the scale. Requires a jump.
- height: the participant's known standing height against the median
  shoulder-to-toe pixel distance over a rest phase. Shoulder-to-toe
  covers 6/8 of stature, so the pixel distance is rescaled by 8/6
  before dividing.
- object: a reference object of known length measured once in pixels
  (e.g. a standard barbell, 1.125 m between inner collars).

All methods return metres-per-pixel; scaling the pixel data by k scales
the result by exactly 1/k.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .body25 import BIG_TOE, L_BIG_TOE, L_SHOULDER, R_BIG_TOE, R_SHOULDER, SHOULDER
from .errors import CalibrationError
from .mocap_io import KeypointSeries
from .preprocess import CONFIDENCE_THRESHOLD, Signal

log = logging.getLogger(__name__)

GRAVITY_MPS2 = 9.80665

SHOULDER_TOE_STATURE_FRAC = 6.0 / 8.0

BARBELL_LENGTH_M = 1.125

MAX_FIT_RESIDUAL = 0.1

MIN_FALL_FRAMES = 4

# End the fit window this many frames before the detected landing impact
# so impact absorption never leaks into the free-fall samples.
IMPACT_GUARD_FRAMES = 2

# How far past the apex to look for the landing impact. Half a flight
# never exceeds ~0.5 s, so 0.8 s bounds the search while keeping sharp
# accelerations from later repetitions out of it.
IMPACT_SEARCH_S = 0.8

# How many acceleration spikes to try as the landing impact, strongest
# first. Under pixel noise a stray spike can outrank the real landing;
# the residual gate exposes it and the next candidate is tried.
IMPACT_CANDIDATES = 5

REST_PHASE_S = 0.5


@dataclass(frozen=True)
class PtmScale:
    """A pixel-to-metre conversion factor and how it was obtained."""

    metres_per_pixel: float
    method: str                      # 'gravity', 'height' or 'object'
    fit_residual: float | None = None

    def __post_init__(self):
        if self.metres_per_pixel <= 0:
            raise ValueError("metres_per_pixel must be positive")
        if self.method not in ("gravity", "height", "object"):
            raise ValueError(f"unknown calibration method {self.method!r}")


@dataclass(frozen=True)
class GravityFit:
    """Diagnostics of a free-fall quadratic fit.

    ``quadratic_coeff`` is the magnitude of the t^2 coefficient of the
    ballistic pixel trajectory (px/s^2); the scale follows as
    (g/2) / quadratic_coeff. ``fall_window`` is the fitted frame range;
    it mirrors the descent across the apex, so it can start before
    ``apex_index``.
    """

    apex_index: int
    fall_window: tuple               # inclusive (start, end) frame indices
    quadratic_coeff: float
    residual: float

    @property
    def n_frames(self) -> int:
        return self.fall_window[1] - self.fall_window[0] + 1


def fit_free_fall(elevation_px: np.ndarray, fps: float) -> GravityFit:
    """Fit the free-fall parabola around the apex of an upward-positive signal.

    The apex is the global maximum; the landing impact is the largest
    upward acceleration within IMPACT_SEARCH_S after it (the deceleration
    spike when the fall stops; no flight lasts half that long, and a
    bounded search keeps sharp events later in the recording, such as
    another repetition's landing, from hijacking the window). The fitted
    window ends IMPACT_GUARD_FRAMES before the impact and starts the
    same distance mirrored across the apex: the ascent of the flight lies
    on the same parabola, and the doubled span cuts the curvature
    variance under pixel noise by an order of magnitude. A full quadratic
    (offset, velocity and curvature all free) is used: the sampled apex
    can sit up to half a frame period away from the true apex, which a
    curvature-only model would misread.

    Impact candidates are tried strongest-spike first. A candidate that
    is not the landing (a noise spike) pulls non-ballistic samples into
    the window and fails the residual gate, so the next one is tried;
    the first ballistically consistent window wins.

    Raises
    ------
    CalibrationError
        If no descent follows the apex, or no candidate window has at
        least MIN_FALL_FRAMES frames, downward curvature and a
        normalized residual within MAX_FIT_RESIDUAL.
    """
    values = np.asarray(elevation_px, dtype=float)
    if values.ndim != 1 or len(values) < MIN_FALL_FRAMES + 2:
        raise CalibrationError("signal too short for a free-fall fit")
    apex = int(np.argmax(values))
    if apex >= len(values) - MIN_FALL_FRAMES:
        raise CalibrationError(
            "no descent found after the apex; gravity calibration needs a "
            "jump with visible flight"
        )
    accel = np.diff(values, 2)  # accel[i] describes frame i + 1
    horizon = apex + int(round(IMPACT_SEARCH_S * fps))
    post = accel[apex:horizon]  # impact candidates at frames >= apex + 1
    if len(post) == 0:
        raise CalibrationError("no samples after the apex")
    ranked = np.argsort(post)[::-1][:IMPACT_CANDIDATES]
    first_error: CalibrationError | None = None
    for offset in ranked:
        impact = apex + 1 + int(offset)
        end = impact - IMPACT_GUARD_FRAMES
        start = max(0, 2 * apex - impact + IMPACT_GUARD_FRAMES)
        try:
            if end - apex + 1 < 3 or end - start + 1 < MIN_FALL_FRAMES:
                raise CalibrationError(
                    f"free-fall window [{start}, {end}] has fewer than "
                    f"{MIN_FALL_FRAMES} frames"
                )
            t = (np.arange(start, end + 1) - apex) / fps
            window = values[start:end + 1]
            coeffs = np.polynomial.polynomial.polyfit(t, window, 2)
            curvature = coeffs[2]
            if curvature >= 0:
                raise CalibrationError("descent is not curving downward")
            fitted = coeffs[0] + coeffs[1] * t + coeffs[2] * t * t
            scale = float(np.ptp(window))
            residual = float(np.sqrt(np.mean((window - fitted) ** 2))) \
                / max(scale, 1e-12)
            if residual > MAX_FIT_RESIDUAL:
                raise CalibrationError(
                    f"free-fall fit residual {residual:.3f} exceeds "
                    f"{MAX_FIT_RESIDUAL}; descent does not look ballistic"
                )
        except CalibrationError as exc:
            if first_error is None:
                first_error = exc
            continue
        return GravityFit(apex_index=apex, fall_window=(start, end),
                          quadratic_coeff=float(-curvature),
                          residual=residual)
    raise first_error if first_error is not None else CalibrationError(
        "no ballistic window found after the apex")


def ptm_from_gravity(com_elevation_px: np.ndarray, fps: float,
                     mode: str = "fit") -> PtmScale:
    """Gravity calibration from the ballistic descent of a jump.

    Parameters
    ----------
    com_elevation_px : array
        Upward-positive centre-of-mass proxy (mid-hip) in pixels.
    fps : float
        Sample rate of the signal.
    mode : str
        'fit' (default) uses the least-squares curvature of the flight;
        'ratio' divides the ideal fall distance g*t^2/2 by the observed
        pixel fall from the apex to the frame ending the descent window.

    Raises
    ------
    CalibrationError
        See ``fit_free_fall``.
    """
    if mode not in ("fit", "ratio"):
        raise ValueError("mode must be 'fit' or 'ratio'")
    fit = fit_free_fall(com_elevation_px, fps)
    if mode == "fit":
        mpp = (GRAVITY_MPS2 / 2.0) / fit.quadratic_coeff
    else:
        apex, end = fit.apex_index, fit.fall_window[1]
        t = (end - apex) / fps
        fall_px = float(com_elevation_px[apex] - com_elevation_px[end])
        if fall_px <= 0:
            raise CalibrationError("no pixel fall across the descent window")
        mpp = (GRAVITY_MPS2 / 2.0) * t * t / fall_px
    return PtmScale(metres_per_pixel=mpp, method="gravity",
                    fit_residual=fit.residual)


def ptm_from_height(series: KeypointSeries, height_m: float,
                    rest_phase_s: float = REST_PHASE_S,
                    confidence_threshold: float = CONFIDENCE_THRESHOLD) -> PtmScale:
    """Height calibration from the standing rest phase of a recording.

    The vertical shoulder-to-toe pixel distance is taken per frame over
    the first ``rest_phase_s`` seconds (median across frames, averaging
    left/right where both sides are confident), rescaled to full stature
    by 8/6, and divided into the participant's height.

    Raises
    ------
    CalibrationError
        If height is not positive, or no rest frame has a confident
        shoulder and toe on the same side.
    """
    if height_m <= 0:
        raise CalibrationError("participant height must be positive")
    n_rest = min(series.n_frames, max(1, int(round(rest_phase_s * series.fps))))
    per_frame = []
    for i in range(n_rest):
        frame = series.data[i]
        spans = []
        for side in ("left", "right"):
            sh, toe = SHOULDER[side], BIG_TOE[side]
            if frame[sh, 2] >= confidence_threshold \
                    and frame[toe, 2] >= confidence_threshold:
                spans.append(abs(frame[toe, 1] - frame[sh, 1]))
        if spans:
            per_frame.append(float(np.mean(spans)))
    if not per_frame:
        raise CalibrationError(
            "no rest frame with confident shoulder and toe keypoints; "
            "height calibration impossible"
        )
    shoulder_toe_px = float(np.median(per_frame))
    if shoulder_toe_px <= 0:
        raise CalibrationError("degenerate shoulder-to-toe distance")
    stature_px = shoulder_toe_px / SHOULDER_TOE_STATURE_FRAC
    return PtmScale(metres_per_pixel=height_m / stature_px, method="height")


def ptm_from_object(object_len_px: float,
                    object_len_m: float = BARBELL_LENGTH_M) -> PtmScale:
    """Object calibration: known physical length over measured pixel length."""
    if object_len_px <= 0:
        raise CalibrationError("object pixel length must be positive")
    if object_len_m <= 0:
        raise CalibrationError("object physical length must be positive")
    return PtmScale(metres_per_pixel=object_len_m / object_len_px,
                    method="object")


def apply_scale(signal_px: Signal, ptm: PtmScale) -> Signal:
    """Convert a pixel signal to metres.

    Raises
    ------
    ValueError
        If the signal is not in pixel units (double scaling is a bug).
    """
    if signal_px.unit != "px":
        raise ValueError(
            f"apply_scale expects a pixel signal, got unit {signal_px.unit!r}"
        )
    return Signal(values=signal_px.values * ptm.metres_per_pixel,
                  fps=signal_px.fps, unit="m")
