"""Per-repetition performance metrics from conditioned signals.

Jump metrics work on an upward-positive toe elevation signal in metres,
velocity metrics on a barbell-surrogate (wrist) elevation signal, and
angular metrics on joint keypoint trajectories. Signal extraction from a
BODY_25 series lives here too, since the choice of which keypoints stand
in for what (wrists for the bar, mid-hip for the centre of mass, big
toes for ground contact) is a measurement decision, not plumbing.

Image y grows downward, so every extractor negates it: elevations are
upward-positive and in pixels until a calibration scale is applied.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from . import body25
from .errors import QualityError
from .mocap_io import KeypointSeries
from .preprocess import CONFIDENCE_THRESHOLD, Signal

log = logging.getLogger(__name__)

JUMP_REST_PHASE_S = 0.3

# A sample is airborne only if it clears ground level by this margin;
# exactly at the margin counts as grounded.
AIRBORNE_MARGIN_M = 0.02

GROUND_DECILE = 0.1

DROPJUMP_PEAK_PROMINENCE_FRAC = 0.2

VELOCITY_ONSET_FRAC = 0.05

_EPS = 1e-12


@dataclass(frozen=True)
class JumpMetrics:
    height_m: float


@dataclass(frozen=True)
class VelocityMetrics:
    peak_mps: float
    mean_mps: float
    window: tuple  # (start, end) inclusive indices of the concentric phase


@dataclass(frozen=True)
class TemporalMetrics:
    flight_s: float
    contact_s: float


@dataclass(frozen=True)
class AngularMetrics:
    rom_deg: float
    internal_deg: float | None = None
    external_deg: float | None = None
    mean_ang_vel_dps: float | None = None


# ---------------------------------------------------------------------------
# signal extraction from a BODY_25 series
# ---------------------------------------------------------------------------

def _usable(series: KeypointSeries, index: int,
            threshold: float = CONFIDENCE_THRESHOLD) -> bool:
    return bool(np.any(series.data[:, index, 2] >= threshold))


def elevation_series(series: KeypointSeries, indices) -> Signal:
    """Mean upward-positive pixel elevation of the given keypoints.

    Keypoints that never reach the confidence threshold are excluded;
    if none remain a QualityError identifies them.
    """
    usable = [i for i in indices if _usable(series, i)]
    if not usable:
        names = [body25.KEYPOINT_NAMES[i] for i in indices]
        raise QualityError(f"keypoint(s) {names} unusable: no confident frames")
    stacked = np.stack([series.data[:, i, 1] for i in usable], axis=1)
    return Signal(values=-np.mean(stacked, axis=1), fps=series.fps, unit="px")


def toe_elevation(series: KeypointSeries, bilateral: bool = True,
                  side: str = "right") -> Signal:
    """Toe elevation: both big toes averaged, or the chosen side only."""
    if bilateral:
        return elevation_series(series, [body25.L_BIG_TOE, body25.R_BIG_TOE])
    return elevation_series(series, [body25.BIG_TOE[side]])


def midhip_elevation(series: KeypointSeries) -> Signal:
    """Centre-of-mass proxy: mid-hip elevation."""
    return elevation_series(series, [body25.MID_HIP])


def wrist_elevation(series: KeypointSeries,
                    threshold: float = CONFIDENCE_THRESHOLD) -> Signal:
    """Barbell surrogate from the wrists.

    Per frame: average both wrists when both confidences reach the
    threshold, otherwise follow whichever wrist is more confident.
    """
    if not (_usable(series, body25.L_WRIST, threshold)
            or _usable(series, body25.R_WRIST, threshold)):
        raise QualityError("neither wrist has confident frames")
    ly = series.data[:, body25.L_WRIST, 1]
    ry = series.data[:, body25.R_WRIST, 1]
    lc = series.data[:, body25.L_WRIST, 2]
    rc = series.data[:, body25.R_WRIST, 2]
    both = (lc >= threshold) & (rc >= threshold)
    y = np.where(both, 0.5 * (ly + ry), np.where(lc >= rc, ly, ry))
    return Signal(values=-y, fps=series.fps, unit="px")


# ---------------------------------------------------------------------------
# jump metrics
# ---------------------------------------------------------------------------

def jump_height(toe_signal: Signal,
                rest_phase_s: float = JUMP_REST_PHASE_S) -> JumpMetrics:
    """Jump height: peak toe elevation above the resting level.

    The resting level is the median of the first ``rest_phase_s`` seconds.

    Raises
    ------
    QualityError
        If the maximum falls inside the rest window (nothing resembling
        a jump happened).
    ValueError
        If the signal is not in metres.
    """
    _require_metres(toe_signal)
    n_rest = max(1, int(round(rest_phase_s * toe_signal.fps)))
    if n_rest >= len(toe_signal):
        raise QualityError("signal no longer than its rest phase")
    rest_level = float(np.median(toe_signal.values[:n_rest]))
    apex = int(np.argmax(toe_signal.values))
    if apex < n_rest:
        raise QualityError(
            "peak elevation occurs inside the rest window; no jump found"
        )
    return JumpMetrics(height_m=float(toe_signal.values[apex] - rest_level))


# ---------------------------------------------------------------------------
# lift velocity metrics
# ---------------------------------------------------------------------------

def concentric_window(bar_signal: Signal) -> tuple:
    """Concentric phase: global minimum to the subsequent global maximum.

    Raises
    ------
    QualityError
        If nothing rises after the global minimum (e.g. the signal's
        maximum precedes its minimum, as in a monotone fall).
    """
    _require_metres(bar_signal)
    values = bar_signal.values
    i_min = int(np.argmin(values))
    i_max = i_min + int(np.argmax(values[i_min:]))
    if i_max == i_min:
        raise QualityError(
            "no rise after the global minimum; malformed repetition"
        )
    return (i_min, i_max)


def velocity_metrics(bar_signal: Signal, window: tuple) -> VelocityMetrics:
    """Peak and mean vertical velocity over a window of a metre signal.

    Velocity uses central differences with one-sided differences at the
    window edges. The mean is the time-weighted (trapezoidal) average of
    the sampled velocity; with central differences that telescopes to net
    displacement over duration, so it carries no O(1/n) length bias the
    way a plain sample mean does.

    Raises
    ------
    ValueError
        If the window holds fewer than 3 samples or exceeds the signal.
    """
    _require_metres(bar_signal)
    lo, hi = int(window[0]), int(window[1])
    if not 0 <= lo < hi <= len(bar_signal) - 1:
        raise ValueError(f"window {window} outside signal bounds")
    if hi - lo + 1 < 3:
        raise ValueError("velocity window must span at least 3 samples")
    v = np.gradient(bar_signal.values[lo:hi + 1]) * bar_signal.fps
    return VelocityMetrics(peak_mps=float(np.max(v)),
                           mean_mps=float(np.trapezoid(v) / (hi - lo)),
                           window=(lo, hi))


# ---------------------------------------------------------------------------
# temporal metrics (repeated jumps, drop jumps)
# ---------------------------------------------------------------------------

def _airborne_runs(values: np.ndarray) -> tuple:
    """Ground level and the list of airborne (start, end) inclusive runs."""
    n_ground = max(1, int(round(len(values) * GROUND_DECILE)))
    ground = float(np.median(np.sort(values)[:n_ground]))
    airborne = values > ground + AIRBORNE_MARGIN_M
    runs = []
    start = None
    for i, a in enumerate(airborne):
        if a and start is None:
            start = i
        elif not a and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(values) - 1))
    return ground, runs


def flight_contact_rjt(toe_signal: Signal) -> list:
    """Flight and contact times of a repeated-jump (hop train) signal.

    Ground level is the median of the lowest decile of samples; a sample
    is airborne strictly above ground + AIRBORNE_MARGIN_M. Each airborne
    run is a flight; the gap to the next run is the following contact.
    One TemporalMetrics pairs each flight with the contact after it, so a
    train of n hops yields n - 1 records.

    Raises
    ------
    QualityError
        If fewer than two airborne runs exist.
    """
    _require_metres(toe_signal)
    _, runs = _airborne_runs(toe_signal.values)
    if len(runs) < 2:
        raise QualityError(
            f"repeated-jump analysis needs at least 2 airborne phases, "
            f"found {len(runs)}"
        )
    fps = toe_signal.fps
    out = []
    for (s0, e0), (s1, _) in zip(runs, runs[1:]):
        flight = (e0 - s0 + 1) / fps
        contact = (s1 - e0 - 1) / fps
        out.append(TemporalMetrics(flight_s=flight, contact_s=contact))
    return out


def rjt_hop_heights(toe_signal: Signal) -> list:
    """Per-hop jump height: peak elevation above ground, one per airborne run."""
    _require_metres(toe_signal)
    ground, runs = _airborne_runs(toe_signal.values)
    if not runs:
        raise QualityError("no airborne phase found")
    return [float(np.max(toe_signal.values[s:e + 1]) - ground)
            for s, e in runs]


def flight_contact_dropjump(toe_signal: Signal) -> TemporalMetrics:
    """Contact and flight times of a drop jump from toe-speed peaks.

    The toe speed of a drop jump peaks at the landing from the platform,
    at push-off, and at the final landing. Contact time is the spacing of
    the first two peaks, flight time the spacing of the last two. Speed
    comes from forward differences: each difference sits between its two
    samples, so a peak straddling a rest-to-motion corner lands within
    one frame of the true event on both sides. Central differences would
    halve the corner value and push the peak a full frame into the
    moving phase, doubling the error of each measured interval.

    Raises
    ------
    QualityError
        If fewer than 3 prominent speed peaks exist (e.g. the recording
        was truncated before the landing).
    """
    _require_metres(toe_signal)
    speed = np.abs(np.diff(toe_signal.values) * toe_signal.fps)
    top = float(np.max(speed)) if len(speed) else 0.0
    if top <= 0:
        raise QualityError("toe never moves; not a drop jump")
    distance = max(1, int(round(0.05 * toe_signal.fps)))
    peaks, _ = find_peaks(speed,
                          prominence=DROPJUMP_PEAK_PROMINENCE_FRAC * top,
                          distance=distance)
    if len(peaks) < 3:
        raise QualityError(
            f"drop-jump analysis needs at least 3 toe-speed peaks "
            f"(landing, push-off, final landing), found {len(peaks)}"
        )
    fps = toe_signal.fps
    return TemporalMetrics(
        flight_s=float((peaks[-1] - peaks[-2]) / fps),
        contact_s=float((peaks[1] - peaks[0]) / fps),
    )


# ---------------------------------------------------------------------------
# angular metrics
# ---------------------------------------------------------------------------

def acute_angle_slopes_deg(u, v) -> float:
    """Acute angle between two 2D directions via their slopes.

    Uses atan of |m1 - m2| / |1 + m1*m2|; a vertical direction (undefined
    slope) or a near-zero denominator (perpendicular directions) routes
    through the vector form, which is algebraically identical and has no
    pole.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu < _EPS or nv < _EPS:
        raise ValueError("zero-length direction vector")
    if abs(u[0]) < _EPS * nu or abs(v[0]) < _EPS * nv:
        return acute_angle_vectors_deg(u, v)
    m1 = u[1] / u[0]
    m2 = v[1] / v[0]
    denom = 1.0 + m1 * m2
    if abs(denom) < _EPS * max(1.0, abs(m1 * m2)):
        return acute_angle_vectors_deg(u, v)
    return float(np.degrees(np.arctan2(abs(m1 - m2), abs(denom))))


def acute_angle_vectors_deg(u, v) -> float:
    """Acute angle between two directions, sign-insensitive and pole-free."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    cross = abs(float(u[0] * v[1] - u[1] * v[0]))
    dot = abs(float(np.dot(u, v)))
    if cross == 0.0 and dot == 0.0:
        raise ValueError("zero-length direction vector")
    return float(np.degrees(np.arctan2(cross, dot)))


def vector_angle_deg(u, v) -> float:
    """Full [0, 180] angle between two vectors (2D or 3D), clamped arccos."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu < _EPS or nv < _EPS:
        raise ValueError("zero-length vector")
    c = np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0)
    return float(np.degrees(np.arccos(c)))


def hip_rotation_rom(knee_xy: np.ndarray, ankle_xy: np.ndarray,
                     rest_window: tuple, dominant_side: str = "right",
                     fps: float = 30.0) -> AngularMetrics:
    """Hip rotation range from the tibia (knee to ankle) direction, front view.

    Per frame, the acute angle between the current tibia direction and
    its rest direction (mean over ``rest_window``, a [start, stop) slice)
    is computed with the slope formula. Frames are attributed to internal
    or external rotation by the sign of the ankle's lateral displacement
    from rest: for a right leg, motion toward negative image x is
    internal; for a left leg, toward positive x. The reported range of
    motion is the internal and external maxima summed.

    Raises
    ------
    QualityError
        If the rest window is empty or the rest tibia has no length.
    """
    knee = np.asarray(knee_xy, dtype=float)
    ankle = np.asarray(ankle_xy, dtype=float)
    if knee.shape != ankle.shape or knee.ndim != 2 or knee.shape[1] != 2:
        raise ValueError("knee and ankle trajectories must both be (n, 2)")
    lo, hi = int(rest_window[0]), int(rest_window[1])
    if not 0 <= lo < hi <= knee.shape[0]:
        raise QualityError(f"rest window {rest_window} is empty or out of range")
    if dominant_side not in ("left", "right"):
        raise ValueError("dominant_side must be 'left' or 'right'")

    tibia = ankle - knee
    rest_vec = tibia[lo:hi].mean(axis=0)
    if np.linalg.norm(rest_vec) < _EPS:
        raise QualityError("rest tibia direction is degenerate")
    rest_x = float(ankle[lo:hi, 0].mean())

    internal_sign = -1.0 if dominant_side == "right" else 1.0
    internal = 0.0
    external = 0.0
    for t in range(knee.shape[0]):
        if np.linalg.norm(tibia[t]) < _EPS:
            continue
        theta = acute_angle_slopes_deg(rest_vec, tibia[t])
        dx = ankle[t, 0] - rest_x
        if dx * internal_sign > 0:
            internal = max(internal, theta)
        elif dx * internal_sign < 0:
            external = max(external, theta)
    return AngularMetrics(rom_deg=internal + external,
                          internal_deg=internal, external_deg=external)


def joint_angle_series(proximal: np.ndarray, joint: np.ndarray,
                       distal: np.ndarray, fps: float) -> Signal:
    """Angle at a joint over time: arccos of the normalized dot product.

    Accepts (n, 2) or (n, 3) trajectories. Frames where either limb
    vector has zero length are masked and filled by linear interpolation
    (held at the edges).

    Raises
    ------
    QualityError
        If no frame has two well-defined limb vectors.
    """
    p = np.asarray(proximal, dtype=float)
    j = np.asarray(joint, dtype=float)
    d = np.asarray(distal, dtype=float)
    if not (p.shape == j.shape == d.shape) or p.ndim != 2:
        raise ValueError("trajectories must share one (n, dims) shape")
    va = p - j
    vb = d - j
    na = np.linalg.norm(va, axis=1)
    nb = np.linalg.norm(vb, axis=1)
    valid = (na > _EPS) & (nb > _EPS)
    if not valid.any():
        raise QualityError("no frame with well-defined limb vectors")
    angles = np.full(p.shape[0], np.nan)
    dots = np.einsum("ij,ij->i", va[valid], vb[valid])
    cosines = np.clip(dots / (na[valid] * nb[valid]), -1.0, 1.0)
    angles[valid] = np.degrees(np.arccos(cosines))
    if not valid.all():
        idx = np.arange(p.shape[0])
        angles = np.interp(idx, idx[valid], angles[valid])
    return Signal(values=angles, fps=fps, unit="deg")


def vector_displacement_series(proximal: np.ndarray, distal: np.ndarray,
                               rest_window: tuple, fps: float) -> Signal:
    """Angular displacement of a single limb vector from its rest direction.

    Used for the straight leg raise (whole leg as one vector) and as the
    segmentation driver for rotation tasks. ``rest_window`` is a
    [start, stop) slice over which the rest direction is averaged.
    """
    p = np.asarray(proximal, dtype=float)
    d = np.asarray(distal, dtype=float)
    if p.shape != d.shape or p.ndim != 2:
        raise ValueError("trajectories must share one (n, dims) shape")
    lo, hi = int(rest_window[0]), int(rest_window[1])
    if not 0 <= lo < hi <= p.shape[0]:
        raise QualityError(f"rest window {rest_window} is empty or out of range")
    vec = d - p
    rest_vec = vec[lo:hi].mean(axis=0)
    if np.linalg.norm(rest_vec) < _EPS:
        raise QualityError("rest limb direction is degenerate")
    angles = np.zeros(p.shape[0])
    for t in range(p.shape[0]):
        if np.linalg.norm(vec[t]) < _EPS:
            angles[t] = angles[t - 1] if t else 0.0
            continue
        angles[t] = vector_angle_deg(rest_vec, vec[t])
    return Signal(values=angles, fps=fps, unit="deg")


def rom_from_angle_series(angle_signal: Signal, rest_window: tuple) -> float:
    """Range of motion: largest deviation from the rest-window mean angle.

    Raises
    ------
    QualityError
        If the rest window is empty or out of range.
    """
    if angle_signal.unit != "deg":
        raise ValueError("angle signal must be in degrees")
    lo, hi = int(rest_window[0]), int(rest_window[1])
    if not 0 <= lo < hi <= len(angle_signal):
        raise QualityError(f"rest window {rest_window} is empty or out of range")
    rest = float(np.mean(angle_signal.values[lo:hi]))
    return float(np.max(np.abs(angle_signal.values - rest)))


def mean_angular_velocity(angle_signal: Signal,
                          onset_frac: float = VELOCITY_ONSET_FRAC) -> float:
    """Mean absolute angular velocity from movement onset to peak.

    Onset is the first sample whose |velocity| exceeds ``onset_frac`` of
    the peak |velocity|; the window runs from there to the peak sample.
    The mean is the time-weighted (trapezoidal) average over the window,
    the same convention velocity_metrics uses.

    Raises
    ------
    QualityError
        If the angle never changes.
    """
    if angle_signal.unit != "deg":
        raise ValueError("angle signal must be in degrees")
    if len(angle_signal) < 3:
        raise ValueError("angle signal too short to differentiate")
    omega = np.abs(np.gradient(angle_signal.values) * angle_signal.fps)
    top = float(np.max(omega))
    if top <= 0:
        raise QualityError("no angular motion in the signal")
    onset = int(np.argmax(omega > onset_frac * top))
    peak = int(np.argmax(omega))
    if peak == onset:
        return float(omega[peak])
    return float(np.trapezoid(omega[onset:peak + 1]) / (peak - onset))


def _require_metres(signal: Signal) -> None:
    if signal.unit != "m":
        raise ValueError(
            f"expected a signal in metres, got {signal.unit!r}; apply a "
            f"calibration scale first"
        )
