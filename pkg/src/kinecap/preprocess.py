"""Signal conditioning and repetition segmentation.

Pipeline order matters: limb-swap detection runs on raw keypoints (an
interpolated series would hide the discontinuities it looks for), then
low-confidence samples are masked and interpolated, then scalar signals
extracted from the series are smoothed, segmented into repetitions and,
when a second device is being compared against, resampled to its length.

Functions
---------
smooth                Savitzky-Golay polynomial smoothing.
find_rep_maxima       prominence-gated peak picking on a driver signal.
segment_reps          fixed windows around each maxima.
resample_to           Fourier-domain resampling of a segment.
detect_limb_swaps     left/right ankle identity failure heuristic.
mask_low_confidence   temporal interpolation across low-confidence samples.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.ndimage import median_filter
from scipy.signal import find_peaks, resample, savgol_filter

from .body25 import L_ANKLE, R_ANKLE
from .errors import QualityError
from .mocap_io import KeypointSeries

log = logging.getLogger(__name__)

SIGNAL_UNITS = ("px", "m", "deg", "m_per_s", "deg_per_s", "N")

CONFIDENCE_THRESHOLD = 0.3

# Limb-swap heuristic thresholds.
SWAP_JUMP_FACTOR = 5.0
SWAP_CONFIDENCE = 0.5
SWAP_MEDIAN_WINDOW = 31
SWAP_MEDIAN_FLOOR_PX = 1.0
SWAP_DROP_FRACTION = 0.2


@dataclass
class Signal:
    """A uniformly sampled scalar time series with an explicit unit."""

    values: np.ndarray
    fps: float
    unit: str = "px"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise ValueError("signal values must be one-dimensional")
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        if self.unit not in SIGNAL_UNITS:
            raise ValueError(f"unknown unit {self.unit!r}")

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.fps


@dataclass
class SegmentationConfig:
    """Windowing and peak-picking parameters for repetition segmentation."""

    t1_s: float = 1.0
    t2_s: float = 1.0
    expected_reps: int = 3
    min_peak_separation_s: float = 1.0
    min_prominence_frac: float = 0.25

    def __post_init__(self):
        if self.t1_s < 0 or self.t2_s < 0:
            raise ValueError("window extents must be non-negative")
        if self.expected_reps < 1:
            raise ValueError("expected_reps must be at least 1")
        if not 0 < self.min_prominence_frac <= 1:
            raise ValueError("min_prominence_frac must be in (0, 1]")


@dataclass
class Segment:
    """One repetition window cut from a parent signal.

    ``source_index`` is the maxima index in the parent signal the window
    was built around; ``window`` holds the (t1_s, t2_s) extents so the
    parent frame range can always be reconstructed as
    ``source_index - round(fps * t1_s) .. source_index + round(fps * t2_s)``.
    """

    values: Signal
    source_index: int
    window: tuple
    device: str = "mmc"

    @property
    def start_index(self) -> int:
        return self.source_index - int(round(self.values.fps * self.window[0]))

    @property
    def end_index(self) -> int:
        """Inclusive end index in the parent signal."""
        return self.start_index + len(self.values) - 1

    @property
    def duration_s(self) -> float:
        return self.values.duration_s


def default_window_frames(fps: float) -> int:
    """Default smoothing window: 11 frames below 60 fps, 31 at or above."""
    return 11 if fps < 60 else 31


def smooth(signal: Signal, window_frames: int | None = None,
           poly_order: int = 2) -> Signal:
    """Savitzky-Golay smoothing with truncated-window edge handling.

    Interior samples get the standard symmetric least-squares polynomial
    fit. Near the edges the window is truncated to the available samples
    and the polynomial re-fit there, so a polynomial of degree at most
    ``poly_order`` passes through unchanged over the whole length.

    Parameters
    ----------
    signal : Signal
    window_frames : int, optional
        Odd window length; defaults to 11 below 60 fps and 31 otherwise.
    poly_order : int
        Fit order, default 2.

    Raises
    ------
    ValueError
        If the window is even, not longer than ``poly_order``, or longer
        than the signal.
    """
    window = default_window_frames(signal.fps) if window_frames is None \
        else int(window_frames)
    if window % 2 == 0:
        raise ValueError(f"window_frames must be odd, got {window}")
    if window <= poly_order:
        raise ValueError("window_frames must exceed poly_order")
    n = len(signal)
    if window > n:
        raise ValueError(f"window ({window}) longer than signal ({n})")

    out = savgol_filter(signal.values, window, poly_order)
    half = window // 2
    # Re-fit the edge samples on their truncated windows.
    for i in range(half):
        out[i] = _truncated_fit(signal.values, i, half, poly_order)
    for i in range(n - half, n):
        out[i] = _truncated_fit(signal.values, i, half, poly_order)
    return Signal(values=out, fps=signal.fps, unit=signal.unit)


def _truncated_fit(values: np.ndarray, i: int, half: int,
                   poly_order: int) -> float:
    lo = max(0, i - half)
    hi = min(len(values), i + half + 1)
    t = np.arange(lo, hi) - i  # centre the fit on the evaluated sample
    order = min(poly_order, len(t) - 1)
    coeffs = np.polynomial.polynomial.polyfit(t, values[lo:hi], order)
    return float(coeffs[0])


def find_rep_maxima(signal: Signal, config: SegmentationConfig) -> np.ndarray:
    """Locate one maxima per repetition on a driver signal.

    Peaks must rise at least ``min_prominence_frac`` of the signal's total
    range above their surroundings and be separated by at least
    ``min_peak_separation_s``. If more than ``expected_reps`` qualify, the
    most prominent ones are kept and re-sorted into temporal order.

    Raises
    ------
    QualityError
        If fewer than ``expected_reps`` maxima are found.
    """
    values = signal.values
    span = float(np.ptp(values))
    if span == 0.0:
        raise QualityError("driver signal is constant; no repetitions found")
    distance = max(1, int(round(config.min_peak_separation_s * signal.fps)))
    peaks, props = find_peaks(values, prominence=config.min_prominence_frac * span,
                              distance=distance)
    if len(peaks) < config.expected_reps:
        raise QualityError(
            f"expected {config.expected_reps} repetitions, found {len(peaks)} "
            f"qualifying maxima"
        )
    if len(peaks) > config.expected_reps:
        order = np.argsort(props["prominences"])[::-1][:config.expected_reps]
        peaks = np.sort(peaks[order])
    return peaks.astype(int)


def segment_reps(signal: Signal, maxima: np.ndarray,
                 config: SegmentationConfig,
                 device: str = "mmc") -> tuple:
    """Cut a fixed window around each maxima.

    Each repetition spans ``round(fps*t1_s)`` samples before its maxima to
    ``round(fps*t2_s)`` samples after it, inclusive. A window that would
    cross either end of the signal drops that repetition instead of
    clipping, so every kept segment has the same nominal length.

    Returns
    -------
    (segments, dropped) : (list of Segment, list of str)
        ``dropped`` holds one human-readable reason per discarded
        repetition, indexed by position in ``maxima``.
    """
    f = signal.fps
    before = int(round(f * config.t1_s))
    after = int(round(f * config.t2_s))
    segments: list = []
    dropped: list = []
    for k, x in enumerate(np.asarray(maxima, dtype=int)):
        lo = x - before
        hi = x + after
        if lo < 0 or hi > len(signal) - 1:
            dropped.append(
                f"repetition {k} at index {x}: window [{lo}, {hi}] exceeds "
                f"signal bounds [0, {len(signal) - 1}]"
            )
            continue
        seg = Signal(values=signal.values[lo:hi + 1].copy(), fps=f,
                     unit=signal.unit)
        segments.append(Segment(values=seg, source_index=int(x),
                                window=(config.t1_s, config.t2_s),
                                device=device))
    if dropped:
        log.info("segmentation dropped %d repetition(s)", len(dropped))
    return segments, dropped


def segment_from_bounds(signal: Signal, start_s: float, end_s: float,
                        device: str = "mmc") -> Segment:
    """Build a segment from explicit time bounds (manual segmentation).

    The source maxima is taken as the segment's own maximum so the
    resulting Segment satisfies the same bookkeeping as automatic ones.
    """
    lo = int(round(start_s * signal.fps))
    hi = int(round(end_s * signal.fps))
    if not 0 <= lo < hi <= len(signal) - 1:
        raise ValueError(
            f"manual segment [{start_s}, {end_s}] s is outside the signal"
        )
    values = signal.values[lo:hi + 1].copy()
    peak = lo + int(np.argmax(values))
    seg = Signal(values=values, fps=signal.fps, unit=signal.unit)
    return Segment(values=seg, source_index=peak,
                   window=((peak - lo) / signal.fps, (hi - peak) / signal.fps),
                   device=device)


def resample_to(segment: Segment, target_len: int) -> Segment:
    """Resample a segment to ``target_len`` samples in the Fourier domain.

    The spectrum is zero-padded or truncated and renormalized by the
    length ratio, so band-limited content is reproduced exactly; the
    sample rate is rescaled to keep the covered time span unchanged. A
    constant segment is returned as an exact constant.

    Raises
    ------
    ValueError
        If ``target_len`` is less than 2.
    """
    if target_len < 2:
        raise ValueError("target_len must be at least 2")
    n = len(segment.values)
    if target_len == n:
        return segment
    old = segment.values.values
    if np.ptp(old) == 0.0:
        new = np.full(target_len, old[0])
    else:
        new = resample(old, target_len)
    new_fps = segment.values.fps * target_len / n
    return replace(segment,
                   values=Signal(values=new, fps=new_fps,
                                 unit=segment.values.unit))


def detect_limb_swaps(series: KeypointSeries, side: str = "right",
                      jump_factor: float = SWAP_JUMP_FACTOR,
                      confidence_threshold: float = SWAP_CONFIDENCE,
                      median_window: int = SWAP_MEDIAN_WINDOW) -> np.ndarray:
    """Flag frames where left/right ankle identities look unreliable.

    Two rules, either of which flags a frame:

    - discontinuity: the tracked ankle's frame-to-frame x displacement
      exceeds ``jump_factor`` times a rolling median of that displacement
      (floored at 1 px so rest phases do not divide by zero);
    - crossed identities: the left/right ankle x order is opposite to the
      series' dominant order while BOTH ankle confidences fall below
      ``confidence_threshold``.

    Returns the sorted array of flagged frame indices. Callers drop a
    repetition when more than ``SWAP_DROP_FRACTION`` of its frames are
    flagged.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    tracked = L_ANKLE if side == "left" else R_ANKLE
    x = series.data[:, tracked, 0]
    n = series.n_frames
    flagged = np.zeros(n, dtype=bool)

    if n >= 2:
        dx = np.abs(np.diff(x))
        rolling = median_filter(dx, size=min(median_window, len(dx)),
                                mode="reflect")
        threshold = jump_factor * np.maximum(rolling, SWAP_MEDIAN_FLOOR_PX)
        flagged[1:][dx > threshold] = True

    left_x = series.data[:, L_ANKLE, 0]
    right_x = series.data[:, R_ANKLE, 0]
    left_c = series.data[:, L_ANKLE, 2]
    right_c = series.data[:, R_ANKLE, 2]
    separation = left_x - right_x
    trusted = (left_c >= confidence_threshold) & (right_c >= confidence_threshold)
    baseline = separation[trusted] if trusted.any() else separation
    dominant = float(np.sign(np.median(baseline)))
    if dominant != 0.0:
        crossed = (np.sign(separation) == -dominant) \
            & (left_c < confidence_threshold) \
            & (right_c < confidence_threshold)
        flagged |= crossed

    return np.flatnonzero(flagged)


def swap_fraction(flags: np.ndarray, start: int, end: int) -> float:
    """Fraction of frames in the inclusive range [start, end] that are flagged."""
    if end < start:
        raise ValueError("end must not precede start")
    flags = np.asarray(flags)
    count = int(np.count_nonzero((flags >= start) & (flags <= end)))
    return count / (end - start + 1)


def mask_low_confidence(series: KeypointSeries,
                        threshold: float = CONFIDENCE_THRESHOLD) -> KeypointSeries:
    """Replace low-confidence keypoint positions by temporal interpolation.

    For each keypoint, frames with confidence below ``threshold`` have
    their x and y linearly interpolated from the nearest confident frames
    (held at the edges). Confidences are left untouched so downstream
    code can still see which samples were observed. A keypoint with no
    confident frame anywhere stays as-is: it is unusable, and metric
    extraction raises QualityError when it is actually needed.
    """
    if not 0 <= threshold <= 1:
        raise ValueError("threshold must be within [0, 1]")
    data = series.data.copy()
    idx = np.arange(series.n_frames)
    for k in range(data.shape[1]):
        good = data[:, k, 2] >= threshold
        if good.all() or not good.any():
            continue
        for axis in (0, 1):
            data[:, k, axis] = np.interp(idx, idx[good], data[good, k, axis])
    return KeypointSeries(data=data, fps=series.fps,
                          diagnostics=list(series.diagnostics))


def keypoint_usable(series: KeypointSeries, index: int,
                    threshold: float = CONFIDENCE_THRESHOLD) -> bool:
    """True if the keypoint has at least one frame at or above threshold."""
    return bool(np.any(series.data[:, index, 2] >= threshold))
