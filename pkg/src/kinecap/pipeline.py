"""End-to-end session analysis and cross-device comparison.

``analyze_session`` turns one loaded session into per-repetition metric
records from the markerless stream plus the session's ground-truth
device (force plates for jump tasks, optical capture otherwise).
``analyze_study`` runs many sessions with per-session failure isolation,
and ``compare_records`` pools the records of a study into agreement
statistics per (task, metric, calibration method) row.

Records are plain frozen dataclasses so study outputs serialize
deterministically: rows are emitted in sorted order and floats use their
shortest round-tripping representation.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import body25
from .agreement import AgreementReport, build_report
from .calibration import (BARBELL_LENGTH_M, GRAVITY_MPS2, PtmScale,
                          ptm_from_gravity, ptm_from_height, ptm_from_object,
                          apply_scale)
from .errors import CalibrationError, ParseError, QualityError
from .kinemetrics import (concentric_window, flight_contact_dropjump,
                          flight_contact_rjt, hip_rotation_rom,
                          joint_angle_series, jump_height,
                          mean_angular_velocity, midhip_elevation,
                          rjt_hop_heights, rom_from_angle_series,
                          toe_elevation, vector_displacement_series,
                          velocity_metrics, wrist_elevation)
from .mocap_io import Session, load_session
from .preprocess import (CONFIDENCE_THRESHOLD, SWAP_DROP_FRACTION,
                         SegmentationConfig, Segment, Signal,
                         default_window_frames, detect_limb_swaps,
                         find_rep_maxima, mask_low_confidence, resample_to,
                         segment_from_bounds, segment_reps, smooth,
                         swap_fraction)
from .tasks import GROUND_TRUTH_DEVICE, METRIC_UNITS, TASKS

log = logging.getLogger(__name__)

UNLOADED_THRESHOLD_N = 20.0
PTM_METHODS = ("gravity", "height", "object")

RECORD_FIELDS = ("participant_id", "task", "metric", "unit", "device",
                 "ptm_method", "rep_index", "value")


@dataclass(frozen=True, order=True)
class MetricRecord:
    """One scalar outcome of one repetition on one device."""

    participant_id: str
    task: str
    metric: str
    unit: str
    device: str        # 'mmc', 'omc', 'forceplate'
    ptm_method: str    # 'gravity' | 'height' | 'object' | 'none'
    rep_index: int
    value: float


@dataclass(frozen=True)
class Diagnostic:
    """Why a session, device, or repetition produced no record."""

    participant_id: str
    task: str
    device: str
    reason: str
    rep_index: int | None = None


@dataclass
class RunConfig:
    """Study-wide analysis settings; per-session manifests refine them."""

    ptm_methods: tuple | None = None      # None: the task's own defaults
    gravity_mode: str = "fit"
    mask_threshold: float = CONFIDENCE_THRESHOLD
    sg_window: int | None = None          # None: 11 below 60 fps, else 31
    sg_order: int = 2
    segmentation: SegmentationConfig | None = None
    resample_to_truth_rate: bool = True
    swap_drop_fraction: float = SWAP_DROP_FRACTION
    angular_rest_s: float = 0.3
    jobs: int = 1

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if isinstance(kwargs.get("segmentation"), dict):
            kwargs["segmentation"] = SegmentationConfig(**kwargs["segmentation"])
        if kwargs.get("ptm_methods") is not None:
            kwargs["ptm_methods"] = tuple(kwargs["ptm_methods"])
        return cls(**kwargs)


@dataclass
class SessionResult:
    records: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)


@dataclass
class StudyResult:
    records: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    n_sessions: int = 0
    n_failed: int = 0


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _segmentation_config(manifest, cfg: RunConfig) -> SegmentationConfig:
    """Study config as the base, manifest-embedded fields on top."""
    base = cfg.segmentation or SegmentationConfig()
    if manifest.segmentation:
        base = replace(base, **manifest.segmentation)
    return base


def _positioned_segments(driver: Signal, manifest, cfg: RunConfig,
                         device: str, diags: list, ids: tuple) -> list:
    """Segment a driver signal, keeping each repetition's protocol position.

    Manual (start_s, end_s) bounds in the manifest take precedence over
    peak detection; positions then follow list order. With automatic
    segmentation a window that falls off the signal keeps its position in
    the numbering so records still align across devices.
    """
    pid, task = ids
    if manifest.manual_segments_s:
        out = []
        for k, (a, b) in enumerate(manifest.manual_segments_s):
            try:
                out.append((k, segment_from_bounds(driver, float(a), float(b),
                                                   device)))
            except ValueError as exc:
                diags.append(Diagnostic(pid, task, device, str(exc), k))
        return out
    segcfg = _segmentation_config(manifest, cfg)
    maxima = find_rep_maxima(driver, segcfg)
    segments, dropped = segment_reps(driver, maxima, segcfg, device)
    for reason in dropped:
        diags.append(Diagnostic(pid, task, device, reason))
    position = {int(m): i for i, m in enumerate(maxima)}
    return [(position[seg.source_index], seg) for seg in segments]


def _smooth_xy(series, index: int, window: int, order: int) -> np.ndarray:
    """Smooth one keypoint's x and y trajectories; returns (n, 2)."""
    out = np.empty((series.n_frames, 2))
    for axis in (0, 1):
        sig = Signal(values=series.data[:, index, axis].astype(float),
                     fps=series.fps, unit="px")
        out[:, axis] = smooth(sig, window, order).values
    return out


def _smooth_elevation_xy(series, index: int, window: int,
                         order: int) -> np.ndarray:
    """Like _smooth_xy but with y converted to upward elevation."""
    xy = _smooth_xy(series, index, window, order)
    xy[:, 1] = -xy[:, 1]
    return xy


def _build_ptm_scales(session: Session, spec, cfg: RunConfig,
                      masked, diags: list) -> dict:
    """Build every requested pixel-to-metre scale that is attainable."""
    manifest = session.manifest
    requested = tuple(cfg.ptm_methods) if cfg.ptm_methods else spec.ptm_methods
    scales: dict = {}
    for method in requested:
        if method not in PTM_METHODS:
            raise ValueError(f"unknown calibration method {method!r}")
        if method not in spec.ptm_methods:
            log.warning("calibration %r is not validated for task %s",
                        method, spec.code)
        try:
            if method == "gravity":
                com = midhip_elevation(masked)
                scales[method] = ptm_from_gravity(com.values, com.fps,
                                                  mode=cfg.gravity_mode)
            elif method == "height":
                if manifest.height_m is None:
                    raise CalibrationError(
                        "height calibration needs height_m in the manifest")
                scales[method] = ptm_from_height(masked, manifest.height_m)
            else:
                if manifest.object_len_px is None:
                    raise CalibrationError(
                        "object calibration needs object_len_px in the manifest")
                scales[method] = ptm_from_object(
                    manifest.object_len_px,
                    manifest.object_len_m or BARBELL_LENGTH_M)
        except (CalibrationError, QualityError) as exc:
            diags.append(Diagnostic(manifest.participant_id, spec.code,
                                    "mmc", f"calibration {method}: {exc}"))
    if not scales:
        raise QualityError(
            f"no usable pixel-to-metre calibration among {requested}")
    return scales


def _concentric_records(seg_m: Segment, ids: tuple, device: str,
                        ptm_method: str, pos: int,
                        target_len: int | None) -> list:
    """Velocity metrics of one scaled repetition segment."""
    pid, task = ids
    if target_len is not None:
        seg_m = resample_to(seg_m, target_len)
    window = concentric_window(seg_m.values)
    vm = velocity_metrics(seg_m.values, window)
    return [
        MetricRecord(pid, task, "peak_velocity_mps", "m_per_s", device,
                     ptm_method, pos, vm.peak_mps),
        MetricRecord(pid, task, "mean_velocity_mps", "m_per_s", device,
                     ptm_method, pos, vm.mean_mps),
    ]


# ---------------------------------------------------------------------------
# markerless stream
# ---------------------------------------------------------------------------

def _mmc_records(session: Session, spec, cfg: RunConfig,
                 diags: list) -> list:
    manifest = session.manifest
    series = session.keypoints
    side = manifest.dominant_side
    fps = series.fps
    ids = (manifest.participant_id, spec.code)
    pid = manifest.participant_id

    flags = detect_limb_swaps(series, side)
    masked = mask_low_confidence(series, cfg.mask_threshold)
    window = cfg.sg_window or default_window_frames(fps)
    n_rest = max(1, int(round(cfg.angular_rest_s * fps)))
    records: list = []

    def swap_ok(pos: int, start: int, end: int) -> bool:
        frac = swap_fraction(flags, start, end)
        if frac > cfg.swap_drop_fraction:
            diags.append(Diagnostic(
                pid, spec.code, "mmc",
                f"limb swaps flagged in {frac:.1%} of frames "
                f"(limit {cfg.swap_drop_fraction:.0%})", pos))
            return False
        return True

    if spec.family in ("jump", "dropjump"):
        # Smoothed toe drives segmentation and the countermovement height;
        # threshold and speed-peak detection run on the raw signal, where
        # ground contacts are exactly flat. Smoothing would bleed flight
        # samples across the contact corners and bias both the airborne
        # runs and the lowest-decile ground estimate.
        raw_toe = toe_elevation(masked, spec.bilateral, side)
        toe = smooth(raw_toe, window, cfg.sg_order)
        scales = _build_ptm_scales(session, spec, cfg, masked, diags)
        for pos, seg in _positioned_segments(toe, manifest, cfg, "mmc",
                                             diags, ids):
            if not swap_ok(pos, seg.start_index, seg.end_index):
                continue
            raw_seg = Signal(
                values=raw_toe.values[seg.start_index:seg.end_index + 1],
                fps=fps, unit="px")
            temporal_done = False
            for method in sorted(scales):
                try:
                    if spec.family == "jump":
                        value = jump_height(
                            apply_scale(seg.values, scales[method])).height_m
                    else:
                        # The last airborne run is the rebound flight;
                        # earlier runs belong to the platform and drop.
                        value = rjt_hop_heights(
                            apply_scale(raw_seg, scales[method]))[-1]
                except QualityError as exc:
                    diags.append(Diagnostic(pid, spec.code, "mmc",
                                            f"{method}: {exc}", pos))
                    continue
                records.append(MetricRecord(pid, spec.code, "jump_height_m",
                                            "m", "mmc", method, pos, value))
                if spec.family == "dropjump" and not temporal_done:
                    try:
                        tm = flight_contact_dropjump(
                            apply_scale(raw_seg, scales[method]))
                    except QualityError as exc:
                        diags.append(Diagnostic(pid, spec.code, "mmc",
                                                str(exc), pos))
                    else:
                        records.append(MetricRecord(
                            pid, spec.code, "flight_s", "s", "mmc", "none",
                            pos, tm.flight_s))
                        records.append(MetricRecord(
                            pid, spec.code, "contact_s", "s", "mmc", "none",
                            pos, tm.contact_s))
                    temporal_done = True

    elif spec.family == "rjt":
        # Hop heights and flight/contact detection run on the raw toe for
        # the same corner-bleed reason as the drop jump above.
        raw_toe = toe_elevation(masked, spec.bilateral, side)
        scales = _build_ptm_scales(session, spec, cfg, masked, diags)
        if swap_ok(0, 0, len(raw_toe) - 1):
            temporal_done = False
            for method in sorted(scales):
                sig_m = apply_scale(raw_toe, scales[method])
                for i, h in enumerate(rjt_hop_heights(sig_m)):
                    records.append(MetricRecord(
                        pid, spec.code, "jump_height_m", "m", "mmc", method,
                        i, h))
                if not temporal_done:
                    for i, tm in enumerate(flight_contact_rjt(sig_m)):
                        records.append(MetricRecord(
                            pid, spec.code, "flight_s", "s", "mmc", "none",
                            i, tm.flight_s))
                        records.append(MetricRecord(
                            pid, spec.code, "contact_s", "s", "mmc", "none",
                            i, tm.contact_s))
                    temporal_done = True

    elif spec.family == "velocity":
        bar = smooth(wrist_elevation(masked, cfg.mask_threshold), window,
                     cfg.sg_order)
        driver = Signal(values=-bar.values, fps=fps, unit="px") \
            if spec.invert_driver else bar
        scales = _build_ptm_scales(session, spec, cfg, masked, diags)
        target_ratio = None
        if cfg.resample_to_truth_rate and session.markers is not None:
            target_ratio = session.markers.fps / fps
        for pos, seg in _positioned_segments(driver, manifest, cfg, "mmc",
                                             diags, ids):
            if not swap_ok(pos, seg.start_index, seg.end_index):
                continue
            lo, hi = seg.start_index, seg.end_index
            for method in sorted(scales):
                raw = Signal(values=bar.values[lo:hi + 1].copy(), fps=fps,
                             unit="px")
                seg_px = replace(seg, values=raw)
                seg_m = replace(seg_px,
                                values=apply_scale(seg_px.values,
                                                   scales[method]))
                target = int(round(len(seg_m.values) * target_ratio)) \
                    if target_ratio else None
                try:
                    records.extend(_concentric_records(
                        seg_m, ids, "mmc", method, pos, target))
                except QualityError as exc:
                    diags.append(Diagnostic(pid, spec.code, "mmc",
                                            f"{method}: {exc}", pos))

    elif spec.family == "rotation":
        knee = _smooth_xy(masked, body25.KNEE[side], window, cfg.sg_order)
        ankle = _smooth_xy(masked, body25.ANKLE[side], window, cfg.sg_order)
        driver = vector_displacement_series(knee, ankle, (0, n_rest), fps)
        for pos, seg in _positioned_segments(driver, manifest, cfg, "mmc",
                                             diags, ids):
            if not swap_ok(pos, seg.start_index, seg.end_index):
                continue
            lo, hi = seg.start_index, seg.end_index
            try:
                am = hip_rotation_rom(knee[lo:hi + 1], ankle[lo:hi + 1],
                                      (0, n_rest), side, fps)
            except QualityError as exc:
                diags.append(Diagnostic(pid, spec.code, "mmc", str(exc), pos))
                continue
            records.append(MetricRecord(pid, spec.code, "rom_deg", "deg",
                                        "mmc", "none", pos, am.rom_deg))

    elif spec.family == "knee_angle":
        hip = _smooth_elevation_xy(masked, body25.HIP[side], window,
                                   cfg.sg_order)
        knee = _smooth_elevation_xy(masked, body25.KNEE[side], window,
                                    cfg.sg_order)
        ankle = _smooth_elevation_xy(masked, body25.ANKLE[side], window,
                                     cfg.sg_order)
        theta = joint_angle_series(hip, knee, ankle, fps)
        rest = float(np.mean(theta.values[:n_rest]))
        driver = Signal(values=np.abs(theta.values - rest), fps=fps,
                        unit="deg")
        for pos, seg in _positioned_segments(driver, manifest, cfg, "mmc",
                                             diags, ids):
            if not swap_ok(pos, seg.start_index, seg.end_index):
                continue
            lo, hi = seg.start_index, seg.end_index
            theta_seg = Signal(values=theta.values[lo:hi + 1].copy(), fps=fps,
                               unit="deg")
            try:
                rom = rom_from_angle_series(theta_seg, (0, n_rest))
                # Velocity is judged on the approach only: slicing at the
                # repetition's own peak keeps the return sweep out.
                approach = Signal(
                    values=theta.values[lo:seg.source_index + 1].copy(),
                    fps=fps, unit="deg")
                mav = mean_angular_velocity(approach)
            except QualityError as exc:
                diags.append(Diagnostic(pid, spec.code, "mmc", str(exc), pos))
                continue
            records.append(MetricRecord(pid, spec.code, "rom_deg", "deg",
                                        "mmc", "none", pos, rom))
            records.append(MetricRecord(
                pid, spec.code, "mean_angular_velocity_dps", "deg_per_s",
                "mmc", "none", pos, mav))

    elif spec.family == "leg_raise":
        hip = _smooth_elevation_xy(masked, body25.HIP[side], window,
                                   cfg.sg_order)
        ankle = _smooth_elevation_xy(masked, body25.ANKLE[side], window,
                                     cfg.sg_order)
        driver = vector_displacement_series(hip, ankle, (0, n_rest), fps)
        for pos, seg in _positioned_segments(driver, manifest, cfg, "mmc",
                                             diags, ids):
            if not swap_ok(pos, seg.start_index, seg.end_index):
                continue
            lo, hi = seg.start_index, seg.end_index
            disp_seg = Signal(values=driver.values[lo:hi + 1].copy(), fps=fps,
                              unit="deg")
            try:
                rom = rom_from_angle_series(disp_seg, (0, n_rest))
            except QualityError as exc:
                diags.append(Diagnostic(pid, spec.code, "mmc", str(exc), pos))
                continue
            records.append(MetricRecord(pid, spec.code, "rom_deg", "deg",
                                        "mmc", "none", pos, rom))

    else:
        raise ValueError(f"unhandled task family {spec.family!r}")
    return records


# ---------------------------------------------------------------------------
# optical stream (ground truth for non-jump tasks)
# ---------------------------------------------------------------------------

def _marker_m(markers, base: str, side: str) -> np.ndarray:
    suffix = "R" if side == "right" else "L"
    for name in (f"{base}_{suffix}", base):
        if name in markers.markers:
            return markers.marker_m(name)
    raise QualityError(
        f"optical stream lacks marker {base}_{suffix}; "
        f"available: {sorted(markers.markers)}")


def _bar_elevation_m(markers) -> Signal:
    cols = [markers.marker_m(n)[:, 2]
            for n in ("barbell_L", "barbell_R") if n in markers.markers]
    if not cols:
        raise QualityError("optical stream has no barbell markers")
    return Signal(values=np.mean(cols, axis=0), fps=markers.fps, unit="m")


def _omc_records(session: Session, spec, cfg: RunConfig,
                 diags: list) -> list:
    markers = session.markers
    manifest = session.manifest
    side = manifest.dominant_side
    fps = markers.fps
    ids = (manifest.participant_id, spec.code)
    pid = manifest.participant_id
    window = default_window_frames(fps)
    n_rest = max(1, int(round(cfg.angular_rest_s * fps)))
    records: list = []

    def smooth3(arr: np.ndarray) -> np.ndarray:
        out = np.empty_like(arr)
        for c in range(arr.shape[1]):
            out[:, c] = smooth(Signal(values=arr[:, c], fps=fps, unit="m"),
                               window, cfg.sg_order).values
        return out

    if spec.family == "velocity":
        bar = smooth(_bar_elevation_m(markers), window, cfg.sg_order)
        driver = Signal(values=-bar.values, fps=fps, unit="m") \
            if spec.invert_driver else bar
        for pos, seg in _positioned_segments(driver, manifest, cfg, "omc",
                                             diags, ids):
            lo, hi = seg.start_index, seg.end_index
            seg_m = replace(seg, values=Signal(
                values=bar.values[lo:hi + 1].copy(), fps=fps, unit="m"))
            try:
                records.extend(_concentric_records(seg_m, ids, "omc", "none",
                                                   pos, None))
            except QualityError as exc:
                diags.append(Diagnostic(pid, spec.code, "omc", str(exc), pos))

    elif spec.family == "rotation":
        knee3 = smooth3(_marker_m(markers, "knee", side))
        ankle3 = smooth3(_marker_m(markers, "ankle", side))
        knee = knee3[:, [0, 2]]   # frontal plane: lateral x, vertical z
        ankle = ankle3[:, [0, 2]]
        driver = vector_displacement_series(knee, ankle, (0, n_rest), fps)
        for pos, seg in _positioned_segments(driver, manifest, cfg, "omc",
                                             diags, ids):
            lo, hi = seg.start_index, seg.end_index
            try:
                am = hip_rotation_rom(knee[lo:hi + 1], ankle[lo:hi + 1],
                                      (0, n_rest), side, fps)
            except QualityError as exc:
                diags.append(Diagnostic(pid, spec.code, "omc", str(exc), pos))
                continue
            records.append(MetricRecord(pid, spec.code, "rom_deg", "deg",
                                        "omc", "none", pos, am.rom_deg))

    elif spec.family == "knee_angle":
        hip = smooth3(_marker_m(markers, "hip", side))
        knee = smooth3(_marker_m(markers, "knee", side))
        ankle = smooth3(_marker_m(markers, "ankle", side))
        theta = joint_angle_series(hip, knee, ankle, fps)
        rest = float(np.mean(theta.values[:n_rest]))
        driver = Signal(values=np.abs(theta.values - rest), fps=fps,
                        unit="deg")
        for pos, seg in _positioned_segments(driver, manifest, cfg, "omc",
                                             diags, ids):
            lo, hi = seg.start_index, seg.end_index
            theta_seg = Signal(values=theta.values[lo:hi + 1].copy(),
                               fps=fps, unit="deg")
            try:
                rom = rom_from_angle_series(theta_seg, (0, n_rest))
                approach = Signal(
                    values=theta.values[lo:seg.source_index + 1].copy(),
                    fps=fps, unit="deg")
                mav = mean_angular_velocity(approach)
            except QualityError as exc:
                diags.append(Diagnostic(pid, spec.code, "omc", str(exc), pos))
                continue
            records.append(MetricRecord(pid, spec.code, "rom_deg", "deg",
                                        "omc", "none", pos, rom))
            records.append(MetricRecord(
                pid, spec.code, "mean_angular_velocity_dps", "deg_per_s",
                "omc", "none", pos, mav))

    elif spec.family == "leg_raise":
        hip = smooth3(_marker_m(markers, "hip", side))
        ankle = smooth3(_marker_m(markers, "ankle", side))
        driver = vector_displacement_series(hip, ankle, (0, n_rest), fps)
        for pos, seg in _positioned_segments(driver, manifest, cfg, "omc",
                                             diags, ids):
            lo, hi = seg.start_index, seg.end_index
            disp_seg = Signal(values=driver.values[lo:hi + 1].copy(),
                              fps=fps, unit="deg")
            try:
                rom = rom_from_angle_series(disp_seg, (0, n_rest))
            except QualityError as exc:
                diags.append(Diagnostic(pid, spec.code, "omc", str(exc), pos))
                continue
            records.append(MetricRecord(pid, spec.code, "rom_deg", "deg",
                                        "omc", "none", pos, rom))
    else:
        log.debug("optical stream present but unused for family %s",
                  spec.family)
    return records


# ---------------------------------------------------------------------------
# force plates (ground truth for jump tasks)
# ---------------------------------------------------------------------------

def _unloaded_runs(force_n: np.ndarray,
                   threshold: float = UNLOADED_THRESHOLD_N) -> list:
    """Interior spans where the plate is unloaded, as inclusive index runs.

    Runs touching either end of the record are standing-start or walk-off
    artefacts, not flights, and are excluded.
    """
    unloaded = force_n < threshold
    runs = []
    start = None
    for i, u in enumerate(unloaded):
        if u and start is None:
            start = i
        elif not u and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(force_n) - 1))
    return [(s, e) for s, e in runs if s > 0 and e < len(force_n) - 1]


def _plate_records(session: Session, spec, cfg: RunConfig,
                   diags: list) -> list:
    plate = session.forceplate
    manifest = session.manifest
    pid = manifest.participant_id
    fps = plate.fps
    runs = _unloaded_runs(plate.force_n)
    records: list = []

    def height(flight_s: float) -> float:
        # Ballistic identity: a body airborne for t seconds rose g*t^2/8.
        return GRAVITY_MPS2 * flight_s * flight_s / 8.0

    if spec.family == "jump":
        if not runs:
            raise QualityError("force plate shows no flight phase")
        for i, (s, e) in enumerate(runs):
            records.append(MetricRecord(pid, spec.code, "jump_height_m", "m",
                                        "forceplate", "none", i,
                                        height((e - s + 1) / fps)))
    elif spec.family == "rjt":
        if len(runs) < 2:
            raise QualityError(
                f"repeated jumps need at least 2 plate flights, found "
                f"{len(runs)}")
        for i, (s, e) in enumerate(runs):
            records.append(MetricRecord(pid, spec.code, "jump_height_m", "m",
                                        "forceplate", "none", i,
                                        height((e - s + 1) / fps)))
        for i, ((s0, e0), (s1, _)) in enumerate(zip(runs, runs[1:])):
            records.append(MetricRecord(pid, spec.code, "flight_s", "s",
                                        "forceplate", "none", i,
                                        (e0 - s0 + 1) / fps))
            records.append(MetricRecord(pid, spec.code, "contact_s", "s",
                                        "forceplate", "none", i,
                                        (s1 - e0 - 1) / fps))
    elif spec.family == "dropjump":
        # Per repetition the plate unloads twice: for the drop from the
        # platform, then for the rebound flight. Pair runs accordingly.
        if len(runs) < 2 or len(runs) % 2:
            raise QualityError(
                f"drop jumps unload the plate twice per repetition; found "
                f"{len(runs)} unloaded spans")
        for i in range(0, len(runs), 2):
            (s0, e0), (s1, e1) = runs[i], runs[i + 1]
            rep = i // 2
            flight = (e1 - s1 + 1) / fps
            records.append(MetricRecord(pid, spec.code, "jump_height_m", "m",
                                        "forceplate", "none", rep,
                                        height(flight)))
            records.append(MetricRecord(pid, spec.code, "flight_s", "s",
                                        "forceplate", "none", rep, flight))
            records.append(MetricRecord(pid, spec.code, "contact_s", "s",
                                        "forceplate", "none", rep,
                                        (s1 - e0 - 1) / fps))
    else:
        log.debug("force plate present but unused for family %s", spec.family)
    return records


# ---------------------------------------------------------------------------
# session and study drivers
# ---------------------------------------------------------------------------

def _reference_records(session: Session, spec, diags: list) -> list:
    """Scalar truth values quoted directly in the manifest."""
    manifest = session.manifest
    ref = manifest.reference_metrics or {}
    records = []
    for metric in sorted(ref):
        if metric not in METRIC_UNITS:
            diags.append(Diagnostic(manifest.participant_id, spec.code,
                                    spec.truth_device,
                                    f"unknown reference metric {metric!r}"))
            continue
        values = ref[metric]
        if np.ndim(values) == 0:
            values = [values]
        for i, v in enumerate(values):
            records.append(MetricRecord(
                manifest.participant_id, spec.code, metric,
                METRIC_UNITS[metric], spec.truth_device, "none", i, float(v)))
    return records


def analyze_session(session: Session,
                    config: RunConfig | None = None) -> SessionResult:
    """All per-repetition records of one session, plus its diagnostics.

    The markerless stream and the ground-truth stream are processed
    independently; a failure on one side becomes a diagnostic and the
    other side still reports. Manifest ``reference_metrics`` take
    precedence over parsing the truth stream for the metrics they name.

    Raises
    ------
    QualityError
        If the session produces no records at all.
    """
    cfg = config or RunConfig()
    spec = TASKS[session.manifest.task_code]
    pid = session.manifest.participant_id
    result = SessionResult()

    try:
        result.records.extend(
            _mmc_records(session, spec, cfg, result.diagnostics))
    except (QualityError, CalibrationError, ParseError) as exc:
        result.diagnostics.append(Diagnostic(pid, spec.code, "mmc", str(exc)))

    reference = _reference_records(session, spec, result.diagnostics)
    covered = {r.metric for r in reference}
    stream: list = []
    try:
        if spec.truth_device == "omc" and session.markers is not None:
            stream = _omc_records(session, spec, cfg, result.diagnostics)
        elif spec.truth_device == "forceplate" \
                and session.forceplate is not None:
            stream = _plate_records(session, spec, cfg, result.diagnostics)
    except (QualityError, CalibrationError, ParseError) as exc:
        result.diagnostics.append(Diagnostic(pid, spec.code,
                                             spec.truth_device, str(exc)))
    result.records.extend(reference)
    result.records.extend(r for r in stream if r.metric not in covered)

    if not result.records:
        raise QualityError(
            f"session {pid}/{spec.code} produced no records; "
            f"see diagnostics")
    result.records.sort()
    return result


def analyze_study(manifest_paths, config: RunConfig | None = None) -> StudyResult:
    """Analyze many sessions with per-session failure isolation.

    A session that raises is recorded as a failure diagnostic; the other
    sessions still run. Callers decide what overall failure means (the
    CLI exits nonzero only when every session failed).
    """
    cfg = config or RunConfig()
    paths = list(manifest_paths)
    study = StudyResult(n_sessions=len(paths))

    def run_one(path: str):
        session = load_session(path)
        return analyze_session(session, cfg)

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = [pool.submit(run_one, p) for p in paths]
            outcomes = []
            for fut in futures:
                try:
                    outcomes.append(fut.result())
                except Exception as exc:  # noqa: BLE001 - isolation boundary
                    outcomes.append(exc)
    else:
        outcomes = []
        for p in paths:
            try:
                outcomes.append(run_one(p))
            except Exception as exc:  # noqa: BLE001 - isolation boundary
                outcomes.append(exc)

    for path, outcome in zip(paths, outcomes):
        if isinstance(outcome, SessionResult):
            study.records.extend(outcome.records)
            study.diagnostics.extend(outcome.diagnostics)
        else:
            if not isinstance(outcome, (QualityError, CalibrationError,
                                        ParseError, ValueError, OSError,
                                        KeyError)):
                raise outcome
            study.n_failed += 1
            study.diagnostics.append(Diagnostic(
                "?", "?", "session", f"{path}: {outcome}"))
            log.error("session %s failed: %s", path, outcome)
    study.records.sort()
    return study


# ---------------------------------------------------------------------------
# cross-device comparison
# ---------------------------------------------------------------------------

def compare_records(records) -> tuple:
    """Pool study records into per-(task, metric, calibration) agreement rows.

    Markerless values pair with the task's ground-truth device on
    (participant, repetition). Returns (reports, pairs) where ``pairs``
    maps each row's (task, metric, ptm_method) to its matched
    [participant, rep_index, measured, truth] rows for scatter output.
    Combinations with fewer than two matched pairs are skipped with a
    warning: no agreement statistic is defined there.
    """
    truth: dict = {}
    measured: dict = {}
    for r in records:
        if r.task not in GROUND_TRUTH_DEVICE:
            raise ValueError(f"record carries unknown task {r.task!r}")
        if r.device == "mmc":
            measured.setdefault((r.task, r.metric, r.ptm_method), {})[
                (r.participant_id, r.rep_index)] = r.value
        elif r.device == GROUND_TRUTH_DEVICE[r.task]:
            truth[(r.task, r.metric, r.participant_id, r.rep_index)] = r.value

    reports: list = []
    pairs_out: dict = {}
    for (task, metric, ptm) in sorted(measured):
        cell = measured[(task, metric, ptm)]
        matched = []
        unmatched = 0
        for (pid, rep) in sorted(cell):
            key = (task, metric, pid, rep)
            if key in truth:
                matched.append((pid, rep, cell[(pid, rep)], truth[key]))
            else:
                unmatched += 1
        if len(matched) < 2:
            log.warning(
                "skipping %s/%s/%s: %d matched pair(s), need at least 2",
                task, metric, ptm, len(matched))
            continue
        pair_arr = np.array([[m, t] for (_, _, m, t) in matched])

        participants = sorted({pid for (pid, _) in cell})
        reps = sorted({rep for (_, rep) in cell})
        rep_matrix = None
        if len(participants) >= 2 and len(reps) >= 2:
            rep_matrix = np.full((len(participants), len(reps)), np.nan)
            for (pid, rep), v in cell.items():
                rep_matrix[participants.index(pid), reps.index(rep)] = v

        reports.append(build_report(metric, task, ptm, METRIC_UNITS[metric],
                                    pair_arr, rep_matrix=rep_matrix,
                                    n_unmatched=unmatched))
        pairs_out[(task, metric, ptm)] = matched
    return reports, pairs_out


# ---------------------------------------------------------------------------
# deterministic serialization
# ---------------------------------------------------------------------------

def atomic_write_text(path: str, text: str) -> None:
    """Write a file atomically: temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def records_csv_text(records) -> str:
    """Records as CSV with shortest round-tripping float text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORD_FIELDS)
    for r in sorted(records):
        writer.writerow([_cell(getattr(r, f)) for f in RECORD_FIELDS])
    return buf.getvalue()


def parse_records_csv(path: str) -> list:
    """Read records written by ``records_csv_text``."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(RECORD_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise ParseError(f"{path}: missing record columns "
                             f"{sorted(missing)}")
        for i, row in enumerate(reader):
            try:
                out.append(MetricRecord(
                    participant_id=row["participant_id"], task=row["task"],
                    metric=row["metric"], unit=row["unit"],
                    device=row["device"], ptm_method=row["ptm_method"],
                    rep_index=int(row["rep_index"]),
                    value=float(row["value"])))
            except (TypeError, ValueError) as exc:
                raise ParseError(f"{path} row {i + 2}: {exc}") from exc
    return out


def diagnostics_json_text(diagnostics) -> str:
    rows = [asdict(d) for d in diagnostics]
    return json.dumps(rows, indent=2, sort_keys=True) + "\n"


def write_study_outputs(study: StudyResult, out_dir: str) -> list:
    """Write per-task record CSVs plus study-wide JSON mirrors.

    Layout: ``<out>/<task>/metrics.csv`` per task present, plus
    ``<out>/metrics.json`` and ``<out>/diagnostics.json``. Returns the
    paths written.
    """
    written = []
    by_task: dict = {}
    for r in study.records:
        by_task.setdefault(r.task, []).append(r)
    for task in sorted(by_task):
        path = os.path.join(out_dir, task, "metrics.csv")
        atomic_write_text(path, records_csv_text(by_task[task]))
        written.append(path)
    meta = {
        "n_sessions": study.n_sessions,
        "n_failed": study.n_failed,
        "records": [asdict(r) for r in sorted(study.records)],
    }
    path = os.path.join(out_dir, "metrics.json")
    atomic_write_text(path, json.dumps(meta, indent=2, sort_keys=True) + "\n")
    written.append(path)
    path = os.path.join(out_dir, "diagnostics.json")
    atomic_write_text(path, diagnostics_json_text(study.diagnostics))
    written.append(path)
    return written


def collect_records(paths) -> list:
    """Gather records from metrics.csv files, directories, or both."""
    files: list = []
    for p in paths:
        if os.path.isdir(p):
            for root, _, names in sorted(os.walk(p)):
                for name in sorted(names):
                    if name == "metrics.csv":
                        files.append(os.path.join(root, name))
        elif p.endswith(".csv"):
            files.append(p)
        else:
            raise ParseError(f"{p}: expected a directory or a .csv file")
    if not files:
        raise ParseError(f"no metrics.csv found under {list(paths)}")
    records: list = []
    for f in files:
        records.extend(parse_records_csv(f))
    return sorted(set(records))
