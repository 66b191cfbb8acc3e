"""kinecap: markerless motion-capture batch analytics.

Reproducible extraction of jump, lift-velocity, temporal, and joint-angle
metrics from 2D pose keypoints, with pixel-to-metre calibration, agreement
statistics against reference devices, and synthetic benchmark generation.
"""

from .agreement import (AgreementReport, BlandAltman, bland_altman,
                        classify_icc, icc_2_1, icc_3_1, mae, trr)
from .calibration import (GRAVITY_MPS2, PtmScale, fit_free_fall,
                          ptm_from_gravity, ptm_from_height, ptm_from_object,
                          apply_scale)
from .errors import CalibrationError, ParseError, QualityError
from .kinemetrics import (concentric_window, flight_contact_dropjump,
                          flight_contact_rjt, jump_height, velocity_metrics)
from .mocap_io import (ForcePlateRecord, KeypointSeries, MarkerSeries,
                       Session, SessionManifest, load_session,
                       parse_forceplate_csv, parse_manifest, parse_omc_csv,
                       parse_openpose_dir)
from .pipeline import (Diagnostic, MetricRecord, RunConfig, StudyResult,
                       analyze_session, analyze_study, compare_records)
from .preprocess import (SegmentationConfig, Signal, default_window_frames,
                         detect_limb_swaps, find_rep_maxima,
                         mask_low_confidence, resample_to, segment_reps,
                         smooth)
from .synth import SynthParams, SynthTruth, build_mini_study, generate, \
    write_session
from .tasks import TASKS, TASK_CODES

__version__ = "0.1.0"

__all__ = [
    "AgreementReport", "BlandAltman", "CalibrationError", "Diagnostic",
    "ForcePlateRecord", "GRAVITY_MPS2", "KeypointSeries", "MarkerSeries",
    "MetricRecord", "ParseError", "PtmScale", "QualityError", "RunConfig",
    "SegmentationConfig", "Session", "SessionManifest", "Signal",
    "StudyResult", "SynthParams", "SynthTruth", "TASKS", "TASK_CODES",
    "analyze_session", "analyze_study", "apply_scale", "bland_altman",
    "build_mini_study", "classify_icc", "compare_records",
    "concentric_window", "default_window_frames", "detect_limb_swaps",
    "find_rep_maxima", "fit_free_fall", "flight_contact_dropjump",
    "flight_contact_rjt", "generate", "icc_2_1", "icc_3_1", "jump_height",
    "load_session", "mae", "mask_low_confidence", "parse_forceplate_csv",
    "parse_manifest", "parse_omc_csv", "parse_openpose_dir",
    "ptm_from_gravity", "ptm_from_height", "ptm_from_object", "resample_to",
    "segment_reps", "smooth", "trr", "velocity_metrics", "write_session",
]
