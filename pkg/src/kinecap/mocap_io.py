"""Readers and writers for the three capture devices plus session manifests.

Devices
-------
- Markerless capture (MMC): one OpenPose BODY_25 JSON file per video frame,
  pixel coordinates plus per-keypoint confidence, nominally 30 fps.
- Optical capture (OMC): CSV of 3D marker trajectories in millimetres with
  ``marker.axis`` column headers, nominally 100 Hz. Blank cells mark marker
  occlusion and are filled by temporal linear interpolation.
- Force plate: single-column CSV of vertical force in newtons with a
  ``# fps=<n>`` header line.

A *session* is one recording of one participant performing one task; its
manifest is a flat JSON document naming the participant, the task code and
the on-disk location of each device stream.

Serialization is lossless: ``write_*`` followed by the matching ``parse_*``
reproduces the in-memory values bit for bit (floats are emitted with their
shortest round-trip representation).
"""

from __future__ import annotations

import csv
import json
import logging
import os
import re
from dataclasses import dataclass, field

import numpy as np

from .body25 import N_KEYPOINTS
from .errors import ParseError
from .tasks import GROUND_TRUTH_DEVICE, TASK_CODES

log = logging.getLogger(__name__)

MMC_DEFAULT_FPS = 30.0
OMC_DEFAULT_FPS = 100.0

_FRAME_INDEX_RE = re.compile(r"(\d+)")


@dataclass(frozen=True)
class Keypoint:
    """One 2D keypoint: pixel position and detector confidence."""

    x: float
    y: float
    confidence: float


@dataclass
class KeypointSeries:
    """BODY_25 keypoints over time.

    ``data`` has shape (n_frames, 25, 3) with columns x, y, confidence.
    ``diagnostics`` records frames that were rejected during parsing and
    replaced by zero-confidence placeholders, so frame indices always map
    one-to-one onto the source files.
    """

    data: np.ndarray
    fps: float = MMC_DEFAULT_FPS
    diagnostics: list = field(default_factory=list)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 3 or self.data.shape[1:] != (N_KEYPOINTS, 3):
            raise ValueError(
                f"keypoint data must have shape (n, {N_KEYPOINTS}, 3), "
                f"got {self.data.shape}"
            )
        if self.fps <= 0:
            raise ValueError("fps must be positive")

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.fps

    def xy(self, index: int) -> np.ndarray:
        """Trajectory of one keypoint, shape (n_frames, 2)."""
        return self.data[:, index, :2]

    def confidence(self, index: int) -> np.ndarray:
        """Confidence of one keypoint over time, shape (n_frames,)."""
        return self.data[:, index, 2]


@dataclass
class MarkerSeries:
    """Optical-capture marker trajectories in millimetres.

    ``markers`` maps marker name to an (n_frames, 3) array with columns
    x, y, z. All markers share a common frame count.
    """

    markers: dict
    fps: float = OMC_DEFAULT_FPS

    def __post_init__(self):
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        lengths = {name: arr.shape[0] for name, arr in self.markers.items()}
        if len(set(lengths.values())) > 1:
            raise ValueError(f"markers differ in frame count: {lengths}")

    @property
    def n_frames(self) -> int:
        if not self.markers:
            return 0
        return next(iter(self.markers.values())).shape[0]

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.fps

    def marker_m(self, name: str) -> np.ndarray:
        """One marker trajectory converted to metres, shape (n_frames, 3)."""
        if name not in self.markers:
            raise KeyError(f"marker {name!r} not in series "
                           f"(have {sorted(self.markers)})")
        return self.markers[name] / 1000.0


@dataclass
class ForcePlateRecord:
    """Vertical ground-reaction force in newtons at a fixed sample rate."""

    force_n: np.ndarray
    fps: float

    def __post_init__(self):
        self.force_n = np.asarray(self.force_n, dtype=float)
        if self.force_n.ndim != 1:
            raise ValueError("force record must be one-dimensional")
        if self.fps <= 0:
            raise ValueError("fps must be positive")

    @property
    def n_samples(self) -> int:
        return self.force_n.shape[0]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.fps


@dataclass
class SessionManifest:
    """Flat description of one recording session.

    Paths are stored as given in the manifest file; ``load_session``
    resolves them relative to the manifest's own directory.
    """

    participant_id: str
    task_code: str
    mmc_dir: str
    omc_csv: str | None = None
    forceplate_csv: str | None = None
    height_m: float | None = None
    dominant_side: str = "right"
    camera_view: str | None = None
    mmc_fps: float = MMC_DEFAULT_FPS
    omc_fps: float = OMC_DEFAULT_FPS
    object_len_px: float | None = None
    object_len_m: float | None = None
    manual_segments_s: list | None = None
    reference_metrics: dict | None = None
    segmentation: dict | None = None

    def __post_init__(self):
        if self.task_code not in TASK_CODES:
            raise ValueError(
                f"unknown task code {self.task_code!r}; "
                f"expected one of {sorted(TASK_CODES)}"
            )
        if self.dominant_side not in ("left", "right"):
            raise ValueError("dominant_side must be 'left' or 'right'")
        if self.height_m is not None and self.height_m <= 0:
            raise ValueError("height_m must be positive")


@dataclass
class Session:
    """A manifest together with its parsed device streams."""

    manifest: SessionManifest
    keypoints: KeypointSeries
    markers: MarkerSeries | None = None
    forceplate: ForcePlateRecord | None = None


def _frame_sort_key(path: str):
    """Order frame files by the last integer in the stem, then by name."""
    stem = os.path.splitext(os.path.basename(path))[0]
    matches = _FRAME_INDEX_RE.findall(stem)
    return (int(matches[-1]) if matches else -1, stem)


def _select_person(people: list) -> list:
    """Pick the person with the highest mean confidence (ties: lowest index)."""
    best_idx = 0
    best_mean = -1.0
    for idx, person in enumerate(people):
        kp = person.get("pose_keypoints_2d", [])
        if len(kp) != N_KEYPOINTS * 3:
            raise ParseError(
                f"pose_keypoints_2d has {len(kp)} values, "
                f"expected {N_KEYPOINTS * 3}"
            )
        mean_conf = float(np.mean(kp[2::3]))
        if mean_conf > best_mean:
            best_mean = mean_conf
            best_idx = idx
    return people[best_idx]["pose_keypoints_2d"]


def parse_openpose_dir(path: str, fps: float = MMC_DEFAULT_FPS) -> KeypointSeries:
    """Parse a directory of per-frame OpenPose BODY_25 JSON files.

    Frames are ordered by the trailing integer in each filename. A frame
    with no detected people becomes a zero-confidence frame; a malformed
    frame (invalid JSON, wrong keypoint count, non-finite values) is
    replaced by a zero-confidence frame and noted in ``diagnostics``
    rather than aborting the parse.

    Raises
    ------
    ParseError
        If the directory contains no JSON files at all.
    """
    files = sorted(
        (os.path.join(path, name) for name in os.listdir(path)
         if name.endswith(".json")),
        key=_frame_sort_key,
    )
    if not files:
        raise ParseError(f"no JSON frame files in {path!r}")

    data = np.zeros((len(files), N_KEYPOINTS, 3), dtype=float)
    diagnostics: list = []
    for i, fname in enumerate(files):
        try:
            with open(fname) as fh:
                doc = json.load(fh)
            people = doc.get("people", [])
            if not people:
                continue  # legitimate dropout: zero-confidence frame
            flat = np.asarray(_select_person(people), dtype=float)
            if not np.all(np.isfinite(flat)):
                raise ParseError("non-finite keypoint value")
            frame = flat.reshape(N_KEYPOINTS, 3)
            frame[:, 2] = np.clip(frame[:, 2], 0.0, 1.0)
            data[i] = frame
        except (json.JSONDecodeError, ParseError, ValueError, TypeError) as exc:
            diagnostics.append(f"frame {i} ({os.path.basename(fname)}): {exc}")

    if diagnostics:
        log.warning("%s: %d frame(s) rejected during parse", path, len(diagnostics))
    return KeypointSeries(data=data, fps=fps, diagnostics=diagnostics)


def write_openpose_dir(series: KeypointSeries, path: str,
                       prefix: str = "frame") -> None:
    """Write a KeypointSeries as one BODY_25 JSON file per frame.

    Inverse of ``parse_openpose_dir``: re-parsing the written directory
    reproduces ``series.data`` bit for bit. Frames that are entirely zero
    are written with an empty people list, matching how dropouts parse.
    """
    os.makedirs(path, exist_ok=True)
    for i in range(series.n_frames):
        frame = series.data[i]
        if np.all(frame == 0.0):
            people = []
        else:
            people = [{
                "person_id": [-1],
                "pose_keypoints_2d": [float(v) for v in frame.reshape(-1)],
            }]
        doc = {"version": 1.3, "people": people}
        fname = os.path.join(path, f"{prefix}_{i:012d}_keypoints.json")
        with open(fname, "w") as fh:
            json.dump(doc, fh)


def _interpolate_gaps(column: np.ndarray, name: str) -> np.ndarray:
    """Fill NaN runs by linear interpolation; edge gaps hold nearest value."""
    valid = np.isfinite(column)
    if valid.all():
        return column
    if not valid.any():
        raise ParseError(f"column {name!r} has no numeric samples")
    idx = np.arange(column.shape[0])
    # np.interp holds the first/last valid value across edge gaps.
    return np.interp(idx, idx[valid], column[valid])


def parse_omc_csv(path: str, fps: float | None = None) -> MarkerSeries:
    """Parse an optical-capture CSV of ``marker.axis`` columns (millimetres).

    Blank cells mark occlusion and are filled by linear interpolation over
    time; gaps at the ends hold the nearest observed value. The sample rate
    defaults to 100 Hz; a leading ``# fps=<n>`` comment line or the ``fps``
    argument overrides it.

    Raises
    ------
    ParseError
        On a non-numeric cell (reported with row and column), a row whose
        field count differs from the header, a header without a valid
        ``marker.axis`` shape, or an empty file.
    """
    header_fps = None
    header: list | None = None
    rows: list = []
    with open(path, newline="") as fh:
        for raw in csv.reader(fh):
            if not raw or (len(raw) == 1 and not raw[0].strip()):
                continue
            if raw[0].lstrip().startswith("#"):
                text = ",".join(raw).lstrip("# ").strip()
                if text.startswith("fps="):
                    header_fps = float(text[4:])
                continue
            if header is None:
                header = [cell.strip() for cell in raw]
            else:
                rows.append(raw)

    if header is None or not rows:
        raise ParseError(f"{path!r}: no marker data")
    for name in header:
        if "." not in name or name.rsplit(".", 1)[1] not in ("x", "y", "z"):
            raise ParseError(f"{path!r}: column {name!r} is not 'marker.axis'")

    n_cols = len(header)
    values = np.full((len(rows), n_cols), np.nan)
    for r, row in enumerate(rows):
        if len(row) != n_cols:
            raise ParseError(
                f"{path!r}: row {r + 2} has {len(row)} fields, expected {n_cols}"
            )
        for c, cell in enumerate(row):
            cell = cell.strip()
            if cell == "":
                continue  # occlusion
            try:
                values[r, c] = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path!r}: non-numeric cell at row {r + 2}, "
                    f"column {header[c]!r}: {cell!r}"
                ) from None

    for c in range(n_cols):
        values[:, c] = _interpolate_gaps(values[:, c], header[c])

    grouped: dict = {}
    for c, name in enumerate(header):
        marker, axis = name.rsplit(".", 1)
        grouped.setdefault(marker, {})[axis] = values[:, c]
    markers = {}
    for marker, axes in grouped.items():
        missing = {"x", "y", "z"} - set(axes)
        if missing:
            raise ParseError(
                f"{path!r}: marker {marker!r} missing axes {sorted(missing)}"
            )
        markers[marker] = np.column_stack([axes["x"], axes["y"], axes["z"]])

    effective_fps = fps if fps is not None else (
        header_fps if header_fps is not None else OMC_DEFAULT_FPS)
    return MarkerSeries(markers=markers, fps=effective_fps)


def write_omc_csv(markers: MarkerSeries, path: str) -> None:
    """Write a MarkerSeries to CSV; NaN cells are emitted blank (occlusion)."""
    names = sorted(markers.markers)
    header = [f"{n}.{axis}" for n in names for axis in ("x", "y", "z")]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        fh.write(f"# fps={_format_number(markers.fps)}\n")
        writer.writerow(header)
        for r in range(markers.n_frames):
            row = []
            for n in names:
                for a in range(3):
                    v = markers.markers[n][r, a]
                    row.append("" if np.isnan(v) else repr(float(v)))
            writer.writerow(row)


def parse_forceplate_csv(path: str) -> ForcePlateRecord:
    """Parse a single-column force CSV with a mandatory ``# fps=<n>`` header.

    Raises
    ------
    ParseError
        If the fps header is missing or non-positive, or a value fails to
        parse as a number.
    """
    fps = None
    values: list = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                text = line.lstrip("# ").strip()
                if text.startswith("fps="):
                    fps = float(text[4:])
                continue
            try:
                values.append(float(line.split(",")[0]))
            except ValueError:
                raise ParseError(
                    f"{path!r}: non-numeric force value at line {lineno}: "
                    f"{line!r}"
                ) from None
    if fps is None:
        raise ParseError(f"{path!r}: missing '# fps=<n>' header")
    if fps <= 0:
        raise ParseError(f"{path!r}: fps must be positive, got {fps}")
    if not values:
        raise ParseError(f"{path!r}: no force samples")
    return ForcePlateRecord(force_n=np.asarray(values), fps=fps)


def write_forceplate_csv(record: ForcePlateRecord, path: str) -> None:
    """Write a ForcePlateRecord in the format ``parse_forceplate_csv`` reads."""
    with open(path, "w") as fh:
        fh.write(f"# fps={_format_number(record.fps)}\n")
        for v in record.force_n:
            fh.write(repr(float(v)) + "\n")


def _format_number(v: float) -> str:
    """Integral floats as integers, others as shortest round-trip repr."""
    return str(int(v)) if float(v).is_integer() else repr(float(v))


_MANIFEST_FIELDS = {
    "participant_id", "task_code", "mmc_dir", "omc_csv", "forceplate_csv",
    "height_m", "dominant_side", "camera_view", "mmc_fps", "omc_fps",
    "object_len_px", "object_len_m", "manual_segments_s",
    "reference_metrics", "segmentation",
}


def parse_manifest(path: str) -> SessionManifest:
    """Parse a session manifest JSON file into a SessionManifest."""
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ParseError(f"{path!r}: manifest must be a JSON object")
    unknown = set(doc) - _MANIFEST_FIELDS
    if unknown:
        raise ParseError(f"{path!r}: unknown manifest keys {sorted(unknown)}")
    try:
        return SessionManifest(**doc)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path!r}: {exc}") from None


def load_session(manifest_path: str) -> Session:
    """Load a manifest plus every device stream it references.

    The task's ground-truth requirement is enforced here: a session whose
    task is validated against the force plates must carry a force-plate
    stream (or explicit ``reference_metrics``), and likewise for tasks
    validated against optical capture.

    Raises
    ------
    ParseError
        On manifest or stream schema violations, or when the stream
        required as ground truth for the task is absent.
    """
    manifest = parse_manifest(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))

    def resolve(p: str) -> str:
        return p if os.path.isabs(p) else os.path.join(base, p)

    keypoints = parse_openpose_dir(resolve(manifest.mmc_dir),
                                   fps=manifest.mmc_fps)
    markers = None
    if manifest.omc_csv:
        markers = parse_omc_csv(resolve(manifest.omc_csv),
                                fps=manifest.omc_fps)
    forceplate = None
    if manifest.forceplate_csv:
        forceplate = parse_forceplate_csv(resolve(manifest.forceplate_csv))

    truth_device = GROUND_TRUTH_DEVICE[manifest.task_code]
    have_reference = bool(manifest.reference_metrics)
    if truth_device == "omc" and markers is None and not have_reference:
        raise ParseError(
            f"task {manifest.task_code} is validated against optical capture "
            f"but the manifest provides neither omc_csv nor reference_metrics"
        )
    if truth_device == "forceplate" and forceplate is None and not have_reference:
        raise ParseError(
            f"task {manifest.task_code} is validated against force plates "
            f"but the manifest provides neither forceplate_csv nor "
            f"reference_metrics"
        )
    return Session(manifest=manifest, keypoints=keypoints,
                   markers=markers, forceplate=forceplate)
