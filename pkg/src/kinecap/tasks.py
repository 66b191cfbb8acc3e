"""Task registry: what each task code measures and how it is processed.

Twelve task codes cover four processing families:

- ``velocity``: barbell lifts tracked through the wrists; peak and mean
  concentric velocity against optical capture.
- ``jump`` / ``dropjump`` / ``rjt``: vertical jumps tracked through the
  toes; jump height and (for drop/repeated jumps) flight and contact
  times against the force plates.
- ``rotation`` / ``knee_angle`` / ``leg_raise``: joint range of motion
  (plus angular velocity for the knee tasks) against optical capture.

``invert_driver`` marks tasks whose repetitions bottom out rather than
peak (back squat), so the segmentation driver is negated before maxima
detection.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class TaskSpec:
    code: str
    name: str
    family: str
    truth_device: str           # 'omc' or 'forceplate'
    metrics: tuple
    bilateral: bool = True
    invert_driver: bool = False
    camera_view: str = "front"
    ptm_methods: tuple = ("height",)


TASKS = {
    spec.code: spec for spec in (
        TaskSpec("BSQ", "barbell back squat", "velocity", "omc",
                 ("peak_velocity_mps", "mean_velocity_mps"),
                 invert_driver=True, ptm_methods=("height", "object")),
        TaskSpec("OHP", "overhead press", "velocity", "omc",
                 ("peak_velocity_mps", "mean_velocity_mps"),
                 ptm_methods=("height", "object")),
        TaskSpec("CMJBL", "countermovement jump, bilateral", "jump",
                 "forceplate", ("jump_height_m",),
                 ptm_methods=("gravity", "height")),
        TaskSpec("CMJUL", "countermovement jump, unilateral", "jump",
                 "forceplate", ("jump_height_m",), bilateral=False,
                 ptm_methods=("gravity", "height")),
        TaskSpec("DJBL", "drop jump, bilateral", "dropjump", "forceplate",
                 ("jump_height_m", "flight_s", "contact_s"),
                 ptm_methods=("gravity", "height")),
        TaskSpec("DJUL", "drop jump, unilateral", "dropjump", "forceplate",
                 ("jump_height_m", "flight_s", "contact_s"), bilateral=False,
                 ptm_methods=("gravity", "height")),
        TaskSpec("RJT", "repeated jump test", "rjt", "forceplate",
                 ("jump_height_m", "flight_s", "contact_s"),
                 ptm_methods=("gravity", "height")),
        TaskSpec("NDC", "nordic curl", "knee_angle", "omc",
                 ("rom_deg", "mean_angular_velocity_dps"), bilateral=False,
                 camera_view="side", ptm_methods=()),
        TaskSpec("SLS", "single-leg squat", "knee_angle", "omc",
                 ("rom_deg", "mean_angular_velocity_dps"), bilateral=False,
                 camera_view="side", ptm_methods=()),
        TaskSpec("HER", "hip external rotation", "rotation", "omc",
                 ("rom_deg",), bilateral=False, ptm_methods=()),
        TaskSpec("HIR", "hip internal rotation", "rotation", "omc",
                 ("rom_deg",), bilateral=False, ptm_methods=()),
        TaskSpec("SLR", "straight leg raise", "leg_raise", "omc",
                 ("rom_deg",), bilateral=False, camera_view="side",
                 ptm_methods=()),
    )
}

TASK_CODES = frozenset(TASKS)

GROUND_TRUTH_DEVICE = {code: spec.truth_device for code, spec in TASKS.items()}

METRIC_UNITS = {
    "jump_height_m": "m",
    "flight_s": "s",
    "contact_s": "s",
    "peak_velocity_mps": "m_per_s",
    "mean_velocity_mps": "m_per_s",
    "rom_deg": "deg",
    "mean_angular_velocity_dps": "deg_per_s",
}
