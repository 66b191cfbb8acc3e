"""Synthetic capture sessions with exact programmed ground truth.

Each generator builds continuous-time trajectories for a stick figure
performing a task, renders them to BODY_25 pixel keypoints at a true
pixel-to-metre scale, and reports the analytic values a perfect analysis
would recover. Because the profiles are continuous functions of time,
the same session can be sampled at the markerless rate (30 fps), the
optical rate (100 Hz) and the force-plate rate (1 kHz) without any
cross-rate resampling artefacts.

With zero noise the rendered pixel trajectories are exact affine images
of the analytic trajectories; with a seed fixed, output is bit-identical
across runs. Limb-swap injection exchanges the left/right ankle channels
over a frame range and drops their confidences, mimicking a tracker
identity failure.

Phase durations are snapped to a 0.1 s grid so phase boundaries land on
both the 30 fps and 100 Hz sample grids; ballistic flight times are
snapped to the markerless frame grid only.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import body25
from .calibration import BARBELL_LENGTH_M, GRAVITY_MPS2
from .mocap_io import (ForcePlateRecord, KeypointSeries, MarkerSeries,
                       write_forceplate_csv, write_omc_csv,
                       write_openpose_dir)

IMAGE_W = 720
IMAGE_H = 1280
CENTRE_X_PX = 360.0
GROUND_Y_PX = 1150.0

BODY_MASS_KG = 75.0
PLATE_FPS = 1000.0

VARIANTS = ("cmj", "dropjump", "rjt", "press", "squat",
            "rotation", "curl", "legraise")

# Template pose: (x, elevation) as fractions of stature. x is lateral,
# positive toward the subject's left (image +x); elevation is height
# above ground. The shoulder-to-toe span is exactly 6/8 of stature, the
# assumption the height calibration rests on.
_TEMPLATE = {
    body25.NOSE: (0.00, 0.90),
    body25.NECK: (0.00, 0.78),
    body25.R_SHOULDER: (-0.10, 0.75),
    body25.L_SHOULDER: (0.10, 0.75),
    body25.R_ELBOW: (-0.13, 0.60),
    body25.L_ELBOW: (0.13, 0.60),
    body25.R_WRIST: (-0.15, 0.45),
    body25.L_WRIST: (0.15, 0.45),
    body25.MID_HIP: (0.00, 0.53),
    body25.R_HIP: (-0.06, 0.53),
    body25.L_HIP: (0.06, 0.53),
    body25.R_KNEE: (-0.07, 0.28),
    body25.L_KNEE: (0.07, 0.28),
    body25.R_ANKLE: (-0.08, 0.05),
    body25.L_ANKLE: (0.08, 0.05),
    body25.R_EYE: (-0.02, 0.92),
    body25.L_EYE: (0.02, 0.92),
    body25.R_EAR: (-0.04, 0.91),
    body25.L_EAR: (0.04, 0.91),
    body25.L_BIG_TOE: (0.09, 0.00),
    body25.L_SMALL_TOE: (0.11, 0.00),
    body25.L_HEEL: (0.07, 0.02),
    body25.R_BIG_TOE: (-0.09, 0.00),
    body25.R_SMALL_TOE: (-0.11, 0.00),
    body25.R_HEEL: (-0.07, 0.02),
}

_FEET = (body25.L_ANKLE, body25.R_ANKLE, body25.L_BIG_TOE, body25.R_BIG_TOE,
         body25.L_SMALL_TOE, body25.R_SMALL_TOE, body25.L_HEEL, body25.R_HEEL)
_KNEES = (body25.L_KNEE, body25.R_KNEE)
_ARMS = (body25.L_WRIST, body25.R_WRIST, body25.L_ELBOW, body25.R_ELBOW)

# How much of a crouch each keypoint follows: feet stay grounded, knees
# flex halfway, everything above moves fully.
_CROUCH_WEIGHT = {kp: 0.0 for kp in _FEET}
_CROUCH_WEIGHT.update({kp: 0.5 for kp in _KNEES})


@dataclass
class SynthParams:
    """Knobs shared by all generators; unused fields are ignored per variant."""

    variant: str = "cmj"
    fps: float = 30.0
    ptm_true: float = 0.002          # metres per pixel of the rendering
    noise_sigma_px: float = 0.0
    seed: int = 0
    height_m: float = 1.75
    dominant_side: str = "right"
    reps: int = 3
    confidence: float = 0.9
    # jump family
    flight_s: object = 0.5           # scalar or one value per rep/hop
    contact_s: float = 0.3
    hops: int = 4
    drop_height_m: float = 0.22
    # lift family
    amplitude_m: float = 0.6
    concentric_s: float = 1.0
    # angular family
    rom_deg: float = 45.0
    sweep_s: float = 1.0
    rotation_sense: str = "internal"
    # failure injection
    swap_frames: tuple | None = None  # inclusive (start, end) frame range

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; "
                             f"expected one of {VARIANTS}")
        if self.dominant_side not in ("left", "right"):
            raise ValueError("dominant_side must be 'left' or 'right'")


@dataclass
class SynthTruth:
    """Analytic ground truth of one generated session."""

    variant: str
    ptm_true: float
    fps: float
    duration_s: float
    heights_m: list | None = None
    flights_s: list | None = None
    contacts_s: list | None = None
    peak_velocity_mps: float | None = None
    mean_velocity_mps: float | None = None
    rom_deg: float | None = None
    mean_angular_velocity_dps: float | None = None
    rep_bounds_s: list | None = None
    segmentation: dict | None = None  # segmentation config suited to the fixture


@dataclass
class SynthSession:
    """Rendered keypoints, their truth, and the continuous-time profiles.

    ``profiles`` keeps the device-independent trajectory closures so
    ``write_session`` can sample the optical and force-plate streams at
    their own rates:

    - 'body', 'crouch', 'arm': scalar elevation offsets (metres) over time
    - 'points': keypoint index -> fn(t) -> (x_m, elevation_m) overrides
    - 'unloaded_windows': (start, end) spans where the plate reads zero
    - 'bar_elevation': absolute bar height fn (lift variants)
    """

    series: KeypointSeries
    truth: SynthTruth
    profiles: dict = field(default_factory=dict)


class _Timeline:
    """Piecewise scalar profile built phase by phase.

    Each phase appends (duration, fn(tau) -> value). Evaluation before the
    first phase returns the initial value; after the last, the final value.
    """

    def __init__(self, start_value: float = 0.0):
        self._phases: list = []
        self._t_end = 0.0
        self.value = start_value

    @property
    def t_end(self) -> float:
        return self._t_end

    def hold(self, duration: float) -> "_Timeline":
        v0 = self.value
        self._phases.append((self._t_end, self._t_end + duration,
                             lambda tau, v0=v0: np.full_like(tau, v0)))
        self._t_end += duration
        return self

    def move(self, duration: float, delta: float) -> "_Timeline":
        """Smooth move by ``delta``: half-cosine displacement (zero end velocity)."""
        v0 = self.value
        self._phases.append((
            self._t_end, self._t_end + duration,
            lambda tau, v0=v0, d=delta, T=duration:
                v0 + d * (1.0 - np.cos(np.pi * tau / T)) / 2.0,
        ))
        self._t_end += duration
        self.value = v0 + delta
        return self

    def piece(self, duration: float, fn, end_value: float) -> "_Timeline":
        """Arbitrary profile piece: ``fn(tau)`` over [0, duration)."""
        self._phases.append((self._t_end, self._t_end + duration, fn))
        self._t_end += duration
        self.value = end_value
        return self

    def ballistic(self, flight_s: float) -> "_Timeline":
        """Projectile arc returning to the current value after ``flight_s``."""
        v0 = self.value
        vz = GRAVITY_MPS2 * flight_s / 2.0
        self._phases.append((
            self._t_end, self._t_end + flight_s,
            lambda tau, v0=v0, vz=vz:
                v0 + vz * tau - GRAVITY_MPS2 * tau * tau / 2.0,
        ))
        self._t_end += flight_s
        return self

    def fall(self, duration: float) -> "_Timeline":
        """Free fall from rest at the current value."""
        v0 = self.value
        self._phases.append((
            self._t_end, self._t_end + duration,
            lambda tau, v0=v0: v0 - GRAVITY_MPS2 * tau * tau / 2.0,
        ))
        self._t_end += duration
        self.value = v0 - GRAVITY_MPS2 * duration * duration / 2.0
        return self

    def jump_to(self, value: float) -> "_Timeline":
        """Instant repositioning between repetitions (outside any segment)."""
        self.value = value
        return self

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.full(t.shape, self.value)
        if not self._phases:
            return out
        first_v = self._phases[0][2](np.array([0.0]))[0] \
            if callable(self._phases[0][2]) else self.value
        out[t < self._phases[0][0]] = first_v
        for t0, t1, fn in self._phases:
            mask = (t >= t0) & (t < t1)
            if mask.any():
                out[mask] = fn(t[mask] - t0)
        return out


def _snap(d: float) -> float:
    """Snap a duration to the 0.1 s phase grid (common to 30 and 100 fps)."""
    return round(d * 10.0) / 10.0


def _snap_frames(d: float, fps: float) -> float:
    """Snap a duration to the rendering frame grid."""
    return round(d * fps) / fps


def _per_rep(value, n: int, snap_fps: float | None = None) -> list:
    vals = list(value) if np.ndim(value) else [value] * n
    if len(vals) != n:
        raise ValueError(f"expected {n} per-rep values, got {len(vals)}")
    if snap_fps is not None:
        vals = [_snap_frames(v, snap_fps) for v in vals]
    return [float(v) for v in vals]


def _render(params: SynthParams, duration: float,
            body: _Timeline | None = None,
            crouch: _Timeline | None = None,
            arm: _Timeline | None = None,
            points: dict | None = None) -> KeypointSeries:
    """Sample the profiles at the markerless rate and rasterize to pixels."""
    n = int(round(duration * params.fps))
    t = np.arange(n) / params.fps
    h = params.height_m
    body_v = body(t) if body is not None else np.zeros(n)
    crouch_v = crouch(t) if crouch is not None else np.zeros(n)
    arm_v = arm(t) if arm is not None else np.zeros(n)

    data = np.zeros((n, body25.N_KEYPOINTS, 3))
    for kp, (x_frac, e_frac) in _TEMPLATE.items():
        if points is not None and kp in points:
            x_m, elev = points[kp](t)
        else:
            elev = e_frac * h + body_v + _CROUCH_WEIGHT.get(kp, 1.0) * crouch_v
            if kp in _ARMS:
                elev = elev + arm_v
            x_m = np.full(n, x_frac * h)
        data[:, kp, 0] = CENTRE_X_PX + x_m / params.ptm_true
        data[:, kp, 1] = GROUND_Y_PX - elev / params.ptm_true
        data[:, kp, 2] = params.confidence

    if params.swap_frames is not None:
        s, e = int(params.swap_frames[0]), int(params.swap_frames[1])
        if not 0 <= s <= e < n:
            raise ValueError(f"swap_frames {params.swap_frames} outside "
                             f"0..{n - 1}")
        la, ra = body25.L_ANKLE, body25.R_ANKLE
        block = data[s:e + 1]
        block[:, [la, ra], :2] = block[:, [ra, la], :2]
        block[:, [la, ra], 2] = 0.3

    if params.noise_sigma_px > 0:
        rng = np.random.default_rng(params.seed)
        data[:, :, :2] += rng.normal(0.0, params.noise_sigma_px,
                                     size=(n, body25.N_KEYPOINTS, 2))
    return KeypointSeries(data=data, fps=params.fps)


# ---------------------------------------------------------------------------
# jump family
# ---------------------------------------------------------------------------

def gen_jump(params: SynthParams) -> SynthSession:
    """Countermovement jumps, drop jumps, or a repeated hop train.

    Variants: 'cmj' (reps separated by rest), 'dropjump' (platform, drop,
    contact, flight; repositioned between reps; includes per-rep manual
    segment bounds), 'rjt' (one train of ``hops`` flights separated by
    ground contacts).
    """
    if params.variant == "cmj":
        return _gen_cmj(params)
    if params.variant == "dropjump":
        return _gen_dropjump(params)
    if params.variant == "rjt":
        return _gen_rjt(params)
    raise ValueError(f"gen_jump cannot build variant {params.variant!r}")


def _gen_cmj(params: SynthParams) -> SynthSession:
    flights = _per_rep(params.flight_s, params.reps, snap_fps=params.fps)
    body = _Timeline()
    crouch = _Timeline()
    unloaded: list = []
    bounds: list = []
    body.hold(1.0)
    crouch.hold(1.0)
    for tf in flights:
        start = body.t_end
        crouch.move(0.4, -0.12).move(0.2, 0.12)
        body.hold(0.6)
        unloaded.append((body.t_end, body.t_end + tf))
        body.ballistic(tf)
        crouch.hold(tf)
        crouch.move(0.2, -0.08).move(0.2, 0.08)
        body.hold(0.4 + 1.3)
        crouch.hold(1.3)
        bounds.append((start, body.t_end))
    duration = body.t_end
    series = _render(params, duration, body=body, crouch=crouch)
    max_tf = max(flights)
    truth = SynthTruth(
        variant="cmj", ptm_true=params.ptm_true, fps=params.fps,
        duration_s=duration,
        heights_m=[GRAVITY_MPS2 * tf * tf / 8.0 for tf in flights],
        flights_s=flights,
        rep_bounds_s=bounds,
        segmentation={
            "t1_s": 1.2, "t2_s": 0.5 + max_tf / 2.0,
            "expected_reps": params.reps,
        },
    )
    return SynthSession(series=series, truth=truth, profiles={
        "body": body, "crouch": crouch, "unloaded_windows": unloaded,
    })


def _gen_dropjump(params: SynthParams) -> SynthSession:
    flights = _per_rep(params.flight_s, params.reps, snap_fps=params.fps)
    contact = _snap(params.contact_s)
    drop_h = params.drop_height_m
    t_drop = math.sqrt(2.0 * drop_h / GRAVITY_MPS2)
    body = _Timeline(start_value=drop_h)
    crouch = _Timeline()
    unloaded: list = []
    bounds: list = []
    heights = []
    for tf in flights:
        rep_start = body.t_end
        # Stretch the platform rest so the touchdown lands on a frame.
        rest = 1.0
        touchdown = rep_start + rest + t_drop
        rest += _snap_frames(touchdown, params.fps) - touchdown \
            + (1.0 / params.fps if _snap_frames(touchdown, params.fps)
               < touchdown else 0.0)
        body.hold(rest)
        crouch.hold(rest)
        unloaded.append((body.t_end, body.t_end + t_drop))
        body.fall(t_drop)
        crouch.hold(t_drop)
        body.jump_to(0.0)
        body.hold(contact)
        crouch.move(contact / 2.0, -0.10).move(contact / 2.0, 0.10)
        unloaded.append((body.t_end, body.t_end + tf))
        body.ballistic(tf)
        crouch.hold(tf)
        crouch.move(0.2, -0.08).move(0.2, 0.08)
        body.hold(1.0)
        crouch.hold(0.6)
        bounds.append((rep_start + rest - 0.5, body.t_end - 0.1))
        heights.append(GRAVITY_MPS2 * tf * tf / 8.0)
        body.jump_to(drop_h)  # back onto the platform for the next rep
    duration = body.t_end
    series = _render(params, duration, body=body, crouch=crouch)
    truth = SynthTruth(
        variant="dropjump", ptm_true=params.ptm_true, fps=params.fps,
        duration_s=duration,
        heights_m=heights, flights_s=flights,
        contacts_s=[contact] * params.reps,
        rep_bounds_s=bounds,
    )
    return SynthSession(series=series, truth=truth, profiles={
        "body": body, "crouch": crouch, "unloaded_windows": unloaded,
    })


def _gen_rjt(params: SynthParams) -> SynthSession:
    flights = _per_rep(params.flight_s, params.hops, snap_fps=params.fps)
    contact = _snap(params.contact_s)
    body = _Timeline()
    crouch = _Timeline()
    unloaded: list = []
    body.hold(1.0)
    crouch.hold(0.7).move(0.15, -0.08).move(0.15, 0.08)
    for i, tf in enumerate(flights):
        unloaded.append((body.t_end, body.t_end + tf))
        body.ballistic(tf)
        crouch.hold(tf)
        if i < len(flights) - 1:
            body.hold(contact)
            crouch.move(contact / 2.0, -0.06).move(contact / 2.0, 0.06)
    body.hold(1.0)
    crouch.move(0.2, -0.08).move(0.2, 0.08)
    crouch.hold(max(0.0, body.t_end - crouch.t_end))
    duration = body.t_end
    series = _render(params, duration, body=body, crouch=crouch)
    truth = SynthTruth(
        variant="rjt", ptm_true=params.ptm_true, fps=params.fps,
        duration_s=duration,
        heights_m=[GRAVITY_MPS2 * tf * tf / 8.0 for tf in flights],
        flights_s=flights,
        contacts_s=[contact] * (params.hops - 1),
    )
    return SynthSession(series=series, truth=truth, profiles={
        "body": body, "crouch": crouch, "unloaded_windows": unloaded,
    })


# ---------------------------------------------------------------------------
# lift family
# ---------------------------------------------------------------------------

def gen_press(params: SynthParams) -> SynthSession:
    """Barbell lifts tracked through the wrists.

    Variant 'press': dip-drive. The bar descends into a countermovement
    dip, the concentric raise covers ``amplitude_m`` over
    ``concentric_s`` from the dip bottom, decelerates through a settle
    after lockout and is lowered back to the rack. Variant 'squat':
    descend first, concentric ascent afterwards, settle, re-rack a
    touch below the start.

    The dip and settle are parabolic arcs whose curvature matches the
    half-cosine concentric at the junctions, so the turning points stay
    put under quadratic smoothing and the concentric window recovers
    exactly the programmed raise: velocity peak amplitude*pi/(2*T),
    mean amplitude/T.
    """
    if params.variant not in ("press", "squat"):
        raise ValueError(f"gen_press cannot build variant {params.variant!r}")
    A = params.amplitude_m
    T = _snap(params.concentric_s)
    # Half the initial curvature of the half-cosine raise.
    q0 = A * math.pi ** 2 / (4.0 * T ** 2)
    t_dip = max(_snap(0.4 * T), 0.2)
    t_ret = max(_snap(0.8 * T), 0.2)
    dip = q0 * t_dip ** 2
    settle = 0.005  # re-rack offset breaking value ties with the rest level
    arm = _Timeline()
    bounds: list = []
    for _ in range(params.reps):
        start = arm.t_end
        level = arm.value
        if params.variant == "press":
            arm.hold(1.0)
            arm.piece(t_dip,
                      lambda tau, v0=level, q=q0, td=t_dip:
                          v0 - dip + q * (td - tau) ** 2,
                      level - dip)
            arm.move(T, A)
            arm.piece(t_dip,
                      lambda tau, v0=level + A - dip, q=q0:
                          v0 - q * tau ** 2,
                      level + A - 2.0 * dip)
            arm.move(t_ret, -(A - 2.0 * dip))
            arm.hold(1.0)
        else:
            arm.hold(1.0)
            arm.move(T, -A)
            arm.move(T, A)
            arm.piece(t_dip,
                      lambda tau, v0=level, q=q0: v0 - q * tau ** 2,
                      level - dip)
            arm.move(t_ret, dip - settle)
            arm.hold(1.0)
        bounds.append((start, arm.t_end))
    duration = arm.t_end
    series = _render(params, duration, arm=arm)
    if params.variant == "press":
        seg = {"t1_s": T + t_dip + 0.3, "t2_s": t_dip + t_ret + 0.3,
               "expected_reps": params.reps}
    else:
        seg = {"t1_s": T + 0.4, "t2_s": T + t_dip + t_ret + 0.3,
               "expected_reps": params.reps}
    truth = SynthTruth(
        variant=params.variant, ptm_true=params.ptm_true, fps=params.fps,
        duration_s=duration,
        peak_velocity_mps=A * math.pi / (2.0 * T),
        mean_velocity_mps=A / T,
        rep_bounds_s=bounds,
        segmentation=seg,
    )
    wrist_elev = _TEMPLATE[body25.L_WRIST][1] * params.height_m
    return SynthSession(series=series, truth=truth, profiles={
        "arm": arm,
        "bar_elevation": lambda t, a=arm, e0=wrist_elev: e0 + a(t),
    })


# ---------------------------------------------------------------------------
# angular family
# ---------------------------------------------------------------------------

def _sweep_timeline(rom_deg: float, sweep_s: float, reps: int) -> _Timeline:
    """Rotation angle profile: rest, sweep out, hold, sweep back, repeat."""
    ang = _Timeline()
    ang.hold(1.0)
    for _ in range(reps):
        ang.move(sweep_s, rom_deg)
        ang.hold(0.3)
        ang.move(sweep_s, -rom_deg)
        ang.hold(1.2)
    return ang


def gen_rotation(params: SynthParams) -> SynthSession:
    """Joint rotations with programmed range of motion.

    Variants: 'rotation' (seated hip rotation: knee fixed, tibia sweeps
    laterally in the frontal plane), 'curl' (kneeling forward fall: hip
    rotates about the fixed knee, knee angle opens from 90 degrees),
    'legraise' (lying: the whole leg rotates about the fixed hip from
    horizontal).
    """
    if params.variant == "rotation":
        return _gen_hip_rotation(params)
    if params.variant == "curl":
        return _gen_curl(params)
    if params.variant == "legraise":
        return _gen_legraise(params)
    raise ValueError(f"gen_rotation cannot build variant {params.variant!r}")


def _angular_truth(params: SynthParams, variant: str, duration: float,
                   with_velocity: bool) -> SynthTruth:
    T = _snap(params.sweep_s)
    mean_vel = None
    if with_velocity:
        # Onset at 5% of peak angular velocity, window onset to peak.
        t_on = (T / math.pi) * math.asin(0.05)
        phi = lambda tau: params.rom_deg * (1.0 - math.cos(math.pi * tau / T)) / 2.0
        mean_vel = (phi(T / 2.0) - phi(t_on)) / (T / 2.0 - t_on)
    return SynthTruth(
        variant=variant, ptm_true=params.ptm_true, fps=params.fps,
        duration_s=duration,
        rom_deg=params.rom_deg,
        mean_angular_velocity_dps=mean_vel,
        segmentation={"t1_s": T + 0.65, "t2_s": 0.4,
                      "expected_reps": params.reps},
    )


def _gen_hip_rotation(params: SynthParams) -> SynthSession:
    h = params.height_m
    T = _snap(params.sweep_s)
    ang = _sweep_timeline(params.rom_deg, T, params.reps)
    duration = ang.t_end
    side = params.dominant_side
    # Internal rotation swings a right foot toward image -x, a left foot
    # toward +x; external rotation is the mirror.
    direction = -1.0 if (side == "right") == (params.rotation_sense == "internal") \
        else 1.0
    knee_kp = body25.KNEE[side]
    ankle_kp = body25.ANKLE[side]
    knee_x = _TEMPLATE[knee_kp][0] * h
    knee_e = 0.30 * h
    tibia = 0.25 * h

    def ankle_fn(t):
        phi = np.radians(ang(t))
        return (knee_x + direction * tibia * np.sin(phi),
                knee_e - tibia * np.cos(phi))

    def follow(kp):
        dx = (_TEMPLATE[kp][0] - _TEMPLATE[ankle_kp][0]) * h
        de = (_TEMPLATE[kp][1] - _TEMPLATE[ankle_kp][1]) * h
        def fn(t, dx=dx, de=de):
            ax, ae = ankle_fn(t)
            return ax + dx, ae + de
        return fn

    points = {
        knee_kp: lambda t: (np.full(t.shape, knee_x), np.full(t.shape, knee_e)),
        ankle_kp: ankle_fn,
    }
    for kp in (body25.BIG_TOE[side],
               body25.L_SMALL_TOE if side == "left" else body25.R_SMALL_TOE,
               body25.L_HEEL if side == "left" else body25.R_HEEL):
        points[kp] = follow(kp)

    series = _render(params, duration, points=points)
    truth = _angular_truth(params, "rotation", duration, with_velocity=False)
    return SynthSession(series=series, truth=truth, profiles={
        "angle_deg": ang,
        "points": {"knee": points[knee_kp], "ankle": ankle_fn},
    })


def _gen_curl(params: SynthParams) -> SynthSession:
    h = params.height_m
    T = _snap(params.sweep_s)
    ang = _sweep_timeline(params.rom_deg, T, params.reps)
    duration = ang.t_end
    side = params.dominant_side
    knee_x = 0.0
    knee_e = 0.08 * h
    femur = 0.26 * h
    trunk = 0.30 * h
    ankle_x = knee_x - 0.24 * h  # tibia flat on the ground, pointing back
    ankle_e = 0.05 * h

    def hip_fn(t):
        phi = np.radians(ang(t))
        return (knee_x + femur * np.sin(phi), knee_e + femur * np.cos(phi))

    def shoulder_fn(t):
        phi = np.radians(ang(t))
        r = femur + trunk
        return (knee_x + r * np.sin(phi), knee_e + r * np.cos(phi))

    def offset_from(base_fn, dx, de):
        def fn(t):
            bx, be = base_fn(t)
            return bx + dx, be + de
        return fn

    const = lambda x, e: (lambda t: (np.full(t.shape, x), np.full(t.shape, e)))
    points = {
        body25.KNEE[side]: const(knee_x, knee_e),
        body25.ANKLE[side]: const(ankle_x, ankle_e),
        body25.BIG_TOE[side]: const(ankle_x - 0.06 * h, 0.02 * h),
        body25.HIP[side]: hip_fn,
        body25.MID_HIP: hip_fn,
        body25.SHOULDER[side]: shoulder_fn,
        body25.NECK: shoulder_fn,
        body25.NOSE: offset_from(shoulder_fn, 0.02 * h, 0.1 * h),
    }
    # Mirror leg rests beside the working one.
    other = "left" if side == "right" else "right"
    points[body25.KNEE[other]] = const(knee_x + 0.04 * h, knee_e)
    points[body25.ANKLE[other]] = const(ankle_x + 0.04 * h, ankle_e)
    points[body25.HIP[other]] = hip_fn

    series = _render(params, duration, points=points)
    truth = _angular_truth(params, "curl", duration, with_velocity=True)
    return SynthSession(series=series, truth=truth, profiles={
        "angle_deg": ang,
        "points": {"hip": hip_fn, "knee": points[body25.KNEE[side]],
                   "ankle": points[body25.ANKLE[side]]},
    })


def _gen_legraise(params: SynthParams) -> SynthSession:
    h = params.height_m
    T = _snap(params.sweep_s)
    ang = _sweep_timeline(params.rom_deg, T, params.reps)
    duration = ang.t_end
    side = params.dominant_side
    hip_x = -0.10 * h
    hip_e = 0.12 * h
    leg = 0.47 * h

    def ankle_fn(t):
        phi = np.radians(ang(t))
        return (hip_x + leg * np.cos(phi), hip_e + leg * np.sin(phi))

    def knee_fn(t):
        phi = np.radians(ang(t))
        return (hip_x + 0.5 * leg * np.cos(phi), hip_e + 0.5 * leg * np.sin(phi))

    const = lambda x, e: (lambda t: (np.full(t.shape, x), np.full(t.shape, e)))
    points = {
        body25.HIP[side]: const(hip_x, hip_e),
        body25.MID_HIP: const(hip_x, hip_e),
        body25.ANKLE[side]: ankle_fn,
        body25.KNEE[side]: knee_fn,
        body25.BIG_TOE[side]: lambda t: _offset_tuple(ankle_fn(t), 0.05 * h, 0.0),
        body25.SHOULDER[side]: const(hip_x - 0.30 * h, hip_e),
        body25.NECK: const(hip_x - 0.30 * h, hip_e),
        body25.NOSE: const(hip_x - 0.42 * h, hip_e + 0.04 * h),
    }
    series = _render(params, duration, points=points)
    truth = _angular_truth(params, "legraise", duration, with_velocity=False)
    return SynthSession(series=series, truth=truth, profiles={
        "angle_deg": ang,
        "points": {"hip": points[body25.HIP[side]], "ankle": ankle_fn},
    })


def _offset_tuple(xy, dx, de):
    return xy[0] + dx, xy[1] + de


def generate(params: SynthParams) -> SynthSession:
    """Dispatch to the family generator for ``params.variant``."""
    if params.variant in ("cmj", "dropjump", "rjt"):
        return gen_jump(params)
    if params.variant in ("press", "squat"):
        return gen_press(params)
    return gen_rotation(params)


# ---------------------------------------------------------------------------
# on-disk fixtures
# ---------------------------------------------------------------------------

_VARIANT_TASK = {
    "cmj": "CMJBL", "dropjump": "DJBL", "rjt": "RJT",
    "press": "OHP", "squat": "BSQ",
    "rotation": "HIR", "curl": "NDC", "legraise": "SLR",
}


def default_task_code(variant: str) -> str:
    return _VARIANT_TASK[variant]


def _omc_markers(session: SynthSession, task_code: str, omc_fps: float,
                 dominant_side: str) -> MarkerSeries | None:
    """Sample the analytic profiles into optical marker channels (mm)."""
    truth = session.truth
    n = int(round(truth.duration_s * omc_fps))
    t = np.arange(n) / omc_fps
    suffix = "R" if dominant_side == "right" else "L"
    profiles = session.profiles
    markers: dict = {}
    if truth.variant in ("press", "squat"):
        z = profiles["bar_elevation"](t) * 1000.0
        for name, x_mm in (("barbell_L", 562.5), ("barbell_R", -562.5)):
            markers[name] = np.column_stack(
                [np.full(n, x_mm), np.zeros(n), z])
    elif truth.variant == "rotation":
        for name, fn in (("knee", profiles["points"]["knee"]),
                         ("ankle", profiles["points"]["ankle"])):
            x_m, e_m = fn(t)
            markers[f"{name}_{suffix}"] = np.column_stack(
                [x_m * 1000.0, np.zeros(n), e_m * 1000.0])
    elif truth.variant == "curl":
        for name in ("hip", "knee", "ankle"):
            x_m, e_m = profiles["points"][name](t)
            x_m = np.broadcast_to(x_m, t.shape)
            e_m = np.broadcast_to(e_m, t.shape)
            markers[f"{name}_{suffix}"] = np.column_stack(
                [x_m * 1000.0, np.zeros(n), e_m * 1000.0])
    elif truth.variant == "legraise":
        for name in ("hip", "ankle"):
            x_m, e_m = profiles["points"][name](t)
            x_m = np.broadcast_to(x_m, t.shape)
            e_m = np.broadcast_to(e_m, t.shape)
            markers[f"{name}_{suffix}"] = np.column_stack(
                [x_m * 1000.0, np.zeros(n), e_m * 1000.0])
    else:
        return None
    return MarkerSeries(markers=markers, fps=omc_fps)


def _plate_record(session: SynthSession) -> ForcePlateRecord | None:
    """Vertical force: bodyweight when loaded, zero in the unloaded windows."""
    windows = session.profiles.get("unloaded_windows")
    if windows is None:
        return None
    n = int(round(session.truth.duration_s * PLATE_FPS))
    t = np.arange(n) / PLATE_FPS
    force = np.full(n, BODY_MASS_KG * GRAVITY_MPS2)
    for t0, t1 in windows:
        force[(t > t0) & (t < t1)] = 0.0
    return ForcePlateRecord(force_n=force, fps=PLATE_FPS)


def write_session(params: SynthParams, out_dir: str,
                  participant_id: str = "P01",
                  task_code: str | None = None,
                  omc_fps: float = 100.0) -> tuple:
    """Write a full session fixture: keypoint dir, truth stream, manifest.

    Returns (manifest_path, truth). The manifest embeds the segmentation
    config the generator recommends for its own geometry, plus manual
    segment bounds for drop jumps.
    """
    task = task_code or default_task_code(params.variant)
    session = generate(params)
    os.makedirs(out_dir, exist_ok=True)
    mmc_dir = os.path.join(out_dir, "mmc")
    write_openpose_dir(session.series, mmc_dir)

    manifest = {
        "participant_id": participant_id,
        "task_code": task,
        "mmc_dir": "mmc",
        "mmc_fps": params.fps,
        "height_m": params.height_m,
        "dominant_side": params.dominant_side,
    }
    markers = _omc_markers(session, task, omc_fps, params.dominant_side)
    if markers is not None:
        write_omc_csv(markers, os.path.join(out_dir, "omc.csv"))
        manifest["omc_csv"] = "omc.csv"
        manifest["omc_fps"] = omc_fps
    plate = _plate_record(session)
    if plate is not None:
        write_forceplate_csv(plate, os.path.join(out_dir, "plate.csv"))
        manifest["forceplate_csv"] = "plate.csv"
    if session.truth.segmentation:
        manifest["segmentation"] = session.truth.segmentation
    if params.variant == "dropjump":
        manifest["manual_segments_s"] = [
            [round(a, 6), round(b, 6)] for a, b in session.truth.rep_bounds_s]
    if params.variant in ("press", "squat"):
        manifest["object_len_px"] = BARBELL_LENGTH_M / params.ptm_true
        manifest["object_len_m"] = BARBELL_LENGTH_M

    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest_path, session.truth


# ---------------------------------------------------------------------------
# benchmark mini-study
# ---------------------------------------------------------------------------

MINI_STUDY_PARTICIPANTS = (("P01", 1.62), ("P02", 1.71),
                           ("P03", 1.80), ("P04", 1.88))
MINI_STUDY_SEED = 20260801


def build_mini_study(out_dir: str, noise_sigma_px: float = 1.0) -> list:
    """Fixed benchmark study: 4 participants x (jump + press) x 3 reps.

    Jump flight times vary per participant and per repetition; press
    amplitude varies per participant. All randomness is seeded, so the
    generated inputs and everything computed from them are reproducible
    bit for bit. Writes one session directory per (participant, task)
    plus ``study.json`` listing the manifests, and returns the manifest
    paths.
    """
    rng = np.random.default_rng(MINI_STUDY_SEED)
    manifest_paths = []
    rel_manifests = []
    for i, (pid, height) in enumerate(MINI_STUDY_PARTICIPANTS):
        base_flight = 0.40 + 0.05 * i
        flights = [base_flight + dj for dj in rng.uniform(-0.03, 0.03, 3)]
        jump = SynthParams(
            variant="cmj", fps=30.0, ptm_true=0.002 + 0.00005 * i,
            noise_sigma_px=noise_sigma_px, seed=100 + i, height_m=height,
            reps=3, flight_s=flights)
        name = f"{pid}_CMJBL"
        path, _ = write_session(jump, os.path.join(out_dir, name), pid,
                                "CMJBL")
        manifest_paths.append(path)
        rel_manifests.append(f"{name}/manifest.json")

        press = SynthParams(
            variant="press", fps=30.0, ptm_true=0.002 + 0.00005 * i,
            noise_sigma_px=noise_sigma_px, seed=200 + i, height_m=height,
            reps=3, amplitude_m=0.48 + 0.04 * i, concentric_s=1.0)
        name = f"{pid}_OHP"
        path, _ = write_session(press, os.path.join(out_dir, name), pid,
                                "OHP")
        manifest_paths.append(path)
        rel_manifests.append(f"{name}/manifest.json")

    with open(os.path.join(out_dir, "study.json"), "w") as fh:
        json.dump({"manifests": rel_manifests}, fh, indent=2, sort_keys=True)
    return manifest_paths
