"""Synthetic session generators: determinism, truth bookkeeping, fixtures."""

import hashlib
import json
import os

import numpy as np
import pytest

from kinecap import body25
from kinecap.calibration import GRAVITY_MPS2
from kinecap.mocap_io import (load_session, parse_forceplate_csv,
                              parse_manifest)
from kinecap.synth import (VARIANTS, SynthParams, build_mini_study,
                           default_task_code, generate, write_session)


def _dir_digest(root):
    """One hash over every file under root, path-keyed."""
    digest = hashlib.sha256()
    for dirpath, dirnames, filenames in sorted(os.walk(root)):
        dirnames.sort()
        for name in sorted(filenames):
            full = os.path.join(dirpath, name)
            digest.update(os.path.relpath(full, root).encode())
            with open(full, "rb") as fh:
                digest.update(fh.read())
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# determinism
# ---------------------------------------------------------------------------

def test_generate_is_deterministic():
    params = SynthParams(variant="cmj", noise_sigma_px=1.0, seed=7)
    a = generate(params).series
    b = generate(params).series
    assert np.array_equal(a.data, b.data)


def test_generate_seed_changes_noise():
    a = generate(SynthParams(variant="cmj", noise_sigma_px=1.0, seed=7))
    b = generate(SynthParams(variant="cmj", noise_sigma_px=1.0, seed=8))
    assert not np.array_equal(a.series.data, b.series.data)


def test_written_session_is_byte_deterministic(tmp_path):
    params = SynthParams(variant="press", noise_sigma_px=1.0, seed=3,
                         reps=2)
    write_session(params, str(tmp_path / "a"))
    write_session(params, str(tmp_path / "b"))
    assert _dir_digest(tmp_path / "a") == _dir_digest(tmp_path / "b")


# ---------------------------------------------------------------------------
# truth bookkeeping
# ---------------------------------------------------------------------------

def test_cmj_truth_heights_follow_flight_identity():
    params = SynthParams(variant="cmj", flight_s=[0.42, 0.5, 0.58])
    truth = generate(params).truth
    assert len(truth.heights_m) == 3
    for h, tf, requested in zip(truth.heights_m, truth.flights_s,
                                [0.42, 0.5, 0.58]):
        assert h == pytest.approx(GRAVITY_MPS2 * tf * tf / 8.0, rel=1e-12)
        # flights snap to the frame grid, never further than half a frame
        assert abs(tf - requested) <= 0.5 / params.fps + 1e-12


def test_rjt_truth_counts():
    params = SynthParams(variant="rjt", hops=4)
    truth = generate(params).truth
    assert len(truth.flights_s) == 4
    assert len(truth.contacts_s) == 3
    assert len(truth.heights_m) == 4


def test_press_truth_velocities():
    params = SynthParams(variant="press", amplitude_m=0.6, concentric_s=1.0)
    truth = generate(params).truth
    assert truth.mean_velocity_mps == pytest.approx(0.6, rel=1e-12)
    assert truth.peak_velocity_mps == pytest.approx(
        0.6 * np.pi / 2.0, rel=1e-12)


def test_angular_truth_rom():
    for variant in ("rotation", "curl", "legraise"):
        truth = generate(SynthParams(variant=variant, rom_deg=40.0)).truth
        assert truth.rom_deg == pytest.approx(40.0, rel=1e-12)
        assert truth.mean_angular_velocity_dps is None or \
            truth.mean_angular_velocity_dps > 0


# ---------------------------------------------------------------------------
# failure injection
# ---------------------------------------------------------------------------

def test_swap_frames_exchange_ankles():
    clean = generate(SynthParams(variant="cmj")).series.data
    swapped = generate(SynthParams(variant="cmj",
                                   swap_frames=(10, 20))).series.data
    la, ra = body25.L_ANKLE, body25.R_ANKLE
    assert np.array_equal(swapped[10:21, la, :2], clean[10:21, ra, :2])
    assert np.array_equal(swapped[10:21, ra, :2], clean[10:21, la, :2])
    assert np.all(swapped[10:21, la, 2] == 0.3)
    assert np.all(swapped[10:21, ra, 2] == 0.3)
    mask = np.ones(len(clean), dtype=bool)
    mask[10:21] = False
    assert np.array_equal(swapped[mask], clean[mask])


def test_swap_frames_out_of_range():
    with pytest.raises(ValueError, match="swap_frames"):
        generate(SynthParams(variant="cmj", swap_frames=(0, 10 ** 6)))


def test_params_validation():
    with pytest.raises(ValueError, match="variant"):
        SynthParams(variant="sprint")
    with pytest.raises(ValueError, match="dominant_side"):
        SynthParams(dominant_side="both")


# ---------------------------------------------------------------------------
# on-disk fixtures
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("variant", VARIANTS)
def test_write_session_round_trips(variant, tmp_path):
    params = SynthParams(variant=variant, reps=2)
    manifest_path, truth = write_session(params, str(tmp_path))
    session = load_session(manifest_path)
    assert session.manifest.task_code == default_task_code(variant)
    assert session.manifest.participant_id == "P01"
    rendered = generate(params).series
    assert session.keypoints.n_frames == rendered.n_frames
    assert np.array_equal(session.keypoints.data, rendered.data)

    if variant in ("cmj", "dropjump", "rjt"):
        assert session.forceplate is not None
        assert session.markers is None
    else:
        assert session.markers is not None
        assert session.forceplate is None

    manifest = parse_manifest(manifest_path)
    if variant in ("cmj", "press"):
        assert manifest.segmentation is not None
    if variant == "dropjump":
        assert manifest.manual_segments_s is not None
        assert len(manifest.manual_segments_s) == 2
    if variant in ("press", "squat"):
        assert manifest.object_len_px == pytest.approx(
            1.125 / params.ptm_true)
        assert manifest.object_len_m == pytest.approx(1.125)


def test_plate_record_matches_flight_windows(tmp_path):
    params = SynthParams(variant="cmj", flight_s=[0.4, 0.5], reps=2)
    manifest_path, truth = write_session(params, str(tmp_path))
    plate = parse_forceplate_csv(os.path.join(str(tmp_path), "plate.csv"))
    assert plate.fps == 1000.0
    loaded = plate.force_n[plate.force_n > 0]
    assert np.allclose(loaded, 75.0 * GRAVITY_MPS2)
    zeros = int(np.count_nonzero(plate.force_n == 0.0))
    expected = sum(int(round(tf * 1000.0)) for tf in truth.flights_s)
    assert abs(zeros - expected) <= 2 * len(truth.flights_s)


def test_mini_study_layout(tmp_path):
    manifests = build_mini_study(str(tmp_path))
    assert len(manifests) == 8
    for path in manifests:
        assert os.path.exists(path)
        load_session(path)
    with open(tmp_path / "study.json") as fh:
        study = json.load(fh)
    assert len(study["manifests"]) == 8
    for rel in study["manifests"]:
        assert os.path.exists(tmp_path / rel)
