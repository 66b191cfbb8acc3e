"""Command line interface.

Subcommands:

- ``analyze``: run sessions listed on the command line or in a config
  file, writing per-task metric records and diagnostics.
- ``compare``: pool analyzed records into per-(task, metric, calibration)
  agreement rows.
- ``report``: render the agreement rows as a text table plus delimited
  files and Bland-Altman plots.
- ``synth``: generate a synthetic session (or the benchmark mini-study)
  with known ground truth.

``analyze`` exits nonzero only when every session failed; partial
failures are reported in diagnostics and the exit stays zero.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .pipeline import (RunConfig, analyze_study, collect_records,
                       compare_records, write_study_outputs)
from .report import FORMATS, agreement_csv_text, agreement_json_text, \
    write_report
from .pipeline import atomic_write_text
from .synth import SynthParams, build_mini_study, default_task_code, \
    write_session
from .tasks import TASKS

log = logging.getLogger(__name__)

# Which generator builds a plausible session for each task code.
_TASK_VARIANT = {
    "CMJBL": "cmj", "CMJUL": "cmj",
    "DJBL": "dropjump", "DJUL": "dropjump",
    "RJT": "rjt",
    "OHP": "press", "BSQ": "squat",
    "HIR": "rotation", "HER": "rotation",
    "NDC": "curl", "SLS": "curl",
    "SLR": "legraise",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kinecap",
        description="Markerless motion-capture batch analytics: metric "
                    "extraction, device agreement, synthetic benchmarks.")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="extract per-repetition metrics")
    p.add_argument("--manifest", action="append", default=[],
                   help="session manifest JSON (repeatable)")
    p.add_argument("--config", help="study config JSON; its 'manifests' "
                                    "list is resolved relative to the file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--ptm", help="comma list of calibration methods "
                                 "(gravity,height,object); default: task's own")
    p.add_argument("--gravity-mode", choices=("fit", "ratio"),
                   help="free-fall calibration estimator")
    p.add_argument("--sg-window", type=int, help="smoothing window (odd frames)")
    p.add_argument("--mask-threshold", type=float,
                   help="confidence below which keypoints are interpolated")
    p.add_argument("--jobs", type=int, help="parallel sessions")

    p = sub.add_parser("compare", help="agreement statistics from records")
    p.add_argument("--records", nargs="+", required=True,
                   help="analyze output dirs or metrics.csv files")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("report", help="render the agreement report")
    p.add_argument("--records", nargs="+", required=True,
                   help="analyze output dirs or metrics.csv files")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", default="csv",
                   help=f"comma list of {', '.join(FORMATS)} (default csv)")

    p = sub.add_parser("synth", help="generate synthetic sessions")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--task", choices=sorted(TASKS),
                   help="task code to synthesize")
    p.add_argument("--mini-study", action="store_true",
                   help="write the 4-participant benchmark study instead")
    p.add_argument("--participant", default="P01")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--noise-sigma-px", type=float, default=0.0)
    p.add_argument("--ptm-true", type=float, default=0.002,
                   help="true metres per pixel of the rendering")
    p.add_argument("--height", type=float, default=1.75,
                   help="participant stature in metres")
    p.add_argument("--side", choices=("left", "right"), default="right")
    p.add_argument("--flight", type=float, default=0.5,
                   help="flight time per jump (seconds)")
    p.add_argument("--amplitude", type=float, default=0.6,
                   help="lift displacement (metres)")
    p.add_argument("--rom", type=float, default=45.0,
                   help="rotation range (degrees)")
    p.add_argument("--swap-start", type=int,
                   help="first frame of an injected left/right ankle swap")
    p.add_argument("--swap-end", type=int,
                   help="last frame of an injected left/right ankle swap")
    return parser


def _cmd_analyze(args) -> int:
    manifests = list(args.manifest)
    cfg_data = {}
    if args.config:
        with open(args.config) as fh:
            cfg_data = json.load(fh)
        base = os.path.dirname(os.path.abspath(args.config))
        for m in cfg_data.pop("manifests", []):
            manifests.append(m if os.path.isabs(m) else os.path.join(base, m))
    if args.ptm:
        cfg_data["ptm_methods"] = args.ptm.split(",")
    for name, key in (("gravity_mode", "gravity_mode"),
                      ("sg_window", "sg_window"),
                      ("mask_threshold", "mask_threshold"),
                      ("jobs", "jobs")):
        value = getattr(args, name)
        if value is not None:
            cfg_data[key] = value
    config = RunConfig.from_dict(cfg_data)
    if not manifests:
        log.error("no sessions: pass --manifest or a --config with manifests")
        return 2
    study = analyze_study(manifests, config)
    write_study_outputs(study, args.out)
    log.info("%d record(s) from %d session(s), %d failed, %d diagnostic(s)",
             len(study.records), study.n_sessions, study.n_failed,
             len(study.diagnostics))
    if study.n_sessions and study.n_failed == study.n_sessions:
        log.error("every session failed")
        return 1
    return 0


def _cmd_compare(args) -> int:
    records = collect_records(args.records)
    reports, _ = compare_records(records)
    atomic_write_text(os.path.join(args.out, "agreement.csv"),
                      agreement_csv_text(reports))
    atomic_write_text(os.path.join(args.out, "agreement.json"),
                      agreement_json_text(reports))
    log.info("%d agreement row(s) from %d record(s)", len(reports),
             len(records))
    return 0


def _cmd_report(args) -> int:
    formats = tuple(f for f in args.format.split(",") if f)
    records = collect_records(args.records)
    reports, pairs = compare_records(records)
    write_report(reports, pairs, args.out, formats)
    return 0


def _cmd_synth(args) -> int:
    if args.mini_study:
        paths = build_mini_study(args.out,
                                 noise_sigma_px=args.noise_sigma_px or 1.0)
        log.info("mini-study: %d session(s) under %s", len(paths), args.out)
        return 0
    if not args.task:
        log.error("synth needs --task or --mini-study")
        return 2
    swap = None
    if args.swap_start is not None or args.swap_end is not None:
        if args.swap_start is None or args.swap_end is None:
            log.error("--swap-start and --swap-end go together")
            return 2
        swap = (args.swap_start, args.swap_end)
    params = SynthParams(
        variant=_TASK_VARIANT[args.task],
        fps=args.fps, ptm_true=args.ptm_true,
        noise_sigma_px=args.noise_sigma_px, seed=args.seed,
        height_m=args.height, dominant_side=args.side, reps=args.reps,
        flight_s=args.flight, amplitude_m=args.amplitude, rom_deg=args.rom,
        rotation_sense="external" if args.task == "HER" else "internal",
        swap_frames=swap)
    manifest_path, truth = write_session(params, args.out, args.participant,
                                         args.task)
    log.info("session written: %s", manifest_path)
    truth_path = os.path.join(args.out, "truth.json")
    payload = {k: v for k, v in vars(truth).items() if v is not None}
    with open(truth_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"analyze": _cmd_analyze, "compare": _cmd_compare,
                "report": _cmd_report, "synth": _cmd_synth}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
