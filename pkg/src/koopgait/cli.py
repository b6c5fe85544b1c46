"""Command-line orchestration: simulate, train the three learned components,
estimate, evaluate, and render reports.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 solver failure.
A JSON config file can supply estimator settings (flag overrides win); the
default config path is read from the KOOPGAIT_CONFIG environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .errors import ConfigError, DataError, SolverError
from .factorgraph import SolverConfig
from .gaitsim import (
    ActivityScript,
    GaitParams,
    ScriptSegment,
    SensorNoiseConfig,
    campaign_params,
    campaign_scripts,
    comfortable_chair_height,
    depth_sweep_script,
    export_recording,
    import_recording,
    mixed_script,
    simulate_recording,
    walk_script,
)
from .koopman import load_bank, save_bank
from .pipeline import (
    EstimatorConfig,
    estimate,
    evaluate,
    load_report,
    load_trajectory,
    save_report,
    save_trajectory,
    solver_records_to_csv,
    write_report,
)
from .sensors import load_contact_model, save_contact_model
from .stgcn import TrainConfig, load_stgcn, report_to_csv, save_stgcn
from .training import (
    train_activity_classifier,
    train_contact_detector,
    train_koopman_bank,
)

CONFIG_ENV_VAR = "KOOPGAIT_CONFIG"

PRESETS = {
    "walk": lambda seed: walk_script(10.0, 1.0),
    "mixed": lambda seed: mixed_script(),
    "depth-sweep": lambda seed: depth_sweep_script(),
}


def _load_recordings(paths):
    if not paths:
        raise ConfigError("no recording files given")
    return [import_recording(p) for p in paths]


def _script_from_json(payload: dict) -> ActivityScript:
    try:
        segments = tuple(ScriptSegment(**s) for s in payload["segments"])
        start = tuple(payload.get("start", (0.0, 3.0)))
        return ActivityScript(segments, start)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad script specification: {exc}") from exc


def _noise_from_args(args) -> SensorNoiseConfig:
    return SensorNoiseConfig(
        keypoint_sigma=args.kp_sigma,
        depth_sigma0=args.depth_sigma0,
        depth_kappa=args.depth_kappa,
        gyro_sigma=args.gyro_sigma,
        accel_sigma=args.accel_sigma,
        seed=args.seed,
    )


def cmd_simulate(args) -> int:
    noise = _noise_from_args(args)
    if args.campaign:
        os.makedirs(args.campaign, exist_ok=True)
        subjects = campaign_params(args.subjects, args.seed)
        count = 0
        for si, params in enumerate(subjects):
            scripts = campaign_scripts(comfortable_chair_height(params))
            for ci, script in enumerate(scripts):
                cfg = SensorNoiseConfig(noise.keypoint_sigma, noise.depth_sigma0,
                                        noise.depth_kappa, noise.gyro_sigma,
                                        noise.accel_sigma, args.seed + count)
                rec = simulate_recording(script, params, cfg)
                path = os.path.join(args.campaign, f"subject{si}_script{ci}.jsonl")
                export_recording(rec, path)
                count += 1
        print(f"wrote {count} recordings to {args.campaign}")
        return 0
    if args.script:
        with open(args.script) as f:
            script = _script_from_json(json.load(f))
    elif args.preset:
        script = PRESETS[args.preset](args.seed)
    else:
        raise ConfigError("need --script, --preset, or --campaign")
    params = GaitParams()
    rec = simulate_recording(script, params, noise)
    export_recording(rec, args.out)
    print(f"wrote {rec.num_keyframes} keyframes to {args.out}")
    return 0


def cmd_train_contact(args) -> int:
    recs = _load_recordings(args.recordings)
    model = train_contact_detector(recs, l2=args.l2, seed=args.seed)
    save_contact_model(model, args.out)
    print(f"wrote contact model to {args.out}")
    return 0


def cmd_train_koopman(args) -> int:
    recs = _load_recordings(args.recordings)
    bank = train_koopman_bank(recs, order=args.order, ridge=args.ridge,
                              rotations=args.rotations,
                              per_coordinate=args.per_coordinate)
    save_bank(bank, args.out)
    acts = bank.trained_activities()
    print(f"wrote Koopman bank ({len(acts)} activities) to {args.out}")
    return 0


def cmd_train_stgcn(args) -> int:
    recs = _load_recordings(args.recordings)
    config = TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                         learning_rate=args.lr, momentum=args.momentum,
                         seed=args.seed)
    model, records, dataset = train_activity_classifier(
        recs, stride=args.stride, rotations=args.rotations, config=config,
        seed=args.seed)
    save_stgcn(model, args.out)
    if args.report:
        with open(args.report, "w") as f:
            f.write(report_to_csv(records))
    last = records[-1]
    print(f"wrote classifier to {args.out} "
          f"({len(dataset.labels)} windows, test accuracy {last.test_accuracy:.4f})")
    return 0


def _estimator_config(args) -> EstimatorConfig:
    payload = {}
    config_path = args.config or os.environ.get(CONFIG_ENV_VAR)
    if config_path:
        try:
            with open(config_path) as f:
                payload = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
    solver_payload = payload.pop("solver", {})
    known = set(EstimatorConfig.__dataclass_fields__)
    unknown = set(payload) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    try:
        config = EstimatorConfig(solver=SolverConfig(**solver_payload), **payload)
    except TypeError as exc:
        raise ConfigError(f"bad config: {exc}") from exc
    for flag in ("imu", "image", "depth", "contact", "koopman"):
        enabled = getattr(args, f"enable_{flag}")
        if enabled is not None:
            setattr(config, f"use_{flag}", enabled)
    for name in ("window", "sigma_image", "sigma_imu", "sigma_contact", "sigma_koopman"):
        override = getattr(args, name)
        if override is not None:
            setattr(config, name, override)
    for name in ("contact_model_path", "koopman_bank_path", "stgcn_model_path"):
        override = getattr(args, name.replace("_path", ""))
        if override is not None:
            setattr(config, name, override)
    return config


def cmd_estimate(args) -> int:
    config = _estimator_config(args)
    rec = import_recording(args.recording)
    contact = bank = stgcn = None
    if config.use_contact:
        if not config.contact_model_path:
            raise ConfigError("--contact-model required when the contact factor is on")
        contact = load_contact_model(config.contact_model_path)
    if config.use_koopman:
        if not config.koopman_bank_path or not config.stgcn_model_path:
            raise ConfigError("--koopman-bank and --stgcn-model required when the "
                              "prediction factor is on")
        bank = load_bank(config.koopman_bank_path)
        stgcn = load_stgcn(config.stgcn_model_path)
    est = estimate(rec, config, contact, bank, stgcn)
    save_trajectory(est, args.out)
    if args.iteration_report:
        with open(args.iteration_report, "w") as f:
            f.write(solver_records_to_csv(est.solver_records))
    print(f"wrote {est.num_keyframes} estimated keyframes to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    rec = import_recording(args.recording)
    est = load_trajectory(args.estimate)
    report = evaluate(est, rec)
    save_report(report, args.out)
    p = report.percentiles
    print(f"p50 {p['p50']:.4f} m, p95 {p['p95']:.4f} m, "
          f"depth smoothness {report.smoothness_est:.5f} m")
    return 0


def cmd_report(args) -> int:
    reports = {}
    for entry in args.reports:
        if "=" in entry:
            name, path = entry.split("=", 1)
        else:
            name, path = os.path.splitext(os.path.basename(entry))[0], entry
        reports[name] = load_report(path)
    paths = write_report(reports, args.out_dir)
    print("wrote " + ", ".join(paths))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="koopgait",
        description="Factor-graph lower-body pose estimation with Koopman "
                    "motion priors on synthetic gait data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic recording")
    p.add_argument("--out", default="recording.jsonl")
    p.add_argument("--script", help="JSON file with {segments: [...], start: [x, z]}")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--campaign", help="write a training campaign into this directory")
    p.add_argument("--subjects", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kp-sigma", type=float, default=0.01)
    p.add_argument("--depth-sigma0", type=float, default=0.01)
    p.add_argument("--depth-kappa", type=float, default=0.004)
    p.add_argument("--gyro-sigma", type=float, default=0.01)
    p.add_argument("--accel-sigma", type=float, default=0.1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train-contact", help="train the foot-contact detector")
    p.add_argument("recordings", nargs="+")
    p.add_argument("--out", default="contact.json")
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_contact)

    p = sub.add_parser("train-koopman", help="train the per-activity Koopman bank")
    p.add_argument("recordings", nargs="+")
    p.add_argument("--out", default="bank.json")
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--ridge", type=float, default=1e-8)
    p.add_argument("--rotations", type=int, default=24)
    p.add_argument("--per-coordinate", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_koopman)

    p = sub.add_parser("train-stgcn", help="train the activity classifier")
    p.add_argument("recordings", nargs="+")
    p.add_argument("--out", default="stgcn.json")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--stride", type=int, default=2)
    p.add_argument("--rotations", type=int, default=8)
    p.add_argument("--report", help="write the per-epoch training CSV here")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_stgcn)

    p = sub.add_parser("estimate", help="run sliding-window estimation")
    p.add_argument("--recording", required=True)
    p.add_argument("--out", default="trajectory.jsonl")
    p.add_argument("--config", help=f"JSON estimator config (default ${CONFIG_ENV_VAR})")
    for flag in ("imu", "image", "depth", "contact", "koopman"):
        group = p.add_mutually_exclusive_group()
        group.add_argument(f"--{flag}", dest=f"enable_{flag}",
                           action="store_true", default=None)
        group.add_argument(f"--no-{flag}", dest=f"enable_{flag}",
                           action="store_false", default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--sigma-image", type=float, default=None)
    p.add_argument("--sigma-imu", type=float, default=None)
    p.add_argument("--sigma-contact", type=float, default=None)
    p.add_argument("--sigma-koopman", type=float, default=None)
    p.add_argument("--contact-model", default=None)
    p.add_argument("--koopman-bank", default=None)
    p.add_argument("--stgcn-model", default=None)
    p.add_argument("--iteration-report", help="write per-window solver iterations CSV")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("evaluate", help="compare an estimate against ground truth")
    p.add_argument("--recording", required=True)
    p.add_argument("--estimate", required=True)
    p.add_argument("--out", default="report.json")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="render CSV and SVG outputs from reports")
    p.add_argument("reports", nargs="+", help="report.json paths, optionally name=path")
    p.add_argument("--out-dir", default="report_out")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
