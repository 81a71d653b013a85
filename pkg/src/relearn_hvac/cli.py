"""Command-line driver: data, training, relearning campaigns, reports.

Exit codes: 0 success, 1 usage or input error, 2 campaign finished with
failed weeks, 3 numeric failure. RELEARN_HVAC_OUTDIR overrides the output
directory and RELEARN_HVAC_THREADS pins the BLAS/OpenMP thread count; no
other environment variables are consulted.

This module imports numpy-dependent code lazily so the thread pin can be
applied before numpy initializes its thread pools.
"""

import argparse
import json
import os
import sys

THREAD_ENV_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)

REPORT_FILES = (
    "cvrmse_by_week.csv",
    "auc_by_week.csv",
    "reward_curve.csv",
    "variant_energy.csv",
    "setpoints.csv",
    "energy_true_vs_pred.csv",
)


class CliError(Exception):
    """Usage or input problem; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad usage; 2 is reserved for partial
    # campaign failure here, so route usage problems through CliError.
    def error(self, message):
        raise CliError(message)


def apply_thread_env():
    threads = os.environ.get("RELEARN_HVAC_THREADS")
    if not threads:
        return
    if not threads.isdigit() or int(threads) < 1:
        raise CliError(
            f"RELEARN_HVAC_THREADS must be a positive integer, got {threads!r}"
        )
    for name in THREAD_ENV_VARS:
        os.environ[name] = threads


def build_parser():
    parser = _Parser(prog="relearn-hvac", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, outdir=True):
        p.add_argument("-c", "--config", default=None,
                       help="campaign INI file (defaults apply if omitted)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the configured seed")
        p.add_argument("-v", "--verbose", action="store_true",
                       help="print per-step progress")
        if outdir:
            p.add_argument("-o", "--outdir", default="out",
                           help="output directory (RELEARN_HVAC_OUTDIR wins)")

    p = sub.add_parser("gen-data", help="write a synthetic telemetry CSV")
    common(p)

    p = sub.add_parser("ingest", help="clean + aggregate a 5-minute CSV to 30 minutes")
    common(p)
    p.add_argument("--data", required=True, help="input 5-minute CSV")

    p = sub.add_parser("train-dynamics",
                       help="train the three dynamics models on the first window")
    common(p)

    p = sub.add_parser("train-policy",
                       help="train a set-point controller against saved dynamics models")
    common(p)
    p.add_argument("--models", required=True,
                   help="checkpoint dir holding heating/valve/cooling/scaler JSON")

    p = sub.add_parser("relearn", help="run the full weekly relearning campaign")
    common(p)
    p.add_argument("--variants", default=None,
                   help="comma list from adaptive,static,rbc")

    p = sub.add_parser("evaluate",
                       help="score saved checkpoints on one eval week")
    common(p)
    p.add_argument("--checkpoints", required=True,
                   help="week checkpoint dir from a campaign")
    p.add_argument("--week", type=int, default=1,
                   help="1-based sliding-window index to evaluate")

    p = sub.add_parser("report", help="emit tidy per-figure CSVs from a campaign dir")
    common(p)
    p.add_argument("--campaign", required=True, help="run_campaign output directory")
    return parser


def _load_config(args):
    from .config import parse_config

    cfg = parse_config(args.config) if args.config else parse_config(text="")
    if args.seed is not None:
        import dataclasses

        cfg = dataclasses.replace(cfg, seed=args.seed)
        cfg.synthetic = dataclasses.replace(cfg.synthetic, seed=args.seed)
    return cfg


def _outdir(args):
    from pathlib import Path

    override = os.environ.get("RELEARN_HVAC_OUTDIR")
    path = Path(override) if override else Path(args.outdir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_manifest(outdir, command, cfg, outputs):
    from . import __version__
    from .config import config_hash

    payload = {
        "command": command,
        "version": __version__,
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "synthetic_seed": cfg.synthetic.seed,
        "outputs": sorted(outputs),
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def cmd_gen_data(args, say):
    from .pipeline import write_csv
    from .synthetic import generate_synthetic

    cfg = _load_config(args)
    outdir = _outdir(args)
    frame = generate_synthetic(cfg.synthetic)
    path = outdir / "dataset.csv"
    write_csv(frame, path)
    say(f"wrote {len(frame)} rows to {path}")
    _write_manifest(outdir, "gen-data", cfg, ["dataset.csv"])
    return 0


def cmd_ingest(args, say):
    from .pipeline import aggregate_30min, ingest_csv, remove_outliers, write_csv

    cfg = _load_config(args)
    outdir = _outdir(args)
    if not os.path.exists(args.data):
        raise CliError(f"dataset not found: {args.data}")
    raw = ingest_csv(args.data)
    cleaned = remove_outliers(raw, cfg.outlier_k)
    frame = aggregate_30min(cleaned)
    path = outdir / "ingested.csv"
    write_csv(frame, path)
    say(f"{len(raw)} raw rows -> {len(frame)} half-hour rows at {path}")
    _write_manifest(outdir, "ingest", cfg, ["ingested.csv"])
    return 0


def _first_window(cfg):
    from .orchestrator import load_frame
    from .pipeline import make_windows

    if cfg.data_path and not os.path.exists(cfg.data_path):
        raise CliError(f"dataset not found: {cfg.data_path}")
    frame = load_frame(cfg)
    return frame, make_windows(frame, cfg.windows)


def cmd_train_dynamics(args, say):
    from .config import STREAM_MODEL, stream_rng
    from .models import MODEL_KINDS, build_model, model_loss, train_model
    from .orchestrator import (
        _eval_frame,
        _model_metrics,
        config_hash,
        save_dynamics_model,
        write_model_eval,
    )
    from .pipeline import fit_scaler, make_sequences

    cfg = _load_config(args)
    outdir = _outdir(args)
    frame, windows = _first_window(cfg)
    window = windows[0]
    train_frame = frame.slice(window.train.start, window.train.stop)
    scaler = fit_scaler(train_frame)
    rng = stream_rng(cfg.seed, STREAM_MODEL, window.index + 1)
    models = {}
    meta = {"config_hash": config_hash(cfg), "seed": cfg.seed, "week": 1}
    for kind in MODEL_KINDS:
        target = {"heating": "hwe", "valve": "valve", "cooling": "cwe"}[kind]
        dataset = make_sequences(train_frame, scaler, target)
        result = train_model(build_model(kind, rng), dataset, cfg.dynamics,
                             rng, loss=model_loss(kind))
        models[kind] = result.model
        say(f"{kind}: best epoch {result.best_epoch}, "
            f"{len(result.val_losses)} epochs run")
        save_dynamics_model(result.model, kind, outdir / f"{kind}.json", meta)
    with open(outdir / "scaler.json", "w") as fh:
        fh.write(scaler.to_json())
    metrics, series = _model_metrics(_eval_frame(frame, window), scaler, models)
    with open(outdir / "metrics.json", "w") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
    write_model_eval(series, outdir / "model_eval.csv")
    say("eval week: cvrmse_heating=%.4f cvrmse_cooling=%.4f valve_auc=%.4f"
        % (metrics["cvrmse_heating"], metrics["cvrmse_cooling"], metrics["valve_auc"]))
    _write_manifest(outdir, "train-dynamics", cfg, [
        "heating.json", "valve.json", "cooling.json", "scaler.json",
        "metrics.json", "model_eval.csv",
    ])
    return 0


def _load_checkpoints(path):
    from pathlib import Path

    from .orchestrator import load_dynamics_model
    from .pipeline import ScalerParams

    base = Path(path)
    needed = [base / f"{k}.json" for k in ("heating", "valve", "cooling", "scaler")]
    missing = [str(p) for p in needed if not p.exists()]
    if missing:
        raise CliError(f"checkpoint files missing: {', '.join(missing)}")
    models = {k: load_dynamics_model(base / f"{k}.json", k)[0]
              for k in ("heating", "valve", "cooling")}
    with open(base / "scaler.json") as fh:
        scaler = ScalerParams.from_json(fh.read())
    return models, scaler


def cmd_train_policy(args, say):
    from .config import STREAM_PPO, config_hash, stream_rng
    from .env import BuildingEnv, RewardParams
    from .ppo import save_controller, train, write_training_log

    cfg = _load_config(args)
    outdir = _outdir(args)
    models, scaler = _load_checkpoints(args.models)
    frame, windows = _first_window(cfg)
    window = windows[0]
    train_frame = frame.slice(window.train.start, window.train.stop)

    def factory(_i):
        return BuildingEnv(train_frame, scaler, models,
                           reward=RewardParams(cfg.vartheta),
                           alpha=cfg.alpha, valve_threshold=cfg.valve_threshold)

    rng = stream_rng(cfg.seed, STREAM_PPO, window.index + 1)
    outcome = train(factory, cfg.ppo, rng)
    for row in outcome.history:
        say("iter %d: reward=%.4f clip=%.3f" % (
            row["iteration"], row["mean_episode_reward"], row["clip_fraction"]))
    save_controller(outcome.policy, outcome.value,
                    outdir / "controller.json", config_hash=config_hash(cfg))
    write_training_log(outcome.history, outdir / "training.csv")
    _write_manifest(outdir, "train-policy", cfg, ["controller.json", "training.csv"])
    return 0


def cmd_relearn(args, say):
    import dataclasses

    from .orchestrator import run_campaign

    cfg = _load_config(args)
    if args.variants:
        cfg = dataclasses.replace(cfg, variants=args.variants)
    if cfg.data_path and not os.path.exists(cfg.data_path):
        raise CliError(f"dataset not found: {cfg.data_path}")
    outdir = _outdir(args)
    result = run_campaign(cfg, outdir, log=say)
    _write_manifest(outdir, "relearn", cfg,
                    ["campaign.json", "summary.csv", "model_metrics.csv"])
    say(f"{len(result.reports)} week(s) complete, {len(result.failures)} failed")
    return 2 if result.failures else 0


def cmd_evaluate(args, say):
    from .config import config_hash
    from .env import BuildingEnv, RewardParams, run_episode, write_trajectory
    from .orchestrator import _eval_frame, episode_energy, greedy_policy, variant_result
    from .ppo import load_controller

    import numpy as np

    cfg = _load_config(args)
    outdir = _outdir(args)
    models, scaler = _load_checkpoints(args.checkpoints)
    controller_path = os.path.join(args.checkpoints, "controller.json")
    if not os.path.exists(controller_path):
        raise CliError(f"checkpoint files missing: {controller_path}")
    policy, _value, _hash = load_controller(controller_path)
    frame, windows = _first_window(cfg)
    if not (1 <= args.week <= len(windows)):
        raise CliError(
            f"--week must be in 1..{len(windows)} for this dataset, got {args.week}"
        )
    window = windows[args.week - 1]
    eval_frame = _eval_frame(frame, window)
    env = BuildingEnv(eval_frame, scaler, models,
                      reward=RewardParams(cfg.vartheta),
                      alpha=cfg.alpha, valve_threshold=cfg.valve_threshold)
    results = run_episode(env, greedy_policy(policy))
    heat, cool = episode_energy(results)
    rbc_heat = float(np.sum(frame.columns["hwe"][window.eval]))
    rbc_cool = float(np.sum(frame.columns["cwe"][window.eval]))
    scored = variant_result("checkpoint", heat, cool, rbc_heat, rbc_cool)
    write_trajectory(results, outdir / "trajectories.csv")
    payload = {
        "week": args.week,
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "mean_reward": float(np.mean([r.reward for r in results])),
        "energy": {
            "heat_kbtu": scored.heat_kbtu,
            "cool_kbtu": scored.cool_kbtu,
            "total_kbtu": scored.total_kbtu,
            "rbc_heat_kbtu": rbc_heat,
            "rbc_cool_kbtu": rbc_cool,
            "savings_pct": scored.savings_pct,
            "savings_kbtu": scored.savings_kbtu,
        },
    }
    with open(outdir / "evaluation.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    say("week %d: total %.2f kBTU vs rbc %.2f (savings %.2f%%)"
        % (args.week, scored.total_kbtu, rbc_heat + rbc_cool, scored.savings_pct))
    _write_manifest(outdir, "evaluate", cfg, ["evaluation.json", "trajectories.csv"])
    return 0


def _read_csv_rows(path):
    import csv

    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def cmd_report(args, say):
    from pathlib import Path

    campaign_dir = Path(args.campaign)
    campaign_file = campaign_dir / "campaign.json"
    if not campaign_file.exists():
        raise CliError(f"not a campaign directory (no campaign.json): {campaign_dir}")
    with open(campaign_file) as fh:
        campaign = json.load(fh)
    outdir = _outdir(args)
    weeks = campaign.get("weeks_completed", [])
    if not weeks:
        raise CliError("campaign completed zero weeks; nothing to report")

    metrics_rows = _read_csv_rows(campaign_dir / "model_metrics.csv")
    _emit(outdir / "cvrmse_by_week.csv",
          "week,cvrmse_heating,cvrmse_cooling",
          [(r["week"], r["cvrmse_heating"], r["cvrmse_cooling"]) for r in metrics_rows])
    _emit(outdir / "auc_by_week.csv",
          "week,valve_auc,note",
          [(r["week"], r["valve_auc"], r["auc_note"]) for r in metrics_rows])

    reward_rows = []
    setpoint_rows = []
    energy_rows = []
    for week in weeks:
        week_dir = campaign_dir / f"week_{week:02d}"
        for r in _read_csv_rows(week_dir / "training.csv"):
            reward_rows.append((week, r["iteration"], r["mean_episode_reward"],
                                r["clip_fraction"], r["policy_loss"], r["value_loss"]))
        for variant, name in (("adaptive", "trajectories.csv"),
                              ("static", "trajectories_static.csv")):
            path = week_dir / name
            if not path.exists():
                continue
            for r in _read_csv_rows(path):
                setpoint_rows.append((week, r["t"], variant, r["setpoint"], r["sat"]))
        for r in _read_csv_rows(week_dir / "model_eval.csv"):
            energy_rows.append((week, r["t"], r["target"], r["truth"], r["pred"]))
    _emit(outdir / "reward_curve.csv",
          "week,iteration,mean_episode_reward,clip_fraction,policy_loss,value_loss",
          reward_rows)
    _emit(outdir / "setpoints.csv", "week,t,variant,setpoint,sat", setpoint_rows)
    _emit(outdir / "energy_true_vs_pred.csv", "week,t,target,truth,pred", energy_rows)

    summary_rows = _read_csv_rows(campaign_dir / "summary.csv")
    _emit(outdir / "variant_energy.csv",
          "week,variant,heat_kbtu,cool_kbtu,total_kbtu,savings_pct,savings_kbtu",
          [(r["week"], r["variant"], r["heat_kbtu"], r["cool_kbtu"],
            r["total_kbtu"], r["savings_pct"], r["savings_kbtu"])
           for r in summary_rows])

    manifest = {
        "command": "report",
        "source_campaign": str(campaign_dir),
        "config_hash": campaign.get("config_hash", ""),
        "seed": campaign.get("seed"),
        "outputs": sorted(REPORT_FILES),
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    say(f"wrote {len(REPORT_FILES)} report files to {outdir}")
    return 0


def _emit(path, header, rows):
    lines = [header]
    lines.extend(",".join(str(c) for c in row) for row in rows)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


COMMANDS = {
    "gen-data": cmd_gen_data,
    "ingest": cmd_ingest,
    "train-dynamics": cmd_train_dynamics,
    "train-policy": cmd_train_policy,
    "relearn": cmd_relearn,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def main(argv=None):
    try:
        apply_thread_env()
        args = build_parser().parse_args(argv)
        say = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else (lambda msg: None)
        from .errors import NumericError, RelearnError

        try:
            return COMMANDS[args.command](args, say)
        except FileNotFoundError as exc:
            print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
            return 1
        except (NumericError, FloatingPointError) as exc:
            print(f"numeric failure: {exc}", file=sys.stderr)
            return 3
        except RelearnError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    except CliError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
