"""Weekly relearning campaign: retrain, re-evaluate, compare variants.

Each campaign iteration slides the train/eval window forward one week,
refits the scaler, warm-starts the dynamics models and the controller,
then scores three control variants on the held-out week:

- adaptive: this iteration's freshly retrained models and policy
- static:   the first iteration's models and policy, frozen
- rbc:      the rule-based behavior already logged in the data

Variant energy accounting depends on the data source. On synthetic
campaigns each controller's set-point trajectory is metered by the
generator's own energy balance at the original 5-minute resolution, the
role the building's actual meters play in a live deployment. Learned
models still drive the control environment and the reward, but they
never grade their own homework: week-long closed-loop rollouts feed
model predictions back into the model's inputs, and that accumulates
into arbitrarily wrong weekly totals. On CSV campaigns no ground truth
exists for counterfactual set points, so there the current iteration's
models do the accounting (best available plant estimate). The RBC
baseline is always the plain data sum over the same epochs. A failed
iteration is recorded and skipped: the campaign keeps the previous
week's state and moves on.
"""

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import STREAM_MODEL, STREAM_PPO, config_dict, config_hash, stream_rng
from .env import BuildingEnv, RewardParams, run_episode, write_trajectory
from .errors import InputError, RelearnError, UndefinedMetricError
from .metrics import cvrmse, roc_auc
from .models import (
    MODEL_KINDS,
    build_model,
    check_architecture,
    model_loss,
    predict_energy,
    predict_valve_prob,
    train_model,
    warm_start_retrain,
)
from .nn import LayerStack
from .nn.serialize import params_checksum, stack_from_dict, stack_to_dict
from .pipeline import (
    LOOKBACK,
    ScalerParams,
    aggregate_30min,
    fit_scaler,
    ingest_csv,
    make_sequences,
    make_windows,
    remove_outliers,
)
from .ppo import sample_action, save_controller, train, write_training_log
from .synthetic import generate_synthetic, true_energy

SUMMARY_HEADER = (
    "week,eval_start,variant,heat_kbtu,cool_kbtu,total_kbtu,"
    "heat_savings_pct,heat_savings_kbtu,cool_savings_pct,cool_savings_kbtu,"
    "savings_pct,savings_kbtu"
)
MODEL_METRICS_HEADER = (
    "week,cvrmse_heating,cvrmse_cooling,valve_auc,auc_note,mean_episode_reward"
)

MODEL_FORMAT = "relearn-hvac-dynamics"

CHECKPOINT_FILES = ("heating", "valve", "cooling", "controller", "scaler")


def compute_savings(rbc_total, variant_total):
    """(percent, absolute) energy saved against the rule-based baseline."""
    rbc_total = float(rbc_total)
    variant_total = float(variant_total)
    if not math.isfinite(rbc_total) or not math.isfinite(variant_total):
        raise UndefinedMetricError("savings need finite energy totals")
    if rbc_total <= 0.0:
        raise UndefinedMetricError(
            "savings are undefined for a non-positive baseline total"
        )
    return 100.0 * (rbc_total - variant_total) / rbc_total, rbc_total - variant_total


def format_savings(mean_pct, std_pct):
    """Mean with the across-weeks spread in parentheses, e.g. 12.61%(5.73%)."""
    return f"{mean_pct:.2f}%({std_pct:.2f}%)"


@dataclass
class VariantResult:
    name: str
    heat_kbtu: float
    cool_kbtu: float
    total_kbtu: float
    heat_savings_pct: float
    heat_savings_kbtu: float
    cool_savings_pct: float
    cool_savings_kbtu: float
    savings_pct: float
    savings_kbtu: float


def _component_savings(rbc, variant):
    # A component baseline can legitimately be zero (no heating all week);
    # only the total keeps the strict positive-baseline contract.
    try:
        return compute_savings(rbc, variant)
    except UndefinedMetricError:
        return float("nan"), float("nan")


def variant_result(name, heat, cool, rbc_heat, rbc_cool):
    """Score one variant's weekly energy against the rule-based baseline."""
    heat, cool = float(heat), float(cool)
    rbc_heat, rbc_cool = float(rbc_heat), float(rbc_cool)
    heat_pct, heat_kbtu = _component_savings(rbc_heat, heat)
    cool_pct, cool_kbtu = _component_savings(rbc_cool, cool)
    total_pct, total_kbtu = compute_savings(rbc_heat + rbc_cool, heat + cool)
    return VariantResult(
        name, heat, cool, heat + cool,
        heat_pct, heat_kbtu, cool_pct, cool_kbtu, total_pct, total_kbtu,
    )


@dataclass
class IterationReport:
    week: int
    eval_start: str
    cvrmse_heating: float
    cvrmse_cooling: float
    valve_auc: float
    auc_note: str
    mean_episode_reward: float
    variants: dict
    dense_checksums: dict


@dataclass
class IterationFailure:
    week: int
    stage: str
    message: str


class IterationError(RelearnError):
    def __init__(self, week, stage, message):
        super().__init__(f"week {week} failed during {stage}: {message}")
        self.week = week
        self.stage = stage
        self.stage_message = message


@dataclass
class Snapshot:
    """Everything a control variant needs to act on a new week."""

    scaler: ScalerParams
    models: dict
    policy: object
    value_net: LayerStack


@dataclass
class CampaignState:
    current: Snapshot
    static: Snapshot


@dataclass
class CampaignResult:
    reports: list
    failures: list
    outdir: Path


def save_dynamics_model(model, kind, path, meta=None):
    payload = dict(meta or {})
    payload["format"] = MODEL_FORMAT
    payload["kind"] = kind
    with open(path, "w") as fh:
        json.dump(stack_to_dict(model, payload), fh)
    return path


def load_dynamics_model(path, kind=None):
    with open(path) as fh:
        stack, meta = stack_from_dict(json.load(fh))
    kind = kind or meta.get("kind")
    check_architecture(stack, kind)
    return stack, meta


def greedy_policy(policy):
    """Deterministic controller: the squashed mean action."""

    def act(obs):
        action, _, _ = sample_action(policy, obs, None, deterministic=True)
        return action

    return act


def replay_setpoints(env, setpoints):
    """Drive env through an exact recorded set-point trajectory.

    The judge env shares the eval frame with the recording env, so each
    requested set point is reachable within the per-step delta limit and
    the replayed trajectory matches the recording bit for bit; only the
    models doing the energy accounting differ.
    """
    env.reset()
    results = []
    for target in setpoints:
        results.append(env.step(float(target) - env.setpoint))
    return results


def episode_energy(results):
    """Model-accounted (heat, cool) totals in kBTU over one episode."""
    heat = sum(res.info["rl_heat"] for res in results)
    cool = sum(res.info["rl_cool"] for res in results)
    return float(heat), float(cool)


def physics_energy(syncfg, judge, frame, results):
    """Meter a rolled-out trajectory with the generator's energy balance.

    judge is the outlier-filtered 5-minute frame the campaign's 30-minute
    frame was aggregated from; frame row r covers judge rows 6r..6r+5.
    Each epoch re-runs the generator physics over those six samples with
    the trajectory's supply-air value held for the whole epoch, which is
    what interval meters would record under a controller that commits to
    one set point per epoch. Returns summed (heat, cool) kBTU.
    """
    rows = np.array([res.info["row"] for res in results], dtype=np.int64)
    sat = np.array([res.next_state.sat for res in results])
    if judge.timestamps[6 * rows[0]] != frame.timestamps[rows[0]]:
        raise InputError("judge frame is not aligned with the campaign frame")
    idx = (6 * rows[:, None] + np.arange(6)[None, :]).reshape(-1)
    heat, cool = true_energy(
        syncfg,
        judge.columns["oat"][idx],
        judge.columns["sol"][idx],
        judge.columns["wbt"][idx],
        np.repeat(sat, 6),
        judge.columns["avg_stpt"][idx],
    )
    return float(np.sum(heat)), float(np.sum(cool))


def _eval_frame(frame, window):
    # Include the lookback tail of the train span so the controlled epochs
    # are exactly the eval week.
    return frame.slice(window.eval.start - LOOKBACK, window.eval.stop)


def _make_env(frame, snapshot, cfg):
    return BuildingEnv(
        frame,
        snapshot.scaler,
        snapshot.models,
        reward=RewardParams(cfg.vartheta),
        alpha=cfg.alpha,
        valve_threshold=cfg.valve_threshold,
    )


def _model_metrics(eval_frame, scaler, models):
    """Held-out CVRMSE for both energy models plus valve ranking quality.

    Also returns the tidy (t, target, truth, pred) series behind the
    metrics so campaigns can persist the measured-vs-predicted curves.
    """
    metrics = {"auc_note": ""}
    series = []
    heat_ds = make_sequences(eval_frame, scaler, "hwe", valve_gated=True)
    if len(heat_ds) == 0:
        metrics["cvrmse_heating"] = float("nan")
        metrics["auc_note"] = "no valve-on epochs in eval week"
    else:
        pred = predict_energy(models["heating"], heat_ds.inputs, scaler, "hwe")
        truth = eval_frame.columns["hwe"][heat_ds.rows]
        metrics["cvrmse_heating"] = float(cvrmse(pred, truth))
        series.extend(
            (int(r), "hwe", float(t), float(p))
            for r, t, p in zip(heat_ds.rows, truth, pred)
        )
    cool_ds = make_sequences(eval_frame, scaler, "cwe")
    pred_c = predict_energy(models["cooling"], cool_ds.inputs, scaler, "cwe")
    truth_c = eval_frame.columns["cwe"][cool_ds.rows]
    metrics["cvrmse_cooling"] = float(cvrmse(pred_c, truth_c))
    series.extend(
        (int(r), "cwe", float(t), float(p))
        for r, t, p in zip(cool_ds.rows, truth_c, pred_c)
    )
    valve_ds = make_sequences(eval_frame, scaler, "valve")
    probs = predict_valve_prob(models["valve"], valve_ds.inputs)
    try:
        metrics["valve_auc"] = float(roc_auc(probs, valve_ds.targets))
    except UndefinedMetricError:
        metrics["valve_auc"] = float("nan")
        metrics["auc_note"] = "single-class eval week"
    return metrics, series


MODEL_EVAL_HEADER = "t,target,truth,pred"


def write_model_eval(series, path):
    lines = [MODEL_EVAL_HEADER]
    for t, target, truth, pred in series:
        lines.append(f"{t},{target},{truth!r},{pred!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def run_iteration(cfg, frame, window, state, chash, judge=None):
    """One relearning step: retrain on the window, score the eval week.

    judge, when given, is the aligned 5-minute frame for physics-based
    variant metering (synthetic campaigns); without it the adaptive and
    static totals fall back to the current models' own accounting.
    Returns (IterationReport, new CampaignState, artifacts dict). Raises
    IterationError, leaving the caller's state untouched, when any stage
    fails.
    """
    week = window.index + 1
    stage = "data"
    try:
        train_frame = frame.slice(window.train.start, window.train.stop)
        eval_frame = _eval_frame(frame, window)
        scaler = fit_scaler(train_frame)
        datasets = {
            "heating": make_sequences(train_frame, scaler, "hwe"),
            "valve": make_sequences(train_frame, scaler, "valve"),
            "cooling": make_sequences(train_frame, scaler, "cwe"),
        }

        stage = "dynamics"
        rng_model = stream_rng(cfg.seed, STREAM_MODEL, week)
        models = {}
        for kind in MODEL_KINDS:
            loss = model_loss(kind)
            if state is None:
                fresh = build_model(kind, rng_model)
                result = train_model(fresh, datasets[kind], cfg.dynamics, rng_model, loss=loss)
            else:
                result = warm_start_retrain(
                    state.current.models[kind], datasets[kind], cfg.dynamics,
                    rng_model, loss=loss,
                )
            models[kind] = result.model

        stage = "controller"
        rng_ppo = stream_rng(cfg.seed, STREAM_PPO, week)

        # The policy practices on the freshest week of the window. Longer
        # spans mean week-scale closed-loop rollouts, where the models'
        # self-fed predictions drift; one week also tracks a regime change
        # as soon as it enters the window.
        spw = train_frame.samples_per_week()
        ppo_start = max(0, len(train_frame) - spw - LOOKBACK)
        ppo_frame = train_frame.slice(ppo_start, len(train_frame))

        def factory(_i):
            return _make_env(ppo_frame, Snapshot(scaler, models, None, None), cfg)

        prev_policy = state.current.policy if state is not None else None
        prev_value = state.current.value_net if state is not None else None
        outcome = train(factory, cfg.ppo, rng_ppo,
                        initial_policy=prev_policy, initial_value=prev_value)
        policy, value_net, history = outcome.policy, outcome.value, outcome.history
        mean_episode_reward = float(history[-1]["mean_episode_reward"]) if history else float("nan")

        stage = "evaluation"
        metrics, eval_series = _model_metrics(eval_frame, scaler, models)
        current = Snapshot(scaler, models, policy, value_net)
        static = state.static if state is not None else current

        rbc_heat = float(np.sum(frame.columns["hwe"][window.eval]))
        rbc_cool = float(np.sum(frame.columns["cwe"][window.eval]))

        variants = {}
        artifacts = {}
        if "rbc" in cfg.variants:
            variants["rbc"] = variant_result("rbc", rbc_heat, rbc_cool, rbc_heat, rbc_cool)
        if judge is not None:
            # Episode rows index eval_frame; cut the matching 5-minute span.
            off = window.eval.start - LOOKBACK
            judge_slice = judge.slice(6 * off, 6 * (off + len(eval_frame)))

        def meter(results):
            if judge is not None:
                return physics_energy(cfg.synthetic, judge_slice, eval_frame, results)
            return episode_energy(results)

        if "adaptive" in cfg.variants:
            env = _make_env(eval_frame, current, cfg)
            results = run_episode(env, greedy_policy(policy))
            heat, cool = meter(results)
            variants["adaptive"] = variant_result("adaptive", heat, cool, rbc_heat, rbc_cool)
            artifacts["trajectories"] = results
        if "static" in cfg.variants:
            env_static = _make_env(eval_frame, static, cfg)
            recorded = run_episode(env_static, greedy_policy(static.policy))
            setpoints = [res.next_state.setpoint for res in recorded]
            judge_env = _make_env(eval_frame, current, cfg)
            replayed = replay_setpoints(judge_env, setpoints)
            heat, cool = meter(replayed)
            variants["static"] = variant_result("static", heat, cool, rbc_heat, rbc_cool)
            artifacts["trajectories_static"] = replayed

        stage = "artifacts"
        dense = {
            kind: params_checksum(models[kind], kinds=("dense",))
            for kind in MODEL_KINDS
        }
        report = IterationReport(
            week=week,
            eval_start=str(frame.timestamps[window.eval.start]),
            cvrmse_heating=metrics["cvrmse_heating"],
            cvrmse_cooling=metrics["cvrmse_cooling"],
            valve_auc=metrics["valve_auc"],
            auc_note=metrics["auc_note"],
            mean_episode_reward=mean_episode_reward,
            variants=variants,
            dense_checksums=dense,
        )
        artifacts["history"] = history
        artifacts["model_eval"] = eval_series
        return report, CampaignState(current=current, static=static), artifacts
    except IterationError:
        raise
    except Exception as exc:
        raise IterationError(week, stage, str(exc)) from exc


def _variant_rows(report):
    rows = []
    for name in ("adaptive", "static", "rbc"):
        if name not in report.variants:
            continue
        v = report.variants[name]
        rows.append(",".join([
            str(report.week),
            report.eval_start,
            v.name,
            repr(v.heat_kbtu),
            repr(v.cool_kbtu),
            repr(v.total_kbtu),
            repr(v.heat_savings_pct),
            repr(v.heat_savings_kbtu),
            repr(v.cool_savings_pct),
            repr(v.cool_savings_kbtu),
            repr(v.savings_pct),
            repr(v.savings_kbtu),
        ]))
    return rows


def write_summary(reports, path):
    lines = [SUMMARY_HEADER]
    for report in reports:
        lines.extend(_variant_rows(report))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_model_metrics(reports, path):
    lines = [MODEL_METRICS_HEADER]
    for r in reports:
        lines.append(",".join([
            str(r.week),
            repr(r.cvrmse_heating),
            repr(r.cvrmse_cooling),
            repr(r.valve_auc),
            r.auc_note.replace(",", ";"),
            repr(r.mean_episode_reward),
        ]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def reward_monitor(reports):
    """Logged diagnostic: is the weekly controller reward trending down?

    Reports the weekly mean episode rewards and the length of the longest
    strictly decreasing run. Purely informational; relearning stays on the
    weekly schedule regardless.
    """
    rewards = [float(r.mean_episode_reward) for r in reports]
    longest = run = 0
    for prev, cur in zip(rewards, rewards[1:]):
        run = run + 1 if cur < prev else 0
        longest = max(longest, run)
    return {"weekly_rewards": rewards, "longest_decreasing_run": longest}


def compare_variants(reports):
    """Across-weeks aggregates plus adaptive-vs-static head-to-head wins."""
    out = {}
    names = set()
    for r in reports:
        names.update(r.variants)
    for name in sorted(names - {"rbc"}):
        pcts = [r.variants[name].savings_pct for r in reports if name in r.variants]
        if not pcts:
            continue
        mean = float(np.mean(pcts))
        std = float(np.std(pcts))
        out[name] = {
            "mean_savings_pct": mean,
            "std_savings_pct": std,
            "formatted": format_savings(mean, std),
            "weeks": len(pcts),
        }
    both = [r for r in reports if "adaptive" in r.variants and "static" in r.variants]
    if both:
        wins = sum(
            1 for r in both
            if r.variants["adaptive"].total_kbtu < r.variants["static"].total_kbtu
        )
        out["head_to_head"] = {"weeks": len(both), "adaptive_wins": wins}
    return out


def _write_checkpoints(ckpt_dir, snapshot, chash, seed, week):
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    meta = {"config_hash": chash, "seed": seed, "week": week}
    for kind in MODEL_KINDS:
        save_dynamics_model(snapshot.models[kind], kind, ckpt_dir / f"{kind}.json", meta)
    save_controller(snapshot.policy, snapshot.value_net,
                    ckpt_dir / "controller.json", config_hash=chash)
    with open(ckpt_dir / "scaler.json", "w") as fh:
        fh.write(snapshot.scaler.to_json())


def load_frames(cfg):
    """Campaign frames: (30-minute frame, aligned 5-minute judge or None).

    The judge frame exists only for synthetic campaigns, where the
    generator physics can meter counterfactual set-point trajectories.
    """
    if cfg.data_path:
        raw = ingest_csv(cfg.data_path)
        return aggregate_30min(remove_outliers(raw, cfg.outlier_k)), None
    filtered = remove_outliers(generate_synthetic(cfg.synthetic), cfg.outlier_k)
    return aggregate_30min(filtered), filtered


def load_frame(cfg):
    """The campaign's 30-minute frame: ingest cfg.data_path or synthesize."""
    return load_frames(cfg)[0]


def run_campaign(cfg, outdir, frame=None, log=None):
    """Run every window of the sliding schedule and write the output tree.

    outdir gains week_XX/{checkpoints,report.csv,training.csv,
    trajectories*.csv}, a static_snapshot/ copy of the first successful
    week, summary.csv, model_metrics.csv, and campaign.json. Returns a
    CampaignResult; failures are recorded there and in campaign.json
    rather than raised.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    judge = None
    if frame is None:
        frame, judge = load_frames(cfg)
    windows = make_windows(frame, cfg.windows)
    if cfg.n_weeks:
        windows = windows[: cfg.n_weeks]
    chash = config_hash(cfg)

    state = None
    reports = []
    failures = []
    checksum_log = []
    for window in windows:
        week = window.index + 1
        if log is not None:
            log("week %02d: train %s eval %s" % (week, window.train, window.eval))
        try:
            report, new_state, artifacts = run_iteration(
                cfg, frame, window, state, chash, judge=judge
            )
        except IterationError as exc:
            failures.append(IterationFailure(exc.week, exc.stage, exc.stage_message))
            if log is not None:
                log(f"week {week:02d}: FAILED in {exc.stage}: {exc.stage_message}")
            continue

        week_dir = outdir / f"week_{week:02d}"
        week_dir.mkdir(parents=True, exist_ok=True)
        _write_checkpoints(week_dir / "checkpoints", new_state.current, chash, cfg.seed, week)
        if state is None:
            _write_checkpoints(outdir / "static_snapshot", new_state.static, chash, cfg.seed, week)
        if "trajectories" in artifacts:
            write_trajectory(artifacts["trajectories"], week_dir / "trajectories.csv")
        if "trajectories_static" in artifacts:
            write_trajectory(artifacts["trajectories_static"],
                             week_dir / "trajectories_static.csv")
        write_training_log(artifacts["history"], week_dir / "training.csv")
        write_model_eval(artifacts["model_eval"], week_dir / "model_eval.csv")
        with open(week_dir / "report.csv", "w") as fh:
            fh.write("\n".join([SUMMARY_HEADER] + _variant_rows(report)) + "\n")

        checksum_log.append({"week": week, **report.dense_checksums})
        reports.append(report)
        state = new_state

    write_summary(reports, outdir / "summary.csv")
    write_model_metrics(reports, outdir / "model_metrics.csv")
    payload = {
        "version": __version__,
        "config_hash": chash,
        "seed": cfg.seed,
        "config": config_dict(cfg),
        "weeks_completed": [r.week for r in reports],
        "failures": [dataclasses.asdict(f) for f in failures],
        "dense_checksums": checksum_log,
        "comparison": compare_variants(reports),
        "reward_monitor": reward_monitor(reports),
    }
    with open(outdir / "campaign.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    return CampaignResult(reports=reports, failures=failures, outdir=outdir)
