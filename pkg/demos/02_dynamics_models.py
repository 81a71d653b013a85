"""Train the three building dynamics models and score an eval week.

Heating energy, cooling energy, and the heating valve state each get a
small dense+LSTM network. All three read the same six-epoch history of
scaled telemetry; they differ in head activation and loss. This script
trains them on the first sliding window of a synthetic campaign and then
compares predictions against the held-out eval week, including the effect
of warm-start retraining when a cold front invalidates the old weather.

Run from the repository root (takes half a minute or so):

    python3 demos/02_dynamics_models.py
"""

import numpy as np

from relearn_hvac.config import CampaignConfig, stream_rng, STREAM_MODEL
from relearn_hvac.metrics import cvrmse, roc_auc
from relearn_hvac.models import (
    ARCHITECTURES,
    MODEL_KINDS,
    TARGET_COLUMNS,
    build_model,
    model_loss,
    predict_energy,
    predict_valve_prob,
    train_model,
    warm_start_retrain,
)
from relearn_hvac.orchestrator import load_frame
from relearn_hvac.pipeline import (
    LOOKBACK,
    derive_valve_labels,
    fit_scaler,
    make_sequences,
    make_windows,
)
from relearn_hvac.synthetic import SyntheticGenConfig


def train_window_models(frame, window, cfg, seed, iteration):
    train = frame.slice(window.train.start, window.train.stop)
    scaler = fit_scaler(train)
    rng = stream_rng(seed, STREAM_MODEL, iteration)
    models = {}
    for kind in MODEL_KINDS:
        target = "valve" if kind == "valve" else TARGET_COLUMNS[kind]
        dataset = make_sequences(train, scaler, target)
        result = train_model(
            build_model(kind, rng), dataset, cfg.dynamics, rng, loss=model_loss(kind)
        )
        models[kind] = result.model
        print(f"  {kind:8s} stopped at epoch {result.best_epoch:2d}, "
              f"val loss {min(result.val_losses):.5f}")
    return scaler, models


def score(frame, window, scaler, models):
    ev = frame.slice(window.eval.start - LOOKBACK, window.eval.stop)
    seqs = make_sequences(ev, scaler, "hwe", valve_gated=False)
    truth_h = ev.columns["hwe"][LOOKBACK:]
    on = truth_h > 0.0
    pred_h = predict_energy(models["heating"], seqs.inputs, scaler, "hwe")
    pred_c = predict_energy(models["cooling"], seqs.inputs, scaler, "cwe")
    truth_c = ev.columns["cwe"][LOOKBACK:]
    prob = predict_valve_prob(models["valve"], seqs.inputs)
    labels = derive_valve_labels(ev)[LOOKBACK:]
    return {
        "cvrmse_heating": cvrmse(pred_h[on], truth_h[on]),
        "cvrmse_cooling": cvrmse(pred_c, truth_c),
        "valve_auc": roc_auc(prob, labels),
    }


def main():
    print("architectures (dense layers, width, lstm layers, width, head, loss):")
    for kind, arch in ARCHITECTURES.items():
        print(f"  {kind:8s} {arch}")

    cfg = CampaignConfig(synthetic=SyntheticGenConfig(n_weeks=15, regime_shift_week=13))
    frame = load_frame(cfg)
    windows = make_windows(frame, cfg.windows)
    print(f"\n{len(windows)} windows on a 15-week frame with a week-14 cold front")

    print("\ntraining fresh models on window 1 (all warm weather):")
    scaler1, models1 = train_window_models(frame, windows[0], cfg, seed=0, iteration=1)
    s1 = score(frame, windows[0], scaler1, models1)
    print("  eval week 14 (front arriving):",
          " ".join(f"{k}={v:.3f}" for k, v in s1.items()))

    # Window 2's eval week is fully inside the new regime. The frozen
    # window-1 models have never seen preheat weather; the warm-started
    # retrain keeps their dense feature layers bitwise frozen and lets the
    # LSTM layers adapt to the sliding window's newest week.
    w2 = windows[1]
    train2 = frame.slice(w2.train.start, w2.train.stop)
    scaler2 = fit_scaler(train2)
    rng2 = stream_rng(0, STREAM_MODEL, 2)
    ds2 = make_sequences(train2, scaler2, "hwe")
    warm = warm_start_retrain(
        models1["heating"], ds2, cfg.dynamics, rng2, loss=model_loss("heating")
    ).model

    ev2 = frame.slice(w2.eval.start - LOOKBACK, w2.eval.stop)
    truth = ev2.columns["hwe"][LOOKBACK:]
    on = truth > 0.0
    frozen_pred = predict_energy(
        models1["heating"],
        make_sequences(ev2, scaler1, "hwe", valve_gated=False).inputs,
        scaler1, "hwe",
    )
    warm_pred = predict_energy(
        warm,
        make_sequences(ev2, scaler2, "hwe", valve_gated=False).inputs,
        scaler2, "hwe",
    )
    print("\nheating CVRMSE on the fully shifted eval week 15:")
    print(f"  frozen window-1 model : {cvrmse(frozen_pred[on], truth[on]):.4f}")
    print(f"  warm-start retrained  : {cvrmse(warm_pred[on], truth[on]):.4f}")
    print("\nweekly heating truth vs both models (kBTU):")
    print(f"  truth  {np.sum(truth):8.1f}")
    print(f"  frozen {np.sum(np.where(on, frozen_pred, 0.0)):8.1f}")
    print(f"  warm   {np.sum(np.where(on, warm_pred, 0.0)):8.1f}")


if __name__ == "__main__":
    main()
