"""Synthetic generator contracts: determinism, periodicity, regime shift."""

import numpy as np
import pytest

from relearn_hvac.errors import ConfigurationError
from relearn_hvac.pipeline import COLUMNS, aggregate_30min, derive_valve_labels
from relearn_hvac.synthetic import (
    SAMPLES_PER_DAY,
    SAMPLES_PER_WEEK,
    SyntheticGenConfig,
    generate_synthetic,
    true_energy,
)


def small_cfg(**overrides):
    kw = dict(n_weeks=15, seed=3)
    kw.update(overrides)
    return SyntheticGenConfig(**kw)


def test_deterministic_by_seed():
    a = generate_synthetic(small_cfg())
    b = generate_synthetic(small_cfg())
    for name in COLUMNS:
        assert a.columns[name].tobytes() == b.columns[name].tobytes()


def test_different_seeds_differ():
    a = generate_synthetic(small_cfg(seed=1))
    b = generate_synthetic(small_cfg(seed=2))
    assert not np.array_equal(a.columns["oat"], b.columns["oat"])


def test_row_count_and_period():
    frame = generate_synthetic(small_cfg())
    assert len(frame) == 15 * SAMPLES_PER_WEEK
    assert frame.period == np.timedelta64(5, "m")


def test_zero_noise_weather_is_periodic():
    cfg = small_cfg(
        noise_oat=0.0, noise_wbt=0.0, noise_orh=0.0, noise_sol=0.0,
        noise_energy=0.0, stpt_jitter=0.0, seasonal_amp=0.0,
        regime_shift_week=13,
    )
    frame = generate_synthetic(cfg)
    day = SAMPLES_PER_DAY
    # Two pre-shift days are identical sample for sample.
    for name in ("oat", "wbt", "orh", "sol"):
        assert np.allclose(frame.columns[name][:day], frame.columns[name][day:2 * day])


def test_regime_shift_drops_weekly_mean_wbt_below_boundary():
    cfg = small_cfg(regime_shift_week=13)
    frame = generate_synthetic(cfg)
    agg = aggregate_30min(frame)
    per_week = agg.samples_per_week()
    for week in range(13, 15):
        mean_wbt = agg.columns["wbt"][week * per_week:(week + 1) * per_week].mean()
        assert mean_wbt < 52.0
    pre = agg.columns["wbt"][:13 * per_week].mean()
    assert pre > 52.0


def test_rule_based_sat_tracks_mode():
    frame = generate_synthetic(small_cfg(regime_shift_week=13, rbc_sat_noise=0.0))
    reheat = frame.columns["wbt"] >= 52.0
    assert np.all(frame.columns["sat"][reheat] == 65.0)
    assert np.all(frame.columns["sat"][~reheat] == 72.0)


def test_sat_jitter_wanders_around_schedule_within_band():
    frame = generate_synthetic(small_cfg(regime_shift_week=13))
    sat = frame.columns["sat"]
    reheat = frame.columns["wbt"] >= 52.0
    assert sat.min() >= 55.0 and sat.max() <= 75.0
    # Centered near each regime's schedule value. The cold schedule sits
    # 3F under the band ceiling, so clipping drags its mean down a little.
    assert abs(sat[reheat].mean() - 65.0) < 1.5
    assert abs(sat[~reheat].mean() - 72.0) < 3.0
    # The wander must cover most of the action band: downstream models are
    # asked to judge policy-chosen set points anywhere inside it. The cold
    # segment here is only two weeks, so its coverage claim is looser.
    assert sat[reheat].std() > 3.0
    assert sat[~reheat].std() > 2.0
    assert np.percentile(sat[reheat], 2) < 58.0
    assert np.percentile(sat[reheat], 98) > 72.0
    assert sat[~reheat].min() < 62.0


def test_valve_classes_present_every_week():
    frame = generate_synthetic(small_cfg(regime_shift_week=13))
    agg = aggregate_30min(frame)
    labels = derive_valve_labels(agg)
    per_week = agg.samples_per_week()
    for week in range(15):
        sl = labels[week * per_week:(week + 1) * per_week]
        assert 0.05 < sl.mean() < 0.95, f"week {week} one-sided: {sl.mean()}"


def test_valve_off_means_zero_heating():
    frame = generate_synthetic(small_cfg())
    hwe = frame.columns["hwe"]
    assert np.all(hwe >= 0.0)
    assert np.any(hwe == 0.0) and np.any(hwe > 0.0)


def test_avg_stpt_stays_in_band_and_steps_up():
    frame = generate_synthetic(small_cfg(regime_shift_week=13))
    stpt = frame.columns["avg_stpt"]
    assert stpt.min() >= 67.0 and stpt.max() <= 73.0
    pre = stpt[:13 * SAMPLES_PER_WEEK].mean()
    post = stpt[14 * SAMPLES_PER_WEEK:].mean()
    assert post - pre > 2.0


def test_avg_stpt_piecewise_constant_per_day():
    frame = generate_synthetic(small_cfg())
    day = frame.columns["avg_stpt"][:SAMPLES_PER_DAY]
    assert np.all(day == day[0])


def test_true_energy_oracle_matches_columns_with_zero_noise():
    cfg = small_cfg(noise_energy=0.0)
    frame = generate_synthetic(cfg)
    hwe, cwe = true_energy(
        cfg,
        frame.columns["oat"],
        frame.columns["sol"],
        frame.columns["wbt"],
        frame.columns["sat"],
        frame.columns["avg_stpt"],
    )
    assert np.allclose(hwe, frame.columns["hwe"], atol=1e-12)
    assert np.allclose(cwe, frame.columns["cwe"], atol=1e-12)


def test_raising_sat_in_cold_regime_saves_true_heating():
    # VRF zone heating is less efficient than the central coil, so in the
    # cold regime discharging warmer air reduces total heating demand.
    cfg = small_cfg()
    oat, sol, wbt, stpt = 32.0, 0.0, 24.0, 72.0
    low, _ = true_energy(cfg, oat, sol, wbt, 66.0, stpt)
    high, _ = true_energy(cfg, oat, sol, wbt, 72.0, stpt)
    assert high < low


def test_config_validation():
    with pytest.raises(ConfigurationError):
        generate_synthetic(SyntheticGenConfig(n_weeks=14))
    with pytest.raises(ConfigurationError):
        generate_synthetic(SyntheticGenConfig(n_weeks=15, ar_coeff=1.0))
