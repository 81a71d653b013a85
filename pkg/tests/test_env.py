"""Building environment: reward pieces, step mechanics, episode properties."""

import numpy as np
import pytest

from relearn_hvac.env import (
    BuildingEnv,
    MODE_PREHEAT,
    MODE_REHEAT,
    RewardParams,
    TRAJECTORY_HEADER,
    apply_action,
    exogenous_lookup,
    operating_mode,
    reward_comfort,
    reward_energy,
    run_episode,
    sat_transition,
    write_trajectory,
)
from relearn_hvac.errors import ConfigurationError, InputError, UsageError
from relearn_hvac.pipeline import TimeSeriesFrame, fit_scaler, scale_values


class ConstModel:
    """Stub dynamics model: forward() returns a fixed scalar per sample."""

    in_size = 8

    def __init__(self, value):
        self.value = float(value)

    def forward(self, x):
        x = np.asarray(x)
        return np.full((x.shape[0], 1), self.value)


def make_frame(n=40, seed=99, sat=None, avg_stpt=68.0, wbt=60.0, hwe=None,
               cwe=None):
    ts = (np.datetime64("2024-01-01T00:00:00")
          + np.arange(n) * np.timedelta64(30, "m"))
    rng = np.random.default_rng(seed)
    cols = {
        "oat": 70.0 + rng.uniform(-3, 3, n),
        "orh": 50.0 + rng.uniform(-5, 5, n),
        "wbt": np.full(n, wbt) + rng.uniform(-1, 1, n),
        "sol": rng.uniform(0, 500, n),
        "avg_stpt": np.full(n, avg_stpt),
        "sat": np.full(n, 65.0) + rng.uniform(-1, 1, n) if sat is None
               else np.full(n, float(sat)),
        "hwe": rng.uniform(0, 8, n) * (rng.uniform(size=n) > 0.3) if hwe is None
               else np.full(n, float(hwe)),
        "cwe": rng.uniform(0, 4, n) if cwe is None else np.full(n, float(cwe)),
    }
    return TimeSeriesFrame(ts, cols)


def make_env(frame=None, heat=0.4, cool=0.3, valve=0.9, **kwargs):
    if frame is None:
        frame = make_frame()
    scaler = fit_scaler(frame)
    models = {
        "heating": ConstModel(heat),
        "valve": ConstModel(valve),
        "cooling": ConstModel(cool),
    }
    return BuildingEnv(frame, scaler, models, **kwargs), frame, scaler


def test_operating_mode_examples():
    assert operating_mode(60.0) == MODE_REHEAT
    assert operating_mode(40.0) == MODE_PREHEAT
    assert operating_mode(52.0) == MODE_REHEAT
    with pytest.raises(InputError):
        operating_mode(float("nan"))


def test_apply_action_examples():
    assert apply_action(65.0, 1.3) == pytest.approx(66.3)
    assert apply_action(74.5, 2.0) == 75.0
    assert apply_action(65.0, 2.7) == 67.0
    assert apply_action(56.0, -3.0) == 55.0
    with pytest.raises(InputError):
        apply_action(65.0, float("inf"))


def test_sat_transition_examples():
    assert sat_transition(65.0, 65.0) == 65.0
    assert sat_transition(64.0, 66.0, alpha=1.0) == 66.0
    assert sat_transition(64.0, 66.0, alpha=0.5) == 65.0


def test_reward_comfort_examples():
    assert reward_comfort(70.0, 70.0) == 1.0
    assert reward_comfort(70.0, 66.0) == pytest.approx(0.2)
    assert reward_comfort(70.0, 55.0) == -15.0
    assert reward_comfort(70.0, 60.0) == pytest.approx(1.0 / 11.0)


def test_reward_comfort_bounded_and_smooth_in_band():
    deltas = np.linspace(0.0, 10.0, 400)
    values = np.array([reward_comfort(70.0, 70.0 + d) for d in deltas])
    assert np.all(values <= 1.0)
    assert np.max(np.abs(np.diff(values))) < 0.03


def test_reward_energy_examples():
    assert reward_energy(1, 5.0, 1, 5.0, 2.0, 2.0) == 0.0
    assert reward_energy(1, 5.0, 1, 3.0, 2.0, 1.5) == 2.5
    assert reward_energy(1, 5.0, 0, 99.0, 2.0, 2.0) == 5.0


def test_reward_params_validation():
    RewardParams(0.0)
    RewardParams(1.0)
    with pytest.raises(ConfigurationError):
        RewardParams(1.5)


def test_exogenous_lookup():
    frame = make_frame(10)
    first = exogenous_lookup(frame, 0)
    assert first.oat == frame.columns["oat"][0]
    assert exogenous_lookup(frame, 10) is None
    assert exogenous_lookup(frame, 9) is not None
    with pytest.raises(InputError):
        exogenous_lookup(frame, -1)


def test_reset_contract():
    env, frame, scaler = make_env()
    obs = env.reset()
    assert env.t == 6
    assert obs.shape == (9,)
    assert env.setpoint == frame.columns["sat"][5]
    expected = scale_values(env.setpoint, "sat", scaler)
    assert obs[-1] == expected
    obs2 = env.reset()
    assert np.array_equal(obs, obs2)


def test_short_window_rejected():
    with pytest.raises(InputError):
        make_env(frame=make_frame(6))


def test_step_before_reset_rejected():
    env, _, _ = make_env()
    with pytest.raises(UsageError):
        env.step(0.0)


def test_episode_is_window_minus_lookback():
    env, frame, _ = make_env(frame=make_frame(20))
    env.reset()
    steps = 0
    done = False
    while not done:
        done = env.step(0.5).done
        steps += 1
    assert steps == 14 == env.episode_length()
    with pytest.raises(UsageError):
        env.step(0.0)


def test_exogenous_columns_ignore_actions():
    env, _, _ = make_env()
    rng = np.random.default_rng(0)

    def trace(seed):
        actions = np.random.default_rng(seed).uniform(-2, 2, env.episode_length())
        env.reset()
        return [
            (r.info["row"], r.next_state.exo.oat, r.next_state.exo.avg_stpt)
            for r in (env.step(a) for a in actions)
        ]

    assert trace(1) == trace(2)


def test_setpoint_moves_at_most_two_degrees():
    env, _, _ = make_env()
    env.reset()
    rng = np.random.default_rng(3)
    prev = env.setpoint
    for _ in range(env.episode_length()):
        res = env.step(rng.uniform(-6, 6))
        now = res.next_state.setpoint
        assert abs(now - prev) <= 2.0 + 1e-12
        assert 55.0 <= now <= 75.0
        prev = now


@pytest.mark.parametrize("vartheta", [0.5, 0.3])
def test_reward_decomposition_exact(vartheta):
    env, _, _ = make_env(reward=RewardParams(vartheta))
    env.reset()
    rng = np.random.default_rng(4)
    for _ in range(10):
        res = env.step(rng.uniform(-2, 2))
        expected = vartheta * res.reward_energy + (1 - vartheta) * res.reward_comfort
        assert res.reward == expected


def test_valve_off_zeroes_heating_everywhere():
    frame = make_frame()
    env_hot, _, _ = make_env(frame=frame, valve=0.2, heat=0.9)
    env_cold, _, _ = make_env(frame=frame, valve=0.2, heat=0.0)
    env_hot.reset()
    env_cold.reset()
    for _ in range(10):
        a, b = env_hot.step(1.0), env_cold.step(1.0)
        assert a.reward_energy == b.reward_energy
        assert a.info["rl_heat"] == 0.0
        assert not a.info["rl_valve"]
        assert a.observation[6] == 0.0


def test_valve_threshold_is_inclusive():
    env, _, _ = make_env(valve=0.5)
    env.reset()
    assert env.step(0.0).info["rl_valve"]


def test_episode_determinism():
    env, _, _ = make_env()
    actions = np.random.default_rng(5).uniform(-2, 2, env.episode_length())

    def run():
        env.reset()
        return [(r.reward, r.next_state.setpoint, r.next_state.sat)
                for r in (env.step(a) for a in actions)]

    assert run() == run()


def test_identical_rl_and_rbc_gives_half_reward():
    # Constant energy columns collapse to scaled 0 on both sides, and a
    # zero-delta policy holds the set-point at avg_stpt, so the composite
    # reward is exactly (1 - vartheta) * 1 = 0.5.
    frame = make_frame(sat=68.0, avg_stpt=68.0, hwe=5.0, cwe=2.0)
    env, _, _ = make_env(frame=frame, heat=0.0, cool=0.0, valve=0.9)
    env.reset()
    for _ in range(5):
        res = env.step(0.0)
        assert res.reward == 0.5
        assert res.reward_energy == 0.0
        assert res.reward_comfort == 1.0


def test_sat_lags_setpoint_with_partial_alpha():
    frame = make_frame(sat=65.0)
    env, _, _ = make_env(frame=frame, alpha=0.5)
    env.reset()
    res = env.step(2.0)
    assert res.next_state.setpoint == 67.0
    assert res.next_state.sat == 66.0


def test_observation_reflects_pushed_row():
    env, frame, scaler = make_env()
    env.reset()
    res = env.step(1.0)
    obs = res.observation
    assert np.array_equal(obs[:-1], env.history[-1])
    assert obs[5] == scale_values(env.sat, "sat", scaler)
    assert obs[-1] == scale_values(env.setpoint, "sat", scaler)


def test_missing_model_and_bad_alpha_rejected():
    frame = make_frame()
    scaler = fit_scaler(frame)
    with pytest.raises(ConfigurationError):
        BuildingEnv(frame, scaler, {"heating": ConstModel(0.1)})
    with pytest.raises(ConfigurationError):
        make_env(alpha=0.0)


def test_trajectory_csv_round_trip(tmp_path):
    env, _, _ = make_env(frame=make_frame(16))
    rng = np.random.default_rng(6)
    results = run_episode(env, lambda obs: rng.uniform(-2, 2))
    path = write_trajectory(results, tmp_path / "traj.csv")
    lines = open(path).read().splitlines()
    assert lines[0] == TRAJECTORY_HEADER
    assert len(lines) == 1 + env.episode_length()
    cells = lines[1].split(",")
    assert cells[0] == "6"
    assert cells[7] in (MODE_REHEAT, MODE_PREHEAT)
    assert float(cells[1]) == results[0].next_state.setpoint
