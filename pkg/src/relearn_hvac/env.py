"""Simulated building loop driving set-point control episodes.

The environment walks a 30-minute window of historical (or generated) data.
Weather and occupant preferences are exogenous: they come from the data and
never react to the controller. Everything the controller influences, the
supply air temperature and the predicted coil energies, is advanced by the
learned dynamics models. Each episode is one traversal of the active window.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InputError, UsageError
from .models import predict_scaled, predict_valve_prob
from .pipeline import (
    COLUMNS,
    LOOKBACK,
    apply_scaler,
    derive_valve_labels,
    scale_values,
    unscale_values,
)

# Mode boundary: wet-bulb at or above this runs the cooling coil with reheat,
# below it only the preheat coil operates.
MODE_WBT_F = 52.0
MODE_REHEAT = "reheat"
MODE_PREHEAT = "preheat"

SETPOINT_LO_F = 55.0
SETPOINT_HI_F = 75.0
DELTA_LIMIT_F = 2.0
COMFORT_BAND_F = 10.0

# rows: t, setpoint, sat, action, reward, both components, mode, four energies
TRAJECTORY_HEADER = (
    "t,setpoint,sat,action,reward,reward_energy,reward_comfort,mode,"
    "rl_heat,rl_cool,rbc_heat,rbc_cool"
)


def operating_mode(wbt):
    """Reheat at or above the wet-bulb boundary, preheat below it."""
    if not np.isfinite(wbt):
        raise InputError("wet-bulb temperature must be finite")
    return MODE_REHEAT if wbt >= MODE_WBT_F else MODE_PREHEAT


def apply_action(setpoint, delta, lo=SETPOINT_LO_F, hi=SETPOINT_HI_F,
                 limit=DELTA_LIMIT_F):
    """New set-point: delta clamped to +-limit, result clamped to [lo, hi]."""
    if not np.isfinite(delta):
        raise InputError("action delta must be finite")
    delta = min(max(float(delta), -limit), limit)
    return min(max(setpoint + delta, lo), hi)


def sat_transition(sat, setpoint, alpha=1.0):
    """First-order tracking toward the set-point; alpha=1 is perfect."""
    return sat + alpha * (setpoint - sat)


def reward_comfort(avg_stpt, rl_setpoint, band=COMFORT_BAND_F):
    """Bounded hyperbolic reward inside the band, linear penalty outside."""
    delta = abs(avg_stpt - rl_setpoint)
    return 1.0 / (delta + 1.0) if delta <= band else -delta


def reward_energy(rbc_valve, rbc_heat, rl_valve, rl_heat, rbc_cool, rl_cool):
    """Savings of the controller against the baseline, valve-gated heating."""
    return rbc_valve * rbc_heat - rl_valve * rl_heat + rbc_cool - rl_cool


@dataclass
class RewardParams:
    """Mixing weight between the energy and comfort terms."""

    vartheta: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.vartheta <= 1.0):
            raise ConfigurationError("vartheta must be in [0, 1]")


@dataclass
class ExogenousState:
    oat: float
    orh: float
    wbt: float
    sol: float
    avg_stpt: float


@dataclass
class EnvState:
    exo: ExogenousState
    sat: float
    setpoint: float
    f_h: float
    f_c: float
    history: np.ndarray
    t: int


@dataclass
class StepResult:
    next_state: EnvState
    observation: np.ndarray
    reward: float
    reward_energy: float
    reward_comfort: float
    done: bool
    info: dict = field(default_factory=dict)


def exogenous_lookup(frame, t):
    """Row t's exogenous columns; None past the window end (episode over)."""
    if t < 0:
        raise InputError("epoch index must be non-negative")
    if t >= len(frame):
        return None
    cols = frame.columns
    return ExogenousState(
        oat=float(cols["oat"][t]),
        orh=float(cols["orh"][t]),
        wbt=float(cols["wbt"][t]),
        sol=float(cols["sol"][t]),
        avg_stpt=float(cols["avg_stpt"][t]),
    )


class BuildingEnv:
    """Exogenous-state MDP over one data window and one model checkpoint set.

    models: dict with "heating", "valve", "cooling" stacks. The observation
    is the latest scaled history row plus the scaled current set-point.
    Deterministic: same window, models, and action sequence give the same
    trajectory bit for bit.
    """

    observation_size = len(COLUMNS) + 1

    def __init__(self, frame, scaler, models, reward=None, alpha=1.0,
                 valve_threshold=0.5):
        if len(frame) < LOOKBACK + 1:
            raise InputError(
                f"window needs more than {LOOKBACK} samples, got {len(frame)}"
            )
        if not (0.0 < alpha <= 1.0):
            raise ConfigurationError("alpha must be in (0, 1]")
        for kind in ("heating", "valve", "cooling"):
            if kind not in models:
                raise ConfigurationError(f"missing {kind} model")
        self.frame = frame
        self.scaler = scaler
        self.models = models
        self.reward_params = reward if reward is not None else RewardParams()
        self.alpha = alpha
        self.valve_threshold = valve_threshold
        # Everything the step loop reads, precomputed once per window.
        self.scaled = apply_scaler(frame, scaler)
        self.valve_labels = derive_valve_labels(frame)
        self.raw_sat = frame.columns["sat"]
        self.raw_avg_stpt = frame.columns["avg_stpt"]
        self.raw_wbt = frame.columns["wbt"]
        self.history = np.zeros((LOOKBACK, len(COLUMNS)))
        self.t = 0
        self.sat = 0.0
        self.setpoint = 0.0
        self.f_h = 0.0
        self.f_c = 0.0
        self.done = True
        self._started = False

    def episode_length(self):
        return len(self.frame) - LOOKBACK

    def reset(self):
        """Prime the history with the first 6 rows; control starts at row 6."""
        self.history[:] = self.scaled[:LOOKBACK]
        self.t = LOOKBACK
        self.sat = float(self.raw_sat[LOOKBACK - 1])
        self.setpoint = self.sat
        self.f_h = float(self.frame.columns["hwe"][LOOKBACK - 1])
        self.f_c = float(self.frame.columns["cwe"][LOOKBACK - 1])
        self.done = False
        self._started = True
        return self.observation()

    def observation(self):
        obs = np.empty(self.observation_size)
        obs[:-1] = self.history[-1]
        obs[-1] = scale_values(self.setpoint, "sat", self.scaler)
        return obs

    def state(self):
        exo = exogenous_lookup(self.frame, min(self.t, len(self.frame) - 1))
        return EnvState(exo, self.sat, self.setpoint, self.f_h, self.f_c,
                        self.history.copy(), self.t)

    def step(self, delta):
        """Realize epoch t under the action, then advance.

        The dynamics models predict epoch t from the six rows before it, so
        this step's set-point move reaches the energy terms one interval
        later, the same lag as the supply air tracking itself.
        """
        if self.done or not self._started:
            raise UsageError("environment must be reset before stepping")
        setpoint = apply_action(self.setpoint, delta)
        applied = setpoint - self.setpoint
        sat = sat_transition(self.sat, setpoint, self.alpha)
        row = self.t

        # Controller-side energies for this epoch, from the pre-action history.
        heat_pred = float(predict_scaled(self.models["heating"], self.history))
        cool_pred = float(predict_scaled(self.models["cooling"], self.history))
        valve_prob = float(predict_valve_prob(self.models["valve"], self.history))
        rl_on = 1.0 if valve_prob >= self.valve_threshold else 0.0

        # Baseline quantities are the recorded data itself.
        rbc_valve = float(self.valve_labels[row])
        rbc_heat = float(self.scaled[row, 6])
        rbc_cool = float(self.scaled[row, 7])

        r_energy = reward_energy(rbc_valve, rbc_heat, rl_on, heat_pred,
                                 rbc_cool, cool_pred)
        r_comfort = reward_comfort(float(self.raw_avg_stpt[row]), setpoint)
        vt = self.reward_params.vartheta
        r = vt * r_energy + (1.0 - vt) * r_comfort

        # Push the realized row: exogenous columns from the data, sat and
        # energies from the controller's own trajectory.
        self.history[:-1] = self.history[1:]
        self.history[-1, :5] = self.scaled[row, :5]
        self.history[-1, 5] = scale_values(sat, "sat", self.scaler)
        self.history[-1, 6] = rl_on * heat_pred
        self.history[-1, 7] = cool_pred

        self.sat = sat
        self.setpoint = setpoint
        rl_heat_kbtu = (
            float(unscale_values(heat_pred, "hwe", self.scaler)) if rl_on else 0.0
        )
        rl_cool_kbtu = float(unscale_values(cool_pred, "cwe", self.scaler))
        self.f_h = max(rl_heat_kbtu, 0.0)
        self.f_c = max(rl_cool_kbtu, 0.0)
        self.t = row + 1
        self.done = self.t >= len(self.frame)

        info = {
            "row": row,
            "mode": operating_mode(float(self.raw_wbt[row])),
            "action": applied,
            "rl_valve": bool(rl_on),
            "valve_prob": valve_prob,
            "rbc_valve": int(rbc_valve),
            "rl_heat": self.f_h,
            "rl_cool": self.f_c,
            "rbc_heat": float(self.frame.columns["hwe"][row]),
            "rbc_cool": float(self.frame.columns["cwe"][row]),
            "rbc_sat": float(self.raw_sat[row]),
        }
        return StepResult(self.state(), self.observation(), r, r_energy,
                          r_comfort, self.done, info)


def run_episode(env, policy_fn):
    """Roll one full episode; policy_fn maps observation -> delta."""
    obs = env.reset()
    results = []
    while True:
        result = env.step(policy_fn(obs))
        results.append(result)
        if result.done:
            return results
        obs = result.observation


def write_trajectory(results, path):
    """Export one episode's step results as the fixed-column trajectory CSV."""
    lines = [TRAJECTORY_HEADER]
    for res in results:
        st, info = res.next_state, res.info
        cells = [
            str(info["row"]),
            repr(st.setpoint),
            repr(st.sat),
            repr(info["action"]),
            repr(res.reward),
            repr(res.reward_energy),
            repr(res.reward_comfort),
            info["mode"],
            repr(info["rl_heat"]),
            repr(info["rl_cool"]),
            repr(info["rbc_heat"]),
            repr(info["rbc_cool"]),
        ]
        lines.append(",".join(cells))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
