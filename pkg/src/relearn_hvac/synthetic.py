"""Deterministic synthetic building telemetry with a weather regime shift.

The generator plays a simple air-handling-unit world at 5-minute resolution:

- Weather: diurnal + slow seasonal sinusoids with smooth AR(1) noise. At the
  regime-shift week a cold front drops the outside-air and wet-bulb
  temperatures so the weekly mean wet-bulb falls below the 52F mode
  boundary for good.
- Rule-based control: the discharge-air set point is 65F while wet-bulb is
  at or above 52F (cool-then-reheat operation) and 72F below it (preheat
  operation), with smooth AR(1) control jitter around the schedule the way
  a real discharge-air loop wanders between operator overrides and its
  nominal value. The jitter amplitude is deliberately generous: models
  fitted on this telemetry are later asked to score set-point trajectories
  chosen by a learned policy anywhere inside the 55-75F action band, and
  they can only do that honestly where the training data has support.
  Narrow jitter leaves the learned valve model free to invent heating
  shut-offs in (cold weather, low set-point) corners it never saw. The
  zone preference (avg_stpt) is piecewise-constant per day and steps up
  within the 68-72F band when the cold regime arrives.
- Energy balance: smooth softplus terms for the AHU coil plus
  variable-refrigerant-flow (VRF) zone equipment that tops up whatever the
  discharge air does not cover. VRF heating is deliberately expensive, so
  discharging too cool in cold weather is the costly failure mode.
- Valve: heating shuts off entirely when the raw demand falls under a
  threshold or when the outdoor lockout applies (no preheat above 45F),
  which yields learnable on/off labels in every regime.

All randomness flows from one seeded Generator, so identical configs give
bit-identical frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import MODE_WBT_F
from .errors import ConfigurationError
from .pipeline import COLUMNS, TimeSeriesFrame

SAMPLES_PER_DAY = 24 * 12
SAMPLES_PER_WEEK = 7 * SAMPLES_PER_DAY

RBC_SAT_WARM = 65.0
RBC_SAT_COLD = 72.0
MIN_WEEKS = 15  # default windows need train 13w + 2 eval weeks


@dataclass
class SyntheticGenConfig:
    n_weeks: int = 21
    seed: int = 0
    start: str = "2024-03-04T00:00:00"
    # Weather model.
    regime_shift_week: int = 17
    shift_ramp_days: float = 2.0
    oat_base_warm: float = 76.0
    oat_base_cold: float = 40.0
    diurnal_amp: float = 8.0
    seasonal_amp: float = 2.0
    seasonal_period_weeks: float = 52.0
    wbt_gap_warm: float = 7.0
    wbt_gap_cold: float = 12.0
    sol_peak: float = 850.0
    # Zone preference (piecewise-constant per day, within 68-72F).
    stpt_warm: float = 68.0
    stpt_cold: float = 72.0
    stpt_jitter: float = 0.5
    # Noise scales (all zero -> exactly periodic weather columns).
    noise_oat: float = 1.2
    noise_wbt: float = 0.6
    noise_orh: float = 4.0
    noise_sol: float = 0.15
    noise_energy: float = 0.05
    rbc_sat_noise: float = 6.0
    ar_coeff: float = 0.97
    # Schedule wander is much slower than weather noise. Fast wander varies
    # within a 30-minute epoch, and the aggregated column then cannot explain
    # the aggregated energy (partial valve duty cycles, curvature losses).
    sat_ar_coeff: float = 0.995
    # Energy balance constants.
    energy_scale_heat: float = 0.05
    energy_scale_cool: float = 0.05
    cool_base: float = 0.15
    vrf_heat_weight: float = 4.0
    vrf_cool_weight: float = 1.0
    gains_oat_coeff: float = 0.45
    gains_sol_coeff: float = 10.0
    valve_demand_floor: float = 1.5
    preheat_lockout_oat: float = 45.0

    def validate(self):
        if self.n_weeks < MIN_WEEKS:
            raise ConfigurationError(
                f"n_weeks must be >= {MIN_WEEKS} (train window + 2 eval weeks), "
                f"got {self.n_weeks}"
            )
        if self.shift_ramp_days <= 0:
            raise ConfigurationError("shift_ramp_days must be positive")
        if not (0.0 <= self.ar_coeff < 1.0):
            raise ConfigurationError("ar_coeff must be in [0, 1)")
        if not (0.0 <= self.sat_ar_coeff < 1.0):
            raise ConfigurationError("sat_ar_coeff must be in [0, 1)")


def softplus(x, sharpness=2.0):
    """Smooth relu: sharpness*log(1+exp(x/sharpness)), overflow safe."""
    z = np.asarray(x, dtype=np.float64) / sharpness
    return sharpness * np.where(z > 30.0, z, np.log1p(np.exp(np.minimum(z, 30.0))))


def _ar1(rng, n, coeff, scale):
    """Smooth AR(1) noise with stationary unit variance, scaled."""
    if scale == 0.0:
        return np.zeros(n)
    white = rng.standard_normal(n)
    out = np.empty(n)
    out[0] = white[0]
    innovation = np.sqrt(1.0 - coeff * coeff)
    for i in range(1, n):
        out[i] = coeff * out[i - 1] + innovation * white[i]
    return out * scale


def _energy_terms(cfg, oat, sol_n, wbt, sat, avg_stpt):
    """Raw (pre-noise, pre-valve) heating and cooling demand per 5 minutes.

    Vectorized over arrays; also the ground-truth oracle used by tests.
    """
    reheat = wbt >= MODE_WBT_F
    gains = cfg.gains_oat_coeff * (oat - 55.0) + cfg.gains_sol_coeff * sol_n
    coil_h_warm = softplus(sat - 52.0 - 0.7 * (oat - 65.0) - 6.0 * sol_n)
    coil_h_cold = softplus(sat - oat - 8.0 * sol_n)
    coil_h = np.where(reheat, coil_h_warm, coil_h_cold)
    coil_c = np.where(reheat, softplus(oat - 52.0 + 12.0 * sol_n), 0.0)
    vrf_h = cfg.vrf_heat_weight * softplus(avg_stpt - sat - gains)
    vrf_c = cfg.vrf_cool_weight * softplus(sat + gains - avg_stpt - 3.0)
    demand_h = coil_h + vrf_h
    heat_raw = cfg.energy_scale_heat * demand_h
    cool_raw = cfg.energy_scale_cool * (coil_c + vrf_c) + cfg.cool_base
    lockout = (~reheat) & (oat > cfg.preheat_lockout_oat)
    valve_on = (demand_h > cfg.valve_demand_floor) & ~lockout
    return heat_raw, cool_raw, valve_on


def true_energy(cfg, oat, sol, wbt, sat, avg_stpt):
    """Ground-truth (noise-free) hwe/cwe for given conditions and sat.

    Exposed so tests and analyses can score set-point trajectories against
    the generator's own physics.
    """
    heat_raw, cool_raw, valve_on = _energy_terms(
        cfg, np.asarray(oat, float), np.asarray(sol, float) / 1000.0,
        np.asarray(wbt, float), np.asarray(sat, float), np.asarray(avg_stpt, float)
    )
    return np.where(valve_on, heat_raw, 0.0), cool_raw


def generate_synthetic(cfg):
    """Produce the 5-minute TimeSeriesFrame described by cfg."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_weeks * SAMPLES_PER_WEEK
    step_days = 1.0 / SAMPLES_PER_DAY
    days = np.arange(n) * step_days
    hours = (days % 1.0) * 24.0

    # Regime-shift mixing factor: 0 before the front, 1 after the ramp.
    shift_day = cfg.regime_shift_week * 7.0
    s = np.clip((days - shift_day) / cfg.shift_ramp_days, 0.0, 1.0)

    diurnal = np.sin(2.0 * np.pi * (hours - 9.0) / 24.0)
    seasonal = np.sin(2.0 * np.pi * days / (cfg.seasonal_period_weeks * 7.0))

    # Draw noise streams in a fixed order for determinism.
    noise_oat = _ar1(rng, n, cfg.ar_coeff, cfg.noise_oat)
    noise_wbt = _ar1(rng, n, cfg.ar_coeff, cfg.noise_wbt)
    noise_orh = _ar1(rng, n, cfg.ar_coeff, cfg.noise_orh)
    noise_sol = _ar1(rng, n, cfg.ar_coeff, cfg.noise_sol)
    n_days = cfg.n_weeks * 7
    if cfg.stpt_jitter > 0.0:
        jitter = rng.choice([-cfg.stpt_jitter, 0.0, cfg.stpt_jitter], size=n_days)
    else:
        jitter = np.zeros(n_days)
    noise_h = rng.standard_normal(n)
    noise_c = rng.standard_normal(n)
    noise_sat = _ar1(rng, n, cfg.sat_ar_coeff, cfg.rbc_sat_noise)

    base = cfg.oat_base_warm + (cfg.oat_base_cold - cfg.oat_base_warm) * s
    oat = base + cfg.diurnal_amp * diurnal + cfg.seasonal_amp * seasonal + noise_oat
    gap = cfg.wbt_gap_warm + (cfg.wbt_gap_cold - cfg.wbt_gap_warm) * s
    wbt = oat - gap + noise_wbt
    orh = np.clip(55.0 + 10.0 * np.sin(2.0 * np.pi * (hours - 3.0) / 24.0) + noise_orh, 15.0, 98.0)
    sun = np.clip(np.sin(np.pi * (hours - 6.0) / 12.0), 0.0, None)
    sol = np.clip(cfg.sol_peak * sun * (1.0 + noise_sol), 0.0, None)

    day_index = np.minimum(days.astype(int), n_days - 1)
    day_is_cold = days.astype(int) >= int(np.ceil(shift_day))
    stpt_base = np.where(day_is_cold, cfg.stpt_cold, cfg.stpt_warm)
    avg_stpt = stpt_base + jitter[day_index]

    sat = np.clip(
        np.where(wbt >= MODE_WBT_F, RBC_SAT_WARM, RBC_SAT_COLD) + noise_sat,
        55.0, 75.0,
    )

    heat_raw, cool_raw, valve_on = _energy_terms(
        cfg, oat, sol / 1000.0, wbt, sat, avg_stpt
    )
    hwe = np.where(
        valve_on,
        np.clip(heat_raw * (1.0 + cfg.noise_energy * noise_h), 0.0, None),
        0.0,
    )
    cwe = np.clip(cool_raw * (1.0 + cfg.noise_energy * noise_c), 0.0, None)

    start = np.datetime64(cfg.start, "s")
    timestamps = start + np.arange(n) * np.timedelta64(5, "m")
    return TimeSeriesFrame(
        timestamps,
        {
            "oat": oat,
            "orh": orh,
            "wbt": wbt,
            "sol": sol,
            "avg_stpt": avg_stpt,
            "sat": sat.astype(np.float64),
            "hwe": hwe,
            "cwe": cwe,
        },
    )
