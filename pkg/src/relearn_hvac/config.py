"""Campaign configuration: INI parsing, hashing, and seed streams.

One flat INI file configures a whole relearning campaign. Every field has
a default, so an empty file (or no file) is a valid desk-scale setup. The
config hash stamped into output artifacts is the sha256 of the canonical
field dump, making reruns verifiable.
"""

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .models import TrainConfig
from .pipeline import WindowSpec
from .ppo import PPOConfig
from .synthetic import SyntheticGenConfig

VARIANT_NAMES = ("adaptive", "static", "rbc")

# Independent deterministic rng streams per purpose; the iteration number
# extends the entropy so every week draws fresh but reproducible samples.
STREAM_DATA = 0
STREAM_MODEL = 1
STREAM_PPO = 2
STREAM_EVAL = 3


def stream_rng(seed, stream, iteration=0):
    """A Generator unique to (seed, stream, iteration), order-independent."""
    return np.random.default_rng(
        np.random.SeedSequence([int(seed), int(stream), int(iteration)])
    )


@dataclass
class CampaignConfig:
    seed: int = 0
    n_weeks: int = 0  # 0 = run every window the dataset allows
    variants: tuple = VARIANT_NAMES
    vartheta: float = 0.5
    alpha: float = 1.0
    valve_threshold: float = 0.5
    outlier_k: float = 2.0
    data_path: str = ""  # 5-minute CSV; empty = generate synthetic data
    synthetic: SyntheticGenConfig = field(default_factory=SyntheticGenConfig)
    windows: WindowSpec = field(default_factory=WindowSpec)
    dynamics: TrainConfig = field(default_factory=TrainConfig)
    ppo: PPOConfig = field(default_factory=PPOConfig)

    def __post_init__(self):
        if isinstance(self.variants, str):
            self.variants = tuple(
                v.strip() for v in self.variants.split(",") if v.strip()
            )
        self.variants = tuple(v.lower() for v in self.variants)
        for name in self.variants:
            if name not in VARIANT_NAMES:
                raise ConfigurationError(
                    f"unknown variant {name!r}, expected subset of "
                    f"{', '.join(VARIANT_NAMES)}"
                )
        if not self.variants:
            raise ConfigurationError("at least one variant is required")
        if "rbc" not in self.variants:
            # Savings are defined against the baseline, so it always rides.
            self.variants = self.variants + ("rbc",)
        if self.n_weeks < 0:
            raise ConfigurationError("n_weeks must be >= 0")
        if not (0.0 <= self.vartheta <= 1.0):
            raise ConfigurationError("vartheta must be in [0, 1]")
        if not (0.0 < self.alpha <= 1.0):
            raise ConfigurationError("alpha must be in (0, 1]")


# Section name -> (target dataclass attribute on CampaignConfig or None for
# top-level fields).
_SECTIONS = {
    "campaign": None,
    "data": "synthetic",
    "windows": "windows",
    "dynamics": "dynamics",
    "ppo": "ppo",
}

_CAMPAIGN_KEYS = {
    "seed": int,
    "n_weeks": int,
    "variants": str,
    "vartheta": float,
    "alpha": float,
    "valve_threshold": float,
    "outlier_k": float,
    "data_path": str,
}


def _coerce(section, key, raw, target_type):
    try:
        if target_type is bool:
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return target_type(raw)
    except ValueError:
        raise ConfigurationError(
            f"[{section}] {key} = {raw!r} is not a valid {target_type.__name__}"
        )


def _apply_section(section, items, cls):
    fields = {f.name: f.type for f in dataclasses.fields(cls)}
    types = {
        f.name: type(getattr(cls(), f.name)) for f in dataclasses.fields(cls)
    }
    out = {}
    for key, raw in items:
        if key not in fields:
            raise ConfigurationError(f"unknown key {key!r} in section [{section}]")
        out[key] = _coerce(section, key, raw, types[key])
    return out


def parse_config(path=None, text=None):
    """CampaignConfig from an INI file (or raw text); missing fields default."""
    parser = configparser.ConfigParser()
    if text is not None:
        parser.read_string(text)
    elif path is not None:
        with open(path) as fh:
            parser.read_file(fh)
    kwargs = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigurationError(f"unknown config section [{section}]")
        items = parser.items(section)
        if section == "campaign":
            for key, raw in items:
                if key not in _CAMPAIGN_KEYS:
                    raise ConfigurationError(
                        f"unknown key {key!r} in section [campaign]"
                    )
                kwargs[key] = _coerce(section, key, raw, _CAMPAIGN_KEYS[key])
        elif section == "data":
            kwargs["synthetic"] = SyntheticGenConfig(
                **_apply_section(section, items, SyntheticGenConfig)
            )
        elif section == "windows":
            kwargs["windows"] = WindowSpec(
                **_apply_section(section, items, WindowSpec)
            )
        elif section == "dynamics":
            kwargs["dynamics"] = TrainConfig(
                **_apply_section(section, items, TrainConfig)
            )
        elif section == "ppo":
            kwargs["ppo"] = PPOConfig(**_apply_section(section, items, PPOConfig))
    return CampaignConfig(**kwargs)


def config_dict(cfg):
    """Canonical plain-dict dump used for hashing and the campaign echo."""
    out = dataclasses.asdict(cfg)
    out["variants"] = list(cfg.variants)
    return out


def config_hash(cfg):
    payload = json.dumps(config_dict(cfg), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


DEFAULT_CONFIG_TEXT = """\
# relearn-hvac campaign configuration. Every key is optional; the values
# below are the defaults. Units: temperatures F, energies kBTU/interval.

[campaign]
seed = 0
# 0 runs every sliding window the dataset allows
n_weeks = 0
variants = adaptive,static,rbc
# reward mix: vartheta * energy + (1 - vartheta) * comfort
vartheta = 0.5
# supply-air tracking gain (1 = perfect tracking)
alpha = 1.0
valve_threshold = 0.5
outlier_k = 2.0
# path to a 5-minute CSV; leave empty to generate synthetic data
data_path =

[data]
# synthetic generator (used when data_path is empty)
n_weeks = 21
seed = 0
regime_shift_week = 17

[windows]
train_weeks = 13
eval_weeks = 1
stride_weeks = 1

[dynamics]
base_lr = 0.001
max_epochs = 60
patience = 8
batch_size = 32
val_fraction = 0.2

[ppo]
clip = 0.2
lr = 0.0025
# full-scale budget is 1000000; desk-scale campaigns override this
total_steps = 1000000
n_envs = 10
gamma = 0.99
lam = 0.95
epochs = 10
minibatch = 256
horizon = 128
"""
