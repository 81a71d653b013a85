"""Campaign configuration parsing, hashing, and seed streams."""

import numpy as np
import pytest

from relearn_hvac.config import (
    DEFAULT_CONFIG_TEXT,
    CampaignConfig,
    config_hash,
    parse_config,
    stream_rng,
)
from relearn_hvac.errors import ConfigurationError


def test_default_text_round_trips_to_default_config():
    parsed = parse_config(text=DEFAULT_CONFIG_TEXT)
    assert config_hash(parsed) == config_hash(CampaignConfig())


def test_empty_text_is_all_defaults():
    assert config_hash(parse_config(text="")) == config_hash(CampaignConfig())


def test_nested_section_overrides_land_in_the_right_dataclass():
    cfg = parse_config(text="""
[campaign]
seed = 11
vartheta = 0.3
[data]
n_weeks = 16
regime_shift_week = 12
[windows]
train_weeks = 2
[dynamics]
max_epochs = 5
freeze_dense = true
[ppo]
total_steps = 4096
horizon = 64
""")
    assert cfg.seed == 11 and cfg.vartheta == 0.3
    assert cfg.synthetic.n_weeks == 16
    assert cfg.synthetic.regime_shift_week == 12
    assert cfg.windows.train_weeks == 2
    assert cfg.dynamics.max_epochs == 5
    assert cfg.dynamics.freeze_dense is True
    assert cfg.ppo.total_steps == 4096
    assert cfg.ppo.horizon == 64


def test_config_file_parses_like_text(tmp_path):
    path = tmp_path / "campaign.ini"
    path.write_text("[campaign]\nseed = 5\n")
    assert parse_config(path).seed == 5


def test_unknown_section_key_and_bad_type_are_rejected():
    with pytest.raises(ConfigurationError):
        parse_config(text="[mystery]\nx = 1\n")
    with pytest.raises(ConfigurationError):
        parse_config(text="[campaign]\nbogus = 1\n")
    with pytest.raises(ConfigurationError):
        parse_config(text="[ppo]\nclip = fast\n")
    with pytest.raises(ConfigurationError):
        parse_config(text="[dynamics]\nfreeze_dense = maybe\n")


def test_variants_parse_and_always_include_the_baseline():
    cfg = parse_config(text="[campaign]\nvariants = adaptive\n")
    assert cfg.variants == ("adaptive", "rbc")
    cfg = parse_config(text="[campaign]\nvariants = Static, RBC\n")
    assert cfg.variants == ("static", "rbc")
    with pytest.raises(ConfigurationError):
        parse_config(text="[campaign]\nvariants = adaptive,ghost\n")
    with pytest.raises(ConfigurationError):
        CampaignConfig(variants=())


def test_field_validation():
    with pytest.raises(ConfigurationError):
        CampaignConfig(vartheta=1.5)
    with pytest.raises(ConfigurationError):
        CampaignConfig(alpha=0.0)
    with pytest.raises(ConfigurationError):
        CampaignConfig(n_weeks=-1)


def test_config_hash_is_stable_and_sensitive():
    a = CampaignConfig(seed=1)
    b = CampaignConfig(seed=1)
    c = CampaignConfig(seed=2)
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(c)
    # nested changes count too
    d = parse_config(text="[ppo]\nhorizon = 64\n")
    assert config_hash(d) != config_hash(a)


def test_stream_rng_reproducible_and_stream_separated():
    a = stream_rng(7, 1, 3).standard_normal(4)
    b = stream_rng(7, 1, 3).standard_normal(4)
    c = stream_rng(7, 2, 3).standard_normal(4)
    d = stream_rng(7, 1, 4).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)
