"""Clipped-surrogate policy optimization for the set-point controller.

The policy is a Gaussian over a single set-point delta: a two-layer tanh
network outputs the mean and a learned state-independent log standard
deviation sets the spread. Samples are squashed into [-2, 2] by a scaled
tanh with the exact log-density correction, so the gradient stays defined
at the action bounds. The value network has the same trunk shape and is
fit to the advantage-corrected returns. All gradients here are derived by
hand on top of the dense-layer backward pass.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, SchemaError, UsageError
from .nn import Dense, LayerStack, Optimizer, clip_grad_norm
from .nn.serialize import stack_from_dict, stack_to_dict

ACTION_LIMIT = 2.0
LOG_2PI = float(np.log(2.0 * np.pi))

TRAINING_LOG_HEADER = (
    "iteration,mean_episode_reward,clip_fraction,policy_loss,value_loss"
)

CONTROLLER_FORMAT = "relearn-hvac-controller"
CONTROLLER_VERSION = 1


@dataclass
class PPOConfig:
    clip: float = 0.2
    lr: float = 0.0025
    total_steps: int = 1_000_000
    n_envs: int = 10
    gamma: float = 0.99
    lam: float = 0.95
    epochs: int = 10
    minibatch: int = 256
    horizon: int = 128
    grad_clip: float = 0.5
    hidden: int = 64
    init_log_std: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.clip < 1.0):
            raise ConfigurationError("clip must be in (0, 1)")
        if not (0.0 < self.gamma <= 1.0) or not (0.0 <= self.lam <= 1.0):
            raise ConfigurationError("gamma must be in (0, 1], lam in [0, 1]")
        if self.lr <= 0.0 or self.grad_clip <= 0.0:
            raise ConfigurationError("learning rate and grad clip must be positive")
        if min(self.n_envs, self.epochs, self.minibatch, self.horizon) < 1:
            raise ConfigurationError("rollout and update sizes must be positive")
        if self.total_steps < 0:
            raise ConfigurationError("total_steps must be non-negative")

    def iterations(self):
        if self.total_steps == 0:
            return 0
        per_iter = self.n_envs * self.horizon
        return int(np.ceil(self.total_steps / per_iter))


def squash(u):
    """Map an unbounded pre-action into the [-2, 2] delta range."""
    return ACTION_LIMIT * np.tanh(np.asarray(u, dtype=np.float64) / ACTION_LIMIT)


def squash_log_jacobian(u):
    # log d(squash)/du = log(1 - tanh^2(u/2)) done stably via softplus
    u = np.asarray(u, dtype=np.float64)
    return 2.0 * (np.log(2.0) - u / 2.0 - np.logaddexp(0.0, -u))


def gaussian_logp(u, mu, sigma):
    z = (u - mu) / sigma
    return -0.5 * z * z - np.log(sigma) - 0.5 * LOG_2PI


def action_logp(u, mu, sigma):
    """Log-density of the squashed action expressed through its pre-image u."""
    return gaussian_logp(u, mu, sigma) - squash_log_jacobian(u)


class LogStd:
    """One learned log-sigma as a pseudo-layer the optimizer can update."""

    kind = "logstd"
    param_names = ("value",)

    def __init__(self, init=0.0):
        self.value = np.array([float(init)])

    def clone(self):
        return LogStd(float(self.value[0]))


class _Group:
    """Adapter exposing arbitrary layers to the shared Optimizer."""

    def __init__(self, layers):
        self.layers = list(layers)
        self.trainable = [True] * len(self.layers)

    def param_arrays(self):
        for idx, layer in enumerate(self.layers):
            for name in layer.param_names:
                yield idx, name, getattr(layer, name)


def _mlp(obs_size, hidden, rng):
    return LayerStack([
        Dense(obs_size, hidden, "tanh", rng),
        Dense(hidden, hidden, "tanh", rng),
        Dense(hidden, 1, "identity", rng),
    ])


class GaussianPolicy:
    """Mean network plus global log-sigma; tracks an update generation."""

    def __init__(self, obs_size, hidden=64, rng=None, init_log_std=0.0):
        self.net = _mlp(obs_size, hidden, rng)
        self.log_std = LogStd(init_log_std)
        self.generation = 0

    @property
    def obs_size(self):
        return self.net.in_size

    def sigma(self):
        return float(np.exp(self.log_std.value[0]))

    def mean(self, obs):
        obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
        return self.net.forward(obs)[:, 0]

    def clone(self):
        other = GaussianPolicy.__new__(GaussianPolicy)
        other.net = self.net.clone()
        other.log_std = self.log_std.clone()
        other.generation = self.generation
        return other


def build_value_net(obs_size, hidden=64, rng=None):
    """Scalar state-value network with the same trunk shape as the policy."""
    return _mlp(obs_size, hidden, rng)


def sample_action(policy, obs, rng, deterministic=False):
    """Draw a squashed action; returns (action, logp, pre-squash sample).

    A single observation vector yields scalars, a batch yields arrays.
    Deterministic mode returns the squashed mean.
    """
    obs = np.asarray(obs, dtype=np.float64)
    single = obs.ndim == 1
    mu = policy.mean(obs)
    sigma = policy.sigma()
    if deterministic:
        u = mu.copy()
    else:
        u = mu + sigma * rng.standard_normal(mu.shape)
    a = squash(u)
    logp = action_logp(u, mu, sigma)
    if single:
        return float(a[0]), float(logp[0]), float(u[0])
    return a, logp, u


def ppo_clip_objective(ratio, adv, eps):
    """min(r*A, clip(r, 1-eps, 1+eps)*A), elementwise."""
    ratio = np.asarray(ratio, dtype=np.float64)
    clipped = np.clip(ratio, 1.0 - eps, 1.0 + eps)
    return np.minimum(ratio * adv, clipped * adv)


def gae_advantages(rewards, values, dones, last_values, gamma, lam):
    """Raw generalized advantages and return targets.

    Accepts (T,) vectors or (n_envs, T) matrices. dones mask the bootstrap:
    a terminal step contributes r_t - V(s_t) only. Returns (adv, returns).
    """
    rewards = np.atleast_2d(np.asarray(rewards, dtype=np.float64))
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    dones = np.atleast_2d(np.asarray(dones, dtype=np.float64))
    flat = np.asarray(last_values, dtype=np.float64).ndim == 0
    last = np.atleast_1d(np.asarray(last_values, dtype=np.float64))
    n, horizon = rewards.shape
    adv = np.zeros((n, horizon))
    carry = np.zeros(n)
    next_v = last
    for t in range(horizon - 1, -1, -1):
        alive = 1.0 - dones[:, t]
        delta = rewards[:, t] + gamma * next_v * alive - values[:, t]
        carry = delta + gamma * lam * alive * carry
        adv[:, t] = carry
        next_v = values[:, t]
    returns = adv + values
    if flat and n == 1:
        return adv[0], returns[0]
    return adv, returns


def normalize_advantages(adv):
    """Center to mean 0 and scale to std 1 (skip scaling when degenerate)."""
    adv = adv - adv.mean()
    std = adv.std()
    if std > 1e-12:
        adv = adv / std
    return adv


@dataclass
class RolloutBuffer:
    obs: np.ndarray          # (n_envs, T, obs_dim)
    raw_actions: np.ndarray  # pre-squash samples, (n_envs, T)
    actions: np.ndarray
    logp: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    last_values: np.ndarray  # bootstrap values for the state after step T-1
    generation: int
    advantages: np.ndarray = None
    returns: np.ndarray = None

    def __post_init__(self):
        shape = self.rewards.shape
        for name in ("raw_actions", "actions", "logp", "values", "dones"):
            if getattr(self, name).shape != shape:
                raise ConfigurationError(f"buffer field {name} has a wrong shape")
        if self.obs.shape[:2] != shape:
            raise ConfigurationError("buffer obs shape does not match rewards")

    def __len__(self):
        return int(self.rewards.size)

    @property
    def ready(self):
        return self.advantages is not None


def compute_advantages(buffer, gamma, lam):
    """Fill the buffer's advantages (normalized) and raw return targets."""
    adv, returns = gae_advantages(buffer.rewards, buffer.values, buffer.dones,
                                  buffer.last_values, gamma, lam)
    buffer.returns = returns
    buffer.advantages = normalize_advantages(adv)
    return buffer


class EnvPool:
    """Steps a fleet of environments, auto-resetting finished episodes."""

    def __init__(self, envs):
        if not envs:
            raise ConfigurationError("need at least one environment")
        self.envs = list(envs)
        self.obs = np.stack([env.reset() for env in self.envs]).astype(np.float64)
        self.running_returns = np.zeros(len(self.envs))
        self.finished_returns = []

    def __len__(self):
        return len(self.envs)

    def step(self, actions):
        rewards = np.zeros(len(self.envs))
        dones = np.zeros(len(self.envs))
        for i, env in enumerate(self.envs):
            result = env.step(float(actions[i]))
            rewards[i] = result.reward
            self.running_returns[i] += result.reward
            if result.done:
                dones[i] = 1.0
                self.finished_returns.append(float(self.running_returns[i]))
                self.running_returns[i] = 0.0
                self.obs[i] = env.reset()
            else:
                self.obs[i] = result.observation
        return rewards, dones

    def drain_finished(self):
        out = self.finished_returns
        self.finished_returns = []
        return out


def collect_rollouts(pool, policy, value_net, horizon, rng):
    """Gather n_envs * horizon on-policy transitions from the pool."""
    n = len(pool)
    obs_dim = pool.obs.shape[1]
    obs = np.zeros((n, horizon, obs_dim))
    raw = np.zeros((n, horizon))
    actions = np.zeros((n, horizon))
    logp = np.zeros((n, horizon))
    rewards = np.zeros((n, horizon))
    values = np.zeros((n, horizon))
    dones = np.zeros((n, horizon))
    for t in range(horizon):
        obs[:, t] = pool.obs
        a, lp, u = sample_action(policy, pool.obs, rng)
        values[:, t] = value_net.forward(pool.obs)[:, 0]
        rewards[:, t], dones[:, t] = pool.step(a)
        raw[:, t], actions[:, t], logp[:, t] = u, a, lp
    last_values = value_net.forward(pool.obs)[:, 0]
    return RolloutBuffer(obs, raw, actions, logp, rewards, values, dones,
                         last_values, generation=policy.generation)


def _restore(group, saved):
    for (idx, name, arr), copy in zip(group.param_arrays(), saved):
        arr[:] = copy


def policy_loss_grads(policy, obs, u, logp_old, adv, clip):
    """Clipped-surrogate loss and hand-derived gradients for one minibatch.

    Returns (loss, grads, ratio) where grads lines up with the policy's
    layers plus the log-sigma pseudo-layer. Gradient flows only where the
    unclipped branch is active; where the clipped branch wins the ratio sits
    outside the clip range and its derivative is zero.
    """
    m = len(u)
    mu = policy.mean(obs)
    sigma = policy.sigma()
    logp_new = action_logp(u, mu, sigma)
    ratio = np.exp(logp_new - logp_old)
    surr_raw = ratio * adv
    surr_clip = np.clip(ratio, 1.0 - clip, 1.0 + clip) * adv
    loss = -float(np.minimum(surr_raw, surr_clip).mean())

    unclipped = (surr_raw <= surr_clip).astype(np.float64)
    dlogp = -(adv * ratio * unclipped) / m
    dmu = dlogp * (u - mu) / (sigma * sigma)
    z2 = ((u - mu) / sigma) ** 2
    dlogsig = float(np.sum(dlogp * (z2 - 1.0)))
    grads = policy.net.backward(dmu[:, None])
    grads.append({"value": np.array([dlogsig])})
    return loss, grads, ratio


def value_loss_grads(value_net, obs, returns):
    """Mean-squared return error and its gradients for one minibatch."""
    v = value_net.forward(np.atleast_2d(obs))[:, 0]
    loss = float(np.mean((v - returns) ** 2))
    dv = 2.0 * (v - returns) / len(returns)
    return loss, value_net.backward(dv[:, None])


def update(policy, value_net, buffer, cfg, rng, policy_opt=None, value_opt=None):
    """One PPO update over the buffer; returns diagnostics.

    The buffer must come from this exact policy generation and have its
    advantages computed. A non-finite loss or gradient aborts the whole
    update and restores the incoming parameters.
    """
    if not buffer.ready:
        raise UsageError("compute_advantages must run before update")
    if buffer.generation != policy.generation:
        raise UsageError(
            f"buffer from generation {buffer.generation} cannot update "
            f"generation {policy.generation} (stale, off-policy)"
        )
    pol_group = _Group(list(policy.net.layers) + [policy.log_std])
    val_group = _Group(list(value_net.layers))
    if policy_opt is None:
        policy_opt = Optimizer(pol_group, cfg.lr, method="adam", schedule="constant")
    if value_opt is None:
        value_opt = Optimizer(val_group, cfg.lr, method="adam", schedule="constant")
    pol_saved = [arr.copy() for _, _, arr in pol_group.param_arrays()]
    val_saved = [arr.copy() for _, _, arr in val_group.param_arrays()]

    n_total = len(buffer)
    flat_obs = buffer.obs.reshape(n_total, -1)
    flat_u = buffer.raw_actions.reshape(-1)
    flat_logp = buffer.logp.reshape(-1)
    flat_adv = buffer.advantages.reshape(-1)
    flat_ret = buffer.returns.reshape(-1)

    ratio_sum = 0.0
    clipped_sum = 0.0
    sample_count = 0
    policy_losses = []
    value_losses = []
    try:
        for _ in range(cfg.epochs):
            order = rng.permutation(n_total)
            for start in range(0, n_total, cfg.minibatch):
                idx = order[start:start + cfg.minibatch]
                ob, u = flat_obs[idx], flat_u[idx]
                adv, ret = flat_adv[idx], flat_ret[idx]
                m = len(idx)

                policy_loss, pol_grads, ratio = policy_loss_grads(
                    policy, ob, u, flat_logp[idx], adv, cfg.clip
                )
                value_loss, val_grads = value_loss_grads(value_net, ob, ret)

                if not np.isfinite(policy_loss) or not np.isfinite(value_loss):
                    raise FloatingPointError("non-finite loss")
                clip_grad_norm(pol_grads, cfg.grad_clip)
                clip_grad_norm(val_grads, cfg.grad_clip)
                policy_opt.step(pol_grads)
                value_opt.step(val_grads)

                ratio_sum += float(ratio.sum())
                clipped_sum += float(
                    np.sum((ratio < 1.0 - cfg.clip) | (ratio > 1.0 + cfg.clip))
                )
                sample_count += m
                policy_losses.append(policy_loss)
                value_losses.append(value_loss)
    except (ArithmeticError, FloatingPointError):
        _restore(pol_group, pol_saved)
        _restore(val_group, val_saved)
        return {
            "aborted": True,
            "mean_ratio": float("nan"),
            "clip_fraction": float("nan"),
            "policy_loss": float("nan"),
            "value_loss": float("nan"),
        }
    policy.generation += 1
    return {
        "aborted": False,
        "mean_ratio": ratio_sum / sample_count,
        "clip_fraction": clipped_sum / sample_count,
        "policy_loss": float(np.mean(policy_losses)),
        "value_loss": float(np.mean(value_losses)),
    }


@dataclass
class TrainOutcome:
    policy: GaussianPolicy
    value: LayerStack
    history: list = field(default_factory=list)


def train(env_factory, cfg, rng, initial_policy=None, initial_value=None):
    """Run PPO for cfg.total_steps environment steps.

    env_factory(i) builds the i-th environment. Warm starts clone the given
    controller instead of drawing fresh parameters. History rows carry the
    per-iteration diagnostics; mean_episode_reward averages the episodes
    finished during that iteration, scaling the per-step mean up to episode
    length when none finished.
    """
    envs = [env_factory(i) for i in range(cfg.n_envs)]
    pool = EnvPool(envs)
    obs_dim = pool.obs.shape[1]
    if initial_policy is not None:
        policy = initial_policy.clone()
    else:
        policy = GaussianPolicy(obs_dim, cfg.hidden, rng, cfg.init_log_std)
    if initial_value is not None:
        value_net = initial_value.clone()
    else:
        value_net = build_value_net(obs_dim, cfg.hidden, rng)
    if policy.obs_size != obs_dim:
        raise ConfigurationError("policy does not match the observation size")

    nominal = getattr(envs[0], "episode_length", lambda: cfg.horizon)()
    pol_group = _Group(list(policy.net.layers) + [policy.log_std])
    val_group = _Group(list(value_net.layers))
    policy_opt = Optimizer(pol_group, cfg.lr, method="adam", schedule="constant")
    value_opt = Optimizer(val_group, cfg.lr, method="adam", schedule="constant")

    history = []
    for iteration in range(cfg.iterations()):
        buffer = collect_rollouts(pool, policy, value_net, cfg.horizon, rng)
        compute_advantages(buffer, cfg.gamma, cfg.lam)
        diag = update(policy, value_net, buffer, cfg, rng,
                      policy_opt=policy_opt, value_opt=value_opt)
        finished = pool.drain_finished()
        if finished:
            mean_ep = float(np.mean(finished))
        else:
            mean_ep = float(buffer.rewards.mean()) * nominal
        history.append({
            "iteration": iteration,
            "mean_episode_reward": mean_ep,
            "clip_fraction": diag["clip_fraction"],
            "policy_loss": diag["policy_loss"],
            "value_loss": diag["value_loss"],
        })
    return TrainOutcome(policy, value_net, history)


def write_training_log(history, path):
    lines = [TRAINING_LOG_HEADER]
    for row in history:
        lines.append(",".join([
            str(row["iteration"]),
            repr(row["mean_episode_reward"]),
            repr(row["clip_fraction"]),
            repr(row["policy_loss"]),
            repr(row["value_loss"]),
        ]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def save_controller(policy, value_net, path, config_hash=""):
    """Checkpoint policy + value nets with generation and config hash."""
    data = {
        "format": CONTROLLER_FORMAT,
        "version": CONTROLLER_VERSION,
        "generation": int(policy.generation),
        "config_hash": config_hash,
        "log_std": repr(float(policy.log_std.value[0])),
        "policy": stack_to_dict(policy.net),
        "value": stack_to_dict(value_net),
    }
    with open(path, "w") as fh:
        json.dump(data, fh)
    return path


def load_controller(path):
    with open(path) as fh:
        data = json.load(fh)
    if data.get("format") != CONTROLLER_FORMAT:
        raise SchemaError(f"not a controller checkpoint: {path}")
    net, _ = stack_from_dict(data["policy"])
    policy = GaussianPolicy.__new__(GaussianPolicy)
    policy.net = net
    policy.log_std = LogStd(float(data["log_std"]))
    policy.generation = int(data["generation"])
    value_net, _ = stack_from_dict(data["value"])
    return policy, value_net, data.get("config_hash", "")
