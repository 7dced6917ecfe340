"""PPO with a diagonal-Gaussian policy, GAE and the clipped surrogate objective."""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass

import numpy as np

from ..config import get_float, get_int, get_section
from ..environment import CONTINUOUS_LIMIT, OBS_SIZE, LimbEnv, Mode
from ..errors import ConfigError, DivergenceError, UsageError
from ..neural import (Network, OptimizerState, adam_step, backward, clip_by_global_norm,
                      forward)

LOG_2PI = math.log(2 * math.pi)


@dataclass(frozen=True)
class PpoConfig:
    total_steps: int = 3600
    episodes_per_update: int = 15
    clip_ratio: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    epochs: int = 4
    minibatch_size: int = 16
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    lr: float = 3e-4
    hidden: tuple[int, ...] = (64, 64)
    init_log_std: float = 0.0
    action_scale: float = CONTINUOUS_LIMIT

    def __post_init__(self):
        if not 0 < self.clip_ratio < 1:
            raise ConfigError("clip_ratio must lie in (0, 1)")
        if not 0 < self.gamma <= 1 or not 0 <= self.gae_lambda <= 1:
            raise ConfigError("need 0 < gamma <= 1 and 0 <= gae_lambda <= 1")
        if min(self.total_steps, self.episodes_per_update, self.epochs, self.minibatch_size) < 1:
            raise ConfigError("PPO step, episode, epoch and minibatch counts must be positive")

    @classmethod
    def from_config(cls, parser: configparser.ConfigParser) -> "PpoConfig":
        sec = get_section(parser, "ppo")
        return cls(
            total_steps=get_int(sec, "total_steps"),
            episodes_per_update=get_int(sec, "episodes_per_update"),
            clip_ratio=get_float(sec, "clip_ratio"),
            gamma=get_float(sec, "gamma"),
            gae_lambda=get_float(sec, "gae_lambda"),
            epochs=get_int(sec, "epochs"),
            minibatch_size=get_int(sec, "minibatch_size"),
            entropy_coef=get_float(sec, "entropy_coef"),
            value_coef=get_float(sec, "value_coef"),
            max_grad_norm=get_float(sec, "max_grad_norm"),
            lr=get_float(sec, "lr"),
            hidden=tuple(int(v) for v in sec["hidden"].split()),
            init_log_std=get_float(sec, "init_log_std"),
            action_scale=get_float(sec, "action_scale"),
        )


class PpoAgent:
    """Gaussian policy over normalised actions; the env receives ``action_scale * a``."""

    def __init__(self, cfg: PpoConfig, rng: np.random.Generator, obs_size=OBS_SIZE, act_size=4):
        self.cfg = cfg
        self.rng = rng
        self.actor = Network.build([obs_size, *cfg.hidden, act_size], rng, output_gain=0.01)
        self.critic = Network.build([obs_size, *cfg.hidden, 1], rng, output_gain=1.0)
        self.log_std = np.full(act_size, cfg.init_log_std)
        self.opt = OptimizerState.for_params(self.params, lr=cfg.lr)

    @property
    def params(self) -> list[np.ndarray]:
        return self.actor.params + [self.log_std] + self.critic.params

    def set_params(self, params: list[np.ndarray]) -> None:
        n = len(self.actor.params)
        self.actor.set_params(params[:n])
        self.log_std = np.array(params[n], dtype=float)
        self.critic.set_params(params[n + 1:])

    def value(self, obs) -> np.ndarray | float:
        v = self.critic(obs)
        return v[..., 0] if np.ndim(v) > 1 else float(v[0])

    def log_prob(self, obs, actions) -> np.ndarray:
        return gaussian_log_prob(actions, self.actor(obs), self.log_std)

    def act(self, obs) -> tuple[np.ndarray, float, float]:
        """Sample a normalised action; returns (action, log-density, value estimate)."""
        mean = self.actor(obs)
        action = mean + np.exp(self.log_std) * self.rng.standard_normal(mean.shape)
        return action, float(gaussian_log_prob(action, mean, self.log_std)), self.value(obs)


def gaussian_log_prob(actions, mean, log_std) -> np.ndarray:
    z = (np.asarray(actions) - mean) * np.exp(-log_std)
    return -0.5 * np.sum(z * z, axis=-1) - np.sum(log_std) - 0.5 * len(log_std) * LOG_2PI


def gaussian_entropy(log_std) -> float:
    return float(np.sum(log_std) + 0.5 * len(log_std) * (1.0 + LOG_2PI))


@dataclass
class RolloutBuffer:
    observations: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    rewards: np.ndarray
    terminated: np.ndarray
    truncated: np.ndarray
    next_values: np.ndarray  # V(s_{t+1}); only read at non-terminal steps
    episodes: list  # EpisodeLog per finished episode

    def __len__(self) -> int:
        return len(self.rewards)


def ppo_collect(env: LimbEnv, agent: PpoAgent, episodes: int = 15,
                step_budget: int | None = None) -> RolloutBuffer:
    """Run up to ``episodes`` full episodes; no new episode starts once ``step_budget`` is spent."""
    if env.cfg.mode is not Mode.CONTINUOUS:
        raise UsageError("PPO needs a ContinuousCap5 environment")
    rows = {k: [] for k in ("obs", "act", "logp", "val", "rew", "term", "trunc", "next")}
    logs = []
    steps = 0
    for _ in range(episodes):
        if step_budget is not None and steps >= step_budget:
            break
        obs = env.reset()
        while True:
            action, logp, value = agent.act(obs)
            result = env.step_continuous(agent.cfg.action_scale * action)
            steps += 1
            rows["obs"].append(obs)
            rows["act"].append(action)
            rows["logp"].append(logp)
            rows["val"].append(value)
            rows["rew"].append(result.reward)
            rows["term"].append(result.terminated)
            rows["trunc"].append(result.truncated)
            # successor value: bootstrap across truncation, unused after termination
            rows["next"].append(0.0 if result.terminated else agent.value(result.observation))
            obs = result.observation
            if result.terminated or result.truncated:
                logs.append(env.log)
                break
    return RolloutBuffer(
        np.array(rows["obs"]), np.array(rows["act"]), np.array(rows["logp"]),
        np.array(rows["val"]), np.array(rows["rew"]), np.array(rows["term"], dtype=bool),
        np.array(rows["trunc"], dtype=bool), np.array(rows["next"]), logs)


def compute_gae(rewards, values, terminated, truncated, next_values, gamma: float, lam: float):
    """Per-episode GAE; returns (advantages, returns = advantages + values).

    ``next_values[t]`` is V(s_{t+1}); it is ignored where ``terminated[t]`` and
    used as the bootstrap where ``truncated[t]``.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    terminated = np.asarray(terminated, dtype=bool)
    truncated = np.asarray(truncated, dtype=bool)
    next_values = np.asarray(next_values, dtype=float)
    adv = np.zeros_like(rewards)
    running = 0.0
    for t in reversed(range(len(rewards))):
        if terminated[t] or truncated[t]:
            running = 0.0
        delta = rewards[t] + gamma * next_values[t] * (not terminated[t]) - values[t]
        running = delta + gamma * lam * running
        adv[t] = running
    return adv, adv + values


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    if len(adv) < 2:
        return adv - adv.mean() if len(adv) else adv
    return (adv - adv.mean()) / max(adv.std(), 1e-8)


def ppo_update(agent: PpoAgent, buffer: RolloutBuffer, cfg: PpoConfig | None = None) -> dict:
    cfg = cfg or agent.cfg
    if len(buffer) == 0:
        raise UsageError("cannot update on an empty rollout buffer")
    adv, returns = compute_gae(buffer.rewards, buffer.values, buffer.terminated, buffer.truncated,
                               buffer.next_values, cfg.gamma, cfg.gae_lambda)
    adv = normalize_advantages(adv)
    n = len(buffer)
    stats = {"policy_loss": [], "value_loss": [], "entropy": [], "clip_fraction": [], "approx_kl": []}
    for _ in range(cfg.epochs):
        order = agent.rng.permutation(n)
        for start in range(0, n, cfg.minibatch_size):
            idx = order[start:start + cfg.minibatch_size]
            info = _minibatch_step(agent, cfg, buffer.observations[idx], buffer.actions[idx],
                                   buffer.log_probs[idx], adv[idx], returns[idx])
            for k, v in info.items():
                stats[k].append(v)
    return {k: float(np.mean(v)) for k, v in stats.items()}


def _minibatch_step(agent: PpoAgent, cfg: PpoConfig, obs, actions, old_logp, adv, returns) -> dict:
    b = len(adv)
    mean, actor_cache = forward(agent.actor, obs)
    values, critic_cache = forward(agent.critic, obs)
    values = values[:, 0]
    log_std = agent.log_std
    inv_var = np.exp(-2 * log_std)
    diff = actions - mean
    logp = gaussian_log_prob(actions, mean, log_std)
    ratio = np.exp(logp - old_logp)
    clipped = np.clip(ratio, 1 - cfg.clip_ratio, 1 + cfg.clip_ratio)
    surr_unclipped = ratio * adv
    surr_clipped = clipped * adv
    objective = np.minimum(surr_unclipped, surr_clipped)
    assert np.all(objective <= surr_unclipped), "clipped objective exceeded the unclipped one"
    policy_loss = -objective.mean()
    value_loss = 0.5 * np.mean((values - returns) ** 2)
    entropy = gaussian_entropy(log_std)
    loss = policy_loss - cfg.entropy_coef * entropy + cfg.value_coef * value_loss
    if not np.isfinite(loss):
        raise DivergenceError(f"non-finite PPO loss (policy {policy_loss}, value {value_loss})")

    # the unclipped branch carries the gradient wherever it is the active minimum
    active = surr_unclipped <= surr_clipped
    dlogp = np.where(active, -adv * ratio, 0.0) / b
    grad_mean = dlogp[:, None] * diff * inv_var
    grad_log_std = (dlogp[:, None] * (diff * diff * inv_var - 1.0)).sum(axis=0) - cfg.entropy_coef
    grad_values = cfg.value_coef * (values - returns) / b

    grads = (backward(agent.actor, actor_cache, grad_mean).params + [grad_log_std]
             + backward(agent.critic, critic_cache, grad_values[:, None]).params)
    grads, _ = clip_by_global_norm(grads, cfg.max_grad_norm)
    new_params, agent.opt = adam_step(agent.params, grads, agent.opt)
    if not all(np.all(np.isfinite(p)) for p in new_params):
        raise DivergenceError("PPO update produced non-finite parameters")
    agent.set_params(new_params)
    return {
        "policy_loss": float(policy_loss),
        "value_loss": float(value_loss),
        "entropy": entropy,
        "clip_fraction": float(np.mean(np.abs(ratio - 1) > cfg.clip_ratio)),
        "approx_kl": float(np.mean((ratio - 1) - np.log(ratio))),
    }


def train_ppo(env: LimbEnv, agent: PpoAgent, on_update=None) -> list[dict]:
    """Collect/update until ``total_steps`` environment steps have been taken.

    The episode running when the budget is reached is completed.  Returns the
    per-update diagnostics; ``on_update(update_index, buffer, diagnostics)`` is
    called after every update.
    """
    cfg = agent.cfg
    steps = 0
    history = []
    update = 0
    while steps < cfg.total_steps:
        buffer = ppo_collect(env, agent, cfg.episodes_per_update, cfg.total_steps - steps)
        steps += len(buffer)
        diag = ppo_update(agent, buffer, cfg)
        diag.update(update=update, steps=steps, episodes=len(buffer.episodes),
                    mean_length=float(np.mean([e.length for e in buffer.episodes])))
        history.append(diag)
        if on_update is not None:
            on_update(update, buffer, diag)
        update += 1
    return history
