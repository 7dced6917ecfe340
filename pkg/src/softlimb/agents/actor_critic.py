"""Episodic actor-critic over the 8 discrete single-servo moves.

The actor outputs softmax logits.  After each complete episode the
discounted returns are computed and both networks are updated in one
forward pass over the episode's time steps, with the critic's prediction
serving as the baseline for the policy gradient.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass

import numpy as np

from ..config import get_float, get_int, get_section
from ..environment import NUM_DISCRETE_ACTIONS, OBS_SIZE, LimbEnv, Mode
from ..errors import ConfigError, DivergenceError, UsageError
from ..neural import Network, OptimizerState, adam_step, backward, forward


@dataclass(frozen=True)
class AcConfig:
    episodes: int = 250
    gamma: float = 0.95
    actor_lr: float = 1e-3
    critic_lr: float = 1e-2
    hidden: tuple[int, ...] = (32,)

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ConfigError("AC gamma must lie in (0, 1]")
        if self.episodes < 1:
            raise ConfigError("AC needs at least one episode")

    @classmethod
    def from_config(cls, parser: configparser.ConfigParser) -> "AcConfig":
        sec = get_section(parser, "ac")
        return cls(
            episodes=get_int(sec, "episodes"),
            gamma=get_float(sec, "gamma"),
            actor_lr=get_float(sec, "actor_lr"),
            critic_lr=get_float(sec, "critic_lr"),
            hidden=tuple(int(v) for v in sec["hidden"].split()),
        )


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def discounted_returns(rewards, gamma: float, bootstrap: float = 0.0) -> np.ndarray:
    out = np.zeros(len(rewards))
    running = bootstrap
    for t in reversed(range(len(rewards))):
        running = rewards[t] + gamma * running
        out[t] = running
    return out


class AcAgent:
    def __init__(self, cfg: AcConfig, rng: np.random.Generator, obs_size=OBS_SIZE,
                 n_actions=NUM_DISCRETE_ACTIONS):
        self.cfg = cfg
        self.rng = rng
        self.actor = Network.build([obs_size, *cfg.hidden, n_actions], rng, output_gain=0.01)
        self.critic = Network.build([obs_size, *cfg.hidden, 1], rng, output_gain=1.0)
        self.actor_opt = OptimizerState.for_params(self.actor.params, lr=cfg.actor_lr)
        self.critic_opt = OptimizerState.for_params(self.critic.params, lr=cfg.critic_lr)

    def probabilities(self, obs) -> np.ndarray:
        return softmax(self.actor(obs))

    def act(self, obs) -> int:
        p = self.probabilities(obs)
        return int(self.rng.choice(len(p), p=p))


def ac_update(agent: AcAgent, observations, actions, rewards, bootstrap: float = 0.0) -> dict:
    """One update of actor and critic from a complete episode."""
    obs = np.asarray(observations, dtype=float)
    actions = np.asarray(actions, dtype=int)
    returns = discounted_returns(rewards, agent.cfg.gamma, bootstrap)
    values, critic_cache = forward(agent.critic, obs)
    values = values[:, 0]
    logits, actor_cache = forward(agent.actor, obs)
    probs = softmax(logits)
    advantage = returns - values

    # gradient of -sum_t adv_t * log pi(a_t | s_t) w.r.t. the logits
    onehot = np.zeros_like(probs)
    onehot[np.arange(len(actions)), actions] = 1.0
    grad_logits = -advantage[:, None] * (onehot - probs)
    grad_values = (values - returns)[:, None]

    actor_grads = backward(agent.actor, actor_cache, grad_logits).params
    critic_grads = backward(agent.critic, critic_cache, grad_values).params
    new_actor, agent.actor_opt = adam_step(agent.actor.params, actor_grads, agent.actor_opt)
    new_critic, agent.critic_opt = adam_step(agent.critic.params, critic_grads, agent.critic_opt)
    if not all(np.all(np.isfinite(p)) for p in new_actor + new_critic):
        raise DivergenceError("actor-critic update produced non-finite parameters")
    agent.actor.set_params(new_actor)
    agent.critic.set_params(new_critic)
    actor_loss = -float(np.sum(advantage * np.log(probs[np.arange(len(actions)), actions])))
    return {"actor_loss": actor_loss, "critic_loss": float(0.5 * np.sum((values - returns) ** 2)),
            "entropy": float(-np.mean(np.sum(probs * np.log(probs), axis=-1)))}


def ac_episode(env: LimbEnv, agent: AcAgent):
    """Run one episode to detection (or the safety cap) and update the agent.

    Returns ``(episode_log, diagnostics)``.
    """
    if env.cfg.mode is not Mode.DISCRETE:
        raise UsageError("actor-critic needs a DiscreteUncapped environment")
    obs = env.reset()
    observations, actions, rewards = [], [], []
    while True:
        action = agent.act(obs)
        result = env.step_discrete(action)
        observations.append(obs)
        actions.append(action)
        rewards.append(result.reward)
        obs = result.observation
        if result.terminated or result.truncated:
            break
    # capped episodes are updated with a zero tail value
    diag = ac_update(agent, observations, actions, rewards, bootstrap=0.0)
    return env.log, diag
