"""Brownian-motion baselines: uniformly random servo moves with no learning."""
from __future__ import annotations

import enum

import numpy as np

from ..environment import CONTINUOUS_LIMIT, NUM_DISCRETE_ACTIONS, LimbEnv


class BrownianMode(str, enum.Enum):
    BMMS = "BMMS"  # all servos at once, continuous deltas
    BMSS = "BMSS"  # one servo per step, discrete +-22.5 deg


def brownian_policy(mode: BrownianMode, rng: np.random.Generator):
    if BrownianMode(mode) is BrownianMode.BMMS:
        return rng.uniform(-CONTINUOUS_LIMIT, CONTINUOUS_LIMIT, size=4)
    return int(rng.integers(NUM_DISCRETE_ACTIONS))


def brownian_episode(env: LimbEnv, mode: BrownianMode, rng: np.random.Generator):
    env.reset()
    step = env.step_continuous if BrownianMode(mode) is BrownianMode.BMMS else env.step_discrete
    while True:
        result = step(brownian_policy(mode, rng))
        if result.terminated or result.truncated:
            return env.log
