"""Episodic target-finding task on the simulated limb.

Two action interfaces share one environment class:

* ``ContinuousCap5`` (PPO, BMMS): four simultaneous servo deltas, clipped to
  +-36 deg, at most 5 steps per episode.
* ``DiscreteUncapped`` (AC, BMSS): one of 8 actions moving a single servo by
  +-22.5 deg; episodes end on detection or at a large safety cap.

Reward is 1 on the step the target becomes visible to a live camera, else 0.
"""
from __future__ import annotations

import configparser
import enum
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .config import get_int, get_section, get_vector
from .errors import ConfigError, InvalidInputError, UsageError
from .kinematics import LimbModel, apply_delta
from .vision import CameraRig, KillSetting, detect, sample_kill_mask

CONTINUOUS_LIMIT = 36.0
CONTINUOUS_CAP = 5
DISCRETE_STEP = 22.5
NUM_DISCRETE_ACTIONS = 8
OBS_SIZE = 8


class Mode(str, enum.Enum):
    CONTINUOUS = "ContinuousCap5"
    DISCRETE = "DiscreteUncapped"


class StepResult(NamedTuple):
    observation: np.ndarray
    reward: float
    terminated: bool
    truncated: bool


@dataclass(frozen=True)
class EnvConfig:
    mode: Mode
    kill_setting: KillSetting
    target: np.ndarray
    max_steps: int
    seed: int = 0
    reset_attempts: int = 100

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "kill_setting", KillSetting(self.kill_setting))
        object.__setattr__(self, "target", np.asarray(self.target, dtype=float))
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if self.target.shape != (3,):
            raise ConfigError("target must be a 3-vector")

    @classmethod
    def from_config(cls, parser: configparser.ConfigParser, mode, kill_setting, seed: int = 0,
                    uncapped: bool = False) -> "EnvConfig":
        """``uncapped`` swaps the 5-step limit for the safety cap (Brownian runs in continuous mode)."""
        sec = get_section(parser, "env")
        mode = Mode(mode)
        if mode is Mode.CONTINUOUS and not uncapped:
            cap = CONTINUOUS_CAP
        else:
            cap = get_int(sec, "safety_cap")
        return cls(mode, KillSetting(kill_setting), get_vector(sec, "target", 3), cap, seed,
                   get_int(sec, "reset_attempts"))


def encode_observation(joints, mask, model: LimbModel) -> np.ndarray:
    joints = np.asarray(joints, dtype=float)
    scaled = 2.0 * (joints - model.lower) / (model.upper - model.lower) - 1.0
    return np.concatenate([scaled, np.asarray(mask, dtype=float)])


def decode_discrete(index) -> np.ndarray:
    """Servo ``index // 2`` moves +22.5 deg for even indices, -22.5 deg for odd."""
    if isinstance(index, (bool, np.bool_)) or int(index) != index or not 0 <= index < NUM_DISCRETE_ACTIONS:
        raise InvalidInputError(f"discrete action must be an integer in [0, 8), got {index!r}")
    index = int(index)
    delta = np.zeros(4)
    delta[index // 2] = DISCRETE_STEP if index % 2 == 0 else -DISCRETE_STEP
    return delta


@dataclass
class EpisodeLog:
    """Transcript of the episode in progress."""

    episode: int
    kill_mask: list[bool]
    start_joints: list[float]
    actions: list = field(default_factory=list)
    length: int = 0
    reward: float = 0.0
    terminated: bool = False
    truncated: bool = False

    def as_record(self) -> dict:
        return {
            "episode": self.episode,
            "kill_mask": self.kill_mask,
            "start_joints": self.start_joints,
            "actions": self.actions,
            "length": self.length,
            "reward": self.reward,
            "detected": self.terminated,
            "truncated": self.truncated,
        }


class LimbEnv:
    """Single-threaded environment instance; owns its episode state and rng."""

    def __init__(self, cfg: EnvConfig, model: LimbModel, rig: CameraRig,
                 rng: np.random.Generator | None = None):
        self.cfg = cfg
        self.model = model
        self.rig = rig
        self.rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        self.joints: np.ndarray | None = None
        self.mask: np.ndarray | None = None
        self.steps = 0
        self.done = True
        self.episode_index = -1
        self.log: EpisodeLog | None = None

    @property
    def max_steps(self) -> int:
        return self.cfg.max_steps

    def reset(self) -> np.ndarray:
        all_live = np.ones(len(self.rig.cameras), dtype=bool)
        for _ in range(self.cfg.reset_attempts):
            joints = self.rng.uniform(self.model.lower, self.model.upper)
            if not detect(joints, all_live, self.cfg.target, self.model, self.rig).detected:
                break
        else:
            raise ConfigError(f"target trivially visible: {self.cfg.reset_attempts} consecutive "
                              "start poses already saw the target")
        self.joints = joints
        self.mask = sample_kill_mask(self.cfg.kill_setting, self.rng)
        self.steps = 0
        self.done = False
        self.episode_index += 1
        self.log = EpisodeLog(self.episode_index, self.mask.tolist(), joints.tolist())
        return self.observation()

    def observation(self) -> np.ndarray:
        if self.joints is None:
            raise UsageError("reset() must be called before observing")
        return encode_observation(self.joints, self.mask, self.model)

    def step_continuous(self, action) -> StepResult:
        self._check_mode(Mode.CONTINUOUS)
        action = np.asarray(action, dtype=float)
        if action.shape != (4,) or not np.all(np.isfinite(action)):
            raise InvalidInputError(f"continuous action must be 4 finite values, got {action}")
        delta = np.clip(action, -CONTINUOUS_LIMIT, CONTINUOUS_LIMIT)
        return self._advance(delta, delta.tolist())

    def step_discrete(self, index) -> StepResult:
        self._check_mode(Mode.DISCRETE)
        return self._advance(decode_discrete(index), int(index))

    def _check_mode(self, mode: Mode) -> None:
        if self.cfg.mode is not mode:
            raise UsageError(f"environment is in {self.cfg.mode.value} mode")
        if self.done:
            raise UsageError("episode has finished; call reset()")

    def _advance(self, delta: np.ndarray, logged_action) -> StepResult:
        self.joints = apply_delta(self.joints, delta, self.model)
        self.steps += 1
        terminated = detect(self.joints, self.mask, self.cfg.target, self.model, self.rig).detected
        truncated = not terminated and self.steps >= self.cfg.max_steps
        self.done = terminated or truncated
        reward = 1.0 if terminated else 0.0
        log = self.log
        log.actions.append(logged_action)
        log.length = self.steps
        log.reward = reward
        log.terminated, log.truncated = terminated, truncated
        return StepResult(self.observation(), reward, terminated, truncated)
