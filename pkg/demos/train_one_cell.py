"""Train PPO on one kill setting and watch the episode length fall.

    python3 demos/train_one_cell.py [Kill0|Kill1|Kill1or2] [seed]
"""
import sys

import numpy as np

from softlimb.agents import PpoAgent, PpoConfig, train_ppo
from softlimb.config import load_config
from softlimb.environment import EnvConfig, LimbEnv
from softlimb.kinematics import LimbModel
from softlimb.vision import CameraRig

setting = sys.argv[1] if len(sys.argv) > 1 else "Kill0"
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0

parser = load_config()
model = LimbModel.from_config(parser)
env_rng, agent_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
env = LimbEnv(EnvConfig.from_config(parser, "ContinuousCap5", setting, seed),
              model, CameraRig.from_config(parser, model), env_rng)
agent = PpoAgent(PpoConfig.from_config(parser), agent_rng)


def show(update, buffer, diag):
    if update % 5 == 0:
        found = np.mean([e.terminated for e in buffer.episodes])
        print(f"update {update:3d}  steps {diag['steps']:5d}  mean length {diag['mean_length']:.2f}"
              f"  found {found:.0%}  std {agent.cfg.action_scale * np.exp(agent.log_std).mean():.1f} deg")


history = train_ppo(env, agent, show)
print(f"done after {len(history)} updates; last update mean length {history[-1]['mean_length']:.2f}")
