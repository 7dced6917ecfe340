from .actor_critic import AcAgent, AcConfig, ac_episode, ac_update, discounted_returns, softmax
from .brownian import BrownianMode, brownian_episode, brownian_policy
from .ppo import (PpoAgent, PpoConfig, RolloutBuffer, compute_gae, gaussian_log_prob,
                  normalize_advantages, ppo_collect, ppo_update, train_ppo)

__all__ = [
    "AcAgent", "AcConfig", "ac_episode", "ac_update", "discounted_returns", "softmax",
    "BrownianMode", "brownian_episode", "brownian_policy",
    "PpoAgent", "PpoConfig", "RolloutBuffer", "compute_gae", "gaussian_log_prob",
    "normalize_advantages", "ppo_collect", "ppo_update", "train_ppo",
]
