"""Cross-entropy optimization over bounded action sequences.

Each iteration samples M sequences from an independent Gaussian, clamps
them into the physical action box, scores them with the objective,
selects the top-k elites, and refits mean and std (floored). NaN scores
count as -inf; a best-ever sample is tracked across iterations so the
best trace is monotone by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .. import dynamics


class DegenerateObjective(Exception):
    """Every sample scored -inf; the objective cannot rank candidates."""


@dataclass
class CemConfig:
    samples: int = 128
    elites: int = 16
    iterations: int = 30
    init_std: tuple = (1.5, 0.3)      # (accel, yaw rate)
    std_floor: float = 0.02
    seed: int = 0

    def validate(self):
        if not (1 <= self.elites <= self.samples):
            raise ValueError(f"elites {self.elites} must be in [1, samples]")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "CemConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown cem config key {sorted(extra)[0]!r}")
        cfg = cls(**d)
        cfg.validate()
        return cfg


_LO = np.array([dynamics.ACCEL_MIN, dynamics.YAW_MIN])
_HI = np.array([dynamics.ACCEL_MAX, dynamics.YAW_MAX])


class CemState:
    """Sampling distribution state; `iterate` performs one refit."""

    def __init__(self, mean: np.ndarray, cfg: CemConfig, rng=None):
        cfg.validate()
        self.cfg = cfg
        self.mean = np.clip(np.asarray(mean, dtype=np.float64).copy(), _LO, _HI)
        self.std = np.broadcast_to(np.asarray(cfg.init_std, dtype=np.float64),
                                   self.mean.shape).copy()
        self.rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        self.best_actions = self.mean.copy()
        self.best_reward = -np.inf
        self.iteration = 0

    def iterate(self, objective) -> dict:
        """objective maps (M, N, 2) clamped action samples to (M,) rewards."""
        cfg = self.cfg
        noise = self.rng.standard_normal((cfg.samples,) + self.mean.shape)
        samples = np.clip(self.mean + self.std * noise, _LO, _HI)
        rewards = np.asarray(objective(samples), dtype=np.float64)
        rewards = np.where(np.isnan(rewards), -np.inf, rewards)
        if np.all(np.isinf(rewards) & (rewards < 0)):
            raise DegenerateObjective("all CEM samples scored -inf")
        order = np.argsort(-rewards, kind="stable")
        elite = samples[order[:cfg.elites]]
        elite_rewards = rewards[order[:cfg.elites]]
        self.mean = elite.mean(axis=0)
        self.std = np.maximum(elite.std(axis=0), cfg.std_floor)
        if elite_rewards[0] > self.best_reward:
            self.best_reward = float(elite_rewards[0])
            self.best_actions = elite[0].copy()
        self.iteration += 1
        return {
            "iteration": self.iteration,
            "best_reward": float(elite_rewards[0]),
            "elite_mean_reward": float(elite_rewards.mean()),
            "best_ever": self.best_reward,
        }


def cem_optimize(objective, mean0: np.ndarray, cfg: CemConfig, rng=None):
    """Run cfg.iterations refits; returns (best actions, best reward, trace)."""
    state = CemState(mean0, cfg, rng)
    trace = [state.iterate(objective) for _ in range(cfg.iterations)]
    return state.best_actions, state.best_reward, trace, state
