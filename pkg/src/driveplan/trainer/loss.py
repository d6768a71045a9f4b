"""Closed-loop imitation loss with backpropagation through time.

History is encoded with teacher forcing, then all agents roll forward for
N steps through the differentiable dynamics, sampling reparametrized
actions. The loss is the double sum over steps and agents of per-component
Huber penalties between rolled-out and recorded states: position on
(X, Y), heading on (cos, sin), and optionally velocity. Invalid steps are
masked out.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import diffcore as dc
from .. import dynamics
from ..diffcore import ParamStore, Tensor
from ..policy import PolicyConfig, encode_history, encode_map, policy_step


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 8
    lr: float = 3e-4
    lr_schedule: str = "constant"     # or "cosine" (anneals to 2.5% of lr)
    grad_clip: float = 1.0
    perturb_prob: float = 0.1
    se2_xy: float = 10.0              # uniform +-range, meters
    se2_phi: float = 0.8              # uniform +-range, radians
    speed_loss: bool = False
    nlls: bool = False
    huber_delta: float = 1.0
    val_frac: float = 0.1
    seed: int = 0

    def validate(self):
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown lr schedule {self.lr_schedule!r}")
        if not (0.0 <= self.perturb_prob <= 1.0):
            raise ValueError(f"perturb_prob must be in [0, 1], got {self.perturb_prob}")
        if not (0.0 <= self.val_frac < 1.0):
            raise ValueError("val_frac must be in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


@dataclass
class LossBreakdown:
    position: float
    heading: float
    velocity: float
    total: float
    per_step: np.ndarray = field(default_factory=lambda: np.zeros(0))   # (N,)
    per_agent: np.ndarray = field(default_factory=lambda: np.zeros(0))  # (I,)


def rollout_loss(scenario, store: ParamStore, policy_cfg: PolicyConfig,
                 train_cfg: TrainConfig, rng=None):
    """Build the tape for one scenario.

    rng draws the reparametrization noise; None rolls out deterministic
    (mean) actions. Returns (loss Tensor, Tape, LossBreakdown).
    """
    tape = dc.Tape()
    P = store.attach_all(tape)
    map_emb = None
    if policy_cfg.use_map:
        map_emb, _ = encode_map(P, policy_cfg, scenario.roadgraph)
    h = encode_history(P, policy_cfg, scenario, map_emb)
    I = scenario.num_agents
    N = scenario.horizon
    meta = Tensor(scenario.metadata())
    states = Tensor(scenario.states_at(scenario.t_of(0)))

    pos_sum = None
    head_sum = None
    vel_sum = None
    per_step = np.zeros(N)
    per_agent = np.zeros(I)
    for k in range(N):
        eps = rng.standard_normal((I, 2)) if rng is not None else None
        actions, _, h = policy_step(P, policy_cfg, states, meta, h, map_emb, eps)
        states = dynamics.step_tensor(states, actions, scenario.dt)
        t = scenario.t_of(k + 1)
        truth = scenario.states_at(t)
        valid = scenario.valid_at(t)
        hub = dc.huber(states - Tensor(truth), train_cfg.huber_delta)
        if not valid.all():
            hub = hub * Tensor(np.repeat(valid[:, None].astype(np.float64), 5, axis=1))
        pos = dc.sum_all(dc.narrow(hub, 1, 0, 2))
        head = dc.sum_all(dc.narrow(hub, 1, 2, 2))
        pos_sum = pos if pos_sum is None else pos_sum + pos
        head_sum = head if head_sum is None else head_sum + head
        if train_cfg.speed_loss:
            vel = dc.sum_all(dc.narrow(hub, 1, 4, 1))
            vel_sum = vel if vel_sum is None else vel_sum + vel
        step_terms = hub.data[:, :4].sum(axis=1)
        if train_cfg.speed_loss:
            step_terms = step_terms + hub.data[:, 4]
        per_step[k] = step_terms.sum()
        per_agent += step_terms

    total = pos_sum + head_sum
    if vel_sum is not None:
        total = total + vel_sum
    breakdown = LossBreakdown(
        position=pos_sum.item(), heading=head_sum.item(),
        velocity=vel_sum.item() if vel_sum is not None else 0.0,
        total=total.item(), per_step=per_step, per_agent=per_agent)
    return total, tape, breakdown
