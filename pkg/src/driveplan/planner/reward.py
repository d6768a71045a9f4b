"""Ego reward for the planning game.

Per-step running terms are summed over k = 1..N (the fixed start state
contributes only constants), action regularization over k = 0..N-1, and
the desired-heading term is terminal:

    - proximity_weight    * sum_k sum_j 1 / max(||p_e - p_j||, floor)
    - heading_weight      * |anglediff(phi_N - phi*)|
    - action_weight       * sum_k ||a_k||^2
    - lane_weight         * sum_k proj(p_k)         (distance to reference lane)
    - adversarial_weight  * sum_k v_target,k        (when a target is set)
    - collision_penalty   * #(ego-vs-agent box overlaps)   (optional, hard)

All weights are non-negative; the minus signs live in the definitions.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from ..geometry import points_polyline_distance, rect_corners, obb_overlap


class RewardError(Exception):
    pass


@dataclass
class RewardConfig:
    proximity_weight: float = 1.0
    heading_weight: float = 2.0
    action_weight: float = 0.1
    lane_weight: float = 1.0
    adversarial_weight: float = 0.0
    collision_penalty: float = 0.0        # e.g. 1e4 enables the hard box penalty
    proximity_floor: float = 0.5
    desired_heading: float = 0.0
    reference_lane: int | None = None     # polyline index in the scenario roadgraph
    target_agent: int | None = None       # agent id for the adversarial term

    def validate(self):
        for f in ("proximity_weight", "heading_weight", "action_weight",
                  "lane_weight", "adversarial_weight", "collision_penalty"):
            if getattr(self, f) < 0.0:
                raise RewardError(f"{f} must be >= 0")
        if self.proximity_floor <= 0.0:
            raise RewardError("proximity_floor must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "RewardConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise RewardError(f"unknown reward config key {sorted(extra)[0]!r}")
        cfg = cls(**d)
        cfg.validate()
        return cfg


def angle_difference(a: float, b: float) -> float:
    """Wrapped difference a - b in (-pi, pi]."""
    d = np.arctan2(np.sin(a - b), np.cos(a - b))
    return float(np.pi) if d == -np.pi else float(d)


def evaluate_reward_batch(ego_states: np.ndarray, ego_actions: np.ndarray,
                          other_states: np.ndarray | None, cfg: RewardConfig,
                          lane_pts: np.ndarray | None = None,
                          target_index: int | None = None,
                          ego_extent=None, other_extents=None) -> np.ndarray:
    """Vectorized reward for (B, N+1, 5) ego rollouts.

    other_states is (B, J, N+1, 5) or None; target_index indexes its J
    axis. Extents are only needed when the hard collision penalty is on.
    """
    cfg.validate()
    ego_states = np.asarray(ego_states, dtype=np.float64)
    ego_actions = np.asarray(ego_actions, dtype=np.float64)
    B, n1, _ = ego_states.shape
    reward = np.zeros(B)

    if cfg.proximity_weight > 0.0 and other_states is not None and other_states.shape[1] > 0:
        d = np.linalg.norm(ego_states[:, None, 1:, :2] - other_states[:, :, 1:, :2],
                           axis=3)
        reward -= cfg.proximity_weight * (1.0 / np.maximum(d, cfg.proximity_floor)).sum(axis=(1, 2))

    if cfg.heading_weight > 0.0:
        phi = np.arctan2(ego_states[:, -1, 3], ego_states[:, -1, 2])
        diff = np.arctan2(np.sin(phi - cfg.desired_heading),
                          np.cos(phi - cfg.desired_heading))
        reward -= cfg.heading_weight * np.abs(diff)

    if cfg.action_weight > 0.0:
        reward -= cfg.action_weight * np.sum(ego_actions ** 2, axis=(1, 2))

    if cfg.lane_weight > 0.0:
        if lane_pts is None:
            raise RewardError("lane term is active but no reference lane was given")
        d = points_polyline_distance(ego_states[:, 1:, :2], lane_pts)
        reward -= cfg.lane_weight * d.sum(axis=1)

    if cfg.adversarial_weight > 0.0:
        if other_states is None or target_index is None:
            raise RewardError("adversarial term is active but no target agent was given")
        reward -= cfg.adversarial_weight * other_states[:, target_index, 1:, 4].sum(axis=1)

    if cfg.collision_penalty > 0.0 and other_states is not None and other_states.shape[1] > 0:
        if ego_extent is None or other_extents is None:
            raise RewardError("collision penalty is active but extents were not given")
        reach = 0.5 * np.hypot(*ego_extent) + np.array(
            [0.5 * np.hypot(*e) for e in other_extents])
        d = np.linalg.norm(ego_states[:, None, 1:, :2] - other_states[:, :, 1:, :2],
                           axis=3)
        hits = np.zeros(B)
        close = np.argwhere(d <= reach[None, :, None])
        for b, j, k in close:
            if obb_overlap(rect_corners(ego_states[b, k + 1], ego_extent),
                           rect_corners(other_states[b, j, k + 1], other_extents[j])):
                hits[b] += 1.0
        reward -= cfg.collision_penalty * hits

    return reward


def evaluate_reward(ego_states, ego_actions, other_states, cfg: RewardConfig,
                    lane_pts=None, target_index=None, ego_extent=None,
                    other_extents=None) -> float:
    """Scalar reward for one (N+1, 5) ego trajectory; pure function."""
    others = None
    if other_states is not None:
        others = np.asarray(other_states, dtype=np.float64)[None]
    out = evaluate_reward_batch(
        np.asarray(ego_states, dtype=np.float64)[None],
        np.asarray(ego_actions, dtype=np.float64)[None],
        others, cfg, lane_pts=lane_pts, target_index=target_index,
        ego_extent=ego_extent, other_extents=other_extents)
    return float(out[0])
