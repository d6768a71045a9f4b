"""Game-theoretic MPC over the learned reactive policy.

Both planners optimize the ego action sequence with CEM while every
other agent is driven by the trained policy, the ego slot teacher-forced
with the candidate trajectory:

* leader-follower: every CEM iteration rolls the policy out against all
  M ego candidates, so followers best-respond to each leader sample
  before the elites are refit;
* best-response: each outer iteration rolls the policy out once against
  the current ego plan, repeats those agent trajectories across the M
  samples, and runs a single CEM refit of the ego against them.

Hidden states are encoded from history once per plan and reused across
iterations (the history never changes).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .. import dynamics
from ..policy import BatchedPolicy, PolicyConfig
from ..scene.transforms import recenter_on_agent
from ..scene.types import AgentTrack, Scenario
from .cem import CemConfig, CemState
from .reward import RewardConfig, RewardError, evaluate_reward_batch


class PlannerError(Exception):
    pass


@dataclass
class PlanResult:
    planner: str
    horizon: int
    dt: float
    ego_index: int
    ego_actions: np.ndarray           # (N, 2)
    ego_states: np.ndarray            # (N+1, 5), exactly rollout(ego_actions)
    agent_indices: list               # scenario track indices of the other agents
    agent_states: np.ndarray          # (J, N+1, 5) policy response to the plan
    reward: float
    trace: list = field(default_factory=list)
    wall_time: float = 0.0
    converged: bool = False

    def trace_csv(self) -> str:
        lines = ["iteration,best_reward,elite_mean_reward,best_ever"]
        for row in self.trace:
            lines.append(f"{row['iteration']},{row['best_reward']:.6f},"
                         f"{row['elite_mean_reward']:.6f},{row['best_ever']:.6f}")
        return "\n".join(lines) + "\n"


class PlanningContext:
    """Recentred scene, encoded hidden states, and resolved reward inputs."""

    def __init__(self, scenario: Scenario, store, policy_cfg: PolicyConfig,
                 reward_cfg: RewardConfig, horizon: int):
        ego_id = scenario.tracks[scenario.ego_index].agent_id
        self.scenario = recenter_on_agent(scenario, ego_id)
        self.policy = BatchedPolicy(store, policy_cfg)
        self.reward_cfg = reward_cfg
        self.horizon = horizon
        self.dt = self.scenario.dt
        sc = self.scenario
        self.ego_index = sc.ego_index
        self.others = [i for i in range(sc.num_agents) if i != sc.ego_index]
        self.ego_state0 = sc.states_at(sc.t_of(0))[sc.ego_index]
        self.meta = sc.metadata()
        self.h0, self.map_kv = self.policy.encode_history(sc)
        self.ego_extent = sc.tracks[sc.ego_index].extent
        self.other_extents = [sc.tracks[i].extent for i in self.others]

        self.lane_pts = None
        if reward_cfg.lane_weight > 0.0:
            li = reward_cfg.reference_lane
            if li is None or not (0 <= li < sc.roadgraph.num_polylines):
                raise RewardError("lane term is active but reference_lane is missing")
            m = sc.roadgraph.mask[li]
            self.lane_pts = sc.roadgraph.features[li][m][:, :2]
        self.target_index = None
        if reward_cfg.adversarial_weight > 0.0:
            tid = reward_cfg.target_agent
            hits = [j for j, i in enumerate(self.others)
                    if sc.tracks[i].agent_id == tid]
            if not hits:
                raise RewardError(f"adversarial target agent {tid} not found")
            self.target_index = hits[0]

    def rollout_policy(self, ego_states: np.ndarray) -> np.ndarray:
        """Policy response of all non-ego agents to (B, N+1, 5) ego candidates."""
        sc = self.scenario
        ego_states = np.asarray(ego_states, dtype=np.float64)
        if ego_states.ndim == 2:
            ego_states = ego_states[None]
        if ego_states.shape[1] != self.horizon + 1:
            raise PlannerError(
                f"ego candidates span {ego_states.shape[1] - 1} steps, "
                f"expected {self.horizon}")
        B = ego_states.shape[0]
        I = sc.num_agents
        if not self.others:
            return np.zeros((B, 0, self.horizon + 1, 5))
        h = np.broadcast_to(self.h0, (B, I, self.h0.shape[1])).copy()
        states = np.broadcast_to(sc.states_at(sc.t_of(0)), (B, I, 5)).copy()
        states[:, self.ego_index] = ego_states[:, 0]
        out = np.zeros((B, I, self.horizon + 1, 5))
        out[:, :, 0] = states
        for k in range(self.horizon):
            actions, h = self.policy.step(states, self.meta, h, self.map_kv)
            states = dynamics.step(states, actions, self.dt)
            states[:, self.ego_index] = ego_states[:, k + 1]
            out[:, :, k + 1] = states
        return out[:, self.others]

    def rollout_ego(self, action_batch: np.ndarray) -> np.ndarray:
        """(B, N, 2) actions -> (B, N+1, 5) states via the dynamics."""
        acts = np.asarray(action_batch, dtype=np.float64)
        single = acts.ndim == 2
        if single:
            acts = acts[None]
        s0 = np.broadcast_to(self.ego_state0, (acts.shape[0], 5)).copy()
        traj = dynamics.rollout(s0, np.swapaxes(acts, 0, 1), self.dt)
        traj = np.swapaxes(traj, 0, 1)
        return traj[0] if single else traj

    def rewards(self, ego_states, ego_actions, other_states) -> np.ndarray:
        return evaluate_reward_batch(
            ego_states, ego_actions, other_states, self.reward_cfg,
            lane_pts=self.lane_pts, target_index=self.target_index,
            ego_extent=self.ego_extent, other_extents=self.other_extents)


def _converged(trace, window: int = 5, rel: float = 0.01) -> bool:
    if len(trace) < window + 1:
        return False
    prev = trace[-window - 1]["best_ever"]
    last = trace[-1]["best_ever"]
    return abs(last - prev) <= rel * max(abs(last), 1e-9)


def _finalize(ctx: PlanningContext, planner: str, mean_actions, trace,
              t0: float) -> PlanResult:
    actions = np.clip(mean_actions,
                      [dynamics.ACCEL_MIN, dynamics.YAW_MIN],
                      [dynamics.ACCEL_MAX, dynamics.YAW_MAX])
    ego_states = ctx.rollout_ego(actions)
    agent_states = ctx.rollout_policy(ego_states[None])[0]
    reward = float(ctx.rewards(ego_states[None], actions[None], agent_states[None])[0])
    return PlanResult(
        planner=planner, horizon=ctx.horizon, dt=ctx.dt, ego_index=ctx.ego_index,
        ego_actions=actions, ego_states=ego_states,
        agent_indices=list(ctx.others), agent_states=agent_states,
        reward=reward, trace=trace, wall_time=time.perf_counter() - t0,
        converged=_converged(trace))


def ilf_mpc(scenario, store, policy_cfg: PolicyConfig, reward_cfg: RewardConfig,
            cem_cfg: CemConfig, horizon: int = 50,
            init_actions: np.ndarray | None = None) -> PlanResult:
    """Leader-follower plan: followers best-respond to every ego sample."""
    t0 = time.perf_counter()
    ctx = PlanningContext(scenario, store, policy_cfg, reward_cfg, horizon)
    mean0 = np.zeros((horizon, 2)) if init_actions is None else init_actions
    cem = CemState(mean0, cem_cfg)
    trace = []

    def objective(action_samples):
        ego = ctx.rollout_ego(action_samples)
        others = ctx.rollout_policy(ego)
        return ctx.rewards(ego, action_samples, others)

    for _ in range(cem_cfg.iterations):
        trace.append(cem.iterate(objective))
    return _finalize(ctx, "ilf", cem.mean, trace, t0)


def ibr_mpc(scenario, store, policy_cfg: PolicyConfig, reward_cfg: RewardConfig,
            cem_cfg: CemConfig, horizon: int = 50,
            init_actions: np.ndarray | None = None) -> PlanResult:
    """Best-response plan: one policy rollout then one CEM refit per outer
    iteration, agents held fixed while the ego responds."""
    t0 = time.perf_counter()
    ctx = PlanningContext(scenario, store, policy_cfg, reward_cfg, horizon)
    mean0 = np.zeros((horizon, 2)) if init_actions is None else init_actions
    cem = CemState(mean0, cem_cfg)
    trace = []
    for _ in range(cem_cfg.iterations):
        plan_states = ctx.rollout_ego(cem.mean)
        others = ctx.rollout_policy(plan_states[None])

        def objective(action_samples, fixed=others):
            ego = ctx.rollout_ego(action_samples)
            rep = np.broadcast_to(fixed, (ego.shape[0],) + fixed.shape[1:])
            return ctx.rewards(ego, action_samples, rep)

        trace.append(cem.iterate(objective))
    return _finalize(ctx, "ibr", cem.mean, trace, t0)


def nominal_rollout(scenario, store, policy_cfg: PolicyConfig, horizon: int) -> np.ndarray:
    """No-ego-influence baseline: the policy reacts to the ego's recorded
    track (extended at constant velocity if the record is short).

    Returns (I, horizon+1, 5) in the recentred planning frame.
    """
    ego_id = scenario.tracks[scenario.ego_index].agent_id
    sc = recenter_on_agent(scenario, ego_id)
    bp = BatchedPolicy(store, policy_cfg)
    tr = sc.tracks[sc.ego_index]
    t0 = sc.t_of(0)
    avail = min(horizon, sc.horizon)
    ego_states = np.zeros((horizon + 1, 5))
    ego_states[:avail + 1] = tr.states[t0:t0 + avail + 1]
    state = ego_states[avail]
    for k in range(avail, horizon):
        ego_states[k + 1] = dynamics.step(ego_states[k], np.zeros(2), sc.dt)
    return bp.simulate(sc, horizon, ego_states=ego_states[None])[0]


def plan_to_scenario(scenario, result: PlanResult, scenario_id: str | None = None) -> Scenario:
    """Re-express a plan in the scenario file format (recentred frame):
    recorded history followed by planned/predicted future states."""
    ego_id = scenario.tracks[scenario.ego_index].agent_id
    sc = recenter_on_agent(scenario, ego_id)
    K = sc.history_len
    N = result.horizon
    T = K + N + 1
    tracks = []
    for i, tr in enumerate(sc.tracks):
        states = np.zeros((T, 5))
        valid = np.zeros(T, dtype=bool)
        states[:K + 1] = tr.states[:K + 1]
        valid[:K + 1] = tr.valid[:K + 1]
        if i == sc.ego_index:
            future = result.ego_states
        elif i in result.agent_indices:
            future = result.agent_states[result.agent_indices.index(i)]
        else:
            future = None
        if future is not None and valid[K]:
            states[K:] = future
            valid[K:] = True
        tracks.append(AgentTrack(tr.agent_id, states, valid, tr.extent, tr.agent_type))
    out = Scenario(
        scenario_id=scenario_id or f"{sc.scenario_id}-plan-{result.planner}",
        dt=sc.dt, history_len=K, horizon=N, ego_index=sc.ego_index,
        tracks=tracks, roadgraph=sc.roadgraph.copy(),
        label=f"plan-{result.planner}")
    out.validate()
    return out
