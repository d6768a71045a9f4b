"""Hand-shaped benchmark scenes for planning experiments.

Unlike the random corpus generator these fix the cast: the lane-change
scene puts the ego on the right lane of a two-lane road with a faster car
approaching on the target lane and a slower car ahead of the gap; the
following scene puts a single scripted follower behind the ego. Recorded
futures keep every agent in lane, so they double as the no-influence
nominal rollout.
"""

from __future__ import annotations

import numpy as np

from .generate import (AgentSim, DriverStyle, GeneratorConfig, LanePath,
                       build_roadgraph, offset_path, simulate_agents)
from .transforms import recenter_on_agent
from .types import AgentTrack, Scenario


def _straight_lane(y: float, x0: float, x1: float) -> LanePath:
    xs = np.arange(x0, x1 + 0.5, 0.5)
    return LanePath(np.stack([xs, np.full_like(xs, y)], axis=1))


def _assemble(agents, entries, cfg, ego, scenario_id, label, K, N):
    T = K + N + 1
    states = simulate_agents(agents, T, cfg.dt)
    tracks = [AgentTrack(agent_id=i, states=states[i], valid=np.ones(T, dtype=bool),
                         extent=agents[i].extent, agent_type="vehicle")
              for i in range(len(agents))]
    sc = Scenario(scenario_id=scenario_id, dt=cfg.dt, history_len=K, horizon=N,
                  ego_index=ego, tracks=tracks,
                  roadgraph=build_roadgraph(entries, cfg), label=label)
    sc = recenter_on_agent(sc, sc.tracks[ego].agent_id)
    sc.validate()
    return sc


def lane_change_scenario(seed: int = 0, history_len: int = 10, horizon: int = 50):
    """Two-lane road, ego invited to move one lane left.

    Returns (scenario, reference_lane_polyline_index, target_agent_id):
    the reference polyline is the target-lane centerline, the target
    agent is the faster car approaching on that lane.
    """
    rng = np.random.default_rng(seed)
    cfg = GeneratorConfig(history_len=history_len, horizon=horizon,
                          point_spacing=6.5, pad_points=20)
    lane_w = cfg.lane_width
    lane0 = _straight_lane(0.0, -70.0, 140.0)
    lane1 = _straight_lane(lane_w, -70.0, 140.0)

    v_ego = 8.0 + rng.uniform(-0.5, 0.5)
    v_target = 10.0 + rng.uniform(-0.5, 0.5)
    v_lead = 6.5 + rng.uniform(-0.3, 0.3)
    ego = AgentSim(path=lane0, s0=70.0, v0=v_ego,
                   style=DriverStyle(v_ego), corridor="lane0", extent=(4.6, 2.0))
    target = AgentSim(path=lane1, s0=70.0 - 16.0 + rng.uniform(-2.0, 0.0),
                      v0=v_target, style=DriverStyle(v_target),
                      corridor="lane1", extent=(4.6, 2.0))
    lead = AgentSim(path=lane1, s0=70.0 + 26.0 + rng.uniform(0.0, 3.0), v0=v_lead,
                    style=DriverStyle(v_lead), corridor="lane1", extent=(4.6, 2.0))

    # target-lane centerline around the maneuver zone, one un-chunked polyline
    ref_pts = np.stack([np.linspace(-30.0, 90.0, 20), np.full(20, lane_w)], axis=1)
    entries = [
        (lane0, "none", "lane-center"),
        (ref_pts, "none", "lane-center"),
        (offset_path(lane0, -lane_w / 2.0), "none", "road-edge"),
        (offset_path(lane1, lane_w / 2.0), "none", "road-edge"),
        (offset_path(lane0, lane_w / 2.0), "none", "lane-boundary"),
    ]
    sc = _assemble([ego, target, lead], entries, cfg, ego=0,
                   scenario_id=f"lane-change-{seed:04d}", label="lane_change",
                   K=history_len, N=horizon)
    # after chunking, the reference polyline is the first chunk of entry 1
    lane0_chunks = int(np.ceil((np.floor(lane0.length / cfg.point_spacing) + 1)
                               / cfg.pad_points))
    reference_lane = lane0_chunks
    return sc, reference_lane, sc.tracks[1].agent_id


def following_scenario(seed: int = 0, history_len: int = 10, horizon: int = 30):
    """Single lane: the ego leads, one scripted follower trails it."""
    rng = np.random.default_rng(seed)
    cfg = GeneratorConfig(history_len=history_len, horizon=horizon,
                          point_spacing=6.5, pad_points=20)
    lane = _straight_lane(0.0, -70.0, 120.0)
    v_ego = 7.0 + rng.uniform(-0.5, 0.5)
    v_f = 8.5 + rng.uniform(-0.5, 0.5)
    ego = AgentSim(path=lane, s0=70.0, v0=v_ego, style=DriverStyle(v_ego),
                   corridor="lane", extent=(4.6, 2.0))
    follower = AgentSim(path=lane, s0=70.0 - 14.0 + rng.uniform(-2.0, 2.0),
                        v0=v_f, style=DriverStyle(v_f), corridor="lane",
                        extent=(4.6, 2.0))
    entries = [
        (lane, "none", "lane-center"),
        (offset_path(lane, -cfg.lane_width / 2.0), "none", "road-edge"),
        (offset_path(lane, cfg.lane_width / 2.0), "none", "road-edge"),
    ]
    return _assemble([ego, follower], entries, cfg, ego=0,
                     scenario_id=f"following-{seed:04d}", label="following",
                     K=history_len, N=horizon)


PRESETS = {"lane-change": lane_change_scenario, "following": following_scenario}
