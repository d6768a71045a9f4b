import numpy as np
import pytest

from driveplan import scene


@pytest.fixture(scope="session")
def small_corpus():
    return scene.generate_corpus(scene.GeneratorConfig(num_scenarios=8), seed=5)


def coasting_scenario(num_agents=2, K=4, N=6, dt=0.1, speed=3.0):
    """All agents coast straight at constant speed; the zero action
    reproduces the future exactly. Shared by perfect-imitation tests."""
    from driveplan import dynamics

    T = K + N + 1
    tracks = []
    for i in range(num_agents):
        s = np.array([0.0, 4.0 * i, 1.0, 0.0, speed])
        states = dynamics.rollout(s, np.zeros((T - 1, 2)), dt)
        tracks.append(scene.AgentTrack(
            agent_id=i, states=states, valid=np.ones(T, dtype=bool),
            extent=(4.5, 2.0), agent_type="vehicle"))
    xs = np.arange(-20.0, 40.0, 4.0)
    rg = scene.RoadGraph.from_polylines(
        [(np.stack([xs, np.full_like(xs, 4.0 * i)], axis=1), "none", "lane-center")
         for i in range(num_agents)], pad_points=20)
    sc = scene.Scenario(scenario_id="coast", dt=dt, history_len=K, horizon=N,
                        ego_index=0, tracks=tracks, roadgraph=rg, label="test")
    sc.validate()
    return sc


@pytest.fixture()
def coast_scene():
    return coasting_scenario()
