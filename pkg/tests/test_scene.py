import numpy as np
import pytest

from driveplan import dynamics, scene
from driveplan.metrics import scan_collisions
from driveplan.scene import (GeneratorConfig, InfeasibleConfigError,
                             ScenarioFormatError, ValidationError)
from driveplan.scene.generate import (AgentSim, DriverStyle, LanePath,
                                      simulate_agents)


def two_agent_cfg():
    return GeneratorConfig(num_scenarios=2, archetypes=("straight",), mix=(1.0,),
                           agents_min=2, agents_max=2)


def test_generation_deterministic_bytes():
    a = scene.generate_corpus(two_agent_cfg(), seed=7)
    b = scene.generate_corpus(two_agent_cfg(), seed=7)
    for sa, sb in zip(a, b):
        assert scene.scenario_to_lines(sa) == scene.scenario_to_lines(sb)


def test_generated_scenarios_collision_free(small_corpus):
    for sc in small_corpus:
        states = sc.all_states()
        assert scan_collisions(states, [tr.extent for tr in sc.tracks]) == 0


def test_generated_scenarios_schema_valid(small_corpus):
    for sc in small_corpus:
        sc.validate()


def test_generated_transitions_dynamics_feasible(small_corpus):
    for sc in small_corpus[:4]:
        for tr in sc.tracks:
            for t in range(sc.num_steps - 1):
                assert dynamics.reproduces(tr.states[t], tr.states[t + 1], sc.dt)


def test_idm_follower_keeps_standstill_gap():
    # fast follower closing on a slow leader from an IDM-safe start
    lane = LanePath(np.stack([np.arange(-50.0, 300.0, 0.5),
                              np.zeros(700)], axis=1))
    leader = AgentSim(path=lane, s0=80.0, v0=3.0, style=DriverStyle(3.0),
                      corridor="l", extent=(4.5, 2.0))
    s0 = 2.0
    style = DriverStyle(12.0, min_gap=s0)
    from driveplan.scene.generate import safe_gap
    gap0 = safe_gap(12.0, 3.0, style) + 4.5 + 3.0
    follower = AgentSim(path=lane, s0=80.0 - gap0, v0=12.0, style=style,
                        corridor="l", extent=(4.5, 2.0))
    states = simulate_agents([leader, follower], T=120, dt=0.1)
    net_gap = (states[0, :, 0] - states[1, :, 0]) - 4.5
    assert net_gap.min() >= s0


def test_archetype_mix_and_labels():
    cfg = GeneratorConfig(num_scenarios=12)
    corpus = scene.generate_corpus(cfg, seed=3)
    labels = {sc.label for sc in corpus}
    assert labels <= {"straight", "merge", "t_intersection"}
    for sc in corpus:
        ego = sc.tracks[sc.ego_index]
        st = ego.states[sc.t_of(0)]
        assert np.allclose(st[:4], [0.0, 0.0, 1.0, 0.0], atol=1e-9)


def test_unknown_archetype_rejected():
    cfg = GeneratorConfig(archetypes=("uturn",), mix=(1.0,))
    with pytest.raises(InfeasibleConfigError, match="uturn"):
        scene.generate_corpus(cfg, seed=0)


def test_bad_agent_range_rejected():
    cfg = GeneratorConfig(agents_min=5, agents_max=3)
    with pytest.raises(InfeasibleConfigError):
        scene.generate_corpus(cfg, seed=0)


# -- SE(2) ops ----------------------------------------------------------------

def test_transform_identity_bit_equal(small_corpus):
    sc = small_corpus[0]
    out = scene.transform_scene(sc, 0.0, 0.0, 0.0)
    assert np.array_equal(out.all_states(), sc.all_states())
    assert np.array_equal(out.roadgraph.features, sc.roadgraph.features)


def test_transform_then_inverse(small_corpus):
    sc = small_corpus[0]
    fwd = scene.transform_scene(sc, 3.0, -2.0, 0.7)
    dx, dy, dphi = scene.inverse_transform(3.0, -2.0, 0.7)
    back = scene.transform_scene(fwd, dx, dy, dphi)
    assert np.max(np.abs(back.all_states() - sc.all_states())) < 1e-9
    assert np.max(np.abs(back.roadgraph.features - sc.roadgraph.features)) < 1e-9


def test_rotation_quarter_turn():
    sc = small_scene_with_point(1.0, 0.0)
    out = scene.transform_scene(sc, 0.0, 0.0, np.pi / 2.0)
    st = out.tracks[0].states[out.t_of(0)]
    assert np.allclose(st[:2], [0.0, 1.0], atol=1e-12)


def small_scene_with_point(x, y):
    T = 3
    states = np.tile([x, y, 1.0, 0.0, 1.0], (T, 1))
    track = scene.AgentTrack(0, states, np.ones(T, dtype=bool), (4.0, 2.0))
    rg = scene.RoadGraph.from_polylines(
        [(np.array([[0.0, 0.0], [5.0, 0.0]]), "none", "lane-center")], 20)
    return scene.Scenario("pt", 0.1, 1, 1, 0, [track], rg)


def test_metric_preservation_under_se2(small_corpus):
    sc = small_corpus[1]
    out = scene.transform_scene(sc, -4.0, 9.0, 1.1)
    t0 = sc.t_of(0)
    a, b = sc.states_at(t0), out.states_at(t0)
    da = np.linalg.norm(a[:, None, :2] - a[None, :, :2], axis=2)
    db = np.linalg.norm(b[:, None, :2] - b[None, :, :2], axis=2)
    assert np.max(np.abs(da - db)) < 1e-9
    ha = np.arctan2(a[:, 3], a[:, 2])
    hb = np.arctan2(b[:, 3], b[:, 2])
    rel_a = np.arctan2(np.sin(ha[:, None] - ha), np.cos(ha[:, None] - ha))
    rel_b = np.arctan2(np.sin(hb[:, None] - hb), np.cos(hb[:, None] - hb))
    assert np.max(np.abs(rel_a - rel_b)) < 1e-9


def test_recenter_idempotent_and_definition(small_corpus):
    sc = small_corpus[2]
    aid = sc.tracks[1].agent_id
    rec = scene.recenter_on_agent(sc, aid)
    st = rec.tracks[1].states[rec.t_of(0)]
    assert np.allclose(st[:4], [0.0, 0.0, 1.0, 0.0], atol=1e-12)
    again = scene.recenter_on_agent(rec, aid)
    assert np.max(np.abs(again.all_states() - rec.all_states())) < 1e-12
    # isometry
    t0 = sc.t_of(0)
    da = np.linalg.norm(sc.states_at(t0)[:, None, :2] - sc.states_at(t0)[None, :, :2], axis=2)
    db = np.linalg.norm(rec.states_at(t0)[:, None, :2] - rec.states_at(t0)[None, :, :2], axis=2)
    assert np.max(np.abs(da - db)) < 1e-9


def test_recenter_unknown_agent(small_corpus):
    with pytest.raises(ValidationError, match="no agent"):
        scene.recenter_on_agent(small_corpus[0], 999)


# -- file format ---------------------------------------------------------------

def test_save_load_roundtrip(tmp_path, small_corpus):
    sc = small_corpus[0]
    path = tmp_path / "scene.jsonl"
    scene.save_scenario(sc, path)
    back = scene.load_scenario(path)
    assert back.scenario_id == sc.scenario_id
    assert np.array_equal(back.all_states(), sc.all_states())
    assert np.array_equal(back.all_valid(), sc.all_valid())
    assert np.array_equal(back.roadgraph.features, sc.roadgraph.features)
    assert np.array_equal(back.roadgraph.mask, sc.roadgraph.mask)
    assert [tr.extent for tr in back.tracks] == [tr.extent for tr in sc.tracks]


def test_truncated_file_errors(tmp_path, small_corpus):
    path = tmp_path / "scene.jsonl"
    scene.save_scenario(small_corpus[0], path)
    text = path.read_text()
    path.write_text(text[:len(text) // 2 - 3])
    with pytest.raises(ScenarioFormatError, match="line"):
        scene.load_scenario(path)


def test_unknown_field_rejected_by_name(small_corpus):
    lines = scene.scenario_to_lines(small_corpus[0])
    lines[1] = lines[1][:-1] + ', "color": "red"}'
    with pytest.raises(ScenarioFormatError, match="color"):
        scene.scenario_from_lines(lines)


def test_missing_field_rejected(small_corpus):
    lines = scene.scenario_to_lines(small_corpus[0])
    import json
    rec = json.loads(lines[1])
    del rec["extent"]
    lines[1] = json.dumps(rec)
    with pytest.raises(ScenarioFormatError, match="extent"):
        scene.scenario_from_lines(lines)


def test_version_mismatch_rejected(small_corpus):
    lines = scene.scenario_to_lines(small_corpus[0])
    lines[0] = lines[0].replace("scenario.v1", "scenario.v9")
    with pytest.raises(ScenarioFormatError, match="scenario.v9"):
        scene.scenario_from_lines(lines)


def test_corpus_roundtrip_and_manifest(tmp_path, small_corpus):
    m1 = scene.save_corpus(small_corpus, tmp_path / "c1", seed=5)
    m2 = scene.save_corpus(small_corpus, tmp_path / "c2", seed=5)
    assert m1["corpus_sha256"] == m2["corpus_sha256"]
    back = scene.load_corpus(tmp_path / "c1")
    assert [sc.scenario_id for sc in back] == [sc.scenario_id for sc in small_corpus]


def test_presets():
    sc, ref_lane, target = scene.lane_change_scenario(seed=0)
    sc.validate()
    assert 0 <= ref_lane < sc.roadgraph.num_polylines
    pts = sc.roadgraph.features[ref_lane][sc.roadgraph.mask[ref_lane]]
    assert np.allclose(pts[:, 1], 3.5, atol=1e-6)  # target lane offset
    assert any(tr.agent_id == target for tr in sc.tracks)
    fw = scene.following_scenario(seed=0)
    fw.validate()
    assert fw.num_agents == 2
