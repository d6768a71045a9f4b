"""Synthetic driving corpora from scripted experts.

Each scenario is produced by simulating every agent with a pure-pursuit
steering law along a lane path and an intelligent-driver car-following
law for acceleration, stepped through the same Euler unicycle dynamics
the learners use, so every recorded transition is feasible by
construction. Scenes come in three archetypes:

* straight    -- multi-lane road (optionally gently curved), car
                 following with occasional leader slowdowns.
* merge       -- an on-ramp blending into a main lane; the ramp car
                 (the ego) zips in between main-lane traffic.
* t_intersection -- a side-road car (the ego) yields at a stop line,
                 then turns right onto the main road in front of or
                 behind oncoming cars.

All scenarios are recentered on the ego at step k=0 before being
returned, are collision-free, and are deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import dynamics
from ..geometry import states_collide, wrap_angle
from .transforms import recenter_on_agent
from .types import AgentTrack, RoadGraph, Scenario

ARCHETYPES = ("straight", "merge", "t_intersection")


class InfeasibleConfigError(Exception):
    """The generator config cannot produce a valid scenario."""


@dataclass
class GeneratorConfig:
    num_scenarios: int = 200
    archetypes: tuple = ARCHETYPES
    mix: tuple = (0.5, 0.3, 0.2)
    agents_min: int = 2
    agents_max: int = 6
    speed_min: float = 3.0
    speed_max: float = 12.0
    history_len: int = 10
    horizon: int = 30
    dt: float = 0.1
    lane_width: float = 3.5
    pad_points: int = 20
    max_polylines: int = 64
    point_spacing: float = 2.5
    idm_min_gap: float = 2.0          # standstill distance s0
    max_attempts: int = 25

    def validate(self):
        for name in self.archetypes:
            if name not in ARCHETYPES:
                raise InfeasibleConfigError(
                    f"unknown archetype {name!r}; valid names: {', '.join(ARCHETYPES)}")
        if len(self.mix) != len(self.archetypes):
            raise InfeasibleConfigError("mix length must match archetypes")
        if self.agents_min < 1 or self.agents_max < self.agents_min:
            raise InfeasibleConfigError("bad agent count range")
        if self.agents_max > 8:
            raise InfeasibleConfigError("at most 8 agents are supported")
        if not (0.0 < self.speed_min <= self.speed_max):
            raise InfeasibleConfigError("bad speed range")
        if self.num_scenarios < 1:
            raise InfeasibleConfigError("num_scenarios must be >= 1")


# ---------------------------------------------------------------------------
# lane paths

class LanePath:
    """Arc-length parametrized dense polyline path (~0.5 m spacing)."""

    def __init__(self, pts: np.ndarray):
        self.pts = np.asarray(pts, dtype=np.float64)
        seg = np.linalg.norm(np.diff(self.pts, axis=0), axis=1)
        self.cum = np.concatenate([[0.0], np.cumsum(seg)])
        d = np.diff(self.pts, axis=0)
        heads = np.arctan2(d[:, 1], d[:, 0])
        self.headings = np.concatenate([heads, heads[-1:]])

    @property
    def length(self) -> float:
        return float(self.cum[-1])

    def point_at(self, s: float) -> np.ndarray:
        s = np.clip(s, 0.0, self.length)
        i = int(np.searchsorted(self.cum, s, side="right")) - 1
        i = min(max(i, 0), len(self.cum) - 2)
        seg = self.cum[i + 1] - self.cum[i]
        t = 0.0 if seg <= 0 else (s - self.cum[i]) / seg
        return (1.0 - t) * self.pts[i] + t * self.pts[i + 1]

    def heading_at(self, s: float) -> float:
        s = np.clip(s, 0.0, self.length)
        i = int(np.searchsorted(self.cum, s, side="right")) - 1
        return float(self.headings[min(max(i, 0), len(self.headings) - 1)])

    def project(self, xy: np.ndarray) -> float:
        """Arc length of the closest path point (refined on adjacent segments)."""
        d2 = np.sum((self.pts - xy) ** 2, axis=1)
        i = int(np.argmin(d2))
        best_s, best_d = self.cum[i], d2[i]
        for j in (i - 1, i):
            if 0 <= j < len(self.pts) - 1:
                a, b = self.pts[j], self.pts[j + 1]
                ab = b - a
                denom = float(ab @ ab)
                if denom <= 0:
                    continue
                t = float(np.clip((xy - a) @ ab / denom, 0.0, 1.0))
                c = a + t * ab
                dd = float(np.sum((xy - c) ** 2))
                if dd < best_d:
                    best_d = dd
                    best_s = self.cum[j] + t * np.sqrt(denom)
        return float(best_s)


def curved_path(start, heading, length, curvature=0.0, step=0.5) -> LanePath:
    n = max(int(np.ceil(length / step)), 2)
    ss = np.linspace(0.0, length, n + 1)
    if abs(curvature) < 1e-9:
        d = np.array([np.cos(heading), np.sin(heading)])
        pts = np.asarray(start) + ss[:, None] * d
    else:
        phis = heading + curvature * ss
        r = 1.0 / curvature
        cx = start[0] - r * np.sin(heading)
        cy = start[1] + r * np.cos(heading)
        pts = np.stack([cx + r * np.sin(phis), cy - r * np.cos(phis)], axis=1)
    return LanePath(pts)


def offset_path(path: LanePath, offset: float) -> LanePath:
    normals = np.stack([-np.sin(path.headings), np.cos(path.headings)], axis=1)
    return LanePath(path.pts + offset * normals)


def ramp_blend_path(y_offset: float, x_start: float, x_blend0: float,
                    x_blend1: float, x_end: float, step=0.5) -> LanePath:
    """Lane at y=y_offset blending smoothly onto y=0 between x_blend0..x_blend1."""
    xs = np.arange(x_start, x_end + step, step)
    t = np.clip((xs - x_blend0) / max(x_blend1 - x_blend0, 1e-9), 0.0, 1.0)
    blend = 1.0 - (3.0 * t ** 2 - 2.0 * t ** 3)
    ys = y_offset * blend
    return LanePath(np.stack([xs, ys], axis=1))


def turn_path(x_side: float, y_start: float, radius: float, x_end: float, step=0.5) -> LanePath:
    """Northbound approach at x=x_side, quarter right turn onto y=0 heading +x."""
    ys = np.arange(y_start, -radius, step)
    approach = np.stack([np.full_like(ys, x_side), ys], axis=1)
    angs = np.linspace(np.pi, np.pi / 2.0, max(int(radius * np.pi / 2 / step), 8),
                       endpoint=False)
    cx, cy = x_side + radius, -radius
    arc = np.stack([cx + radius * np.cos(angs), cy + radius * np.sin(angs)], axis=1)
    xs = np.arange(x_side + radius, x_end + step, step)
    exit_seg = np.stack([xs, np.zeros_like(xs)], axis=1)
    return LanePath(np.concatenate([approach, arc, exit_seg], axis=0))


# ---------------------------------------------------------------------------
# scripted experts

@dataclass
class DriverStyle:
    desired_speed: float
    accel: float = 1.8            # IDM max acceleration a
    brake: float = 2.0            # IDM comfortable deceleration b
    headway: float = 1.5          # IDM time headway T
    min_gap: float = 2.0          # IDM standstill distance s0


def idm_accel(v: float, v_lead, gap, style: DriverStyle) -> float:
    v0 = max(style.desired_speed, 0.1)
    free = 1.0 - (max(v, 0.0) / v0) ** 4
    if gap is None:
        return style.accel * free
    gap = max(gap, 0.1)
    s_star = style.min_gap + max(v * style.headway, 0.0) \
        + v * (v - v_lead) / (2.0 * np.sqrt(style.accel * style.brake))
    s_star = max(s_star, style.min_gap)
    return style.accel * (free - (s_star / gap) ** 2)


def safe_gap(v: float, v_lead: float, style: DriverStyle) -> float:
    """Initial spacing at which IDM will not undershoot s0."""
    s_star = style.min_gap + v * style.headway \
        + max(v * (v - v_lead), 0.0) / (2.0 * np.sqrt(style.accel * style.brake))
    return s_star


def pure_pursuit_yaw(state: np.ndarray, path: LanePath, s_here: float) -> float:
    v = max(state[4], 0.0)
    lookahead = float(np.clip(1.0 + 0.6 * v, 2.0, 8.0))
    target = path.point_at(min(s_here + lookahead, path.length))
    phi = np.arctan2(state[3], state[2])
    eta = wrap_angle(np.arctan2(target[1] - state[1], target[0] - state[0]) - phi)
    kappa = 2.0 * np.sin(eta) / lookahead
    return float(np.clip(v * kappa, dynamics.YAW_MIN, dynamics.YAW_MAX))


@dataclass
class YieldPlan:
    s_stop: float                 # stop line in own-path arc length
    gap_time: float               # accepted time gap to the next main car, seconds
    join_progress: float          # own progress at which the join completes
    committed: bool = False


@dataclass
class AgentSim:
    path: LanePath
    s0: float
    v0: float
    style: DriverStyle
    corridor: str
    progress_offset: float = 0.0
    extent: tuple = (4.6, 2.0)
    speed_caps: list = field(default_factory=list)     # (s_begin, s_end, cap)
    events: list = field(default_factory=list)         # (t_step, new_desired_speed)
    yield_plan: YieldPlan | None = None
    # runtime
    state: np.ndarray | None = None
    s: float = 0.0

    def desired_speed(self, t: int) -> float:
        v0 = self.style.desired_speed
        for (te, ve) in self.events:
            if t >= te:
                v0 = ve
        for (sb, se, cap) in self.speed_caps:
            if sb <= self.s <= se:
                v0 = min(v0, cap)
        return v0

    def progress(self) -> float:
        return self.s + self.progress_offset


def _commit_ok(agent: AgentSim, others: list, t: int) -> bool:
    yp = agent.yield_plan
    for other in others:
        if other is agent or other.corridor != "main":
            continue
        rel = yp.join_progress + agent.progress_offset - other.progress()
        if rel <= 0.5:
            continue  # already past the join point
        tta = rel / max(other.state[4], 0.5)
        if tta < yp.gap_time:
            return False
    return True


def simulate_agents(agents: list, T: int, dt: float) -> np.ndarray:
    """Run the scripted experts; returns (I, T, 5) state trajectories."""
    for ag in agents:
        pt = ag.path.point_at(ag.s0)
        phi = ag.path.heading_at(ag.s0)
        ag.state = np.array([pt[0], pt[1], np.cos(phi), np.sin(phi), ag.v0])
        ag.s = ag.s0
    out = np.zeros((len(agents), T, 5))
    for t in range(T):
        for i, ag in enumerate(agents):
            out[i, t] = ag.state
        if t == T - 1:
            break
        # yield decisions first, on the current snapshot
        for ag in agents:
            yp = ag.yield_plan
            if yp is not None and not yp.committed and _commit_ok(ag, agents, t):
                yp.committed = True
                ag.corridor = "main"
        for ag in agents:
            # nearest leader in the same corridor by common progress
            gap, v_lead = None, 0.0
            my_p = ag.progress()
            for other in agents:
                if other is ag or other.corridor != ag.corridor:
                    continue
                rel = other.progress() - my_p
                if rel <= 0.0:
                    continue
                net = rel - 0.5 * (ag.extent[0] + other.extent[0])
                if gap is None or net < gap:
                    gap, v_lead = net, other.state[4]
            yp = ag.yield_plan
            if yp is not None and not yp.committed:
                wall = yp.s_stop - ag.s - 0.5 * ag.extent[0]
                if gap is None or wall < gap:
                    gap, v_lead = wall, 0.0
            style = DriverStyle(ag.desired_speed(t), ag.style.accel, ag.style.brake,
                                ag.style.headway, ag.style.min_gap)
            alpha = idm_accel(ag.state[4], v_lead, gap, style)
            alpha = max(alpha, -ag.state[4] / dt)      # scripted cars do not reverse
            r = pure_pursuit_yaw(ag.state, ag.path, ag.s)
            ag.state = dynamics.step(ag.state, np.array([alpha, r]), dt)
            ag.s = ag.path.project(ag.state[0:2])
    return out


# ---------------------------------------------------------------------------
# roadgraph assembly

def _sample_polyline(path: LanePath, spacing: float) -> np.ndarray:
    n = max(int(np.floor(path.length / spacing)), 1)
    ss = np.linspace(0.0, path.length, n + 1)
    return np.stack([path.point_at(s) for s in ss])


def _chunk(points: np.ndarray, pad: int) -> list[np.ndarray]:
    return [points[i:i + pad] for i in range(0, len(points), pad)]


def build_roadgraph(entries, cfg: GeneratorConfig) -> RoadGraph:
    """entries: (path-or-points, light, class) -> padded polyline arrays."""
    polys = []
    for src, light, cls in entries:
        pts = _sample_polyline(src, cfg.point_spacing) if isinstance(src, LanePath) else np.asarray(src)
        for chunk in _chunk(pts, cfg.pad_points):
            if len(chunk) >= 1:
                polys.append((chunk, light, cls))
    if len(polys) > cfg.max_polylines:
        raise InfeasibleConfigError(
            f"{len(polys)} polylines exceed the cap of {cfg.max_polylines}")
    return RoadGraph.from_polylines(polys, pad_points=cfg.pad_points)


# ---------------------------------------------------------------------------
# archetypes

def _style(rng, cfg, desired) -> DriverStyle:
    return DriverStyle(
        desired_speed=desired,
        accel=rng.uniform(1.2, 2.4),
        brake=rng.uniform(1.6, 2.6),
        headway=rng.uniform(0.9, 1.6),
        min_gap=cfg.idm_min_gap,
    )


def _extent(rng) -> tuple:
    return (float(rng.uniform(4.2, 5.0)), float(rng.uniform(1.8, 2.1)))


def _initial_speed(rng, desired: float) -> float:
    """Start off the desired speed so agents visibly settle in-window."""
    return float(np.clip(desired * rng.uniform(0.55, 1.25), 0.5, 13.0))


def _speed_events(rng, agents, cfg: GeneratorConfig, p_scene: float = 0.8):
    """Mid-scenario desired-speed changes: braking cascades, pull-aways."""
    if rng.random() >= p_scene or not agents:
        return
    n_events = 1 + int(rng.random() < 0.35)
    horizon = cfg.history_len + cfg.horizon
    for _ in range(n_events):
        ag = agents[int(rng.integers(0, len(agents)))]
        # onsets biased into the history window keep reactions inferable
        if rng.random() < 0.6:
            t_ev = int(rng.integers(0, max(cfg.history_len - 1, 1)))
        else:
            t_ev = int(rng.integers(0, max(horizon - 10, 1)))
        if rng.random() < 0.75:
            factor = rng.uniform(0.25, 0.55)
        else:
            factor = rng.uniform(1.25, 1.55)
        ag.events.append((t_ev, float(np.clip(ag.style.desired_speed * factor,
                                              0.0, 13.5))))


def _place_chain(rng, cfg, lane_agents, lead_s, T):
    """Assign initial arc positions back-to-front with IDM-safe spacing.

    Followers are often made faster than their leader so the catch-up
    and braking happens inside the scenario window.
    """
    s = lead_s
    prev_v = None
    for ag in lane_agents:
        if prev_v is None:
            ag.s0 = s
        else:
            extra = rng.uniform(1.0, 9.0)
            if rng.random() < 0.6:
                # catch-up setup: a faster follower whose braking reaction
                # lands inside the prediction window
                ag.style.desired_speed = float(np.clip(
                    prev_v * rng.uniform(1.25, 1.9) + 1.0, cfg.speed_min, 13.0))
                ag.v0 = ag.style.desired_speed
                closing = max(ag.v0 - prev_v, 0.5)
                extra = closing * rng.uniform(0.5, 2.5)
            need = safe_gap(ag.v0, prev_v, ag.style) + 0.5 * (ag.extent[0] + prev_len)
            s = s - need - extra
            ag.s0 = s
        prev_v = ag.v0
        prev_len = ag.extent[0]


def _build_straight(cfg: GeneratorConfig, rng) -> tuple:
    n_lanes = int(rng.integers(2, 4))
    count = int(rng.integers(cfg.agents_min, cfg.agents_max + 1))
    road_len = 260.0
    capacity = n_lanes * 4
    if count > capacity:
        raise InfeasibleConfigError(
            f"{count} agents exceed capacity {capacity} of {n_lanes} lanes")
    curvature = 0.0
    if rng.random() < 0.55:
        curvature = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.002, 0.012))
    base = curved_path((-road_len / 2.0, 0.0), 0.0, road_len, curvature)
    lanes = [offset_path(base, (li - (n_lanes - 1) / 2.0) * cfg.lane_width)
             for li in range(n_lanes)]

    per_lane = [[] for _ in range(n_lanes)]
    agents = []
    for _ in range(count):
        li = int(rng.integers(0, n_lanes))
        while len(per_lane[li]) >= 4:
            li = (li + 1) % n_lanes
        v = float(rng.uniform(cfg.speed_min, cfg.speed_max))
        ag = AgentSim(path=lanes[li], s0=0.0, v0=_initial_speed(rng, v),
                      style=_style(rng, cfg, v), corridor=f"lane{li}",
                      extent=_extent(rng))
        per_lane[li].append(ag)
        agents.append(ag)
    T = cfg.history_len + cfg.horizon + 1
    for li, lane_agents in enumerate(per_lane):
        if lane_agents:
            lead_s = road_len / 2.0 + rng.uniform(20.0, 55.0)
            _place_chain(rng, cfg, lane_agents, lead_s, T)
    _speed_events(rng, agents, cfg)

    entries = [(lane, "none", "lane-center") for lane in lanes]
    for li in range(n_lanes - 1):
        entries.append((offset_path(lanes[li], cfg.lane_width / 2.0), "none", "lane-boundary"))
    half = cfg.lane_width / 2.0
    entries.append((offset_path(lanes[0], -half), "none", "road-edge"))
    entries.append((offset_path(lanes[-1], half), "none",
                    "double-yellow" if rng.random() < 0.3 else "road-edge"))
    ego = int(rng.integers(0, len(agents)))
    return agents, entries, ego, "straight"


def _build_merge(cfg: GeneratorConfig, rng) -> tuple:
    count = min(int(rng.integers(max(cfg.agents_min, 2), cfg.agents_max + 1)), 6)
    n_ramp = 1 if count <= 4 else int(rng.integers(1, 3))
    n_main = min(count - n_ramp, 4)
    n_ramp = min(count - n_main, 2)

    x0, x1 = -140.0, 160.0
    xb0, xb1 = -20.0, 20.0
    main = LanePath(np.stack([np.arange(x0, x1 + 0.5, 0.5),
                              np.zeros(len(np.arange(x0, x1 + 0.5, 0.5)))], axis=1))
    ramp = ramp_blend_path(-cfg.lane_width, x0, xb0, xb1, x1)
    s_merge_main = xb1 - x0
    s_merge_ramp = ramp.project(np.array([xb1, 0.0]))

    agents = []
    T = cfg.history_len + cfg.horizon + 1
    window = T * cfg.dt
    # the ego is the first ramp car, timed to hit the blend around k=0
    v_ego = float(rng.uniform(max(cfg.speed_min, 4.0), cfg.speed_max))
    ego_ag = AgentSim(path=ramp, s0=0.0, v0=v_ego, style=_style(rng, cfg, v_ego),
                      corridor="merged", extent=_extent(rng),
                      progress_offset=s_merge_main - s_merge_ramp)
    s_blend0 = ramp.project(np.array([xb0, -cfg.lane_width]))
    ego_ag.s0 = s_blend0 - v_ego * (cfg.history_len * cfg.dt + rng.uniform(0.0, 1.2))
    ego_ag.speed_caps.append((s_blend0 - 5.0, s_merge_ramp + 5.0,
                              float(rng.uniform(5.0, 8.0))))
    agents.append(ego_ag)
    for _ in range(n_ramp - 1):
        v = float(rng.uniform(cfg.speed_min, cfg.speed_max))
        ag = AgentSim(path=ramp, s0=0.0, v0=v, style=_style(rng, cfg, v),
                      corridor="merged", extent=_extent(rng),
                      progress_offset=s_merge_main - s_merge_ramp)
        need = safe_gap(v, ego_ag.v0, ag.style) + 0.5 * (ag.extent[0] + ego_ag.extent[0])
        ag.s0 = ego_ag.s0 - need - rng.uniform(3.0, 12.0)
        agents.append(ag)
    # main cars spread around the ego's merge slot in common progress
    ego_p0 = ego_ag.s0 + ego_ag.progress_offset
    offsets = np.sort(rng.uniform(-45.0, 45.0, size=n_main))[::-1]
    prev = None
    mains = []
    for off in offsets:
        v = float(rng.uniform(cfg.speed_min, cfg.speed_max))
        ag = AgentSim(path=main, s0=0.0, v0=_initial_speed(rng, v),
                      style=_style(rng, cfg, v), corridor="merged",
                      extent=_extent(rng))
        ag.s0 = ego_p0 + off + v_ego * window * 0.4
        if prev is not None:
            limit = prev.s0 - safe_gap(ag.v0, prev.v0, ag.style) - 0.5 * (
                ag.extent[0] + prev.extent[0]) - rng.uniform(1.0, 6.0)
            ag.s0 = min(ag.s0, limit)
        prev = ag
        mains.append(ag)
        agents.append(ag)
    _speed_events(rng, mains, cfg, p_scene=0.45)

    entries = [
        (main, "none", "lane-center"),
        (ramp, "none", "lane-center"),
        (offset_path(main, cfg.lane_width / 2.0), "none", "road-edge"),
        (LanePath(np.stack([np.arange(x0, xb0, 0.5),
                            np.full(len(np.arange(x0, xb0, 0.5)), -cfg.lane_width / 2.0)],
                           axis=1)), "none", "lane-boundary"),
        (offset_path(ramp, -cfg.lane_width / 2.0), "none", "road-edge"),
    ]
    return agents, entries, 0, "merge"


def _build_t_intersection(cfg: GeneratorConfig, rng) -> tuple:
    count = int(rng.integers(max(cfg.agents_min, 2), min(cfg.agents_max, 5) + 1))
    n_main = count - 1
    x_side = 0.0
    radius = float(rng.uniform(5.0, 7.0))
    x1 = 160.0
    main = LanePath(np.stack([np.arange(-140.0, x1 + 0.5, 0.5),
                              np.zeros(len(np.arange(-140.0, x1 + 0.5, 0.5)))], axis=1))
    side = turn_path(x_side, -90.0, radius, x1)
    x_join = x_side + radius
    s_join_side = side.project(np.array([x_join, 0.0]))
    s_join_main = main.project(np.array([x_join, 0.0]))
    s_stop = side.project(np.array([x_side, -radius - 2.5]))

    T = cfg.history_len + cfg.horizon + 1
    agents = []
    v_turn = float(rng.uniform(max(cfg.speed_min, 3.0), min(cfg.speed_max, 9.0)))
    turner = AgentSim(path=side, s0=0.0, v0=v_turn, style=_style(rng, cfg, v_turn),
                      corridor="side", extent=_extent(rng),
                      progress_offset=s_join_main - s_join_side,
                      yield_plan=YieldPlan(s_stop=s_stop,
                                           gap_time=float(rng.uniform(2.8, 4.5)),
                                           join_progress=s_join_side))
    turner.s0 = s_stop - v_turn * (cfg.history_len * cfg.dt + rng.uniform(0.0, 1.0)) \
        - rng.uniform(0.0, 4.0)
    turn_cap = float(np.sqrt(2.0 * radius))
    turner.speed_caps.append((s_stop - 4.0, s_join_side + 4.0, turn_cap))
    agents.append(turner)

    mains = []
    for _ in range(n_main):
        v = float(rng.uniform(cfg.speed_min, cfg.speed_max))
        mains.append(AgentSim(path=main, s0=0.0, v0=_initial_speed(rng, v),
                              style=_style(rng, cfg, v), corridor="main",
                              extent=_extent(rng)))
    if mains:
        gap_t = turner.yield_plan.gap_time
        lead_cross = s_join_main - mains[0].v0 * rng.uniform(0.2 * gap_t, 2.2 * gap_t)
        _place_chain(rng, cfg, mains, lead_cross, T)
    _speed_events(rng, mains, cfg, p_scene=0.4)
    agents.extend(mains)

    half = cfg.lane_width / 2.0
    cross_x = x_side - cfg.lane_width - 1.0
    entries = [
        (main, rng.choice(["none", "green"]), "lane-center"),
        (side, "none", "lane-center"),
        (offset_path(main, half), "none", "road-edge"),
        (np.array([[cross_x, -half - 0.5], [cross_x, half + 0.5]]), "none", "crosswalk"),
        (LanePath(np.stack([np.full(40, x_side - half),
                            np.linspace(-90.0, -half - radius, 40)], axis=1)),
         "none", "road-edge"),
    ]
    return agents, entries, 0, "t_intersection"


_BUILDERS = {"straight": _build_straight, "merge": _build_merge,
             "t_intersection": _build_t_intersection}


# ---------------------------------------------------------------------------
# scenario assembly

def _scan_collisions(states: np.ndarray, extents) -> bool:
    I, T, _ = states.shape
    for t in range(T):
        for i in range(I):
            for j in range(i + 1, I):
                if np.linalg.norm(states[i, t, :2] - states[j, t, :2]) > 8.0:
                    continue
                if states_collide(states[i, t], extents[i], states[j, t], extents[j]):
                    return True
    return False


def generate_scenario(cfg: GeneratorConfig, archetype: str, rng, index: int) -> Scenario:
    if archetype not in _BUILDERS:
        raise InfeasibleConfigError(
            f"unknown archetype {archetype!r}; valid names: {', '.join(ARCHETYPES)}")
    T = cfg.history_len + cfg.horizon + 1
    last_err = None
    for _ in range(cfg.max_attempts):
        agents, entries, ego, label = _BUILDERS[archetype](cfg, rng)
        states = simulate_agents(agents, T, cfg.dt)
        extents = [ag.extent for ag in agents]
        if _scan_collisions(states, extents):
            last_err = "collision between scripted agents"
            continue
        tracks = [AgentTrack(agent_id=i, states=states[i],
                             valid=np.ones(T, dtype=bool), extent=agents[i].extent,
                             agent_type="vehicle")
                  for i in range(len(agents))]
        sc = Scenario(
            scenario_id=f"{label}-{index:05d}", dt=cfg.dt,
            history_len=cfg.history_len, horizon=cfg.horizon, ego_index=ego,
            tracks=tracks, roadgraph=build_roadgraph(entries, cfg), label=label)
        sc = recenter_on_agent(sc, sc.tracks[ego].agent_id)
        sc.validate()
        return sc
    raise InfeasibleConfigError(
        f"could not generate a feasible {archetype!r} scenario after "
        f"{cfg.max_attempts} attempts ({last_err})")


def generate_corpus(cfg: GeneratorConfig, seed: int) -> list[Scenario]:
    cfg.validate()
    rng = np.random.default_rng(seed)
    mix = np.asarray(cfg.mix, dtype=np.float64)
    mix = mix / mix.sum()
    out = []
    for i in range(cfg.num_scenarios):
        archetype = cfg.archetypes[int(rng.choice(len(cfg.archetypes), p=mix))]
        out.append(generate_scenario(cfg, archetype, rng, i))
    return out
