"""Evaluation: displacement errors split ego vs non-ego, collision scans,
and corpus-level reports.

Evaluation protocol: scenes are recentered on the ego, history is encoded
with teacher forcing, then every agent rolls forward closed-loop with
deterministic (mean) actions. ADE averages position error over prediction
steps k = 1..H; FDE is the error at the last valid step within the
horizon.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import states_collide
from .policy import BatchedPolicy
from .scene.transforms import recenter_on_agent


class MetricsError(Exception):
    pass


def ade_fde(pred: np.ndarray, truth: np.ndarray, mask=None) -> tuple[float, float]:
    """Average and final displacement error between (T, >=2) trajectories."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape[0] != truth.shape[0]:
        raise MetricsError(f"length mismatch: {pred.shape[0]} vs {truth.shape[0]}")
    if mask is None:
        mask = np.ones(pred.shape[0], dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise MetricsError("no valid steps")
    err = np.linalg.norm(pred[:, :2] - truth[:, :2], axis=1)
    ade = float(err[mask].mean())
    fde = float(err[np.where(mask)[0][-1]])
    return ade, fde


def collision_check(state_a, extent_a, state_b, extent_b) -> bool:
    """Strict oriented-rectangle overlap (separating-axis test)."""
    return states_collide(state_a, extent_a, state_b, extent_b)


def scan_collisions(states: np.ndarray, extents, prune: float = 8.0) -> int:
    """Count colliding (pair, step) events in an (I, T, 5) trajectory set."""
    I, T, _ = states.shape
    hits = 0
    for t in range(T):
        for i in range(I):
            for j in range(i + 1, I):
                if np.linalg.norm(states[i, t, :2] - states[j, t, :2]) > prune:
                    continue
                if states_collide(states[i, t], extents[i], states[j, t], extents[j]):
                    hits += 1
    return hits


def constant_velocity_rollout(scenario, horizon: int) -> np.ndarray:
    """Closed-form extrapolation baseline: straight at the k=0 velocity."""
    s0 = scenario.states_at(scenario.t_of(0))
    out = np.zeros((scenario.num_agents, horizon + 1, 5))
    out[:, 0] = s0
    for k in range(1, horizon + 1):
        out[:, k] = s0
        out[:, k, 0] = s0[:, 0] + scenario.dt * k * s0[:, 4] * s0[:, 2]
        out[:, k, 1] = s0[:, 1] + scenario.dt * k * s0[:, 4] * s0[:, 3]
    return out


@dataclass
class MetricReport:
    ade_e: float
    fde_e: float
    ade_noe: float
    fde_noe: float
    collisions: int
    scenario_count: int
    horizon: int
    rows: list = field(default_factory=list)

    CSV_COLUMNS = ("scenario_id", "ade_ego", "fde_ego", "ade_other",
                   "fde_other", "collisions")

    def to_csv(self) -> str:
        lines = [",".join(self.CSV_COLUMNS)]
        for row in self.rows:
            lines.append(",".join([
                str(row["scenario_id"]),
                f"{row['ade_ego']:.6f}", f"{row['fde_ego']:.6f}",
                _fmt(row["ade_other"]), _fmt(row["fde_other"]),
                str(row["collisions"]),
            ]))
        lines.append(",".join([
            "aggregate", f"{self.ade_e:.6f}", f"{self.fde_e:.6f}",
            f"{self.ade_noe:.6f}", f"{self.fde_noe:.6f}", str(self.collisions),
        ]))
        return "\n".join(lines) + "\n"

    def save(self, path):
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def _fmt(v) -> str:
    return "" if v is None else f"{v:.6f}"


def _evaluate_one(scenario, bp: BatchedPolicy | None, horizon: int,
                  recenter: bool, baseline: bool) -> dict:
    sc = scenario
    if recenter:
        sc = recenter_on_agent(sc, sc.tracks[sc.ego_index].agent_id)
    H = min(horizon, sc.horizon)
    if baseline:
        traj = constant_velocity_rollout(sc, H)
    else:
        traj = bp.simulate(sc, H)[0]
    t0 = sc.t_of(0)
    ego = sc.ego_index
    ades, fdes = [], []
    row = {"scenario_id": sc.scenario_id}
    for i, tr in enumerate(sc.tracks):
        mask = tr.valid[t0 + 1:t0 + H + 1]
        if not mask.any():
            ades.append(None)
            fdes.append(None)
            continue
        a, f = ade_fde(traj[i, 1:H + 1], tr.states[t0 + 1:t0 + H + 1], mask)
        ades.append(a)
        fdes.append(f)
    row["ade_ego"], row["fde_ego"] = ades[ego], fdes[ego]
    others_a = [a for i, a in enumerate(ades) if i != ego and a is not None]
    others_f = [f for i, f in enumerate(fdes) if i != ego and f is not None]
    row["ade_other"] = float(np.mean(others_a)) if others_a else None
    row["fde_other"] = float(np.mean(others_f)) if others_f else None
    row["collisions"] = scan_collisions(traj, [tr.extent for tr in sc.tracks])
    return row


def evaluate_corpus(corpus, store=None, policy_cfg=None, horizon: int | None = None,
                    recenter: bool = True, baseline: bool = False,
                    threads: int = 1) -> MetricReport:
    """Deterministic closed-loop evaluation over a scenario list.

    With baseline=True the policy is replaced by the constant-velocity
    extrapolator (store/config unused).
    """
    if not corpus:
        raise MetricsError("empty corpus")
    H = horizon if horizon is not None else corpus[0].horizon
    bp = None
    if not baseline:
        if store is None or policy_cfg is None:
            raise MetricsError("trained parameters required unless baseline=True")
        bp = BatchedPolicy(store, policy_cfg)

    def work(sc):
        return _evaluate_one(sc, bp, H, recenter, baseline)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(work, corpus))
    else:
        rows = [work(sc) for sc in corpus]

    def agg(key):
        vals = [r[key] for r in rows if r[key] is not None]
        return float(np.mean(vals)) if vals else float("nan")

    return MetricReport(
        ade_e=agg("ade_ego"), fde_e=agg("fde_ego"),
        ade_noe=agg("ade_other"), fde_noe=agg("fde_other"),
        collisions=int(sum(1 for r in rows if r["collisions"] > 0)),
        scenario_count=len(rows), horizon=H, rows=rows)
