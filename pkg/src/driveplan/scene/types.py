"""Scenario data model: agents, tracks, and the polyline road graph.

Time base: every track spans T = history_len + horizon + 1 steps. The
array index t runs 0..T-1; the step index k = t - history_len runs
-K..N, with k = 0 the prediction start.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

TL_STATES = ("none", "green", "yellow", "red")
POLYLINE_CLASSES = ("lane-center", "lane-boundary", "road-edge",
                    "crosswalk", "double-yellow", "other")
AGENT_TYPES = ("vehicle", "pedestrian", "cyclist")

ROADPOINT_DIM = 14  # x, y, ux, uy, light one-hot (4), class one-hot (6)


class ValidationError(Exception):
    """A scenario violates the schema or a structural invariant."""


def light_onehot(name: str) -> np.ndarray:
    v = np.zeros(len(TL_STATES))
    v[TL_STATES.index(name)] = 1.0
    return v


def class_onehot(name: str) -> np.ndarray:
    v = np.zeros(len(POLYLINE_CLASSES))
    v[POLYLINE_CLASSES.index(name)] = 1.0
    return v


def type_onehot(name: str) -> np.ndarray:
    v = np.zeros(len(AGENT_TYPES))
    v[AGENT_TYPES.index(name)] = 1.0
    return v


@dataclass
class RoadGraph:
    """L polylines padded to P points each, with a validity mask.

    features: (L, P, 14) float64, rows ordered [x, y, ux, uy, t(4), q(6)];
    mask: (L, P) bool, padded entries False and zero-valued.
    """

    features: np.ndarray
    mask: np.ndarray

    @property
    def num_polylines(self) -> int:
        return self.features.shape[0]

    @property
    def pad_points(self) -> int:
        return self.features.shape[1] if self.features.ndim == 3 else 0

    def copy(self) -> "RoadGraph":
        return RoadGraph(self.features.copy(), self.mask.copy())

    @staticmethod
    def empty(pad_points: int = 20) -> "RoadGraph":
        return RoadGraph(np.zeros((0, pad_points, ROADPOINT_DIM)),
                         np.zeros((0, pad_points), dtype=bool))

    @staticmethod
    def from_polylines(polylines, pad_points: int = 20) -> "RoadGraph":
        """Build from (xy (n,2), light, cls) triples, one per polyline.

        Unit directions point at the next polyline point; the last point of
        each polyline carries a zero direction. Polylines longer than
        pad_points must be split by the caller.
        """
        L = len(polylines)
        feats = np.zeros((L, pad_points, ROADPOINT_DIM))
        mask = np.zeros((L, pad_points), dtype=bool)
        for li, (xy, light, cls) in enumerate(polylines):
            xy = np.asarray(xy, dtype=np.float64)
            n = xy.shape[0]
            if n < 1:
                raise ValidationError(f"polyline {li} has no points")
            if n > pad_points:
                raise ValidationError(
                    f"polyline {li} has {n} points, exceeds padding {pad_points}")
            d = np.zeros((n, 2))
            if n > 1:
                seg = xy[1:] - xy[:-1]
                norm = np.linalg.norm(seg, axis=1, keepdims=True)
                norm[norm == 0.0] = 1.0
                d[:-1] = seg / norm
            feats[li, :n, 0:2] = xy
            feats[li, :n, 2:4] = d
            feats[li, :n, 4:8] = light_onehot(light)
            feats[li, :n, 8:14] = class_onehot(cls)
            mask[li, :n] = True
        return RoadGraph(feats, mask)

    def validate(self):
        if self.features.ndim != 3 or self.features.shape[2] != ROADPOINT_DIM:
            raise ValidationError(f"roadgraph features shape {self.features.shape}")
        if self.mask.shape != self.features.shape[:2]:
            raise ValidationError("roadgraph mask shape mismatch")
        for li in range(self.num_polylines):
            m = self.mask[li]
            if not m.any():
                raise ValidationError(f"polyline {li} has no valid points")
            pad = self.features[li][~m]
            if pad.size and np.any(pad != 0.0):
                raise ValidationError(f"polyline {li} has nonzero padded entries")
            pts = self.features[li][m]
            dirs = pts[:, 2:4]
            norms = np.linalg.norm(dirs, axis=1)
            if not np.all((np.abs(norms - 1.0) < 1e-6) | (norms < 1e-12)):
                raise ValidationError(f"polyline {li} has non-unit direction vectors")
            for block, width in ((pts[:, 4:8], 4), (pts[:, 8:14], 6)):
                if not np.all(np.isin(block, (0.0, 1.0))) or not np.all(block.sum(axis=1) == 1.0):
                    raise ValidationError(f"polyline {li} has malformed one-hot features")


@dataclass
class AgentTrack:
    agent_id: int
    states: np.ndarray               # (T, 5): X, Y, cos, sin, v
    valid: np.ndarray                # (T,) bool
    extent: tuple[float, float]      # length, width in meters
    agent_type: str = "vehicle"

    def copy(self) -> "AgentTrack":
        return AgentTrack(self.agent_id, self.states.copy(), self.valid.copy(),
                          tuple(self.extent), self.agent_type)


@dataclass
class Scenario:
    scenario_id: str
    dt: float
    history_len: int
    horizon: int
    ego_index: int
    tracks: list[AgentTrack]
    roadgraph: RoadGraph
    label: str = ""

    @property
    def num_agents(self) -> int:
        return len(self.tracks)

    @property
    def num_steps(self) -> int:
        return self.history_len + self.horizon + 1

    def t_of(self, k: int) -> int:
        """Array index for step k in [-K, N]."""
        return k + self.history_len

    def states_at(self, t: int) -> np.ndarray:
        return np.stack([tr.states[t] for tr in self.tracks])

    def valid_at(self, t: int) -> np.ndarray:
        return np.array([tr.valid[t] for tr in self.tracks])

    def all_states(self) -> np.ndarray:
        """(I, T, 5) stacked track states."""
        return np.stack([tr.states for tr in self.tracks])

    def all_valid(self) -> np.ndarray:
        return np.stack([tr.valid for tr in self.tracks])

    def metadata(self) -> np.ndarray:
        """(I, 5) per-agent extent + type one-hot, policy node metadata."""
        rows = []
        for tr in self.tracks:
            rows.append(np.concatenate([np.asarray(tr.extent, dtype=np.float64),
                                        type_onehot(tr.agent_type)]))
        return np.stack(rows)

    def copy(self) -> "Scenario":
        return replace(self, tracks=[tr.copy() for tr in self.tracks],
                       roadgraph=self.roadgraph.copy())

    def validate(self):
        if self.dt <= 0.0:
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if self.history_len < 1 or self.horizon < 1:
            raise ValidationError("history_len and horizon must both be >= 1")
        if not self.tracks:
            raise ValidationError("scenario has no agents")
        if not (0 <= self.ego_index < len(self.tracks)):
            raise ValidationError(f"ego_index {self.ego_index} out of range")
        T = self.num_steps
        ids = set()
        for i, tr in enumerate(self.tracks):
            if tr.agent_id in ids:
                raise ValidationError(f"duplicate agent id {tr.agent_id}")
            ids.add(tr.agent_id)
            if tr.states.shape != (T, 5):
                raise ValidationError(
                    f"track {i} states shape {tr.states.shape}, expected {(T, 5)}")
            if tr.valid.shape != (T,):
                raise ValidationError(f"track {i} valid mask shape {tr.valid.shape}")
            if tr.agent_type not in AGENT_TYPES:
                raise ValidationError(f"track {i} has unknown type {tr.agent_type!r}")
            if tr.extent[0] <= 0.0 or tr.extent[1] <= 0.0:
                raise ValidationError(f"track {i} has non-positive extent {tr.extent}")
            if not np.all(np.isfinite(tr.states[tr.valid])):
                raise ValidationError(f"track {i} has non-finite valid states")
            idx = np.where(tr.valid)[0]
            if idx.size == 0:
                raise ValidationError(f"track {i} has no valid steps")
            if not np.array_equal(idx, np.arange(idx[0], idx[-1] + 1)):
                raise ValidationError(f"track {i} valid steps are not contiguous")
            heads = tr.states[tr.valid][:, 2:4]
            if np.max(np.abs(np.linalg.norm(heads, axis=1) - 1.0)) > 1e-6:
                raise ValidationError(f"track {i} heading off the unit circle")
        ego = self.tracks[self.ego_index]
        if not np.all(ego.valid[:self.history_len + 1]):
            raise ValidationError("ego must be valid over the full history")
        self.roadgraph.validate()
