"""Rigid SE(2) transforms of whole scenarios."""

from __future__ import annotations

import numpy as np

from .types import Scenario, ValidationError


def _rot(dphi: float) -> np.ndarray:
    c, s = np.cos(dphi), np.sin(dphi)
    return np.array([[c, -s], [s, c]])


def transform_scene(sc: Scenario, dx: float, dy: float, dphi: float) -> Scenario:
    """Apply p' = R(dphi) p + (dx, dy) to every position; rotate headings.

    Padded roadgraph entries stay exactly zero; velocities are invariant.
    """
    out = sc.copy()
    R = _rot(dphi)
    t = np.array([dx, dy])
    for tr in out.tracks:
        v = tr.valid
        tr.states[v, 0:2] = tr.states[v, 0:2] @ R.T + t
        tr.states[v, 2:4] = tr.states[v, 2:4] @ R.T
    rg = out.roadgraph
    m = rg.mask
    rg.features[m, 0:2] = rg.features[m, 0:2] @ R.T + t
    rg.features[m, 2:4] = rg.features[m, 2:4] @ R.T
    return out


def inverse_transform(dx: float, dy: float, dphi: float) -> tuple[float, float, float]:
    R = _rot(-dphi)
    it = -(R @ np.array([dx, dy]))
    return float(it[0]), float(it[1]), -dphi


def recenter_on_agent(sc: Scenario, agent_id: int) -> Scenario:
    """Place the chosen agent at the origin heading +x at step k = 0."""
    track = None
    for tr in sc.tracks:
        if tr.agent_id == agent_id:
            track = tr
            break
    if track is None:
        raise ValidationError(f"no agent with id {agent_id}")
    t0 = sc.t_of(0)
    if not track.valid[t0]:
        raise ValidationError(f"agent {agent_id} is not valid at step 0")
    x, y, c, s = track.states[t0, 0], track.states[t0, 1], track.states[t0, 2], track.states[t0, 3]
    phi = np.arctan2(s, c)
    # inverse pose: rotate by -phi, then translate the rotated origin point away
    R = _rot(-phi)
    off = -(R @ np.array([x, y]))
    return transform_scene(sc, float(off[0]), float(off[1]), -float(phi))
