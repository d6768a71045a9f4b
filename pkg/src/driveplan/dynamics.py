"""Discrete-time unicycle dynamics with hard input saturation.

State layout (always 5 columns): [X, Y, cos_phi, sin_phi, v].
Action layout (2 columns): [accel, yaw_rate], saturated to
accel in [-5, 5] m/s^2 and yaw_rate in [-1, 1] rad/s before integration.

An Euler forward step integrates X, Y with the *current* velocity and
heading; the heading advances by dt * yaw_rate and is re-expressed as a
(cos, sin) pair, renormalized so the representation never drifts off the
unit circle. Saturation is active both in inference and in training
gradients: the clamp contributes zero gradient outside its bounds.

Two equivalent implementations are provided: a vectorized ndarray path
(planning, scripted generation, feasibility checks) and a tape path built
from diffcore ops (training rollouts). Their outputs agree to machine
precision and a test pins that.
"""

from __future__ import annotations

import numpy as np

from . import diffcore as dc

ACCEL_MIN, ACCEL_MAX = -5.0, 5.0
YAW_MIN, YAW_MAX = -1.0, 1.0
DEFAULT_DT = 0.1

STATE_DIM = 5
ACTION_DIM = 2


class DynamicsError(Exception):
    pass


def clamp_action(action: np.ndarray) -> np.ndarray:
    """Saturate (..., 2) actions to the physical input bounds."""
    a = np.asarray(action, dtype=np.float64).copy()
    a[..., 0] = np.clip(a[..., 0], ACCEL_MIN, ACCEL_MAX)
    a[..., 1] = np.clip(a[..., 1], YAW_MIN, YAW_MAX)
    return a


def step(state: np.ndarray, action: np.ndarray, dt: float = DEFAULT_DT) -> np.ndarray:
    """One Euler step for (..., 5) states and (..., 2) actions."""
    s = np.asarray(state, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise DynamicsError("non-finite input state")
    if dt <= 0.0:
        raise DynamicsError(f"dt must be positive, got {dt}")
    a = clamp_action(action)
    x, y, c, si, v = (s[..., i] for i in range(5))
    alpha, r = a[..., 0], a[..., 1]

    dth = dt * r
    cd, sd = np.cos(dth), np.sin(dth)
    c2 = c * cd - si * sd
    s2 = si * cd + c * sd
    norm = np.sqrt(c2 * c2 + s2 * s2)
    out = np.empty_like(s)
    out[..., 0] = x + dt * v * c
    out[..., 1] = y + dt * v * si
    out[..., 2] = c2 / norm
    out[..., 3] = s2 / norm
    out[..., 4] = v + dt * alpha
    return out


def rollout(state0: np.ndarray, actions: np.ndarray, dt: float = DEFAULT_DT) -> np.ndarray:
    """Iterate `step` over an (N, ..., 2) action sequence.

    Returns (N+1, ..., 5) including the initial state.
    """
    actions = np.asarray(actions, dtype=np.float64)
    if actions.shape[0] == 0:
        raise DynamicsError("empty action sequence")
    out = np.empty((actions.shape[0] + 1,) + np.shape(state0), dtype=np.float64)
    out[0] = state0
    for k in range(actions.shape[0]):
        out[k + 1] = step(out[k], actions[k], dt)
    return out


def step_tensor(state: dc.Tensor, action: dc.Tensor, dt: float = DEFAULT_DT) -> dc.Tensor:
    """Tape version of `step` for (I, 5) states and (I, 2) actions.

    Fused kernel: value identical to `step`; the backward applies the
    per-agent chain rule of the Euler update including the heading
    renormalization, with zero gradient through saturated action entries.
    """
    if dt <= 0.0:
        raise DynamicsError(f"dt must be positive, got {dt}")
    sd_in = state.data
    if not np.all(np.isfinite(sd_in)):
        raise DynamicsError("non-finite input state")
    out = step(sd_in, action.data, dt)

    c, s, v = sd_in[:, 2], sd_in[:, 3], sd_in[:, 4]
    alpha_raw, r_raw = action.data[:, 0], action.data[:, 1]
    a_pass = (alpha_raw > ACCEL_MIN) & (alpha_raw < ACCEL_MAX)
    r_pass = (r_raw > YAW_MIN) & (r_raw < YAW_MAX)
    r_cl = np.clip(r_raw, YAW_MIN, YAW_MAX)
    dth = dt * r_cl
    cd, sdth = np.cos(dth), np.sin(dth)
    u1 = c * cd - s * sdth            # pre-normalization heading
    u2 = s * cd + c * sdth
    n = np.sqrt(u1 * u1 + u2 * u2)
    y1, y2 = u1 / n, u2 / n

    def bwd(g):
        gx, gy, gy1, gy2, gv = (g[:, i] for i in range(5))
        # through y = u / |u|: (I - y y^T) / n
        gu1 = ((1.0 - y1 * y1) * gy1 - y1 * y2 * gy2) / n
        gu2 = (-y1 * y2 * gy1 + (1.0 - y2 * y2) * gy2) / n
        gs_ = np.empty_like(g)
        gs_[:, 0] = gx
        gs_[:, 1] = gy
        gs_[:, 2] = cd * gu1 + sdth * gu2 + dt * v * gx
        gs_[:, 3] = -sdth * gu1 + cd * gu2 + dt * v * gy
        gs_[:, 4] = gv + dt * c * gx + dt * s * gy
        ga = np.empty_like(action.data)
        ga[:, 0] = dt * gv * a_pass
        gtheta = -u2 * gu1 + u1 * gu2
        ga[:, 1] = dt * gtheta * r_pass
        return gs_, ga

    return dc.custom_op(out, (state, action), bwd, "unicycle_step")


def invert_step(state: np.ndarray, next_state: np.ndarray, dt: float = DEFAULT_DT) -> np.ndarray:
    """Recover the action that maps state -> next_state under `step`.

    Used as the feasibility oracle for recorded tracks: the recovered
    action must be in bounds and must reproduce next_state.
    """
    s = np.asarray(state, dtype=np.float64)
    sn = np.asarray(next_state, dtype=np.float64)
    phi0 = np.arctan2(s[..., 3], s[..., 2])
    phi1 = np.arctan2(sn[..., 3], sn[..., 2])
    dphi = np.arctan2(np.sin(phi1 - phi0), np.cos(phi1 - phi0))
    alpha = (sn[..., 4] - s[..., 4]) / dt
    r = dphi / dt
    return np.stack([alpha, r], axis=-1)


def reproduces(state: np.ndarray, next_state: np.ndarray, dt: float = DEFAULT_DT,
               atol: float = 1e-8) -> bool:
    """True when some in-bounds action maps state to next_state exactly."""
    a = invert_step(state, next_state, dt)
    if np.any(a[..., 0] < ACCEL_MIN - 1e-9) or np.any(a[..., 0] > ACCEL_MAX + 1e-9):
        return False
    if np.any(a[..., 1] < YAW_MIN - 1e-9) or np.any(a[..., 1] > YAW_MAX + 1e-9):
        return False
    return bool(np.allclose(step(state, a, dt), next_state, atol=atol, rtol=0.0))
