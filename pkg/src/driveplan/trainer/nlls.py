"""Feasibility-restoring trajectory perturbation for the ego track.

The ego state at a random mid-history step gets a lateral offset (up to
1 m) and a heading offset (up to 0.3 rad). A bounded Gauss-Newton-type
least-squares solve over the ego's full action sequence then recovers a
dynamically feasible trajectory that (a) stays close to the perturbed
reference path, pulled hardest at the perturbed anchor, and (b) returns
to the original endpoint. The replacement track is exactly reproducible
through the unicycle step, with all actions inside the input bounds.

The residual Jacobian is assembled analytically from the per-step
linearization of the dynamics (saturated action entries get zero
columns); the box-constrained solve itself is scipy's trust-region
reflective least_squares.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .. import dynamics


@dataclass
class NllsConfig:
    max_lateral: float = 1.0
    max_heading: float = 0.3
    endpoint_weight: float = 10.0
    path_weight: float = 1.0
    anchor_weight: float = 10.0
    max_iterations: int = 60      # solver evaluation budget


_BOUNDS_LO = np.array([dynamics.ACCEL_MIN, dynamics.YAW_MIN])
_BOUNDS_HI = np.array([dynamics.ACCEL_MAX, dynamics.YAW_MAX])


def _step_jacobians(state, action, dt):
    """A = d(next)/d(state), B = d(next)/d(action) of dynamics.step."""
    _, _, c, s, v = state
    alpha, r = action
    dth = dt * r
    cd, sd = np.cos(dth), np.sin(dth)
    c2 = c * cd - s * sd
    s2 = s * cd + c * sd
    # renormalization of an already-unit vector: projection onto its tangent
    Pn = np.array([[s2 * s2, -c2 * s2], [-c2 * s2, c2 * c2]])

    A = np.eye(5)
    A[0, 2] = dt * v
    A[0, 4] = dt * c
    A[1, 3] = dt * v
    A[1, 4] = dt * s
    H = np.array([[cd, -sd], [sd, cd]])
    A[2:4, 2:4] = Pn @ H

    B = np.zeros((5, 2))
    if _BOUNDS_LO[0] < alpha < _BOUNDS_HI[0]:
        B[4, 0] = dt
    if _BOUNDS_LO[1] < r < _BOUNDS_HI[1]:
        dun = np.array([-dt * s2, dt * c2])
        B[2:4, 1] = Pn @ dun
    return A, B


def _rollout_with_jacobian(s0, actions, dt):
    """States (T, 5) and J[t] = d state_t / d actions (flattened) (T, 5, 2M)."""
    M = actions.shape[0]
    states = np.zeros((M + 1, 5))
    J = np.zeros((M + 1, 5, 2 * M))
    states[0] = s0
    for t in range(M):
        a = np.clip(actions[t], _BOUNDS_LO, _BOUNDS_HI)
        A, B = _step_jacobians(states[t], a, dt)
        states[t + 1] = dynamics.step(states[t], actions[t], dt)
        J[t + 1] = A @ J[t]
        J[t + 1][:, 2 * t:2 * t + 2] += B
    return states, J


def perturb_ego_state(state, lateral, dheading):
    out = state.copy()
    c, s = state[2], state[3]
    out[0] += -s * lateral
    out[1] += c * lateral
    cp, sp = np.cos(dheading), np.sin(dheading)
    out[2] = c * cp - s * sp
    out[3] = s * cp + c * sp
    return out


def _residuals(states, refs, anchor_t, anchor_state, cfg: NllsConfig):
    """Weighted residual vector and the (row, state-row, weight) layout."""
    T = states.shape[0]
    rows = []
    layout = []  # (t, state component, sqrt weight)
    for t in range(1, T):
        w = cfg.anchor_weight if t == anchor_t else cfg.path_weight
        sw = np.sqrt(w)
        rows += [sw * (states[t, 0] - refs[t, 0]), sw * (states[t, 1] - refs[t, 1])]
        layout += [(t, 0, sw), (t, 1, sw)]
    sw = np.sqrt(cfg.anchor_weight)
    rows += [sw * (states[anchor_t, 2] - anchor_state[2]),
             sw * (states[anchor_t, 3] - anchor_state[3])]
    layout += [(anchor_t, 2, sw), (anchor_t, 3, sw)]
    sw = np.sqrt(cfg.endpoint_weight)
    rows += [sw * (states[-1, 0] - refs[-1, 0]), sw * (states[-1, 1] - refs[-1, 1])]
    layout += [(T - 1, 0, sw), (T - 1, 1, sw)]
    return np.asarray(rows), layout


def solve_feasible_track(track_states, dt, anchor_t, anchor_state,
                         cfg: NllsConfig) -> tuple[np.ndarray, bool]:
    """Least-squares fit of the action sequence; returns (states, converged)."""
    T = track_states.shape[0]
    actions = np.stack([dynamics.invert_step(track_states[t], track_states[t + 1], dt)
                        for t in range(T - 1)])
    actions = np.clip(actions, _BOUNDS_LO, _BOUNDS_HI)
    refs = track_states[:, :2].copy()
    refs[anchor_t] = anchor_state[:2]
    s0 = track_states[0]

    layout_cache = {}

    def residual_fn(flat):
        states, _ = _rollout_with_jacobian(s0, flat.reshape(-1, 2), dt)
        r, layout = _residuals(states, refs, anchor_t, anchor_state, cfg)
        layout_cache["layout"] = layout
        return r

    def jac_fn(flat):
        _, J = _rollout_with_jacobian(s0, flat.reshape(-1, 2), dt)
        layout = layout_cache["layout"]
        return np.stack([w * J[t, comp] for (t, comp, w) in layout])

    lo = np.tile(_BOUNDS_LO, T - 1)
    hi = np.tile(_BOUNDS_HI, T - 1)
    x0 = np.clip(actions.ravel(), lo + 1e-12, hi - 1e-12)
    result = least_squares(residual_fn, x0, jac=jac_fn, bounds=(lo, hi),
                           method="trf", max_nfev=cfg.max_iterations,
                           xtol=1e-10, ftol=1e-10, gtol=1e-10)
    solved = np.clip(result.x.reshape(-1, 2), _BOUNDS_LO, _BOUNDS_HI)
    states = dynamics.rollout(s0, solved, dt)
    return states, bool(result.status > 0)


def nlls_perturb(scenario, rng, cfg: NllsConfig | None = None):
    """Perturb the ego track; returns (scenario, applied).

    applied is False when the ego track has gaps or the solver failed,
    in which case the input scenario is returned untouched.
    """
    cfg = cfg or NllsConfig()
    ego = scenario.tracks[scenario.ego_index]
    if not ego.valid.all():
        return scenario, False
    anchor_t = int(rng.integers(1, scenario.history_len))
    lateral = float(rng.uniform(-cfg.max_lateral, cfg.max_lateral))
    dheading = float(rng.uniform(-cfg.max_heading, cfg.max_heading))
    anchor_state = perturb_ego_state(ego.states[anchor_t], lateral, dheading)
    new_states, ok = solve_feasible_track(ego.states, scenario.dt, anchor_t,
                                          anchor_state, cfg)
    if not ok:
        return scenario, False
    out = scenario.copy()
    out.tracks[out.ego_index].states = new_states
    return out, True
