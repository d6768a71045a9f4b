"""Planar geometry shared by the generator, planners, and metrics.

Rectangle overlap uses the separating-axis test on the four edge normals
of two oriented boxes. Overlap is strict: boxes that only touch (zero
interior intersection) do not count as colliding.
"""

from __future__ import annotations

import numpy as np


def rect_corners(state: np.ndarray, extent) -> np.ndarray:
    """Corners (4, 2) of an oriented box centered at a dynamics state.

    state is [X, Y, cos, sin, ...]; extent is (length, width) with length
    along the heading.
    """
    x, y, c, s = state[0], state[1], state[2], state[3]
    hl, hw = 0.5 * extent[0], 0.5 * extent[1]
    fwd = np.array([c, s])
    left = np.array([-s, c])
    center = np.array([x, y])
    return np.array([
        center + hl * fwd + hw * left,
        center + hl * fwd - hw * left,
        center - hl * fwd - hw * left,
        center - hl * fwd + hw * left,
    ])


def obb_overlap(corners_a: np.ndarray, corners_b: np.ndarray) -> bool:
    """Strict overlap of two convex quads via the separating-axis test."""
    for corners in (corners_a, corners_b):
        edges = np.roll(corners, -1, axis=0) - corners
        axes = np.stack([-edges[:2, 1], edges[:2, 0]], axis=1)  # 2 unique normals per box
        for ax in axes:
            pa = corners_a @ ax
            pb = corners_b @ ax
            if pa.max() <= pb.min() or pb.max() <= pa.min():
                return False
    return True


def states_collide(state_a, extent_a, state_b, extent_b) -> bool:
    return obb_overlap(rect_corners(np.asarray(state_a, dtype=np.float64), extent_a),
                       rect_corners(np.asarray(state_b, dtype=np.float64), extent_b))


def points_polyline_distance(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Distance from each point to the nearest segment of a polyline.

    points: (..., 2); poly: (Q, 2) with Q >= 1. For Q == 1 this is the
    point distance.
    """
    p = np.asarray(points, dtype=np.float64)
    poly = np.asarray(poly, dtype=np.float64)
    flat = p.reshape(-1, 2)
    if poly.shape[0] == 1:
        d = np.linalg.norm(flat - poly[0], axis=1)
        return d.reshape(p.shape[:-1])
    a = poly[:-1]                      # (Q-1, 2)
    ab = poly[1:] - a                  # (Q-1, 2)
    denom = np.maximum(np.sum(ab * ab, axis=1), 1e-12)
    ap = flat[:, None, :] - a[None, :, :]          # (P, Q-1, 2)
    t = np.clip(np.sum(ap * ab[None, :, :], axis=2) / denom, 0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    d = np.linalg.norm(flat[:, None, :] - closest, axis=2).min(axis=1)
    return d.reshape(p.shape[:-1])


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    out = np.arctan2(np.sin(a), np.cos(a))
    # arctan2 maps pi to pi and -pi to -pi; fold -pi onto pi for the half-open contract
    if np.isscalar(out) or out.ndim == 0:
        return float(np.pi) if out == -np.pi else float(out)
    out[out == -np.pi] = np.pi
    return out
