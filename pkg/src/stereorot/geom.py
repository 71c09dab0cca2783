"""Rotation and sphere geometry helpers.

Vectors are plain ``numpy`` arrays of shape ``(3,)`` (or ``(n, 3)`` for the
vectorised variants); rotations are ``(3, 3)`` arrays. Stereographic
projection is taken from the north pole ``(0, 0, 1)`` onto the equatorial
plane, so the southern hemisphere lands inside the closed unit disk.
"""

from typing import NamedTuple

import numpy as np

from .errors import PoleProximityError

POLE_TOL = 1e-9


class AxisAngle(NamedTuple):
    axis: np.ndarray
    angle: float


def normalize(v):
    """Return ``v / ||v||`` along the last axis."""
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def skew(v):
    """Cross-product matrix ``[v]x`` such that ``skew(v) @ u == cross(v, u)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rodrigues(axis, angle):
    """Rotation matrix for a rotation of ``angle`` radians about unit ``axis``.

    ``R = I + sin(angle) K + (1 - cos(angle)) K @ K`` with ``K = [axis]x``.
    """
    k = skew(np.asarray(axis, dtype=float))
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def rotation_error(r_gt, r_est):
    """Geodesic angle (radians, in ``[0, pi]``) between two rotations."""
    cos_angle = 0.5 * (np.trace(np.asarray(r_gt).T @ np.asarray(r_est)) - 1.0)
    return float(np.arccos(np.clip(cos_angle, -1.0, 1.0)))


def project(p):
    """Stereographic image ``(A, B) = (a, b) / (1 - c)`` of a unit vector."""
    a, b, c = np.asarray(p, dtype=float)
    if c >= 1.0 - POLE_TOL:
        raise PoleProximityError(f"point {tuple(p)} is too close to the pole")
    return np.array([a / (1.0 - c), b / (1.0 - c)])


def project_many(points):
    """Vectorised :func:`project` for an ``(n, 3)`` array; returns ``(n, 2)``."""
    points = np.asarray(points, dtype=float)
    denom = 1.0 - points[:, 2]
    if np.any(denom <= POLE_TOL):
        raise PoleProximityError("at least one point is too close to the pole")
    return points[:, :2] / denom[:, None]


def unproject(q):
    """Inverse stereographic projection of a plane point (or ``(n, 2)`` array)."""
    q = np.asarray(q, dtype=float)
    s = np.sum(q * q, axis=-1, keepdims=True)
    denom = 1.0 + s
    return np.concatenate([2.0 * q / denom, (s - 1.0) / denom], axis=-1)


def canonicalize(p):
    """Flip ``p`` into the southern hemisphere (``c <= 0``).

    A rotation ``(r, theta)`` equals ``(-r, -theta)``, so axes are only
    meaningful up to sign; the southern representative projects into the
    closed unit disk.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim == 1:
        return -p if p[2] > 0 else p.copy()
    return np.where(p[:, 2:3] > 0, -p, p)


def orthonormal_basis(z):
    """Two unit vectors spanning the plane orthogonal to unit ``z``.

    The seed is the coordinate axis least aligned with ``z``; one Gram-Schmidt
    step gives ``alpha1`` and ``alpha2 = alpha1 x z`` completes the frame.
    """
    z = np.asarray(z, dtype=float)
    seed = np.zeros(3)
    seed[np.argmin(np.abs(z))] = 1.0
    alpha1 = seed - np.dot(seed, z) * z
    alpha1 /= np.linalg.norm(alpha1)
    alpha2 = np.cross(alpha1, z)
    alpha2 /= np.linalg.norm(alpha2)
    return alpha1, alpha2


def circle_points(z, thetas):
    """Points ``alpha1 cos(t) + alpha2 sin(t)`` on the great circle orthogonal to ``z``."""
    alpha1, alpha2 = orthonormal_basis(z)
    thetas = np.asarray(thetas, dtype=float)
    return np.outer(np.cos(thetas), alpha1) + np.outer(np.sin(thetas), alpha2)


def axis_angle(rotation):
    """Recover ``(axis, angle)`` from a rotation matrix, with ``angle`` in ``[0, pi]``."""
    rotation = np.asarray(rotation, dtype=float)
    angle = np.arccos(np.clip(0.5 * (np.trace(rotation) - 1.0), -1.0, 1.0))
    if angle < 1e-12:
        return AxisAngle(np.array([0.0, 0.0, -1.0]), 0.0)
    if np.pi - angle < 1e-6:
        # near a half turn the antisymmetric part vanishes; use R + I
        sym = rotation + np.eye(3)
        col = sym[:, np.argmax(np.linalg.norm(sym, axis=0))]
        return AxisAngle(normalize(col), float(angle))
    w = np.array([rotation[2, 1] - rotation[1, 2],
                  rotation[0, 2] - rotation[2, 0],
                  rotation[1, 0] - rotation[0, 1]])
    return AxisAngle(w / (2.0 * np.sin(angle)), float(angle))
