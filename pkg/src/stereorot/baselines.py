"""Comparison methods and an exhaustive consensus oracle."""

import time
from dataclasses import dataclass

import numpy as np

from .angles import correspondence_angles, wrap_angle
from .errors import InvalidConfigError, NoConsensusError
from .estimator import RotationEstimate, _as_points, _unit_rows, preprocess, refine_axis
from .geom import canonicalize, rodrigues


@dataclass(frozen=True)
class OracleConfig:
    directions: int = 10_000
    epsilon: float = 0.015

    def __post_init__(self):
        if self.directions < 100:
            raise InvalidConfigError("oracle needs at least 100 directions")

    @property
    def spacing(self):
        """Typical angular gap (radians) between neighbouring directions."""
        return float(np.sqrt(2.0 * np.pi / self.directions))


def least_squares_axis(constraints):
    """Plain least-squares axis over all constraints, outliers included."""
    return refine_axis(constraints)


def hemisphere_directions(m):
    """``m`` near-uniform unit vectors with ``c <= 0`` on a Fibonacci spiral.

    Heights run evenly from the south pole (index 0, exactly ``(0, 0, -1)``)
    to the equator.
    """
    k = np.arange(m)
    c = -1.0 + k / (m - 1)
    rad = np.sqrt(np.clip(1.0 - c * c, 0.0, None))
    phi = k * np.pi * (3.0 - np.sqrt(5.0))
    return np.column_stack([rad * np.cos(phi), rad * np.sin(phi), c])


def consensus_counts(directions, constraints, epsilon, chunk=1024):
    """Number of constraints with ``|d . z| < epsilon`` for every direction ``d``."""
    constraints = np.asarray(constraints, dtype=float).reshape(-1, 3)
    counts = np.empty(len(directions), dtype=np.int64)
    for s in range(0, len(directions), chunk):
        dots = directions[s:s + chunk] @ constraints.T
        counts[s:s + chunk] = np.count_nonzero(np.abs(dots) < epsilon, axis=1)
    return counts


def grid_oracle_axis(constraints, cfg=None):
    """Brute-force consensus maximiser over a fixed hemisphere layout.

    Returns ``(axis, count)``; ties resolve to the lowest direction index.
    """
    cfg = cfg or OracleConfig()
    constraints = np.asarray(constraints, dtype=float).reshape(-1, 3)
    if constraints.shape[0] == 0:
        raise ValueError("oracle needs at least one constraint")
    dirs = hemisphere_directions(cfg.directions)
    counts = consensus_counts(dirs, constraints, cfg.epsilon)
    best = int(np.argmax(counts))
    return dirs[best], int(counts[best])


def _cross(a, b):
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


def ransac_rotation(x, y, iterations=1000, epsilon=0.015, seed=0, *,
                    indices=None, degeneracy_tol=1e-8, angle_tol=1e-6, normalize=True,
                    max_draws=None, angle_agree=np.radians(5.0)):
    """Two-point RANSAC on the axis constraint.

    Each hypothesis takes the axis ``z_1 x z_2`` from two random constraint
    directions and its angle from the first sampled pair; it is scored by
    the number of constraints with ``|r . z| < epsilon``. Samples with
    parallel directions, or whose point lies on the axis, are redrawn and do
    not count as iterations. A hypothesis whose two sampled pairs disagree on
    the angle by more than ``angle_agree`` cannot become the best one, since
    the axis alone does not tell an inlier pair from an outlier.

    Parameters
    ----------
    indices : array_like of int, optional
        Restrict the search to these rows (used by sequential extraction).

    Raises
    ------
    NoConsensusError
        If no hypothesis reaches a consensus of two.
    """
    t0 = time.perf_counter()
    x, y = _as_points(x, y)
    if normalize:
        x, _ = _unit_rows(x)
        y, _ = _unit_rows(y)
    rows = np.arange(x.shape[0]) if indices is None else np.asarray(indices, dtype=np.int64)
    if rows.size < 2:
        raise NoConsensusError("need at least two correspondences")
    z, kept = preprocess(x[rows], y[rows], degeneracy_tol, normalize=False)
    kept = rows[kept]
    if z.shape[0] < 2:
        raise NoConsensusError("need at least two non-degenerate correspondences")
    rng = np.random.default_rng(seed)
    max_draws = max_draws or 20 * iterations
    best = (-1, None, None)
    done = draws = 0
    while done < iterations and draws < max_draws:
        draws += 1
        i, j = rng.choice(z.shape[0], size=2, replace=False)
        axis = _cross(z[i], z[j])
        norm = np.sqrt(axis @ axis)
        if norm < 1e-9:
            continue
        axis = canonicalize(axis / norm)
        bx, by = _cross(axis, x[kept[i]]), _cross(axis, y[kept[i]])
        if bx @ bx <= angle_tol ** 2 or by @ by <= angle_tol ** 2:
            continue
        done += 1
        score = int(np.count_nonzero(np.abs(z @ axis) < epsilon))
        if score > best[0]:
            pairs = kept[[i, j]]
            angles, _ = correspondence_angles(axis, x[pairs], y[pairs], angle_tol)
            # NaN from a degenerate second pair fails the comparison
            if abs(wrap_angle(angles[0] - angles[1])) <= angle_agree:
                best = (score, axis, float(angles[0]))
    score, axis, angle = best
    if score < 2:
        raise NoConsensusError(f"best consensus {max(score, 0)} < 2")
    inliers = kept[np.abs(z @ axis) < epsilon]
    return RotationEstimate(axis, angle, rodrigues(axis, angle), inliers, score,
                            time.perf_counter() - t0)


def sequential_ransac_multi(x, y, models=2, iterations=1000, epsilon=0.015, seed=0,
                            min_consensus_frac=0.05, **kwargs):
    """Fit up to ``models`` rotations one at a time, removing each one's inliers.

    Extraction stops early when a model's consensus falls below
    ``max(2, min_consensus_frac * n)`` or RANSAC finds nothing. Model ``k``
    uses seed ``seed + k``.
    """
    if models < 1:
        raise InvalidConfigError("models must be at least 1")
    t0 = time.perf_counter()
    x, y = _as_points(x, y)
    n = x.shape[0]
    floor = max(2, int(np.ceil(min_consensus_frac * n)))
    remaining = np.arange(n)
    found = []
    for k in range(models):
        try:
            est = ransac_rotation(x, y, iterations, epsilon, seed + k, indices=remaining, **kwargs)
        except NoConsensusError:
            break
        if est.axis_votes < floor:
            break
        found.append(est)
        remaining = np.setdiff1d(remaining, est.inliers, assume_unique=True)
    elapsed = time.perf_counter() - t0
    for est in found:
        est.elapsed = elapsed
    return found
