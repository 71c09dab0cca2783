"""Rotation angle about a known axis, by 1D histogram voting."""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateProjectionError, NoVotesError

DEFAULT_BINS = 1024
DEFAULT_DEGENERACY_TOL = 1e-6


@dataclass
class AngleHistogram:
    """Votes over ``(-pi, pi]``; bin ``k`` spans ``(-pi + k w, -pi + (k + 1) w]``.

    ``angles`` keeps the raw signed angles that voted, in input order, so the
    peak can be refined below bin resolution.
    """

    bins: np.ndarray
    angles: np.ndarray
    degenerate: int = 0

    @property
    def bin_count(self):
        return self.bins.shape[0]

    @property
    def bin_width(self):
        return 2.0 * np.pi / self.bin_count

    @property
    def contributing(self):
        return int(self.bins.sum())

    def bin_center(self, k):
        return -np.pi + (k + 0.5) * self.bin_width

    def bin_of(self, angles):
        k = np.ceil((np.asarray(angles) + np.pi) / self.bin_width).astype(np.int64) - 1
        return np.clip(k, 0, self.bin_count - 1)


def wrap_angle(a):
    """Map angles into ``(-pi, pi]``."""
    a = np.asarray(a, dtype=float)
    w = np.mod(a + np.pi, 2.0 * np.pi) - np.pi
    return np.where(w <= -np.pi, w + 2.0 * np.pi, w)


def correspondence_angles(axis, x, y, tol=DEFAULT_DEGENERACY_TOL):
    """Signed rotation angle about ``axis`` taking each ``x`` towards ``y``.

    With ``beta = axis x x`` and ``gamma = axis x y`` the angle is
    ``atan2((beta x gamma) . axis, beta . gamma)``; its magnitude is the
    arccos of the normalised dot product.

    Returns
    -------
    angles : ndarray, shape (n,)
        Angles in ``(-pi, pi]``; NaN where degenerate.
    valid : ndarray of bool
        False where ``x`` or ``y`` is within ``tol`` of parallel to the axis.
    """
    axis = np.asarray(axis, dtype=float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    beta = np.cross(axis, x)
    gamma = np.cross(axis, y)
    nb = np.linalg.norm(beta, axis=1)
    ng = np.linalg.norm(gamma, axis=1)
    valid = (nb > tol) & (ng > tol)
    sin_part = np.cross(beta, gamma) @ axis
    cos_part = np.sum(beta * gamma, axis=1)
    angles = wrap_angle(np.arctan2(sin_part, cos_part))
    angles[~valid] = np.nan
    return angles, valid


def correspondence_angle(axis, x, y, tol=DEFAULT_DEGENERACY_TOL):
    """Scalar version of :func:`correspondence_angles`.

    Raises
    ------
    DegenerateProjectionError
        If ``x`` or ``y`` is parallel to the axis.
    """
    angles, valid = correspondence_angles(axis, x, y, tol)
    if not valid[0]:
        raise DegenerateProjectionError("point is parallel to the rotation axis")
    return float(angles[0])


def vote_angles(axis, x, y, inliers=None, bin_count=DEFAULT_BINS, tol=DEFAULT_DEGENERACY_TOL):
    """Histogram of per-correspondence angles over the ``inliers`` subset.

    Degenerate correspondences are skipped and counted in ``degenerate``.
    """
    if bin_count < 8:
        raise ValueError(f"need at least 8 angle bins, got {bin_count}")
    x = np.asarray(x, dtype=float).reshape(-1, 3)
    y = np.asarray(y, dtype=float).reshape(-1, 3)
    if inliers is not None:
        inliers = np.asarray(inliers, dtype=np.int64)
        x, y = x[inliers], y[inliers]
    if x.shape[0] == 0:
        raise NoVotesError("no correspondences to vote with")
    angles, valid = correspondence_angles(axis, x, y, tol)
    if not valid.any():
        raise NoVotesError("every correspondence is parallel to the axis")
    hist = AngleHistogram(np.zeros(bin_count, dtype=np.int64), angles[valid],
                          degenerate=int((~valid).sum()))
    np.add.at(hist.bins, hist.bin_of(hist.angles), 1)
    return hist


def circular_mean(angles, weights=None):
    angles = np.asarray(angles, dtype=float)
    return float(np.arctan2(np.average(np.sin(angles), weights=weights),
                            np.average(np.cos(angles), weights=weights)))


def peak_angle(hist, refine=True, raw_angles=None):
    """Consensus angle of a histogram.

    Without refinement this is the centre of the fullest bin (lowest index on
    ties). With refinement it is the circular mean of the raw angles falling
    in the peak bin or either neighbour, wrapping across ``+-pi``.
    """
    if hist.contributing == 0:
        raise NoVotesError("empty angle histogram")
    k = int(np.argmax(hist.bins))
    center = hist.bin_center(k)
    if not refine:
        return float(center)
    raw = hist.angles if raw_angles is None else np.asarray(raw_angles, dtype=float)
    near = (hist.bin_of(raw) - k + 1) % hist.bin_count <= 2
    if not near.any():
        return float(center)
    # sorted so the sum does not depend on input order
    return float(wrap_angle(circular_mean(np.sort(raw[near]))))
