"""Axis-then-angle rotation estimation from corrupted correspondences.

For an inlier pair ``y = R x`` the rotation axis ``r`` satisfies
``r . (y - x) = 0``, so each pair restricts ``r`` to a great circle. The axis
is found as the most-crossed cell of a stereographic vote grid, inliers are
the pairs whose constraint direction is within ``epsilon`` of orthogonal to
it, and the angle comes from a histogram of per-pair angles about the axis.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from . import voting
from .angles import DEFAULT_BINS, DEFAULT_DEGENERACY_TOL, peak_angle, vote_angles
from .errors import (
    AllDegenerateError,
    EmptyInputError,
    NoPeakError,
    InvalidConfigError,
    NoVotesError,
    RankDeficientError,
)
from .geom import canonicalize, rodrigues, rotation_error


@dataclass(frozen=True)
class EstimatorConfig:
    """Tuning knobs; defaults suit unit-scale data with noise around 0.01.

    Attributes
    ----------
    grid, extent, samples
        Accumulator resolution ``G``, plane half-width ``E`` and samples per
        constraint circle ``J``.
    epsilon
        Inlier threshold on ``|r . z|``.
    angle_bins
        Angle histogram resolution over ``(-pi, pi]``.
    max_models
        Upper bound on rotations returned by :func:`estimate_multi`.
    min_votes_frac, min_votes_sigma
        A model peak in :func:`estimate_multi` needs at least
        ``max(16, frac * n * J / G)`` votes and must stand ``sigma`` standard
        deviations above the random-circle background of its cell.
    suppression_radius
        Non-maximum suppression radius, in cells.
    verify_peaks
        :func:`estimate_single` fits this many of the strongest peaks by
        votes, and as many by significance over the background, then keeps
        the one with the most inliers; ``1`` trusts the top-voted peak.
    min_separation_deg
        :func:`estimate_multi` drops a model closer than this (geodesic
        degrees) to a stronger one.
    degeneracy_tol
        Pairs with ``||y - x||`` below this constrain nothing and are dropped.
    angle_tol
        Points closer than this to the axis get no angle vote.
    refine
        Least-squares axis polish over inliers plus circular-mean angle.
    refine_rounds
        Re-classification passes during axis refinement.
    normalize
        Scale every input point to unit length before differencing.
    identity_fraction
        If at least this fraction of pairs is degenerate, report the identity.
    small_motion_chord
        Pairs with ``||y - x||`` below this (on unit vectors) may belong to a
        near-identity rotation, whose axis the vote grid cannot resolve under
        noise; such a cluster is fitted directly. ``0`` disables the check.
    threads
        Voting thread budget (``None``: ``STEREOROT_THREADS`` or all cores).
    """

    grid: int = voting.DEFAULT_GRID
    extent: float = voting.DEFAULT_EXTENT
    samples: int = voting.DEFAULT_SAMPLES
    epsilon: float = 0.015
    angle_bins: int = DEFAULT_BINS
    max_models: int = 3
    min_votes_frac: float = 0.01
    min_votes_sigma: float = 10.0
    suppression_radius: int = voting.DEFAULT_SUPPRESSION
    min_separation_deg: float = 3.0
    verify_peaks: int = 4
    degeneracy_tol: float = 1e-8
    angle_tol: float = DEFAULT_DEGENERACY_TOL
    refine: bool = True
    refine_rounds: int = 3
    normalize: bool = True
    identity_fraction: float = 0.9
    small_motion_chord: float = 0.1
    threads: int | None = None

    def __post_init__(self):
        if self.epsilon <= 0 or self.degeneracy_tol <= 0:
            raise InvalidConfigError("epsilon and degeneracy_tol must be positive")
        if self.max_models < 1 or self.verify_peaks < 1:
            raise InvalidConfigError("max_models and verify_peaks must be at least 1")
        if self.grid < 64 or self.extent <= 1.0:
            raise InvalidConfigError("need grid >= 64 and extent > 1")
        if self.samples < 8 or self.angle_bins < 8:
            raise InvalidConfigError("need samples >= 8 and angle_bins >= 8")


@dataclass
class RotationEstimate:
    axis: np.ndarray
    angle: float
    rotation: np.ndarray
    inliers: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    axis_votes: int = 0
    elapsed: float = 0.0

    @property
    def inlier_count(self):
        return int(len(self.inliers))


def _as_points(x, y):
    x = np.asarray(x, dtype=float).reshape(-1, 3)
    y = np.asarray(y, dtype=float).reshape(-1, 3)
    if x.shape != y.shape:
        raise ValueError(f"x and y differ in shape: {x.shape} vs {y.shape}")
    if x.shape[0] == 0:
        raise EmptyInputError("no correspondences given")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("correspondences must be finite")
    return x, y


def _unit_rows(v):
    norms = np.linalg.norm(v, axis=1)
    out = np.zeros_like(v)
    ok = norms > 0
    out[ok] = v[ok] / norms[ok, None]
    return out, ok


def preprocess(x, y, tol=1e-8, normalize=True):
    """Constraint directions ``z_i = (y_i - x_i) / ||y_i - x_i||``.

    Pairs with ``||y_i - x_i|| < tol`` are dropped (any axis fits them).

    Returns
    -------
    constraints : ndarray, shape (k, 3)
    kept : ndarray of int, shape (k,)
        Index of the source correspondence of each constraint.

    Raises
    ------
    AllDegenerateError
        If every pair is dropped.
    """
    x, y = _as_points(x, y)
    ok = np.ones(x.shape[0], dtype=bool)
    if normalize:
        x, okx = _unit_rows(x)
        y, oky = _unit_rows(y)
        ok = okx & oky
    d = y - x
    length = np.linalg.norm(d, axis=1)
    keep = ok & (length >= tol)
    kept = np.flatnonzero(keep)
    if kept.size == 0:
        raise AllDegenerateError("every correspondence has x == y")
    return d[kept] / length[kept, None], kept


def classify_inliers(axis, constraints, epsilon):
    """Indices ``i`` with ``|axis . z_i| < epsilon`` (strict)."""
    constraints = np.asarray(constraints, dtype=float).reshape(-1, 3)
    return np.flatnonzero(np.abs(constraints @ np.asarray(axis, dtype=float)) < epsilon)


def refine_axis(constraints):
    """Unit ``r`` minimising ``sum (z_i . r)^2``, in the southern hemisphere.

    This is the eigenvector of the scatter matrix ``sum z_i z_i^T`` with the
    smallest eigenvalue.

    Raises
    ------
    RankDeficientError
        If the constraints span fewer than two directions.
    """
    z = np.asarray(constraints, dtype=float).reshape(-1, 3)
    if z.shape[0] < 2:
        raise RankDeficientError("need at least two constraints")
    # canonical row order makes the float sum independent of input order
    z = z[np.lexsort(z.T[::-1])]
    w, v = np.linalg.eigh(z.T @ z)
    if w[1] <= 1e-12 * max(w[2], np.finfo(float).tiny):
        raise RankDeficientError("constraints span fewer than two directions")
    return canonicalize(v[:, 0])


def vote_axes(constraints, cfg):
    return voting.accumulate(constraints, cfg.grid, cfg.extent, cfg.samples, cfg.threads)


def _identity_estimate(inliers, t0):
    return RotationEstimate(np.array([0.0, 0.0, -1.0]), 0.0, np.eye(3),
                            np.asarray(inliers, dtype=np.int64), 0, time.perf_counter() - t0)


def _prepare(x, y, cfg, t0):
    """Shared front end; returns ``(xn, yn, constraints, kept)`` or an identity estimate."""
    x, y = _as_points(x, y)
    n = x.shape[0]
    try:
        constraints, kept = preprocess(x, y, cfg.degeneracy_tol, cfg.normalize)
    except AllDegenerateError:
        if cfg.identity_fraction <= 1.0:
            return _identity_estimate(np.arange(n), t0)
        raise
    if n - kept.size >= cfg.identity_fraction * n:
        dropped = np.setdiff1d(np.arange(n), kept)
        return _identity_estimate(dropped, t0)
    if cfg.normalize:
        x, _ = _unit_rows(x)
        y, _ = _unit_rows(y)
    return x, y, constraints, kept


def _fit_model(axis, votes, x, y, constraints, kept, cfg):
    axis = canonicalize(axis)
    inl = classify_inliers(axis, constraints, cfg.epsilon)
    if cfg.refine:
        for _ in range(cfg.refine_rounds):
            try:
                new_axis = refine_axis(constraints[inl])
            except RankDeficientError:
                break
            new_inl = classify_inliers(new_axis, constraints, cfg.epsilon)
            if new_inl.size < 2:
                break
            stable = np.array_equal(new_inl, inl)
            axis, inl = new_axis, new_inl
            if stable:
                break
    hist = vote_angles(axis, x, y, kept[inl], cfg.angle_bins, cfg.angle_tol)
    angle = peak_angle(hist, refine=cfg.refine)
    return RotationEstimate(axis, angle, rodrigues(axis, angle), kept[inl], int(votes))


def _small_motion_model(x, y, constraints, kept, cfg, floor_frac):
    """Near-identity rotation fitted to the pairs that barely move, or ``None``.

    Uniformly random pairs have chord below ``d`` with probability
    ``d^2 / 4``, so a cluster well above that background signals a rotation
    too small for axis voting. The rotation is a least-squares alignment,
    refitted on the pairs with residual below ``chord / 2`` until the set is
    stable. Fits that do not settle, or whose angle exceeds the largest
    angle the chord allows, are rejected. ``axis_votes`` holds the final
    support size; ``inliers`` obey the usual ``|axis . z| < epsilon`` rule.
    """
    d = cfg.small_motion_chord
    if d <= 0:
        return None
    n = x.shape[0]
    close = np.flatnonzero(np.linalg.norm(y - x, axis=1) < d)
    mean = n * d * d / 4.0
    if close.size < max(16.0, mean + cfg.min_votes_sigma * np.sqrt(mean), floor_frac * n):
        return None
    # selecting by chord truncates the noise towards identity; reselect by
    # residual under the current fit, which does not
    support = close
    for _ in range(10):
        rows = support[np.lexsort(x[support].T[::-1])]
        rot, _ = Rotation.align_vectors(y[rows], x[rows])
        new_support = np.flatnonzero(np.linalg.norm(rot.apply(x) - y, axis=1) < 0.5 * d)
        if new_support.size < 3:
            return None
        if np.array_equal(new_support, support):
            break
        support = new_support
    else:
        return None
    rotvec = rot.as_rotvec()
    angle = float(np.linalg.norm(rotvec))
    # a larger fit is a regular rotation seeded from pairs near its axis;
    # those are the vote grid's job
    if angle > 2.0 * np.arcsin(0.5 * d):
        return None
    axis = rotvec / angle if angle > 0 else np.array([0.0, 0.0, -1.0])
    if axis[2] > 0:
        axis, angle = -axis, -angle
    inl = kept[classify_inliers(axis, constraints, cfg.epsilon)]
    return RotationEstimate(axis, angle, rodrigues(axis, angle), inl, int(support.size))


def estimate_single(x, y, cfg=None):
    """Best single rotation taking the points ``x`` onto ``y``.

    Parameters
    ----------
    x, y : array_like, shape (n, 3)
        Source and target points of the putative correspondences.
    cfg : EstimatorConfig, optional

    Returns
    -------
    RotationEstimate
        ``inliers`` index into the input rows.
    """
    cfg = cfg or EstimatorConfig()
    t0 = time.perf_counter()
    prepared = _prepare(x, y, cfg, t0)
    if isinstance(prepared, RotationEstimate):
        return prepared
    xn, yn, constraints, kept = prepared
    acc = vote_axes(constraints, cfg)
    # noise smears a true peak while the random-circle background is densest
    # near the origin, so the tallest cell can be spurious: fit the strongest
    # cells by votes and by significance, keep the largest consensus set
    candidates = list(voting.find_peaks(acc, cfg.verify_peaks, cfg.suppression_radius, 1))
    if cfg.verify_peaks > 1:
        score = voting.significance(acc, len(kept), cfg.samples)
        seen = {p.cell for p in candidates}
        candidates += [p for p in voting.find_peaks(acc, cfg.verify_peaks,
                                                    cfg.suppression_radius, 1, score)
                       if p.cell not in seen]
    est = None
    for peak in candidates:
        try:
            cand = _fit_model(voting.backproject_peak(peak.center), peak.votes,
                              xn, yn, constraints, kept, cfg)
        except NoVotesError:
            continue
        if est is None or cand.inlier_count > est.inlier_count:
            est = cand
    small = _small_motion_model(xn, yn, constraints, kept, cfg, 0.0)
    if small is not None and (est is None or small.axis_votes > est.inlier_count):
        est = small
    if est is None:
        raise NoVotesError("no candidate axis has angle votes")
    est.elapsed = time.perf_counter() - t0
    return est


def estimate_multi(x, y, cfg=None, max_overlap=0.5):
    """Several rotations from one shared vote grid, strongest first.

    Peaks are taken in vote order while they clear the vote floor (see
    :class:`EstimatorConfig`). Each peak is fitted on its own:
    inliers, refinement and angle use only that peak's axis. A fitted model
    that shares more than ``max_overlap`` of its inliers with a stronger
    model, or lies within ``min_separation_deg`` of it, is a side lobe and
    is skipped. A free slot may go to a near-identity model found from
    barely moving pairs (see ``small_motion_chord``).

    Raises
    ------
    NoPeakError
        If no cell reaches the vote floor and no near-identity cluster exists.
    """
    cfg = cfg or EstimatorConfig()
    t0 = time.perf_counter()
    prepared = _prepare(x, y, cfg, t0)
    if isinstance(prepared, RotationEstimate):
        return [prepared]
    xn, yn, constraints, kept = prepared
    acc = vote_axes(constraints, cfg)
    floor = np.maximum(
        voting.default_min_votes(len(kept), cfg.samples, cfg.grid, cfg.min_votes_frac),
        voting.significance_floor(acc, len(kept), cfg.samples, cfg.min_votes_sigma))
    # side lobes of strong peaks also clear the floor; leave room to skip them
    try:
        peaks = voting.find_peaks(acc, 4 * cfg.max_models + 4, cfg.suppression_radius, floor)
    except NoPeakError:
        peaks = []
    min_sep = np.radians(cfg.min_separation_deg)
    models = []
    for peak in peaks:
        est = _fit_model(voting.backproject_peak(peak.center), peak.votes,
                         xn, yn, constraints, kept, cfg)
        size = max(est.inlier_count, 1)
        if any(np.intersect1d(est.inliers, m.inliers, assume_unique=True).size > max_overlap * size
               or rotation_error(m.rotation, est.rotation) < min_sep for m in models):
            continue
        models.append(est)
        if len(models) == cfg.max_models:
            break
    if len(models) < cfg.max_models:
        small = _small_motion_model(xn, yn, constraints, kept, cfg, cfg.min_votes_frac)
        if small is not None and not any(
                rotation_error(m.rotation, small.rotation) < min_sep for m in models):
            models.append(small)
    if not models:
        raise NoPeakError("no vote peak yields a model")
    models.sort(key=lambda m: -m.axis_votes)
    elapsed = time.perf_counter() - t0
    for m in models:
        m.elapsed = elapsed
    return models
