"""Seeded synthetic correspondence scenes."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError
from .geom import rodrigues

OUTLIER = -1


@dataclass(frozen=True)
class SynthConfig:
    """Scene recipe.

    ``weights`` are the fractions of correspondences generated by each
    model; with the outlier ratio they must sum to one. ``None`` splits
    ``1 - outlier_ratio`` evenly across ``models``.
    """

    n: int = 1000
    outlier_ratio: float = 0.0
    sigma: float = 0.01
    models: int = 1
    weights: tuple | None = None
    seed: int = 0

    def model_weights(self):
        if self.weights is None:
            return (1.0 - self.outlier_ratio) / self.models * np.ones(self.models)
        return np.asarray(self.weights, dtype=float)

    def validate(self):
        if self.n < 0:
            raise InvalidConfigError("n must be non-negative")
        if not 0.0 <= self.outlier_ratio <= 1.0:
            raise InvalidConfigError(f"outlier ratio {self.outlier_ratio} outside [0, 1]")
        if self.sigma < 0:
            raise InvalidConfigError("sigma must be non-negative")
        if self.models < 1:
            raise InvalidConfigError("need at least one model")
        w = self.model_weights()
        if w.shape != (self.models,) or np.any(w < 0):
            raise InvalidConfigError("need one non-negative weight per model")
        if abs(w.sum() + self.outlier_ratio - 1.0) > 1e-12:
            raise InvalidConfigError("model weights plus outlier ratio must sum to 1")


@dataclass
class SceneTruth:
    rotations: list
    labels: np.ndarray

    def inliers_of(self, k):
        return np.flatnonzero(self.labels == k)


def random_unit_vectors(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def random_rotation(rng):
    """Rotation with a uniform random axis and an angle uniform in ``(-pi, pi]``."""
    axis = random_unit_vectors(rng, 1)[0]
    angle = -rng.uniform(-np.pi, np.pi)
    return rodrigues(axis, angle)


def largest_remainder(n, fractions):
    """Integer counts summing to ``n`` in the given proportions.

    Remainders are handed out largest first; ties go to the earlier entry.
    """
    quotas = n * np.asarray(fractions, dtype=float)
    counts = np.floor(quotas).astype(np.int64)
    short = n - int(counts.sum())
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[:short]:
        counts[i] += 1
    return counts


def generate_scene(cfg, rotations=None):
    """Correspondences ``(x, y)`` plus ground truth for ``cfg``.

    Inliers are ``y = normalize(R_k x + noise)`` with ``x`` uniform on the unit
    sphere and per-component Gaussian noise of std ``sigma``; outliers keep
    their ``x`` but get an independent uniform unit ``y``. Row order is a
    seeded shuffle of the labels.

    Parameters
    ----------
    rotations : sequence of (3, 3) arrays, optional
        Fixed ground-truth rotations; drawn from the seed when omitted.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    if rotations is None:
        rotations = [random_rotation(rng) for _ in range(cfg.models)]
    else:
        rotations = [np.asarray(r, dtype=float) for r in rotations]
        if len(rotations) != cfg.models:
            raise InvalidConfigError("need one rotation per model")
    fractions = np.append(cfg.model_weights(), cfg.outlier_ratio)
    counts = largest_remainder(cfg.n, fractions)
    labels = np.repeat(np.append(np.arange(cfg.models), OUTLIER), counts)
    labels = labels[rng.permutation(cfg.n)]

    x = random_unit_vectors(rng, cfg.n)
    noise = cfg.sigma * rng.standard_normal((cfg.n, 3))
    fresh = random_unit_vectors(rng, cfg.n)
    y = np.empty_like(x)
    for k, rot in enumerate(rotations):
        sel = labels == k
        moved = x[sel] @ rot.T + noise[sel]
        y[sel] = moved / np.linalg.norm(moved, axis=1, keepdims=True)
    out = labels == OUTLIER
    y[out] = fresh[out]
    return x, y, SceneTruth(rotations, labels)
