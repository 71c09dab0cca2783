"""Axis voting in a stereographic accumulator.

Every constraint direction ``z`` defines the great circle of axes orthogonal
to it. The circle is sampled at ``J`` angles, each sample is folded into the
southern hemisphere, projected to the plane and counted in a ``G x G`` grid
covering ``[-E, E]^2``. Cells crossed by many circles mark candidate axes.

Counts are integers, so per-thread private grids merged by addition give the
same accumulator for any thread count or processing order.
"""

import functools
import math
import os
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import EmptyInputError, InvalidConfigError, NoPeakError
from .geom import normalize, unproject

THREADS_ENV = "STEREOROT_THREADS"

if "NUMBA_THREADING_LAYER" not in os.environ:
    # omp is safe for concurrent callers and skips the noisy TBB probe
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

DEFAULT_GRID = 512
DEFAULT_EXTENT = 1.05
DEFAULT_SAMPLES = 2048
DEFAULT_SUPPRESSION = 8


@dataclass
class Accumulator2D:
    """Vote counts over the stereographic plane.

    ``counts[iy, ix]`` covers ``A`` in cell ``ix`` and ``B`` in cell ``iy``;
    cell ``k`` spans ``(-E + k h, -E + (k + 1) h]`` with ``h = 2E / G``.
    """

    counts: np.ndarray
    extent: float

    @classmethod
    def empty(cls, grid=DEFAULT_GRID, extent=DEFAULT_EXTENT):
        return cls(np.zeros((grid, grid), dtype=np.int64), float(extent))

    @property
    def grid(self):
        return self.counts.shape[0]

    @property
    def cell_size(self):
        return 2.0 * self.extent / self.grid

    @property
    def total(self):
        return int(self.counts.sum())

    def cell_center(self, iy, ix):
        h = self.cell_size
        return np.array([-self.extent + (ix + 0.5) * h, -self.extent + (iy + 0.5) * h])

    def cell_index(self, point):
        """``(iy, ix)`` of the cell containing plane point ``(A, B)``."""
        inv_h = self.grid / (2.0 * self.extent)
        ix, iy = (_cell_indices(np.asarray(point, dtype=float), self.extent, inv_h, self.grid))
        return int(iy), int(ix)


@dataclass
class Peak:
    center: np.ndarray
    votes: int
    cell: tuple


@dataclass
class PeakSet:
    peaks: list = field(default_factory=list)
    suppression_radius: int = DEFAULT_SUPPRESSION

    def __len__(self):
        return len(self.peaks)

    def __iter__(self):
        return iter(self.peaks)

    def __getitem__(self, i):
        return self.peaks[i]


def _check_params(grid, extent, samples):
    if grid < 1 or extent <= 1.0:
        raise InvalidConfigError(f"need extent > 1 (got {extent}) and grid >= 1")
    if samples < 8:
        raise InvalidConfigError(f"need at least 8 samples per circle, got {samples}")


def sample_table(samples):
    """Cosine and sine of ``theta_j = -pi + 2 pi j / J`` for ``j < J``.

    For even ``J`` the second half is the exact negation of the first
    (``theta + pi``), so antipodal samples are bitwise antipodal.
    """
    thetas = -np.pi + 2.0 * np.pi * np.arange(samples) / samples
    cos_t, sin_t = np.cos(thetas), np.sin(thetas)
    if samples % 2 == 0:
        half = samples // 2
        cos_t[half:] = -cos_t[:half]
        sin_t[half:] = -sin_t[:half]
    return cos_t, sin_t


def orthonormal_bases(z):
    """Row-wise version of :func:`stereorot.geom.orthonormal_basis`."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    n = z.shape[0]
    seeds = np.zeros_like(z)
    seeds[np.arange(n), np.argmin(np.abs(z), axis=1)] = 1.0
    along = np.sum(seeds * z, axis=1)
    alpha1 = seeds - along[:, None] * z
    alpha1 /= np.sqrt(np.sum(alpha1 * alpha1, axis=1))[:, None]
    alpha2 = np.cross(alpha1, z)
    alpha2 /= np.sqrt(np.sum(alpha2 * alpha2, axis=1))[:, None]
    return alpha1, alpha2


def _cell_indices(values, extent, inv_h, grid):
    # boundary values go to the lower cell: index = ceil(u) - 1
    k = np.ceil((values + extent) * inv_h).astype(np.int64) - 1
    return np.clip(k, 0, grid - 1)


def deposit_circle_votes(z, acc, samples=DEFAULT_SAMPLES):
    """Add the ``samples`` votes of the great circle orthogonal to ``z`` to ``acc``.

    This is the plain numpy path; :func:`accumulate` produces the same counts
    with a compiled kernel.
    """
    _check_params(acc.grid, acc.extent, samples)
    alpha1, alpha2 = orthonormal_bases(z)
    cos_t, sin_t = sample_table(samples)
    pts = np.outer(cos_t, alpha1[0]) + np.outer(sin_t, alpha2[0])
    pts = np.where(pts[:, 2:3] > 0, -pts, pts)
    inv = 1.0 / (1.0 - pts[:, 2])
    a = pts[:, 0] * inv
    b = pts[:, 1] * inv
    inv_h = acc.grid / (2.0 * acc.extent)
    ix = _cell_indices(a, acc.extent, inv_h, acc.grid)
    iy = _cell_indices(b, acc.extent, inv_h, acc.grid)
    np.add.at(acc.counts, (iy, ix), 1)
    return acc


# error_model="numpy" drops the zero-division checks that block vectorisation;
# the arithmetic, and so every count, is unchanged
@numba.njit(cache=True, nogil=True, inline="always", error_model="numpy")
def _bin(u, grid):
    k = int(math.ceil(u)) - 1
    return min(max(k, 0), grid - 1)


@numba.njit(cache=True, nogil=True, error_model="numpy")
def _vote_range(counts, alpha1, alpha2, cos_t, sin_t, extent, start, stop, step):
    grid = counts.shape[0]
    inv_h = grid / (2.0 * extent)
    n_samples = cos_t.shape[0]
    if n_samples % 2 == 1:
        for i in range(start, stop, step):
            a0, a1, a2 = alpha1[i, 0], alpha1[i, 1], alpha1[i, 2]
            b0, b1, b2 = alpha2[i, 0], alpha2[i, 1], alpha2[i, 2]
            for j in range(n_samples):
                cs = cos_t[j]
                sn = sin_t[j]
                c = cs * a2 + sn * b2
                sg = -1.0 if c > 0.0 else 1.0
                inv = 1.0 / (1.0 - sg * c)
                ix = _bin((sg * (cs * a0 + sn * b0) * inv + extent) * inv_h, grid)
                iy = _bin((sg * (cs * a1 + sn * b1) * inv + extent) * inv_h, grid)
                counts[iy, ix] += 1
        return
    # even J: sample j + J/2 is the exact antipode of sample j, so both fold
    # onto the same southern point and one evaluation casts two votes
    flat = counts.reshape(-1)
    half = n_samples // 2
    top = float(grid - 1)
    cells = np.empty(half, dtype=np.int64)
    for i in range(start, stop, step):
        a0, a1, a2 = alpha1[i, 0], alpha1[i, 1], alpha1[i, 2]
        b0, b1, b2 = alpha2[i, 0], alpha2[i, 1], alpha2[i, 2]
        equatorial = 0
        # branch-free so this loop vectorises; the scatter stays scalar
        for j in range(half):
            cs = cos_t[j]
            sn = sin_t[j]
            c = cs * a2 + sn * b2
            sg = -1.0 if c > 0.0 else 1.0
            inv = 1.0 / (1.0 - sg * c)
            u = math.ceil((sg * (cs * a0 + sn * b0) * inv + extent) * inv_h) - 1.0
            v = math.ceil((sg * (cs * a1 + sn * b1) * inv + extent) * inv_h) - 1.0
            cells[j] = int(min(max(v, 0.0), top)) * grid + int(min(max(u, 0.0), top))
            equatorial += c == 0.0
        for j in range(half):
            flat[cells[j]] += 2
        if equatorial:
            # on the equator the sample and its antipode are distinct points
            for j in range(half):
                cs = cos_t[j]
                sn = sin_t[j]
                if cs * a2 + sn * b2 == 0.0:
                    x = cs * a0 + sn * b0
                    y = cs * a1 + sn * b1
                    flat[cells[j]] -= 1
                    counts[_bin((extent - y) * inv_h, grid), _bin((extent - x) * inv_h, grid)] += 1


@numba.njit(parallel=True, cache=True, nogil=True)
def _vote_parallel(alpha1, alpha2, cos_t, sin_t, grid, extent, n_parts):
    n = alpha1.shape[0]
    parts = np.zeros((n_parts, grid, grid), dtype=np.int32)
    for p in numba.prange(n_parts):
        _vote_range(parts[p], alpha1, alpha2, cos_t, sin_t, extent, p, n, n_parts)
    out = np.zeros((grid, grid), dtype=np.int64)
    for p in range(n_parts):
        out += parts[p]
    return out


def resolve_threads(threads=None):
    """Clamp a requested thread budget to what numba can provide.

    ``None`` reads ``STEREOROT_THREADS`` and otherwise uses numba's default.
    """
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else numba.config.NUMBA_NUM_THREADS
    return max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS))


def accumulate(constraints, grid=DEFAULT_GRID, extent=DEFAULT_EXTENT,
               samples=DEFAULT_SAMPLES, threads=None, parts=None):
    """Vote every constraint circle into a fresh accumulator.

    Parameters
    ----------
    constraints : array_like, shape (n, 3)
        Unit constraint directions.
    grid, extent, samples : int, float, int
        Accumulator resolution ``G``, half-width ``E`` and samples per circle ``J``.
    threads : int, optional
        Thread budget; the counts do not depend on it.
    parts : int, optional
        Number of private grids the constraints are dealt into (default:
        one per thread). Also irrelevant to the counts.
    """
    constraints = np.asarray(constraints, dtype=float).reshape(-1, 3)
    if constraints.shape[0] == 0:
        raise EmptyInputError("no constraint directions to vote with")
    _check_params(grid, extent, samples)
    alpha1, alpha2 = orthonormal_bases(constraints)
    cos_t, sin_t = sample_table(samples)
    n_threads = resolve_threads(threads)
    numba.set_num_threads(n_threads)
    n_parts = max(1, min(parts or n_threads, constraints.shape[0]))
    counts = _vote_parallel(np.ascontiguousarray(alpha1), np.ascontiguousarray(alpha2),
                            cos_t, sin_t, int(grid), float(extent), n_parts)
    return Accumulator2D(counts, float(extent))


def default_min_votes(n_constraints, samples=DEFAULT_SAMPLES, grid=DEFAULT_GRID, frac=0.01):
    """``max(16, frac * n * J / G)``: a flat vote floor for model peaks."""
    return max(16, int(math.ceil(frac * n_constraints * samples / grid)))


def background_votes(acc, n_constraints, samples=DEFAULT_SAMPLES):
    """Expected per-cell votes from ``n`` random circles, and their clumping.

    Random great circles cover the folded hemisphere uniformly, so a cell
    receives votes in proportion to its spherical area
    ``h^2 * 4 / (1 + A^2 + B^2)^2``. One circle crossing a cell leaves about
    ``h J / (2 (1 + A^2 + B^2))`` votes, which inflates the variance by that
    factor over a Poisson count.

    Returns
    -------
    mean, clump : ndarray, shape (G, G)
    """
    area, inv_s = _cell_geometry(acc.grid, acc.extent)
    h = acc.cell_size
    return n_constraints * samples * area, 0.5 * h * samples * inv_s


@functools.lru_cache(maxsize=8)
def _cell_geometry(grid, extent):
    h = 2.0 * extent / grid
    centers = -extent + (np.arange(grid) + 0.5) * h
    s = centers[None, :] ** 2 + centers[:, None] ** 2
    area = h * h * 4.0 / ((1.0 + s) ** 2 * 2.0 * np.pi)
    area.flags.writeable = False
    inv_s = 1.0 / (1.0 + s)
    inv_s.flags.writeable = False
    return area, inv_s


def significance_floor(acc, n_constraints, samples=DEFAULT_SAMPLES, sigmas=10.0):
    """Per-cell vote count ``sigmas`` standard deviations above background."""
    mean, clump = background_votes(acc, n_constraints, samples)
    return mean + sigmas * np.sqrt(mean * np.maximum(clump, 1.0))


def _mask_disk(work, iy, ix, radius):
    g = work.shape[0]
    y0, y1 = max(0, iy - radius), min(g, iy + radius + 1)
    x0, x1 = max(0, ix - radius), min(g, ix + radius + 1)
    yy, xx = np.mgrid[y0:y1, x0:x1]
    inside = (yy - iy) ** 2 + (xx - ix) ** 2 <= radius * radius
    work[y0:y1, x0:x1][inside] = -np.inf


def significance(acc, n_constraints, samples=DEFAULT_SAMPLES):
    """Standard deviations by which each cell exceeds the random-circle background."""
    mean, clump = background_votes(acc, n_constraints, samples)
    return (acc.counts - mean) / np.sqrt(mean * np.maximum(clump, 1.0))


def find_peaks(acc, max_peaks=1, suppression_radius=DEFAULT_SUPPRESSION, min_votes=1,
               score=None):
    """Greedy non-maximum suppression over the accumulator.

    Takes the best remaining cell, masks every cell within
    ``suppression_radius`` cells of it, and repeats until ``max_peaks`` are
    found or no cell reaching ``min_votes`` is left; ``min_votes`` may be a
    scalar or a per-cell array. A peak near
    the unit circle also masks its antipodal cell, since ``r`` and ``-r`` on
    the equator encode the same rotation.

    ``score`` (shape ``(G, G)``) ranks cells instead of their raw counts;
    peaks still report raw votes, which are then not necessarily sorted.

    Raises
    ------
    NoPeakError
        If no cell reaches ``min_votes``.
    """
    min_votes = np.maximum(np.asarray(min_votes, dtype=float), 1.0)
    rank = acc.counts if score is None else score
    work = np.where(acc.counts >= min_votes, rank, -np.inf).astype(float)
    h = acc.cell_size
    peaks = []
    while len(peaks) < max_peaks:
        flat = int(np.argmax(work))
        if work.flat[flat] == -np.inf:
            break
        iy, ix = np.unravel_index(flat, work.shape)
        votes = int(acc.counts[iy, ix])
        center = acc.cell_center(iy, ix)
        peaks.append(Peak(center, votes, (int(iy), int(ix))))
        _mask_disk(work, iy, ix, suppression_radius)
        if np.hypot(*center) >= 1.0 - suppression_radius * h:
            jy, jx = acc.cell_index(-center)
            _mask_disk(work, jy, jx, suppression_radius)
    if not peaks:
        raise NoPeakError("no accumulator cell reaches the vote floor")
    return PeakSet(peaks, suppression_radius)


def backproject_peak(center):
    """Unit axis whose stereographic image is the plane point ``center``."""
    return normalize(unproject(np.asarray(center, dtype=float)))
