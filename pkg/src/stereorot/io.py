"""Readers and writers for correspondences, results and vote grids.

Angles are stored in radians. Floats are written with ``repr`` so every
value reads back bit-exact.
"""

import csv
import json

import numpy as np

from .errors import EmptyFileError, ParseError
from .estimator import RotationEstimate
from .synth import SceneTruth

COLUMNS = ("x0", "x1", "x2", "y0", "y1", "y2")


def _parse_float(text, line):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"not a number: {text.strip()!r}", line) from None
    if not np.isfinite(value):
        raise ParseError(f"non-finite value {text.strip()!r}", line)
    return value


def read_correspondences(path):
    """Load ``(x, y)`` arrays from a six-column CSV file.

    The columns are ``x0,x1,x2,y0,y1,y2``. A header row with exactly those
    names is optional; blank lines are skipped.

    Raises:
        EmptyFileError: The file holds no data rows.
        ParseError: A row has the wrong field count or a bad number.
    """
    rows = []
    with open(path, newline="") as fh:
        for line_no, fields in enumerate(csv.reader(fh), start=1):
            if not fields or all(not f.strip() for f in fields):
                continue
            if not rows and line_no == 1 and tuple(f.strip() for f in fields) == COLUMNS:
                continue
            if len(fields) != 6:
                raise ParseError(f"expected 6 fields, got {len(fields)}", line_no)
            rows.append([_parse_float(f, line_no) for f in fields])
    if not rows:
        raise EmptyFileError(f"{path}: no correspondences")
    data = np.array(rows)
    return data[:, :3], data[:, 3:]


def write_correspondences(path, x, y, header=True):
    data = np.hstack([np.asarray(x, dtype=float).reshape(-1, 3),
                      np.asarray(y, dtype=float).reshape(-1, 3)])
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        if header:
            out.writerow(COLUMNS)
        out.writerows([[repr(float(v)) for v in row] for row in data])


def estimate_to_dict(est):
    return {
        "axis": [float(v) for v in est.axis],
        "angle_rad": float(est.angle),
        "matrix": [float(v) for v in np.asarray(est.rotation).ravel()],
        "inlier_count": est.inlier_count,
        "inlier_indices": [int(i) for i in est.inliers],
        "axis_votes": int(est.axis_votes),
        "elapsed_s": float(est.elapsed),
    }


def estimate_from_dict(d):
    return RotationEstimate(
        axis=np.array(d["axis"], dtype=float),
        angle=float(d["angle_rad"]),
        rotation=np.array(d["matrix"], dtype=float).reshape(3, 3),
        inliers=np.array(d["inlier_indices"], dtype=np.int64),
        axis_votes=int(d["axis_votes"]),
        elapsed=float(d["elapsed_s"]),
    )


def write_result(estimates, path):
    """Write estimates as a JSON list, strongest ``axis_votes`` first.

    ``json`` emits floats via ``repr``, which round-trips exactly.
    """
    if isinstance(estimates, RotationEstimate):
        estimates = [estimates]
    ordered = sorted(estimates, key=lambda e: -e.axis_votes)
    with open(path, "w") as fh:
        json.dump([estimate_to_dict(e) for e in ordered], fh, indent=1)
        fh.write("\n")


def read_result(path):
    with open(path) as fh:
        return [estimate_from_dict(d) for d in json.load(fh)]


def write_truth(truth, path):
    """Ground-truth sidecar: row-major rotations and per-row labels (-1 = outlier)."""
    doc = {
        "rotations": [[float(v) for v in np.asarray(r).ravel()] for r in truth.rotations],
        "labels": [int(v) for v in truth.labels],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def read_truth(path):
    with open(path) as fh:
        doc = json.load(fh)
    rotations = [np.array(r, dtype=float).reshape(3, 3) for r in doc["rotations"]]
    return SceneTruth(rotations, np.array(doc["labels"], dtype=np.int64))


def dump_accumulator(acc, path, fmt="text"):
    """Write vote counts as a whitespace grid (``text``) or an 8-bit PGM (``pgm``).

    Rows follow ``counts[iy, :]`` with ``iy = 0`` first. The image scales
    the largest count to 255.
    """
    counts = np.asarray(acc.counts)
    if fmt == "text":
        with open(path, "w") as fh:
            for row in counts:
                fh.write(" ".join(str(int(v)) for v in row) + "\n")
    elif fmt == "pgm":
        top = max(int(counts.max()), 1)
        pixels = np.rint(counts * (255.0 / top)).astype(np.uint8)
        h, w = pixels.shape
        with open(path, "wb") as fh:
            fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            fh.write(pixels.tobytes())
    else:
        raise ValueError(f"unknown accumulator format {fmt!r}")

