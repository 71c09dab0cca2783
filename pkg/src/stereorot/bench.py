"""Seeded synthetic benchmark sweeps written as CSV tables."""

import csv
import time
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .baselines import ransac_rotation, sequential_ransac_multi
from .errors import InvalidConfigError, RotationEstimationError
from .estimator import EstimatorConfig, estimate_multi, estimate_single
from .geom import rotation_error
from .synth import SynthConfig, generate_scene

HEADER = ("scenario", "trial", "estimator", "n", "rho", "sigma",
          "e_rot_deg", "time_s", "success", "e_rot_p95_deg")
FAILED_DEG = 180.0
SINGLE_ESTIMATORS = ("aoresp", "ransac")
MULTI_ESTIMATORS = ("aoresp_multi", "seq_ransac")


@dataclass(frozen=True)
class Scenario:
    """One cell of a sweep.

    Trial ``t`` uses seed ``base_seed + t`` for both the scene and any
    randomised estimator, so every row can be regenerated on its own.
    """

    name: str
    n: int = 10_000
    rho: float = 0.5
    sigma: float = 0.01
    models: int = 1
    weights: tuple | None = None
    trials: int = 20
    estimators: tuple = ("aoresp",)
    threshold_deg: float = 1.0
    ransac_iterations: int = 1000

    def synth_config(self, seed):
        return SynthConfig(n=self.n, outlier_ratio=self.rho, sigma=self.sigma,
                           models=self.models, weights=self.weights, seed=seed)


@dataclass
class RunRecord:
    scenario: str
    trial: int
    estimator: str
    n: int
    rho: float
    sigma: float
    e_rot_deg: float
    time_s: float
    success: bool
    error: str = ""


@dataclass
class Aggregate:
    scenario: str
    estimator: str
    n: int
    rho: float
    sigma: float
    median_deg: float
    p95_deg: float
    success_rate: float
    mean_time_s: float


def rho_sweep(rhos, n=10_000, trials=20, prefix="rho", **kwargs):
    return [Scenario(f"{prefix}={rho:g}", n=n, rho=rho, trials=trials, **kwargs) for rho in rhos]


def n_sweep(sizes, rho=0.9, trials=20, prefix="n", **kwargs):
    return [Scenario(f"{prefix}={n}", n=n, rho=rho, trials=trials, **kwargs) for n in sizes]


def matched_errors(truth_rotations, estimates):
    """Per-truth geodesic errors (degrees) under the min-cost assignment.

    Truth rotations left without an estimate score :data:`FAILED_DEG`.
    """
    k = len(truth_rotations)
    if not estimates:
        return np.full(k, FAILED_DEG)
    cost = np.array([[np.degrees(rotation_error(r, e.rotation)) for e in estimates]
                     for r in truth_rotations])
    rows, cols = linear_sum_assignment(cost)
    errors = np.full(k, FAILED_DEG)
    errors[rows] = cost[rows, cols]
    return errors


def _run_estimator(name, x, y, scenario, seed, cfg):
    if name == "aoresp":
        return [estimate_single(x, y, cfg)]
    if name == "ransac":
        return [ransac_rotation(x, y, scenario.ransac_iterations, cfg.epsilon, seed)]
    if name == "aoresp_multi":
        return estimate_multi(x, y, replace(cfg, max_models=scenario.models))
    if name == "seq_ransac":
        return sequential_ransac_multi(x, y, scenario.models, scenario.ransac_iterations,
                                       cfg.epsilon, seed)
    raise InvalidConfigError(f"unknown estimator {name!r}")


def run_trial(scenario, trial, estimator, base_seed=0, cfg=None):
    """Generate trial ``trial`` of ``scenario`` and score ``estimator`` on it.

    Estimation errors become a failed row at :data:`FAILED_DEG` with the
    message in ``error``. A multi-model run scores the mean error over
    matched truth rotations.
    """
    cfg = cfg or EstimatorConfig()
    seed = base_seed + trial
    x, y, truth = generate_scene(scenario.synth_config(seed))
    t0 = time.perf_counter()
    try:
        estimates = _run_estimator(estimator, x, y, scenario, seed, cfg)
    except RotationEstimationError as exc:
        estimates, error = [], f"{type(exc).__name__}: {exc}"
    else:
        error = ""
    elapsed = max(time.perf_counter() - t0, 1e-9)
    errors = matched_errors(truth.rotations, estimates)
    return RunRecord(scenario.name, trial, estimator, scenario.n, scenario.rho, scenario.sigma,
                     float(errors.mean()), elapsed,
                     bool(np.all(errors < scenario.threshold_deg)), error)


def run_benchmark(scenarios, base_seed=0, cfg=None, progress=None):
    """Every trial of every scenario; rows sorted by scenario order then trial.

    Unknown estimator names raise :class:`InvalidConfigError` before any work.
    """
    known = SINGLE_ESTIMATORS + MULTI_ESTIMATORS
    for sc in scenarios:
        bad = [e for e in sc.estimators if e not in known]
        if bad:
            raise InvalidConfigError(f"unknown estimators {bad} in scenario {sc.name!r}")
    records = []
    for si, sc in enumerate(scenarios):
        for trial in range(sc.trials):
            for ei, est in enumerate(sc.estimators):
                records.append(((si, trial, ei), run_trial(sc, trial, est, base_seed, cfg)))
                if progress is not None:
                    progress(records[-1][1])
    records.sort(key=lambda item: item[0])
    return [r for _, r in records]


def aggregate(records):
    """Summary per (scenario, estimator) in first-seen order."""
    groups = {}
    for r in records:
        groups.setdefault((r.scenario, r.estimator), []).append(r)
    out = []
    for (scenario, estimator), rows in groups.items():
        err = np.array([r.e_rot_deg for r in rows])
        out.append(Aggregate(scenario, estimator, rows[0].n, rows[0].rho, rows[0].sigma,
                             float(np.median(err)), float(np.percentile(err, 95)),
                             float(np.mean([r.success for r in rows])),
                             float(np.mean([r.time_s for r in rows]))))
    return out


def write_benchmark_csv(records, fh, include_time=True):
    """Per-trial rows of each scenario followed by its ``aggregate`` rows.

    Aggregate rows carry the median error in ``e_rot_deg``, the success rate
    in ``success`` and the mean time in ``time_s``. With ``include_time``
    false the timing column is left blank so outputs can be compared
    byte for byte.
    """
    out = csv.writer(fh, lineterminator="\n")
    out.writerow(HEADER)

    def t(v):
        return repr(v) if include_time else ""

    summaries = aggregate(records)
    scenarios = list(dict.fromkeys(r.scenario for r in records))
    for name in scenarios:
        for r in records:
            if r.scenario == name:
                out.writerow([r.scenario, r.trial, r.estimator, r.n, repr(r.rho), repr(r.sigma),
                              repr(r.e_rot_deg), t(r.time_s), int(r.success), ""])
        for a in summaries:
            if a.scenario == name:
                out.writerow([a.scenario, "aggregate", a.estimator, a.n, repr(a.rho),
                              repr(a.sigma), repr(a.median_deg), t(a.mean_time_s),
                              repr(a.success_rate), repr(a.p95_deg)])


def read_benchmark_csv(fh):
    return list(csv.DictReader(fh))
