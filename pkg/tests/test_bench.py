import io as stdio

import numpy as np
import pytest

from stereorot import bench
from stereorot.errors import InvalidConfigError
from stereorot.estimator import RotationEstimate
from stereorot.geom import rodrigues


def to_csv(records, include_time=False):
    buf = stdio.StringIO()
    bench.write_benchmark_csv(records, buf, include_time=include_time)
    return buf.getvalue()


@pytest.fixture(scope="module")
def rho_records():
    rhos = (0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    return bench.run_benchmark(bench.rho_sweep(rhos, n=1000, trials=20), base_seed=5)


class TestSweep:
    def test_row_counts(self, rho_records):
        rows = bench.read_benchmark_csv(stdio.StringIO(to_csv(rho_records, True)))
        trials = [r for r in rows if r["trial"] != "aggregate"]
        summaries = [r for r in rows if r["trial"] == "aggregate"]
        assert len(trials) == 8 * 20 and len(summaries) == 8
        assert list(rows[0]) == list(bench.HEADER)
        assert all(float(r["time_s"]) > 0 for r in trials)

    def test_aggregate_follows_its_scenario(self, rho_records):
        rows = bench.read_benchmark_csv(stdio.StringIO(to_csv(rho_records)))
        for k in range(8):
            block = rows[21 * k:21 * (k + 1)]
            assert {r["scenario"] for r in block} == {block[0]["scenario"]}
            assert [r["trial"] for r in block] == [str(t) for t in range(20)] + ["aggregate"]

    def test_aggregate_values(self, rho_records):
        a = bench.aggregate(rho_records)[0]
        errs = [r.e_rot_deg for r in rho_records if r.scenario == a.scenario]
        assert a.median_deg == np.median(errs)
        assert a.p95_deg == np.percentile(errs, 95)
        assert a.success_rate == 1.0

    def test_rerun_identical(self, rho_records):
        again = bench.run_benchmark(bench.rho_sweep((0.2, 0.3), n=1000, trials=20), base_seed=5)
        head = [r for r in rho_records if r.scenario in ("rho=0.2", "rho=0.3")]
        assert to_csv(again) == to_csv(head)

    def test_trial_seed_is_base_plus_index(self):
        sc = bench.Scenario("s", n=300, rho=0.5, trials=3)
        rows = bench.run_benchmark([sc], base_seed=10)
        alone = bench.run_trial(sc, 2, "aoresp", base_seed=10)
        assert rows[2].e_rot_deg == alone.e_rot_deg


class TestTrials:
    def test_failure_becomes_row(self):
        sc = bench.Scenario("noise", n=1000, rho=1.0, trials=1, estimators=("aoresp_multi",))
        rec = bench.run_trial(sc, 0, "aoresp_multi")
        assert rec.e_rot_deg == bench.FAILED_DEG and not rec.success
        assert rec.error.startswith("NoPeakError")

    def test_unknown_estimator_rejected_up_front(self):
        with pytest.raises(InvalidConfigError):
            bench.run_benchmark([bench.Scenario("s", trials=1, estimators=("icp",))])

    def test_sweeps(self):
        assert [s.name for s in bench.n_sweep((10, 20))] == ["n=10", "n=20"]
        assert all(s.rho == 0.9 for s in bench.n_sweep((10, 20)))
        assert bench.rho_sweep((0.5,), n=7)[0].n == 7

    def test_multi_model_faster_than_sequential_ransac(self):
        sc = bench.Scenario("two", n=10_000, rho=0.2, models=2, weights=(0.4, 0.4), trials=3,
                            estimators=bench.MULTI_ESTIMATORS)
        bench.run_trial(sc, 0, "aoresp_multi")  # compile and warm caches
        rows = bench.run_benchmark([sc])
        ours = np.mean([r.time_s for r in rows if r.estimator == "aoresp_multi"])
        theirs = np.mean([r.time_s for r in rows if r.estimator == "seq_ransac"])
        assert ours < theirs
        assert all(r.success for r in rows if r.estimator == "aoresp_multi")


def est(rot):
    return RotationEstimate(np.zeros(3), 0.0, rot, np.zeros(0, dtype=np.int64), 1)


class TestMatchedErrors:
    def test_assignment_ignores_order(self):
        a, b = rodrigues([0, 0, 1], 0.5), rodrigues([1, 0, 0], -1.0)
        np.testing.assert_allclose(bench.matched_errors([a, b], [est(b), est(a)]), 0.0,
                                   atol=1e-5)

    def test_missing_estimate_fails(self):
        a, b = rodrigues([0, 0, 1], 0.5), rodrigues([1, 0, 0], -1.0)
        errs = bench.matched_errors([a, b], [est(a)])
        assert errs[1] == bench.FAILED_DEG and errs[0] < 1e-5

    def test_no_estimates(self):
        assert bench.matched_errors([np.eye(3)], []).tolist() == [bench.FAILED_DEG]
