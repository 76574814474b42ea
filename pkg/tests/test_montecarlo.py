import csv
import json
import math
import warnings

import numpy as np
import pytest

from intgw.estimators import RECIP_T, fit
from intgw.exceptions import ConfigurationError, DomainError, ModelWarning
from intgw.model import ImmigrationDist, ModelSpec, OffspringDist, simulate_path
from intgw.montecarlo import (
    ComparisonRecord,
    ExperimentConfig,
    cell_seed,
    reproduce_table1,
    run_experiment,
    unit_root_statistics,
    verify_clt,
    verify_stationary,
    verify_unit_root_sums,
    write_records_csv,
)


def _fixture():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ModelWarning)
        return ModelSpec(OffspringDist.dirac(1), ImmigrationDist.dirac(3))


class TestExperiment:
    def test_fixture_is_exact(self):
        cfg = ExperimentConfig(_fixture(), 25, 40, ("ols", "wei", "recip-t"), 1)
        s = run_experiment(cfg)
        for name in ("ols", "wei", "recip-t"):
            e = s[name]
            assert e.failure_count == 0
            np.testing.assert_allclose(e.mu_hat, 3.0, atol=1e-10)
            np.testing.assert_allclose(e.m_hat, 1.0, atol=1e-10)
            assert e.sample_variance == pytest.approx(0.0, abs=1e-18)

    def test_matches_direct_fits(self, inarch2):
        s = run_experiment(ExperimentConfig(inarch2, 80, 30, ("recip-t",), 7))
        direct = [fit(simulate_path(inarch2, 80, 7, r), RECIP_T).mu_hat for r in range(30)]
        np.testing.assert_array_equal(s["recip-t"].mu_hat, direct)
        assert s["recip-t"].sample_mean == pytest.approx(np.mean(direct), rel=1e-14)
        assert s["recip-t"].sample_variance == pytest.approx(np.var(direct, ddof=1), rel=1e-12)

    def test_histogram_invariants(self, inarch2):
        s = run_experiment(ExperimentConfig(inarch2, 100, 500, ("ols", "recip-t"), 2))
        a, b = s["ols"], s["recip-t"]
        np.testing.assert_array_equal(a.bin_edges, b.bin_edges)
        for e in (a, b):
            assert e.counts.sum() == 500 - e.failure_count
        s = run_experiment(ExperimentConfig(inarch2, 100, 200, ("ols",), 2, histogram_bins=7))
        assert s["ols"].counts.size == 7

    def test_failures_are_counted(self):
        spec = ModelSpec.inarch(0.01)
        s = run_experiment(ExperimentConfig(spec, 3, 300, ("ols", "recip-t"), 4))
        e = s["recip-t"]
        assert e.failure_count > 0
        assert e.counts.sum() == 300 - e.failure_count
        assert np.isnan(e.mu_hat).sum() == e.failure_count
        assert math.isfinite(e.sample_mean)

    def test_worker_independent_and_json(self, inarch2, tmp_path):
        cfg = ExperimentConfig(inarch2, 150, 300, ("ols", "wei", "recip-t"), 11)
        a, b = run_experiment(cfg, workers=1), run_experiment(cfg, workers=4)
        a.to_json(tmp_path / "a.json")
        b.to_json(tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
        a.histogram_csv(tmp_path / "a.csv")
        b.histogram_csv(tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        d = json.loads((tmp_path / "a.json").read_text())
        assert d["schema_version"] == 1 and "wall_clock_seconds" not in d
        assert "wall_clock_seconds" in a.to_dict(include_timing=True)
        with open(tmp_path / "a.csv") as fh:
            assert next(csv.reader(fh)) == ["estimator", "bin_left", "bin_right", "count"]

    def test_wls_histogram_is_narrower(self, inarch2):
        s = run_experiment(ExperimentConfig(inarch2, 100, 2000, ("ols", "recip-t"), 5))
        assert s["recip-t"].iqr < s["ols"].iqr

    @pytest.mark.parametrize(
        "kw", [{"n": 1}, {"B": 0}, {"estimators": ()}, {"estimators": ("gls",)}, {"histogram_bins": 1}, {"master_seed": -1}]
    )
    def test_invalid_config(self, inarch2, kw):
        args = {"spec": inarch2, "n": 10, "B": 10, **kw}
        with pytest.raises((ConfigurationError, ValueError)):
            ExperimentConfig(**args)


class TestTable1:
    def test_layout(self, tmp_path):
        t = reproduce_table1(3, B=20)
        assert t.values.shape == (2, 6)
        assert t.cell(2.0, 100) == t.values[0, 3]
        t.to_csv(tmp_path / "t.csv")
        rows = list(csv.reader(open(tmp_path / "t.csv")))
        assert rows[0][0] == "n" and [r[0] for r in rows[1:]] == ["100", "500"]

    def test_cell_seeds(self):
        seeds = {cell_seed(42, c) for c in range(12)}
        assert len(seeds) == 12 and cell_seed(42, 3) == cell_seed(42, 3) != cell_seed(43, 3)


class TestLimitChecks:
    def test_clt_rejects_zero_variance(self):
        with pytest.raises(DomainError):
            verify_clt(_fixture(), 100, 10, 0)

    def test_clt_rejects_stationary(self, stationary_spec):
        with pytest.raises(DomainError):
            verify_clt(stationary_spec, 100, 10, 0)

    def test_clt_target(self, inarch2):
        c = verify_clt(inarch2, 2000, 50, 0)
        assert c.target_sd == pytest.approx(math.sqrt(2.0))
        assert c.B == 50 and c.failures == 0
        assert json.loads(json.dumps(c.to_dict()))["schema_version"] == 1

    def test_unit_root_sum_records(self, inarch2):
        chk = verify_unit_root_sums(inarch2, 2000, 400, seed=3, limit_draws=400, grid_size=400)
        names = [r.statistic for r in chk.records]
        assert len(names) == 9 and set(chk.ks) == {"a", "b", "c", "d"}
        a = chk.records[0]
        assert a.passed and a.target == 2.0 and a.stderr > 0
        assert chk.discrete.shape == (400, 4) and chk.limit.shape == (400, 4)

    def test_unit_root_statistics_scaling(self):
        sums = np.array([[10.0, 100.0, 5.0, 3.0, 0, 0, 0, 0]])
        out = unit_root_statistics(sums, 10)
        np.testing.assert_allclose(out[0], [1.0, 1.0, 0.5, 3.0 / math.sqrt(math.log(10))])

    def test_stationary_iid_case(self):
        spec = ModelSpec(OffspringDist.dirac(0), ImmigrationDist.poisson(3.0))
        chk = verify_stationary(spec, 100_000, seed=1)
        assert chk.records[0].target == 3.0
        assert abs(chk.records[0].empirical - 3.0) <= 0.1 * 3.0

    def test_stationary_needs_subcritical(self, inarch2):
        with pytest.raises(DomainError):
            verify_stationary(inarch2, 100, seed=0)

    def test_records_csv(self, tmp_path):
        f = tmp_path / "r.csv"
        write_records_csv(f, [ComparisonRecord("x", 1.0, 1.1, 0.1, True)])
        assert f.read_text().splitlines() == ["statistic,empirical,target,stderr,pass", "x,1.0,1.1,0.1,true"]
