import json
import math
import warnings

import numpy as np
import pytest

from intgw.exceptions import CalibrationError, ConfigurationError, DegeneratePathError, ModelWarning
from intgw.model import ImmigrationDist, ModelSpec, OffspringDist, simulate_path
from intgw.testing import (
    INCONCLUSIVE,
    LIKELY_INTEGRATED,
    LIKELY_STATIONARY,
    CriticalValueCache,
    combine_decisions,
    decide_regime,
    limit_quantiles,
    unit_root_test,
)

FAST = {"limit_draws": 800, "grid_size": 200}


@pytest.fixture(scope="module")
def null_path():
    return simulate_path(ModelSpec.inarch(2.0), 400, 123)


class TestUnitRootTest:
    def test_constant_path_is_degenerate(self):
        with pytest.raises(DegeneratePathError):
            unit_root_test([0] * 20, **FAST)

    def test_zero_variance_cannot_calibrate(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ModelWarning)
            spec = ModelSpec(OffspringDist.dirac(1), ImmigrationDist.dirac(2))
        with pytest.raises(CalibrationError):
            unit_root_test(simulate_path(spec, 100, 0), **FAST)

    def test_nonpositive_plug_in(self):
        with pytest.raises(CalibrationError):
            limit_quantiles("wls", -0.5, 1.0, [0.05], 10, 0)

    @pytest.mark.parametrize("estimator", ["wls", "ols"])
    def test_reject_iff_outside_region(self, estimator):
        for r in range(15):
            p = simulate_path(ModelSpec.inarch(1.0, m=0.99 if r % 2 else 1.0), 300, 7, r)
            res = unit_root_test(p, estimator=estimator, seed=r, **FAST)
            lo, hi = res.acceptance_region
            assert res.reject == (res.statistic < lo or res.statistic > hi)
            assert res.estimator_used == estimator.upper()

    def test_critical_values_monotone_in_level(self, null_path):
        res = unit_root_test(null_path, level=0.05, **FAST)
        cv = res.critical_values
        assert cv[0.01][0] <= cv[0.05][0] <= cv[0.10][0] < cv[0.10][1] <= cv[0.05][1] <= cv[0.01][1]

    def test_lowering_level_never_adds_rejections(self):
        spec = ModelSpec.inarch(2.0, m=0.97)
        for r in range(12):
            p = simulate_path(spec, 300, 3, r)
            strict = unit_root_test(p, level=0.01, seed=5, **FAST).reject
            loose = unit_root_test(p, level=0.05, seed=5, **FAST).reject
            assert not (strict and not loose)

    def test_statistic_definition(self, null_path):
        from intgw.estimators import OLS, RECIP_T, estimate_sigma2, fit

        res = unit_root_test(null_path, **FAST)
        pre = fit(null_path, RECIP_T)
        assert res.statistic == null_path.n * (pre.m_hat - 1)
        assert res.plug_in == {"mu_tilde": pre.mu_hat, "sigma2_hat": estimate_sigma2(null_path, pre.mu_hat)}
        ols = unit_root_test(null_path, estimator="ols", **FAST)
        assert ols.statistic == null_path.n * (fit(null_path, OLS).m_hat - 1)

    def test_deterministic_and_worker_independent(self, null_path):
        a = unit_root_test(null_path, seed=4, workers=1, **FAST)
        b = unit_root_test(null_path, seed=4, workers=3, **FAST)
        assert a == b
        assert unit_root_test(null_path, seed=5, **FAST).critical_values != a.critical_values

    def test_calibrations_differ(self, null_path):
        pre = unit_root_test(null_path, calibration="prelimit", **FAST)
        lim = unit_root_test(null_path, calibration="limit", **FAST)
        assert pre.calibration == "prelimit" and lim.calibration == "limit"
        # the finite-n law is wider than the limit ratio at this n
        assert pre.acceptance_region[0] < lim.acceptance_region[0]

    def test_cache(self, null_path, tmp_path):
        cache = CriticalValueCache(tmp_path / "cv")
        fresh = unit_root_test(null_path, **FAST)
        first = unit_root_test(null_path, cache=cache, **FAST)
        files = list((tmp_path / "cv").iterdir())
        assert len(files) == 1 and first == fresh
        second = unit_root_test(null_path, cache=cache, **FAST)
        assert second == fresh and list((tmp_path / "cv").iterdir()) == files

    def test_short_path_warns(self):
        p = simulate_path(ModelSpec.inarch(2.0), 30, 1)
        with pytest.warns(UserWarning, match="unstable"):
            unit_root_test(p, **FAST)

    @pytest.mark.parametrize("kw", [{"level": 0.0}, {"level": 1.0}, {"estimator": "gls"}, {"calibration": "x"}, {"limit_draws": 0}])
    def test_invalid_arguments(self, null_path, kw):
        with pytest.raises((ConfigurationError, ValueError)):
            unit_root_test(null_path, **{**FAST, **kw})

    def test_json(self, null_path, tmp_path):
        res = unit_root_test(null_path, **FAST)
        res.to_json(tmp_path / "r.json")
        d = json.loads((tmp_path / "r.json").read_text())
        assert d["schema_version"] == 1 and d["estimator_used"] == "WLS"
        assert d["critical_values"]["0.05"] == list(res.acceptance_region)

    def test_power_against_stationary(self, stationary_spec):
        rej = [unit_root_test(simulate_path(stationary_spec, 500, 9, r), seed=r, **FAST).reject for r in range(40)]
        assert np.mean(rej) > 0.9

    @pytest.mark.slow
    def test_variants_agree_under_null(self):
        spec = ModelSpec.inarch(2.0)
        R = 400
        wls = ols = 0
        for r in range(R):
            p = simulate_path(spec, 2000, 17, r)
            wls += unit_root_test(p, estimator="wls", seed=r, limit_draws=600, grid_size=200).reject
            ols += unit_root_test(p, estimator="ols", seed=r, limit_draws=600, grid_size=200).reject
        se = math.sqrt(2 * 0.05 * 0.95 / R)
        assert abs(wls - ols) / R <= 3 * se


class TestRegime:
    @pytest.mark.parametrize(
        "ur, st, regime, unilateral",
        [
            (False, True, LIKELY_INTEGRATED, False),
            (True, False, LIKELY_STATIONARY, False),
            (True, True, INCONCLUSIVE, False),
            (False, False, INCONCLUSIVE, False),
            (False, None, LIKELY_INTEGRATED, True),
            (True, None, LIKELY_STATIONARY, True),
        ],
    )
    def test_combination_rule(self, ur, st, regime, unilateral):
        assert combine_decisions(ur, st) == (regime, unilateral)

    def test_decide_regime(self, null_path):
        d = decide_regime(null_path, 0.05, stationarity_pvalue=0.001, **FAST)
        assert d.stationarity_rejected and d.unit_root is not None
        assert d.regime == (INCONCLUSIVE if d.unit_root_rejected else LIKELY_INTEGRATED)
        u = decide_regime(null_path, 0.05, **FAST)
        assert u.unilateral and u.stationarity_rejected is None

    def test_bad_pvalue(self, null_path):
        with pytest.raises(ConfigurationError):
            decide_regime(null_path, 0.05, stationarity_pvalue=1.5, **FAST)
