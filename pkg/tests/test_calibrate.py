import math

import numpy.testing as npt
import pytest

import calibrate
from calibrate import (CalibrationEntry, cached_calibration, calibrate_beta_c, calibrate_intercept,
                       calibration_table, lookup_entry, marginal_hr_oracle)
from errors import BracketError
from simgen import Scenario, ScenarioConfig

ORACLE_N = 100000


@pytest.fixture
def linear_oracle(monkeypatch):
    calls = []

    def oracle(beta_c, event, config=None, oracle_n=None, seed=None):
        calls.append((beta_c, event))
        return (0.9 if event == 1 else 0.5) * beta_c

    monkeypatch.setattr(calibrate, "marginal_hr_oracle", oracle)
    return calls


class TestMarginalHrOracle:

    def test_null(self):
        assert abs(marginal_hr_oracle(0.0, 1, oracle_n=ORACLE_N)) < 0.01
        assert abs(marginal_hr_oracle(0.0, 2, oracle_n=ORACLE_N)) < 0.01

    def test_first_event(self):
        npt.assert_allclose(marginal_hr_oracle(0.4599, 1, oracle_n=ORACLE_N), 0.4055, atol=0.02)

    def test_attenuation(self):
        beta_m1 = marginal_hr_oracle(0.7830, 1, oracle_n=ORACLE_N)
        beta_m2 = marginal_hr_oracle(0.7830, 2, oracle_n=ORACLE_N)
        assert 0 < beta_m2 < beta_m1 < 0.7830

    def test_fixed_seed_is_deterministic(self):
        assert marginal_hr_oracle(0.5, 1, oracle_n=ORACLE_N, seed=3) == marginal_hr_oracle(0.5, 1, oracle_n=ORACLE_N,
                                                                                            seed=3)

    def test_small_population(self):
        with pytest.raises(ValueError):
            marginal_hr_oracle(0.5, 1, oracle_n=1000)

    def test_unknown_event(self):
        with pytest.raises(ValueError):
            marginal_hr_oracle(0.5, 3, oracle_n=ORACLE_N)

    @pytest.mark.slow
    def test_table_values(self):
        npt.assert_allclose(marginal_hr_oracle(0.4599, 1), 0.4055, atol=0.005)
        npt.assert_allclose(marginal_hr_oracle(1.2331, 2), 0.5616, atol=0.01)


class TestCalibrateBetaC:

    def test_null_short_circuit(self, linear_oracle):
        entry = calibrate_beta_c(0.0)
        assert (entry.beta_m1, entry.beta_c, entry.beta_m2) == (0.0, 0.0, 0.0)
        assert linear_oracle == []

    def test_bisection(self, linear_oracle):
        entry = calibrate_beta_c(0.6931, tolerance=0.005)
        npt.assert_allclose(entry.beta_c, 0.6931 / 0.9, atol=2e-4)
        npt.assert_allclose(entry.beta_m2, 0.5 * entry.beta_c)
        assert abs(entry.achieved_beta_m1 - entry.beta_m1) <= entry.tolerance
        assert linear_oracle[-1][1] == 2
        assert linear_oracle[0] == (0.6931, 1)

    def test_monotone_in_target(self, linear_oracle):
        entries = calibration_table([3.0, 1.5, 2.0, 2.5], tolerance=0.005)
        beta_cs = [entry.beta_c for entry in entries]
        assert beta_cs == sorted(beta_cs)
        assert [round(entry.true_hr_m1, 2) for entry in entries] == [1.5, 2.0, 2.5, 3.0]

    def test_bracket_failure(self, monkeypatch):
        monkeypatch.setattr(calibrate, "marginal_hr_oracle", lambda *args: 0.1)
        with pytest.raises(BracketError):
            calibrate_beta_c(0.6931)

    def test_negative_target(self):
        with pytest.raises(ValueError):
            calibrate_beta_c(-0.1)

    @pytest.mark.slow
    def test_reproduces_table(self):
        entry = calibrate_beta_c(0.6931, tolerance=0.005, oracle_n=1000000)
        npt.assert_allclose(entry.beta_c, 0.7830, atol=0.01)
        npt.assert_allclose(entry.beta_m2, 0.3551, atol=0.01)
        assert 0 <= entry.beta_m2 <= entry.beta_m1 <= entry.beta_c


class TestCachedCalibration:

    def test_rows(self):
        entries = cached_calibration()
        assert [entry.beta_c for entry in entries] == [0.0, 0.4599, 0.7830, 1.0313, 1.2331]
        for entry in entries:
            assert 0 <= entry.beta_m2 <= entry.beta_m1 <= entry.beta_c

    def test_lookup(self):
        entry = lookup_entry(2.0, cached_calibration())
        assert entry.beta_c == 0.7830
        npt.assert_allclose(entry.true_hr_m2, 1.4263, atol=1e-4)
        with pytest.raises(ValueError):
            lookup_entry(1.7, cached_calibration())

    def test_true_beta_by_scenario(self):
        entry = CalibrationEntry(beta_m1=0.6931, beta_c=0.7830, beta_m2=0.3551)
        assert entry.true_beta_m(1, Scenario.TV_TREATMENT) == 0.6931
        assert entry.true_beta_m(2, Scenario.TV_COVARIATES) == 0.3551
        assert entry.true_beta_m(2, Scenario.INDEPENDENT_GAPS) == 0.6931
        assert entry.achieved_beta_m1 == 0.6931
        npt.assert_allclose(entry.true_hr_m1, 2.0, atol=1e-4)


class TestCalibrateIntercept:

    @pytest.mark.parametrize("prevalence, expected", [(0.25, -1.1392), (0.5, 0.0)])
    def test_first_event(self, prevalence, expected):
        config = ScenarioConfig(scenario=Scenario.INDEPENDENT_GAPS)
        npt.assert_allclose(calibrate_intercept(config, 1, prevalence, oracle_n=ORACLE_N), expected, atol=0.01)

    def test_second_event(self):
        config = ScenarioConfig(scenario=Scenario.TV_TREATMENT)
        npt.assert_allclose(calibrate_intercept(config, 2, 0.5, oracle_n=ORACLE_N), -0.1000, atol=0.02)

    def test_second_event_needs_varying_treatment(self):
        with pytest.raises(ValueError):
            calibrate_intercept(ScenarioConfig(scenario=Scenario.TV_COVARIATES), 2, 0.5, oracle_n=ORACLE_N)

    def test_prevalence_range(self):
        with pytest.raises(ValueError):
            calibrate_intercept(ScenarioConfig(), 1, 1.0, oracle_n=ORACLE_N)
        assert math.isfinite(calibrate_intercept(ScenarioConfig(), 1, 0.1, oracle_n=ORACLE_N))
