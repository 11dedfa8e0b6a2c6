import math

import numpy as np
import numpy.testing as npt
import pytest
from scipy import stats

from simgen import (CSV_COLUMNS, Cohort, Scenario, ScenarioConfig, SubjectRecord, censoring_indicators,
                    gen_dataset, gen_gap_time, gen_potential_outcomes)
from statcore import RngStream


class TestGapTime:

    def test_examples(self):
        npt.assert_allclose(gen_gap_time(math.exp(-1), 0.0), 1.0)
        npt.assert_allclose(gen_gap_time(math.exp(-1), math.log(2.0)), 0.5)
        npt.assert_allclose(gen_gap_time(math.exp(-1), 0.0, rate=4.0), 0.25)

    def test_exponential_mean(self):
        w = gen_gap_time(RngStream(8).uniform(1000000), 0.0)
        assert 0.997 <= w.mean() <= 1.003


class TestCensoringIndicators:

    def test_boundaries(self):
        delta1, delta2 = censoring_indicators([0.5, 1.0, 1.5, 0.2], [0.5, 0.1, 0.1, 0.2], 1.0)
        npt.assert_array_equal(delta1, [1, 1, 0, 1])
        npt.assert_array_equal(delta2, [1, 0, 0, 1])

    def test_no_tau(self):
        delta1, delta2 = censoring_indicators([5.0, 9.0], [1.0, 2.0], None)
        npt.assert_array_equal(delta1, [1, 1])
        npt.assert_array_equal(delta2, [1, 1])

    def test_monotone_in_tau(self, rng):
        w1, w2 = rng.exponential(size=1000), rng.exponential(size=1000)
        previous = censoring_indicators(w1, w2, 0.1)
        for tau in (0.25, 0.5, 1.0, 2.0):
            current = censoring_indicators(w1, w2, tau)
            assert (current[0] >= previous[0]).all()
            assert (current[1] >= previous[1]).all()
            assert (current[1] <= current[0]).all()
            previous = current


class TestScenarioConfig:

    @pytest.mark.parametrize("changes", [
        {"scenario": "crossover"}, {"n_subjects": 1}, {"baseline_rate": 0.0}, {"drift_sd": -4.0},
        {"tau": 0.0}, {"weight_fit": "both"}, {"truncate_percentile": 40.0},
    ])
    def test_invalid(self, changes):
        with pytest.raises(ValueError):
            ScenarioConfig(**changes)

    def test_prevalence_presets(self):
        assert ScenarioConfig.for_prevalence(Scenario.INDEPENDENT_GAPS, 0.5).alpha0 == 0.0
        varying = ScenarioConfig.for_prevalence(Scenario.TV_TREATMENT, 0.5)
        assert varying.gamma0 == -0.1
        assert varying.alpha0 == -1.1392
        assert ScenarioConfig.for_prevalence(Scenario.TV_TREATMENT, 0.25).gamma0 == -1.7233

    def test_unknown_prevalence(self):
        with pytest.raises(ValueError):
            ScenarioConfig.for_prevalence(Scenario.INDEPENDENT_GAPS, 0.4)

    def test_as_dict(self):
        config = ScenarioConfig(beta_c=0.5)
        assert config.as_dict()["beta_c"] == 0.5
        assert config.with_updates(beta_c=0.1).beta_c == 0.1
        assert config.beta_c == 0.5


class TestGenDataset:

    @pytest.fixture(scope="class")
    def large(self):
        return {scenario: gen_dataset(ScenarioConfig(scenario=scenario, n_subjects=100000, beta_c=0.7830),
                                      RngStream(31)) for scenario in Scenario.AVAILABLE}

    def test_reproducible(self, scenario):
        config = ScenarioConfig(scenario=scenario, n_subjects=500, beta_c=0.4, tau=1.0)
        first, second = gen_dataset(config, RngStream(3, 2)), gen_dataset(config, RngStream(3, 2))
        for column in CSV_COLUMNS:
            npt.assert_array_equal(getattr(first, column), getattr(second, column))
        other = gen_dataset(config, RngStream(3, 3))
        assert not np.array_equal(first.w1, other.w1)

    def test_first_event_shared_across_scenarios(self, large):
        reference = large[Scenario.INDEPENDENT_GAPS]
        for scenario in (Scenario.TV_COVARIATES, Scenario.TV_TREATMENT):
            for column in ("x1", "z1", "w1"):
                npt.assert_array_equal(getattr(large[scenario], column), getattr(reference, column))

    def test_fixed_covariates(self, large):
        cohort = large[Scenario.INDEPENDENT_GAPS]
        npt.assert_array_equal(cohort.x2, cohort.x1)
        npt.assert_array_equal(cohort.z2, cohort.z1)
        npt.assert_array_equal(large[Scenario.TV_COVARIATES].z2, large[Scenario.TV_COVARIATES].z1)

    def test_prevalence(self, large):
        assert 0.24 <= large[Scenario.INDEPENDENT_GAPS].z1.mean() <= 0.26
        assert 0.24 <= large[Scenario.TV_TREATMENT].z2.mean() <= 0.26

    def test_covariate_correlation(self, large):
        cohort = large[Scenario.TV_TREATMENT]
        correlation = np.corrcoef(cohort.x1, cohort.x2)[0, 1]
        assert 0.23 <= correlation <= 0.255

    def test_null_gaps_are_exponential(self):
        config = ScenarioConfig(scenario=Scenario.INDEPENDENT_GAPS, n_subjects=20000, beta_c=0.0, beta1=0.0)
        cohort = gen_dataset(config, RngStream(12))
        assert stats.kstest(cohort.w1, "expon").pvalue > 0.001
        assert stats.kstest(cohort.w2, "expon").pvalue > 0.001

    def test_uncensored_by_default(self, large):
        cohort = large[Scenario.TV_COVARIATES]
        assert cohort.delta1.all()
        assert cohort.delta2.all()

    @pytest.mark.parametrize("tau, event, low, high", [
        (1.0, 1, 0.25, 0.35),
        (1.0, 2, 0.5, 0.75),
        (0.25, 1, 0.65, 0.8),
        (0.25, 2, 0.85, 0.95),
    ])
    def test_censoring_fractions(self, tau, event, low, high):
        config = ScenarioConfig(scenario=Scenario.TV_TREATMENT, n_subjects=100000, beta_c=0.7830, tau=tau)
        cohort = gen_dataset(config, RngStream(77))
        delta = cohort.delta1 if event == 1 else cohort.delta2
        assert low <= 1 - delta.mean() <= high
        assert (cohort.delta2 <= cohort.delta1).all()


class TestPotentialOutcomes:

    def test_null_effect(self):
        config = ScenarioConfig(scenario=Scenario.TV_TREATMENT, n_subjects=1000, beta_c=0.0)
        cohort = gen_potential_outcomes(config, RngStream(1))
        npt.assert_array_equal(cohort.potential["w1_treated"], cohort.potential["w1_control"])
        npt.assert_array_equal(cohort.potential["w2_treated"], cohort.potential["w2_control"])

    def test_treatment_shortens_gaps(self):
        config = ScenarioConfig(scenario=Scenario.TV_COVARIATES, n_subjects=1000, beta_c=0.5)
        cohort = gen_potential_outcomes(config, RngStream(1))
        assert (cohort.potential["w1_treated"] < cohort.potential["w1_control"]).all()
        assert (cohort.potential["w2_treated"] < cohort.potential["w2_control"]).all()

    def test_observed_outcome_is_one_potential_outcome(self):
        config = ScenarioConfig(scenario=Scenario.TV_COVARIATES, n_subjects=1000, beta_c=0.5)
        cohort = gen_potential_outcomes(config, RngStream(6))
        treated = cohort.z1 == 1
        npt.assert_array_equal(cohort.w1[treated], cohort.potential["w1_treated"][treated])
        npt.assert_array_equal(cohort.w2[~treated], cohort.potential["w2_control"][~treated])
        observed = gen_dataset(config, RngStream(6))
        npt.assert_array_equal(observed.w1, cohort.w1)


class TestCohort:

    @pytest.fixture
    def cohort(self):
        return gen_potential_outcomes(ScenarioConfig(scenario=Scenario.TV_TREATMENT, n_subjects=50, tau=1.0),
                                      RngStream(2))

    def test_records(self, cohort):
        assert len(cohort) == 50
        record = cohort[3]
        assert isinstance(record, SubjectRecord)
        assert record.x1 == cohort.x1[3]
        assert record.w2_control == cohort.potential["w2_control"][3]
        assert sum(1 for _ in cohort) == 50

    def test_subset(self, cohort):
        kept = cohort.subset(cohort.delta1 == 1)
        assert len(kept) == int(cohort.delta1.sum())
        assert len(kept.potential["w1_treated"]) == len(kept)

    def test_csv_export(self, cohort, tmp_path):
        path = tmp_path / "cohort.csv"
        cohort.write_csv(path, preamble="# scenario = \"tv-treatment\"\n")
        assert path.read_text().splitlines()[1] == ",".join(CSV_COLUMNS)
        loaded = Cohort.read_csv(path, Scenario.TV_TREATMENT, tau=1.0)
        npt.assert_array_equal(loaded.w1, cohort.w1)
        npt.assert_array_equal(loaded.delta2, cohort.delta2)
        assert loaded.potential is None

    def test_csv_missing_columns(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x1,x2\n0.1,0.2\n")
        with pytest.raises(ValueError):
            Cohort.read_csv(path, Scenario.INDEPENDENT_GAPS)

    def test_csv_unwritable(self, cohort, tmp_path):
        with pytest.raises(OSError):
            cohort.write_csv(tmp_path / "missing" / "cohort.csv")
