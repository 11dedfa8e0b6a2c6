from dataclasses import asdict, dataclass
import logging
import math

import numpy as np
from scipy import optimize

from coxfit import SurvivalSample, fit_weighted_cox
from defaults_resolver import DefaultsResolver
from errors import BracketError, ConvergenceError
from simgen import Scenario, ScenarioConfig, gen_dataset, gen_potential_outcomes
from statcore import RngStream, expit

MIN_ORACLE_N = 100000
ORACLE_STREAM = 0
INTERCEPT_STREAM = 1

logger = logging.getLogger("Calibrate")


@dataclass
class CalibrationEntry:
    beta_m1: float
    beta_c: float
    beta_m2: float
    oracle_n: int = 0
    achieved_beta_m1: float = None
    tolerance: float = 0.0

    def __post_init__(self):
        if self.achieved_beta_m1 is None:
            self.achieved_beta_m1 = self.beta_m1

    @property
    def true_hr_m1(self):
        return math.exp(self.beta_m1)

    @property
    def true_hr_m2(self):
        return math.exp(self.beta_m2)

    def true_beta_m(self, event, scenario=Scenario.TV_COVARIATES):
        # without covariate drift the second gap time is a copy of the first in distribution
        if event == 1 or not Scenario.has_drift(scenario):
            return self.beta_m1
        return self.beta_m2

    def as_dict(self):
        return asdict(self)


def _oracle_config(config, beta_c, oracle_n):
    config = config or ScenarioConfig(scenario=Scenario.TV_COVARIATES)
    return config.with_updates(beta_c=beta_c, n_subjects=oracle_n, tau=None)


def marginal_hr_oracle(beta_c, event, config=None, oracle_n=None, seed=None):
    if event not in (1, 2):
        raise ValueError("event must be 1 or 2. Given {0}".format(event))
    oracle_n = oracle_n or DefaultsResolver().run("oracle_n")
    seed = DefaultsResolver().run("oracle_seed") if seed is None else seed
    if oracle_n < MIN_ORACLE_N:
        raise ValueError("Oracle population must hold at least {0} subjects. Given {1}".format(MIN_ORACLE_N, oracle_n))
    cohort = gen_potential_outcomes(_oracle_config(config, beta_c, oracle_n), RngStream(seed, ORACLE_STREAM))
    treated = cohort.potential["w%d_treated" % event]
    control = cohort.potential["w%d_control" % event]
    sample = SurvivalSample.build(
        time=np.concatenate([treated, control]),
        treatment=np.concatenate([np.ones(oracle_n), np.zeros(oracle_n)]),
        cluster=np.concatenate([cohort.ids, cohort.ids]))
    log_hr = fit_weighted_cox(sample).log_hr
    logger.debug("Oracle beta_c=%.6f event %d -> marginal log HR %.6f" % (beta_c, event, log_hr))
    return log_hr


class BetaCalibrator:

    MAX_ITER = 60
    STEP_TOLERANCE = 1e-4

    def __init__(self, tolerance=None, oracle_n=None, seed=None, config=None):
        self.tolerance = tolerance or DefaultsResolver().run("tolerance")
        self.oracle_n = oracle_n or DefaultsResolver().run("oracle_n")
        self.seed = DefaultsResolver().run("oracle_seed") if seed is None else seed
        self.config = config
        self.logger = logging.getLogger("BetaCalibrator")

    def oracle(self, beta_c, event):
        return marginal_hr_oracle(beta_c, event, self.config, self.oracle_n, self.seed)

    def calibrate(self, target_beta_m1):
        if target_beta_m1 < 0:
            raise ValueError("Target marginal log HR must be nonnegative. Given {0}".format(target_beta_m1))
        if target_beta_m1 == 0:
            return CalibrationEntry(0.0, 0.0, 0.0, self.oracle_n, 0.0, self.tolerance)

        low, high = target_beta_m1, 2.0 * target_beta_m1 + 0.5
        low_gap = self.oracle(low, 1) - target_beta_m1
        high_gap = self.oracle(high, 1) - target_beta_m1
        if low_gap > 0 or high_gap < 0:
            raise BracketError("Bracket [{0:.4f}, {1:.4f}] does not straddle target {2:.4f} (gaps {3:+.4f}, {4:+.4f})".format(
                low, high, target_beta_m1, low_gap, high_gap))

        for iteration in range(1, self.MAX_ITER + 1):
            middle = 0.5 * (low + high)
            achieved = self.oracle(middle, 1)
            gap = achieved - target_beta_m1
            self.logger.debug("Bisection %d: beta_c=%.6f achieved=%.6f gap=%+.2e" % (iteration, middle, achieved, gap))
            if gap < 0:
                low = middle
            else:
                high = middle
            if abs(gap) <= self.tolerance and high - low <= self.STEP_TOLERANCE:
                break
        else:
            raise ConvergenceError("Bisection for target {0:.4f} stopped at gap {1:+.4f}".format(target_beta_m1, gap))

        beta_m2 = self.oracle(middle, 2)
        self.logger.info("Calibrated beta_m1=%.4f -> beta_c=%.4f, beta_m2=%.4f" % (target_beta_m1, middle, beta_m2))
        return CalibrationEntry(
            beta_m1=target_beta_m1, beta_c=middle, beta_m2=beta_m2,
            oracle_n=self.oracle_n, achieved_beta_m1=achieved, tolerance=self.tolerance)


def calibrate_beta_c(target_beta_m1, tolerance=None, oracle_n=None, seed=None, config=None):
    return BetaCalibrator(tolerance, oracle_n, seed, config).calibrate(target_beta_m1)


def calibration_table(target_hrs, tolerance=None, oracle_n=None, seed=None, config=None):
    calibrator = BetaCalibrator(tolerance, oracle_n, seed, config)
    return [calibrator.calibrate(round(math.log(hr), 4)) for hr in sorted(target_hrs)]


def cached_calibration():
    return [CalibrationEntry(**row) for row in DefaultsResolver().calibration()]


def lookup_entry(target_hr, entries):
    for entry in entries:
        if abs(entry.true_hr_m1 - target_hr) < 1e-3:
            return entry
    raise ValueError("No calibration entry for marginal HR {0}. Available: {1}".format(
        target_hr, ", ".join("%.4g" % entry.true_hr_m1 for entry in entries)))


def calibrate_intercept(config, event, target_prevalence, oracle_n=None, seed=None):
    """Treatment-model intercept giving the target overall prevalence."""
    if not 0 < target_prevalence < 1:
        raise ValueError("Target prevalence must lie in (0, 1). Given {0}".format(target_prevalence))
    if event == 2 and not Scenario.has_varying_treatment(config.scenario):
        raise ValueError("Second-event treatment is only modelled in the {0} scenario".format(Scenario.TV_TREATMENT))
    oracle_n = oracle_n or DefaultsResolver().run("oracle_n")
    seed = DefaultsResolver().run("oracle_seed") if seed is None else seed
    cohort = gen_dataset(config.with_updates(n_subjects=oracle_n, tau=None), RngStream(seed, INTERCEPT_STREAM))
    if event == 1:
        offset = config.alpha1 * cohort.x1
    elif event == 2:
        offset = config.gamma1 * cohort.x2 + config.gamma2 * cohort.z1
    else:
        raise ValueError("event must be 1 or 2. Given {0}".format(event))

    def prevalence_gap(intercept):
        return float(np.mean(expit(intercept + offset))) - target_prevalence

    intercept = optimize.brentq(prevalence_gap, -20.0, 20.0, xtol=1e-10)
    logger.info("Event %d intercept for prevalence %.2f: %.4f" % (event, target_prevalence, intercept))
    return intercept
