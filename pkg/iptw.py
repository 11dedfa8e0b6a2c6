from dataclasses import dataclass
import logging

import numpy as np

from errors import CensoringError
from simgen import Scenario, censoring_indicators
from statcore import fit_logistic, with_intercept

logger = logging.getLogger("IPTW")


@dataclass
class TreatmentWeights:
    sw1: np.ndarray
    sw2: np.ndarray
    p_marginal: float
    p_joint: np.ndarray
    e1: np.ndarray
    e2: np.ndarray


@dataclass
class CensoringWeights:
    sw1_dag: np.ndarray
    sw2_dag: np.ndarray
    delta1: np.ndarray
    delta2: np.ndarray


def _check_probability(values, name):
    values = np.asarray(values, dtype=float)
    if not np.all((values > 0) & (values < 1)):
        raise ValueError("{0} must lie strictly inside (0, 1)".format(name))
    return values


def _check_joint(p_joint):
    p_joint = np.asarray(p_joint, dtype=float)
    if p_joint.shape != (2, 2) or (p_joint < 0).any() or abs(p_joint.sum() - 1.0) > 1e-12:
        raise ValueError("p_joint must be a nonnegative 2x2 table summing to 1")
    return p_joint


def stabilized_weight_e1(z1, e1, p1):
    e1 = _check_probability(e1, "e1")
    _check_probability(p1, "p1")
    z1 = np.asarray(z1)
    return p1 * z1 / e1 + (1.0 - p1) * (1 - z1) / (1.0 - e1)


def stabilized_weight_e2(z1, z2, e1, e2, p_joint):
    e1 = _check_probability(e1, "e1")
    e2 = _check_probability(e2, "e2")
    p_joint = _check_joint(p_joint)
    z1 = np.asarray(z1, dtype=np.int64)
    z2 = np.asarray(z2, dtype=np.int64)
    first = np.where(z1 == 1, e1, 1.0 - e1)
    second = np.where(z2 == 1, e2, 1.0 - e2)
    return p_joint[z1, z2] / (first * second)


def joint_distribution(z1, z2):
    z1 = np.asarray(z1, dtype=np.int64)
    z2 = np.asarray(z2, dtype=np.int64)
    counts = np.bincount(2 * z1 + z2, minlength=4).reshape(2, 2)
    return counts / counts.sum()


def truncate_weights(weights, percentile):
    low, high = np.percentile(weights, [100.0 - percentile, percentile])
    return np.clip(weights, low, high)


def build_treatment_weights(cohort, scenario=None, truncate_percentile=None):
    scenario = Scenario.check(scenario or cohort.scenario)
    first_model = fit_logistic(with_intercept(cohort.x1), cohort.z1)
    e1 = first_model.fitted_probabilities
    p1 = float(np.mean(cohort.z1))
    sw1 = stabilized_weight_e1(cohort.z1, e1, p1)

    if Scenario.has_varying_treatment(scenario):
        second_model = fit_logistic(with_intercept(cohort.x2, cohort.z1), cohort.z2)
        e2 = second_model.fitted_probabilities
        p_joint = joint_distribution(cohort.z1, cohort.z2)
        sw2 = stabilized_weight_e2(cohort.z1, cohort.z2, e1, e2, p_joint)
    else:
        # Z(2) = Z(1) with certainty, so the second-event factor is one.
        e2 = e1
        p_joint = np.diag([1.0 - p1, p1])
        sw2 = sw1.copy()

    if truncate_percentile is not None:
        sw1 = truncate_weights(sw1, truncate_percentile)
        sw2 = truncate_weights(sw2, truncate_percentile)
    logger.debug("Treatment weights: mean sw1 %.4f, mean sw2 %.4f, max %.2f" % (
        sw1.mean(), sw2.mean(), max(sw1.max(), sw2.max())))
    return TreatmentWeights(sw1=sw1, sw2=sw2, p_marginal=p1, p_joint=p_joint, e1=e1, e2=e2)


def _history_design(cohort):
    columns = [cohort.x1]
    if Scenario.has_drift(cohort.scenario):
        columns.append(cohort.x2)
    columns.append(cohort.z1)
    if Scenario.has_varying_treatment(cohort.scenario):
        columns.append(cohort.z2)
    return with_intercept(*columns)


def build_censoring_weights(cohort, tau):
    delta1, delta2 = censoring_indicators(cohort.w1, cohort.w2, tau)
    n = len(cohort)
    observed1 = delta1 == 1
    observed2 = delta2 == 1
    if not observed1.any():
        raise CensoringError("Every subject is censored before the first event (tau={0})".format(tau))
    if not observed2.any():
        raise CensoringError("Every subject is censored before the second event (tau={0})".format(tau))

    if observed1.all():
        first_ratio = np.ones(n)
    else:
        first_model = fit_logistic(with_intercept(cohort.x1, cohort.z1), delta1)
        first_ratio = delta1.mean() / first_model.fitted_probabilities

    second_ratio = np.ones(n)
    at_risk = cohort.subset(observed1)
    if not observed2[observed1].all():
        second_model = fit_logistic(_history_design(at_risk), delta2[observed1])
        second_ratio[observed1] = delta2[observed1].mean() / second_model.fitted_probabilities

    sw1_dag = np.where(observed1, first_ratio, 0.0)
    sw2_dag = np.where(observed2, first_ratio * second_ratio, 0.0)
    logger.debug("Censoring weights at tau=%s: %.1f%% / %.1f%% censored" % (
        tau, 100.0 * (1.0 - delta1.mean()), 100.0 * (1.0 - delta2.mean())))
    return CensoringWeights(sw1_dag=sw1_dag, sw2_dag=sw2_dag, delta1=delta1, delta2=delta2)
