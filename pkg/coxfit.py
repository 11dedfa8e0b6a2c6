from dataclasses import dataclass
import logging

import numpy as np

from errors import ConvergenceError, MonotoneLikelihoodError, SingularInformationError


@dataclass
class SurvivalSample:
    time: np.ndarray
    event: np.ndarray
    treatment: np.ndarray
    weight: np.ndarray
    cluster: np.ndarray

    def __post_init__(self):
        self.time = np.asarray(self.time, dtype=float)
        n = self.time.shape[0]
        self.event = np.asarray(self.event, dtype=float)
        self.treatment = np.asarray(self.treatment, dtype=float)
        self.weight = np.asarray(self.weight, dtype=float)
        self.cluster = np.asarray(self.cluster)
        for name in ("event", "treatment", "weight", "cluster"):
            if getattr(self, name).shape != (n,):
                raise ValueError("{0} has shape {1}, expected ({2},)".format(name, getattr(self, name).shape, n))
        if n == 0:
            raise ValueError("Survival sample is empty")
        if not np.all(np.isfinite(self.time)) or (self.time <= 0).any():
            raise ValueError("Survival times must be finite and strictly positive")
        if not np.isin(self.event, (0.0, 1.0)).all():
            raise ValueError("Event indicators must be binary")
        if not np.all(np.isfinite(self.weight)) or (self.weight < 0).any():
            raise ValueError("Weights must be finite and nonnegative")

    @classmethod
    def build(cls, time, treatment, event=None, weight=None, cluster=None):
        n = len(time)
        return cls(
            time=time,
            event=np.ones(n) if event is None else event,
            treatment=treatment,
            weight=np.ones(n) if weight is None else weight,
            cluster=np.arange(n) if cluster is None else cluster)

    @classmethod
    def stack(cls, samples):
        return cls(
            time=np.concatenate([s.time for s in samples]),
            event=np.concatenate([s.event for s in samples]),
            treatment=np.concatenate([s.treatment for s in samples]),
            weight=np.concatenate([s.weight for s in samples]),
            cluster=np.concatenate([s.cluster for s in samples]))

    @property
    def n(self):
        return self.time.shape[0]

    def subset(self, mask):
        return SurvivalSample(
            time=self.time[mask],
            event=self.event[mask],
            treatment=self.treatment[mask],
            weight=self.weight[mask],
            cluster=self.cluster[mask])


@dataclass
class CoxFit:
    log_hr: float
    naive_se: float
    robust_se: float
    n_iter: int
    converged: bool
    score: float = 0.0

    @property
    def hazard_ratio(self):
        return float(np.exp(self.log_hr))


def _reverse_cumsum(values):
    return np.cumsum(values[::-1])[::-1]


class _RiskSets:
    """A sample sorted by time with each row's tie-block boundaries."""

    def __init__(self, sample):
        self.order = np.argsort(sample.time, kind="stable")
        self.time = sample.time[self.order]
        self.event = sample.event[self.order]
        self.z = sample.treatment[self.order]
        self.w = sample.weight[self.order]
        self.cluster = sample.cluster[self.order]
        # risk set of row i is every row from the first of its tie block on
        self.first = np.searchsorted(self.time, self.time, side="left")
        self.last = np.searchsorted(self.time, self.time, side="right") - 1
        self.dw = self.w * self.event
        self.is_event = self.dw > 0

    def sums(self, beta):
        risk = self.w * np.exp(beta * self.z)
        s0 = _reverse_cumsum(risk)[self.first]
        s1 = _reverse_cumsum(risk * self.z)[self.first]
        s2 = _reverse_cumsum(risk * self.z * self.z)[self.first]
        return s0, s1, s2

    def evaluate(self, beta):
        s0, s1, s2 = self.sums(beta)
        e = self.is_event
        dw, z = self.dw[e], self.z[e]
        zbar = s1[e] / s0[e]
        loglik = np.sum(dw * (beta * z - np.log(s0[e])))
        score = np.sum(dw * (z - zbar))
        information = np.sum(dw * (s2[e] / s0[e] - zbar * zbar))
        return float(loglik), float(score), float(information)

    def score_residuals(self, beta):
        s0, s1, _ = self.sums(beta)
        zbar = np.divide(s1, s0, out=np.zeros_like(s1), where=s0 > 0)
        increment = np.divide(self.dw, s0, out=np.zeros_like(s0), where=self.is_event)
        cumulative_hazard = np.cumsum(increment)[self.last]
        cumulative_zbar = np.cumsum(increment * zbar)[self.last]
        observed = self.event * (self.z - zbar)
        expected = np.exp(beta * self.z) * (self.z * cumulative_hazard - cumulative_zbar)
        sorted_residuals = self.w * (observed - expected)
        residuals = np.empty_like(sorted_residuals)
        residuals[self.order] = sorted_residuals
        return residuals


def partial_loglik(beta, sample):
    return _RiskSets(sample).evaluate(beta)[0]


def score_residuals(sample, log_hr):
    return _RiskSets(sample).score_residuals(log_hr)


def _sandwich(risk_sets, sample, log_hr):
    _, _, information = risk_sets.evaluate(log_hr)
    if not information > 0:
        raise SingularInformationError("Cox information is not positive at beta={0:.6f}".format(log_hr))
    residuals = risk_sets.score_residuals(log_hr)
    _, cluster_index = np.unique(sample.cluster, return_inverse=True)
    cluster_scores = np.bincount(cluster_index, weights=residuals)
    return float(np.sum(cluster_scores ** 2)) / information ** 2


def robust_variance(sample, log_hr):
    return _sandwich(_RiskSets(sample), sample, log_hr)


class CoxModel:

    MAX_ITER = 50
    MAX_HALVINGS = 10
    SCORE_TOLERANCE = 1e-9
    STEP_TOLERANCE = 1e-10
    DIVERGENCE_BOUND = 20.0

    def __init__(self, max_iter=MAX_ITER):
        self.max_iter = max_iter
        self.logger = logging.getLogger("CoxModel")

    def fit(self, sample):
        risk_sets = _RiskSets(sample)
        self.__check_contrast(risk_sets)
        beta = 0.0
        loglik, score, information = risk_sets.evaluate(beta)
        for iteration in range(1, self.max_iter + 1):
            if not information > 0:
                raise SingularInformationError("Cox information is not positive at beta={0:.6f}".format(beta))
            step = score / information
            candidate = beta + step
            candidate_loglik, candidate_score, candidate_information = risk_sets.evaluate(candidate)
            halvings = 0
            while not candidate_loglik >= loglik and halvings < self.MAX_HALVINGS:
                step /= 2.0
                candidate = beta + step
                candidate_loglik, candidate_score, candidate_information = risk_sets.evaluate(candidate)
                halvings += 1
            beta, loglik, score, information = candidate, candidate_loglik, candidate_score, candidate_information
            self.logger.debug("Newton iteration %d: beta=%.10f score=%.3e halvings=%d",
                iteration, beta, score, halvings)
            if abs(beta) > self.DIVERGENCE_BOUND:
                raise MonotoneLikelihoodError("Log hazard ratio diverged past {0}".format(self.DIVERGENCE_BOUND))
            if abs(score) < self.SCORE_TOLERANCE or abs(step) < self.STEP_TOLERANCE:
                break
        else:
            raise ConvergenceError("Newton-Raphson did not converge in {0} iterations".format(self.max_iter))

        if not information > 0:
            raise SingularInformationError("Cox information is not positive at beta={0:.6f}".format(beta))
        variance = _sandwich(risk_sets, sample, beta)
        return CoxFit(
            log_hr=beta,
            naive_se=float(np.sqrt(1.0 / information)),
            robust_se=float(np.sqrt(variance)),
            n_iter=iteration,
            converged=True,
            score=score)

    @staticmethod
    def __check_contrast(risk_sets):
        treated_events = np.count_nonzero(risk_sets.is_event & (risk_sets.z == 1))
        control_events = np.count_nonzero(risk_sets.is_event & (risk_sets.z == 0))
        if treated_events == 0 or control_events == 0:
            raise MonotoneLikelihoodError(
                "No treatment contrast: {0} treated and {1} control events".format(treated_events, control_events))


def fit_weighted_cox(sample):
    return CoxModel().fit(sample)
