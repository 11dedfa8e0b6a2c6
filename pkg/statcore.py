from dataclasses import dataclass, field
import logging

import numpy as np
from scipy import special

from errors import ConvergenceError, SeparationError, SingularInformationError

UINT64_MASK = (1 << 64) - 1

# 52 bits keep the half-cell offset exact, so the draws stay strictly inside (0, 1).
_UNIFORM_BITS = 52
_UNIFORM_SCALE = 2.0 ** -_UNIFORM_BITS


class RngStream:

    def __init__(self, seed, stream_id=0):
        self.seed = int(seed) & UINT64_MASK
        self.stream_id = int(stream_id) & UINT64_MASK
        seed_sequence = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.Philox(seed_sequence))

    def __repr__(self):
        return "RngStream(seed=%d, stream_id=%d)" % (self.seed, self.stream_id)

    def substream(self, stream_id):
        return RngStream(self.seed, stream_id)

    def spawn_seed(self, index):
        """64-bit seed for the index-th child of this stream's seed."""
        child = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, int(index)))
        return int(child.generate_state(1, dtype=np.uint64)[0])

    def uniform(self, size=None):
        bits = self.generator.integers(0, 1 << _UNIFORM_BITS, size=size, dtype=np.uint64)
        return (bits + 0.5) * _UNIFORM_SCALE

    def normal(self, mean=0.0, sd=1.0, size=None):
        return self.generator.normal(mean, sd, size=size)


def expit(x):
    return special.expit(x)


def logit(p):
    return special.logit(p)


def draw_uniform(stream, size=None):
    return stream.uniform(size)


def draw_normal(stream, mean=0.0, sd=1.0, size=None):
    if not sd > 0:
        raise ValueError("Normal sd must be positive. Given {0}".format(sd))
    return stream.normal(mean, sd, size)


@dataclass
class LogisticFit:
    coefficients: np.ndarray
    converged: bool
    n_iter: int
    fitted_probabilities: np.ndarray
    standard_errors: np.ndarray = field(repr=False)
    score_norm: float = 0.0

    def predict(self, design):
        design = np.atleast_2d(np.asarray(design, dtype=float))
        return _bounded(expit(design @ self.coefficients))


def _bounded(probabilities):
    eps = np.finfo(float).eps
    return np.clip(probabilities, eps, 1.0 - eps)


class LogisticRegression:
    """Weighted maximum likelihood for a binary response via IRLS."""

    MAX_ITER = 25
    TOLERANCE = 1e-8
    SEPARATION_BOUND = 30.0
    CONDITION_LIMIT = 1e14

    def __init__(self, max_iter=MAX_ITER, tolerance=TOLERANCE):
        self.max_iter = max_iter
        self.tolerance = tolerance
        self.logger = logging.getLogger("LogisticRegression")

    def fit(self, design, response, case_weights=None):
        X, y, w = self.__validate(design, response, case_weights)
        p = X.shape[1]
        response_mean = np.average(y, weights=w)
        if response_mean <= 0.0 or response_mean >= 1.0:
            raise SeparationError("Constant response (mean %.3f): the model is separated" % response_mean)

        coefficients = np.zeros(p)
        for iteration in range(1, self.max_iter + 1):
            mu = expit(X @ coefficients)
            information = self.__information(X, w, mu)
            score = X.T @ (w * (y - mu))
            step = self.__solve(information, score)
            coefficients = coefficients + step
            self.logger.debug("IRLS iteration %d: max |step| = %.3e", iteration, np.abs(step).max())
            if np.abs(coefficients).max() > self.SEPARATION_BOUND:
                raise SeparationError(
                    "Coefficient magnitude exceeded {0} at iteration {1}".format(self.SEPARATION_BOUND, iteration))
            if np.abs(step).max() < self.tolerance:
                break
        else:
            raise ConvergenceError("IRLS did not converge in {0} iterations".format(self.max_iter))

        mu = expit(X @ coefficients)
        information = self.__information(X, w, mu)
        covariance = np.linalg.inv(information)
        return LogisticFit(
            coefficients=coefficients,
            converged=True,
            n_iter=iteration,
            fitted_probabilities=_bounded(mu),
            standard_errors=np.sqrt(np.diag(covariance)),
            score_norm=float(np.abs(X.T @ (w * (y - mu))).max()))

    @staticmethod
    def __information(X, w, mu):
        return X.T @ (X * (w * mu * (1.0 - mu))[:, None])

    def __solve(self, information, score):
        if not np.all(np.isfinite(information)) or np.linalg.cond(information) > self.CONDITION_LIMIT:
            raise SingularInformationError("Logistic information matrix is singular")
        try:
            return np.linalg.solve(information, score)
        except np.linalg.LinAlgError as error:
            raise SingularInformationError("Logistic information matrix is singular") from error

    @staticmethod
    def __validate(design, response, case_weights):
        X = np.asarray(design, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(response, dtype=float)
        n, p = X.shape
        if y.shape != (n,):
            raise ValueError("Response has shape {0}, expected ({1},)".format(y.shape, n))
        if n < p:
            raise ValueError("Need at least as many rows as columns. Given {0}x{1}".format(n, p))
        if not np.isin(y, (0.0, 1.0)).all():
            raise ValueError("Response must be binary")
        if case_weights is None:
            w = np.ones(n)
        else:
            w = np.asarray(case_weights, dtype=float)
            if w.shape != (n,) or not np.all(np.isfinite(w)) or (w < 0).any():
                raise ValueError("Case weights must be finite, nonnegative and of length {0}".format(n))
            if w.sum() <= 0:
                raise ValueError("Case weights sum to zero")
        return X, y, w


def fit_logistic(design, response, case_weights=None):
    return LogisticRegression().fit(design, response, case_weights)


def with_intercept(*columns):
    columns = [np.asarray(column, dtype=float) for column in columns]
    return np.column_stack([np.ones(len(columns[0]))] + columns)
