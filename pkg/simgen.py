from dataclasses import dataclass, field, fields, replace
import logging
import math

import numpy as np
import pandas as pd

from defaults_resolver import DefaultsResolver
from statcore import draw_normal, draw_uniform, expit

LOG_1_5 = math.log(1.5)

CSV_COLUMNS = ["x1", "x2", "z1", "z2", "w1", "w2", "delta1", "delta2"]
POTENTIAL_COLUMNS = ["w1_treated", "w1_control", "w2_treated", "w2_control"]

logger = logging.getLogger("SimGen")


class Scenario:

    INDEPENDENT_GAPS = "independent"
    TV_COVARIATES = "tv-covariates"
    TV_TREATMENT = "tv-treatment"

    AVAILABLE = (INDEPENDENT_GAPS, TV_COVARIATES, TV_TREATMENT)

    @classmethod
    def check(cls, scenario):
        if scenario not in cls.AVAILABLE:
            raise ValueError("{0} isn't an available scenario. Choose one of {1}".format(
                scenario, ", ".join(cls.AVAILABLE)))
        return scenario

    @classmethod
    def has_drift(cls, scenario):
        return scenario != cls.INDEPENDENT_GAPS

    @classmethod
    def has_varying_treatment(cls, scenario):
        return scenario == cls.TV_TREATMENT


class WeightFit:

    OBSERVED = "observed"
    FULL = "full"

    AVAILABLE = (OBSERVED, FULL)


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = Scenario.INDEPENDENT_GAPS
    n_subjects: int = 10000
    alpha0: float = -1.1392
    alpha1: float = LOG_1_5
    gamma0: float = -1.7233
    gamma1: float = LOG_1_5
    gamma2: float = LOG_1_5
    beta1: float = LOG_1_5
    beta_c: float = 0.0
    baseline_rate: float = 1.0
    drift_sd: float = 4.0
    tau: float = None
    prevalence: float = 0.25
    # analysis options
    weight_fit: str = WeightFit.OBSERVED
    truncate_percentile: float = None

    def __post_init__(self):
        Scenario.check(self.scenario)
        if self.n_subjects < 2:
            raise ValueError("n_subjects must be at least 2. Given {0}".format(self.n_subjects))
        if not self.baseline_rate > 0:
            raise ValueError("baseline_rate must be positive. Given {0}".format(self.baseline_rate))
        if not self.drift_sd > 0:
            raise ValueError("drift_sd must be positive. Given {0}".format(self.drift_sd))
        if self.tau is not None and not self.tau > 0:
            raise ValueError("tau must be positive. Given {0}".format(self.tau))
        if self.weight_fit not in WeightFit.AVAILABLE:
            raise ValueError("{0} isn't an available weight fit".format(self.weight_fit))
        if self.truncate_percentile is not None and not 50 < self.truncate_percentile < 100:
            raise ValueError("truncate_percentile must lie in (50, 100). Given {0}".format(self.truncate_percentile))

    @classmethod
    def for_prevalence(cls, scenario, prevalence, **overrides):
        intercepts = DefaultsResolver().intercepts(prevalence)
        if Scenario.has_varying_treatment(scenario):
            alpha0 = DefaultsResolver().intercepts(0.25)["alpha0"]
            gamma0 = intercepts["gamma0"]
        else:
            alpha0 = intercepts["alpha0"]
            gamma0 = DefaultsResolver().intercepts(0.25)["gamma0"]
        settings = {"scenario": scenario, "prevalence": prevalence, "alpha0": alpha0, "gamma0": gamma0}
        settings.update(overrides)
        return cls(**settings)

    def with_updates(self, **changes):
        return replace(self, **changes)

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class SubjectRecord:
    x1: float
    x2: float
    z1: int
    z2: int
    w1: float
    w2: float
    delta1: int
    delta2: int
    w1_treated: float = None
    w1_control: float = None
    w2_treated: float = None
    w2_control: float = None


@dataclass
class Cohort:
    """Columnar store of SubjectRecords for one simulated dataset."""

    scenario: str
    x1: np.ndarray
    x2: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    delta1: np.ndarray
    delta2: np.ndarray
    tau: float = None
    potential: dict = field(default=None, repr=False)

    def __len__(self):
        return self.x1.shape[0]

    def __getitem__(self, index):
        record = SubjectRecord(
            x1=float(self.x1[index]), x2=float(self.x2[index]),
            z1=int(self.z1[index]), z2=int(self.z2[index]),
            w1=float(self.w1[index]), w2=float(self.w2[index]),
            delta1=int(self.delta1[index]), delta2=int(self.delta2[index]))
        if self.potential is not None:
            for column in POTENTIAL_COLUMNS:
                setattr(record, column, float(self.potential[column][index]))
        return record

    def __iter__(self):
        for index in range(len(self)):
            yield self[index]

    @property
    def ids(self):
        return np.arange(len(self))

    def subset(self, mask):
        potential = None
        if self.potential is not None:
            potential = {key: values[mask] for key, values in self.potential.items()}
        return Cohort(
            scenario=self.scenario,
            x1=self.x1[mask], x2=self.x2[mask], z1=self.z1[mask], z2=self.z2[mask],
            w1=self.w1[mask], w2=self.w2[mask], delta1=self.delta1[mask], delta2=self.delta2[mask],
            tau=self.tau, potential=potential)

    def to_frame(self, include_potential=False):
        frame = pd.DataFrame({column: getattr(self, column) for column in CSV_COLUMNS})
        if include_potential and self.potential is not None:
            for column in POTENTIAL_COLUMNS:
                frame[column] = self.potential[column]
        return frame

    def write_csv(self, path, include_potential=False, preamble=""):
        try:
            with open(path, "w") as csv_file:
                csv_file.write(preamble)
                self.to_frame(include_potential).to_csv(csv_file, index=False, float_format="%.17g")
        except OSError as error:
            raise OSError("Can't write cohort to {0}: {1}".format(path, error)) from error
        logger.info("Wrote %d subjects to %s" % (len(self), path))

    @classmethod
    def read_csv(cls, path, scenario, tau=None):
        frame = pd.read_csv(path, comment="#")
        missing = set(CSV_COLUMNS) - set(frame.columns)
        if missing:
            raise ValueError("{0} lacks columns {1}".format(path, ", ".join(sorted(missing))))
        potential = None
        if set(POTENTIAL_COLUMNS) <= set(frame.columns):
            potential = {column: frame[column].to_numpy(dtype=float) for column in POTENTIAL_COLUMNS}
        return cls(
            scenario=Scenario.check(scenario),
            x1=frame["x1"].to_numpy(dtype=float), x2=frame["x2"].to_numpy(dtype=float),
            z1=frame["z1"].to_numpy(dtype=np.int64), z2=frame["z2"].to_numpy(dtype=np.int64),
            w1=frame["w1"].to_numpy(dtype=float), w2=frame["w2"].to_numpy(dtype=float),
            delta1=frame["delta1"].to_numpy(dtype=np.int64), delta2=frame["delta2"].to_numpy(dtype=np.int64),
            tau=tau, potential=potential)


def gen_gap_time(u, linear_predictor, rate=1.0):
    return -np.log(u) / (rate * np.exp(linear_predictor))


def censoring_indicators(w1, w2, tau):
    w1 = np.asarray(w1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    if tau is None:
        return np.ones(w1.shape, dtype=np.int64), np.ones(w2.shape, dtype=np.int64)
    delta1 = (w1 <= tau).astype(np.int64)
    delta2 = (w1 + w2 <= tau).astype(np.int64)
    return delta1, delta2


@dataclass
class _Draws:
    x1: np.ndarray
    u_z1: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    v: np.ndarray
    u_z2: np.ndarray


# Blocks are drawn in one order for every scenario so that scenarios share their first-event draws.
def _draw(config, stream):
    n = config.n_subjects
    return _Draws(
        x1=draw_normal(stream, 0.0, 1.0, n),
        u_z1=draw_uniform(stream, n),
        u1=draw_uniform(stream, n),
        u2=draw_uniform(stream, n),
        v=draw_normal(stream, 0.0, config.drift_sd, n),
        u_z2=draw_uniform(stream, n))


def _second_covariate(config, draws):
    if Scenario.has_drift(config.scenario):
        return draws.x1 + draws.v
    return draws.x1


def _build_cohort(config, draws):
    x1 = draws.x1
    x2 = _second_covariate(config, draws)
    z1 = (draws.u_z1 < expit(config.alpha0 + config.alpha1 * x1)).astype(np.int64)
    if Scenario.has_varying_treatment(config.scenario):
        z2 = (draws.u_z2 < expit(config.gamma0 + config.gamma1 * x2 + config.gamma2 * z1)).astype(np.int64)
    else:
        z2 = z1.copy()
    rate = config.baseline_rate
    w1 = gen_gap_time(draws.u1, config.beta_c * z1 + config.beta1 * x1, rate)
    w2 = gen_gap_time(draws.u2, config.beta_c * z2 + config.beta1 * x2, rate)
    delta1, delta2 = censoring_indicators(w1, w2, config.tau)
    logger.debug("Generated %d subjects (%s), prevalence %.3f / %.3f" % (
        len(x1), config.scenario, z1.mean(), z2.mean()))
    return Cohort(
        scenario=config.scenario, x1=x1, x2=x2, z1=z1, z2=z2, w1=w1, w2=w2,
        delta1=delta1, delta2=delta2, tau=config.tau)


def gen_dataset(config, stream):
    return _build_cohort(config, _draw(config, stream))


def gen_potential_outcomes(config, stream):
    # Both arms reuse each subject's event uniforms; under intervention z(1) = z(2) = arm.
    draws = _draw(config, stream)
    cohort = _build_cohort(config, draws)
    rate = config.baseline_rate
    potential = {}
    for arm, label in ((1, "treated"), (0, "control")):
        potential["w1_" + label] = gen_gap_time(draws.u1, config.beta_c * arm + config.beta1 * cohort.x1, rate)
        potential["w2_" + label] = gen_gap_time(draws.u2, config.beta_c * arm + config.beta1 * cohort.x2, rate)
    cohort.potential = potential
    return cohort
