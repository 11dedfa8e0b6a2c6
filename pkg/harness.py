from dataclasses import asdict, dataclass, field
import logging
import math

import numpy as np

from coxfit import SurvivalSample, fit_weighted_cox
from defaults_resolver import DefaultsResolver
from errors import EstimationError, SimulationAborted
from iptw import build_censoring_weights, build_treatment_weights
from replicate_pool import ReplicatePool
from simgen import Scenario, WeightFit, gen_dataset
from statcore import RngStream

# event 0 is the fit over both gap times stacked and clustered by subject
STACKED_EVENT = 0
EVENTS = (1, 2, STACKED_EVENT)

BIAS_RELATIVE = "relative"
BIAS_ABSOLUTE = "absolute"

logger = logging.getLogger("Harness")


@dataclass
class ReplicateResult:
    replicate_seed: int
    beta_hat_1: float = math.nan
    beta_hat_2: float = math.nan
    naive_se_1: float = math.nan
    naive_se_2: float = math.nan
    robust_se_1: float = math.nan
    robust_se_2: float = math.nan
    beta_hat_stacked: float = math.nan
    naive_se_stacked: float = math.nan
    robust_se_stacked: float = math.nan
    failed: bool = False
    error: str = None
    diagnostics: dict = field(default_factory=dict)

    def estimate(self, event):
        suffix = "stacked" if event == STACKED_EVENT else str(event)
        return (getattr(self, "beta_hat_" + suffix),
                getattr(self, "naive_se_" + suffix),
                getattr(self, "robust_se_" + suffix))


@dataclass
class SummaryRow:
    true_beta_m: float
    true_hr: float
    mean_beta_hat: float
    mean_hr: float
    bias_pct: float
    ase: float
    ese: float
    rse: float
    n_subjects: int
    n_reps: int
    n_failed: int
    scenario: str = Scenario.INDEPENDENT_GAPS
    prevalence: float = 0.25
    tau: float = None
    event: int = 2
    bias_kind: str = BIAS_RELATIVE
    ese_centered: float = math.nan
    seed: int = None

    @property
    def n_successful(self):
        return self.n_reps - self.n_failed

    def as_dict(self):
        return asdict(self)


def _observed_weights(cohort, rows, event, config):
    """Treatment weights for the rows entering one event's analysis."""
    if config.weight_fit == WeightFit.FULL:
        treatment = build_treatment_weights(cohort, truncate_percentile=config.truncate_percentile)
        weights = treatment.sw1 if event == 1 else treatment.sw2
        return weights[rows], treatment
    treatment = build_treatment_weights(cohort.subset(rows), truncate_percentile=config.truncate_percentile)
    return (treatment.sw1 if event == 1 else treatment.sw2), treatment


def _event_samples(config, cohort, diagnostics):
    ids = cohort.ids
    if config.tau is None:
        treatment = build_treatment_weights(cohort, truncate_percentile=config.truncate_percentile)
        diagnostics["mean_sw1"] = float(treatment.sw1.mean())
        diagnostics["mean_sw2"] = float(treatment.sw2.mean())
        weights = {1: treatment.sw1, 2: treatment.sw2}
        rows = {1: np.ones(len(cohort), dtype=bool), 2: np.ones(len(cohort), dtype=bool)}
    else:
        censoring = build_censoring_weights(cohort, config.tau)
        rows = {1: censoring.delta1 == 1, 2: censoring.delta2 == 1}
        dagger = {1: censoring.sw1_dag, 2: censoring.sw2_dag}
        weights = {}
        for event in (1, 2):
            treatment_weights, _ = _observed_weights(cohort, rows[event], event, config)
            diagnostics["mean_sw%d" % event] = float(treatment_weights.mean())
            diagnostics["mean_sw%d_dag" % event] = float(dagger[event][rows[event]].mean())
            weights[event] = np.zeros(len(cohort))
            weights[event][rows[event]] = treatment_weights * dagger[event][rows[event]]

    times = {1: cohort.w1, 2: cohort.w2}
    treatments = {1: cohort.z1, 2: cohort.z2}
    samples = {}
    for event in (1, 2):
        mask = rows[event]
        samples[event] = SurvivalSample.build(
            time=times[event][mask], treatment=treatments[event][mask],
            weight=weights[event][mask], cluster=ids[mask])
    diagnostics["max_weight"] = float(max(samples[1].weight.max(), samples[2].weight.max()))
    diagnostics["min_weight"] = float(min(samples[1].weight.min(), samples[2].weight.min()))
    return samples


def _diagnostics(cohort):
    return {
        "prevalence_z1": float(cohort.z1.mean()),
        "prevalence_z2": float(cohort.z2.mean()),
        "censored_1": float(1.0 - cohort.delta1.mean()),
        "censored_2": float(1.0 - cohort.delta2.mean()),
    }


def run_replicate(config, replicate_seed):
    cohort = gen_dataset(config, RngStream(replicate_seed, 0))
    diagnostics = _diagnostics(cohort)
    diagnostics["weight_fit"] = config.weight_fit
    try:
        samples = _event_samples(config, cohort, diagnostics)
        fits = {event: fit_weighted_cox(samples[event]) for event in (1, 2)}
        stacked = None
        if config.scenario == Scenario.INDEPENDENT_GAPS:
            stacked = fit_weighted_cox(SurvivalSample.stack([samples[1], samples[2]]))
    except EstimationError as error:
        logger.warning("Replicate seed %d failed: %s" % (replicate_seed, error))
        return ReplicateResult(replicate_seed, failed=True, error=str(error), diagnostics=diagnostics)

    result = ReplicateResult(
        replicate_seed,
        beta_hat_1=fits[1].log_hr, beta_hat_2=fits[2].log_hr,
        naive_se_1=fits[1].naive_se, naive_se_2=fits[2].naive_se,
        robust_se_1=fits[1].robust_se, robust_se_2=fits[2].robust_se,
        diagnostics=diagnostics)
    if stacked is not None:
        result.beta_hat_stacked = stacked.log_hr
        result.naive_se_stacked = stacked.naive_se
        result.robust_se_stacked = stacked.robust_se
    return result


def summarize(results, truth, event, scenario=Scenario.INDEPENDENT_GAPS, config=None, master_seed=None):
    results = list(results)
    if not results:
        raise ValueError("Nothing to summarize: no replicate results")
    successful = [result for result in results if not result.failed]
    if not successful:
        raise ValueError("Nothing to summarize: every replicate failed")

    true_beta = truth.true_beta_m(1 if event == STACKED_EVENT else event, scenario)
    estimates = np.array([result.estimate(event) for result in successful], dtype=float)
    if np.isnan(estimates).any():
        raise ValueError("Event {0} was not fitted in this scenario".format(event))
    beta_hat, naive_se, robust_se = estimates.T
    # sorted so the sums do not depend on completion order
    beta_hat = np.sort(beta_hat)
    mean_beta = float(np.mean(beta_hat))

    if true_beta == 0:
        bias, bias_kind = mean_beta, BIAS_ABSOLUTE
    else:
        bias, bias_kind = 100.0 * (mean_beta - true_beta) / true_beta, BIAS_RELATIVE

    if len(beta_hat) < 2:
        logger.warning("Only one successful replicate: ESE is undefined")
        ese = ese_centered = math.nan
    else:
        ese = float(np.sqrt(np.sum((beta_hat - true_beta) ** 2) / (len(beta_hat) - 1)))
        ese_centered = float(np.std(beta_hat, ddof=1))

    return SummaryRow(
        true_beta_m=true_beta,
        true_hr=math.exp(true_beta),
        mean_beta_hat=mean_beta,
        mean_hr=math.exp(mean_beta),
        bias_pct=bias,
        ase=float(np.mean(np.sort(naive_se))),
        ese=ese,
        rse=float(np.mean(np.sort(robust_se))),
        n_subjects=config.n_subjects if config is not None else 0,
        n_reps=len(results),
        n_failed=len(results) - len(successful),
        scenario=scenario,
        prevalence=config.prevalence if config is not None else math.nan,
        tau=config.tau if config is not None else None,
        event=event,
        bias_kind=bias_kind,
        ese_centered=ese_centered,
        seed=master_seed)


def replicate_seeds(master_seed, n_reps):
    master = RngStream(master_seed)
    return [master.spawn_seed(index) for index in range(n_reps)]


def run_simulation(config, truth, n_reps=None, master_seed=None, threads=None, abort_fraction=None):
    n_reps = DefaultsResolver().run("n_reps") if n_reps is None else n_reps
    master_seed = DefaultsResolver().run("master_seed") if master_seed is None else master_seed
    abort_fraction = abort_fraction if abort_fraction is not None else DefaultsResolver().run("abort_fraction")
    if n_reps < 1:
        raise ValueError("n_reps must be at least 1. Given {0}".format(n_reps))
    beta_c = truth.beta_c
    if config.beta_c != beta_c:
        config = config.with_updates(beta_c=beta_c)

    logger.info("Running %d replicates of %s (n=%d, beta_c=%.4f, tau=%s)" % (
        n_reps, config.scenario, config.n_subjects, beta_c, config.tau))
    pool = ReplicatePool(lambda seed: run_replicate(config, seed), threads)
    results = pool.run(replicate_seeds(master_seed, n_reps))

    n_failed = sum(result.failed for result in results)
    if n_failed > abort_fraction * n_reps:
        raise SimulationAborted(n_failed, n_reps, abort_fraction)
    if n_failed:
        logger.warning("%d of %d replicates failed and are excluded" % (n_failed, n_reps))

    events = (STACKED_EVENT, 1, 2) if config.scenario == Scenario.INDEPENDENT_GAPS else (1, 2)
    rows = {event: summarize(results, truth, event, config.scenario, config, master_seed) for event in events}
    for event, row in rows.items():
        logger.info("Event %d: mean log HR %.4f vs %.4f, ASE %.4f ESE %.4f RSE %.4f" % (
            event, row.mean_beta_hat, row.true_beta_m, row.ase, row.ese, row.rse))
    return rows
