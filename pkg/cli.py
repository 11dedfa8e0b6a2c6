import argparse
from dataclasses import dataclass, field, fields
import logging
import os
import sys

from calibrate import cached_calibration, calibrate_intercept, calibration_table, lookup_entry
from defaults_resolver import DefaultsResolver
from errors import BracketError, EstimationError, SimulationAborted
from harness import STACKED_EVENT, run_simulation
from simgen import Scenario, ScenarioConfig, WeightFit, gen_dataset
from statcore import RngStream
import table_emitter

logger = logging.getLogger("RecurWeight")

CMD_CALIBRATE = "calibrate"
CMD_SIMULATE = "simulate"
CMD_GENERATE = "generate"
CMD_INTERCEPTS = "intercepts"

AVAILABLE_CMDS = (CMD_CALIBRATE, CMD_SIMULATE, CMD_GENERATE, CMD_INTERCEPTS)

DEFAULT_TARGET_HRS = [1.0, 1.5, 2.0, 2.5, 3.0]
EVENT_CHOICES = ("1", "2", "stacked")

_CONFIG_FIELDS = {f.name for f in fields(ScenarioConfig)}


@dataclass
class RunManifest:
    command: str
    config: ScenarioConfig = field(default_factory=ScenarioConfig)
    target_hrs: list = field(default_factory=lambda: list(DEFAULT_TARGET_HRS))
    prevalences: list = field(default_factory=list)
    n_reps: int = 1000
    master_seed: int = 20190101
    oracle_n: int = 1000000
    oracle_seed: int = 1729
    tolerance: float = 0.005
    event: str = "2"
    recalibrate: bool = False
    output_format: str = table_emitter.FORMAT_CSV
    output_path: str = None

    def as_dict(self):
        manifest = {"command": self.command}
        manifest.update(self.config.as_dict())
        for f in fields(self):
            if f.name not in ("command", "config"):
                manifest[f.name] = getattr(self, f.name)
        return manifest

    @classmethod
    def from_dict(cls, manifest):
        manifest = dict(manifest)
        config = ScenarioConfig(**{key: manifest.pop(key) for key in list(manifest) if key in _CONFIG_FIELDS})
        own = {f.name for f in fields(cls)}
        unknown = set(manifest) - own
        if unknown:
            raise ValueError("Unknown manifest keys: {0}".format(", ".join(sorted(unknown))))
        return cls(config=config, **manifest)

    @property
    def event_code(self):
        return STACKED_EVENT if self.event == "stacked" else int(self.event)


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("{0} must be a positive integer".format(text))
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("{0} must be positive".format(text))
    return value


def _float_list(text):
    try:
        values = [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("{0} isn't a comma-separated list of numbers".format(text))
    if not values:
        raise argparse.ArgumentTypeError("Empty list")
    return values


def _add_output(parser):
    parser.add_argument("--format", dest="output_format", choices=table_emitter.AVAILABLE_FORMATS,
                        default=table_emitter.FORMAT_CSV)
    parser.add_argument("--out", dest="output_path", default=None, help="output file (stdout if omitted)")


def _add_scenario(parser):
    parser.add_argument("--scenario", choices=Scenario.AVAILABLE, default=None)
    parser.add_argument("--n", dest="n_subjects", type=_positive_int, default=DefaultsResolver().run("n_subjects"))
    parser.add_argument("--prevalence", type=float, default=0.25)
    parser.add_argument("--tau", type=_positive_float, default=None,
                        help="administrative censoring time (requires --scenario)")


def _add_oracle(parser):
    parser.add_argument("--oracle-n", dest="oracle_n", type=_positive_int, default=DefaultsResolver().run("oracle_n"))
    parser.add_argument("--tolerance", type=_positive_float, default=DefaultsResolver().run("tolerance"))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="recurweight",
        description="IPTW estimation of marginal hazard ratios for two gap times, by simulation")
    parser.add_argument("--from-manifest", dest="from_manifest", default=None,
                        help="re-run the command recorded in a table's manifest")
    commands = parser.add_subparsers(dest="command")

    calibrate = commands.add_parser(CMD_CALIBRATE, help="map marginal to conditional log hazard ratios")
    calibrate.add_argument("--targets", dest="target_hrs", type=_float_list, default=list(DEFAULT_TARGET_HRS))
    calibrate.add_argument("--seed", dest="oracle_seed", type=int, default=DefaultsResolver().run("oracle_seed"))
    _add_oracle(calibrate)
    _add_output(calibrate)

    simulate = commands.add_parser(CMD_SIMULATE, help="run the Monte Carlo study")
    _add_scenario(simulate)
    simulate.add_argument("--reps", dest="n_reps", type=_positive_int, default=DefaultsResolver().run("n_reps"))
    simulate.add_argument("--target-hr", dest="target_hrs", type=_float_list, default=list(DEFAULT_TARGET_HRS))
    simulate.add_argument("--seed", dest="master_seed", type=int, default=DefaultsResolver().run("master_seed"))
    simulate.add_argument("--event", choices=EVENT_CHOICES, default="2")
    simulate.add_argument("--recalibrate", action="store_true")
    simulate.add_argument("--oracle-seed", dest="oracle_seed", type=int, default=DefaultsResolver().run("oracle_seed"))
    simulate.add_argument("--weight-fit", dest="weight_fit", choices=WeightFit.AVAILABLE, default=WeightFit.OBSERVED)
    simulate.add_argument("--truncate-weights", dest="truncate_percentile", type=float, default=None)
    _add_oracle(simulate)
    _add_output(simulate)

    generate = commands.add_parser(CMD_GENERATE, help="write one simulated dataset as csv")
    _add_scenario(generate)
    generate.add_argument("--target-hr", dest="target_hrs", type=_float_list, default=[2.0])
    generate.add_argument("--seed", dest="master_seed", type=int, default=DefaultsResolver().run("master_seed"))
    generate.add_argument("--out", dest="output_path", default=None)

    intercepts = commands.add_parser(CMD_INTERCEPTS, help="solve treatment-model intercepts for target prevalences")
    intercepts.add_argument("--prevalence", dest="prevalences", type=_float_list, default=[0.25, 0.5])
    intercepts.add_argument("--seed", dest="oracle_seed", type=int, default=DefaultsResolver().run("oracle_seed"))
    _add_oracle(intercepts)
    _add_output(intercepts)
    return parser


def _scenario_config(parser, args):
    if args.scenario is None and args.tau is not None:
        parser.error("--tau requires --scenario")
    scenario = args.scenario or Scenario.INDEPENDENT_GAPS
    if args.prevalence not in DefaultsResolver().prevalences():
        parser.error("--prevalence must be one of {0}".format(
            ", ".join("%g" % p for p in DefaultsResolver().prevalences())))
    overrides = {"n_subjects": args.n_subjects, "tau": args.tau}
    for name in ("weight_fit", "truncate_percentile"):
        if getattr(args, name, None) is not None:
            overrides[name] = getattr(args, name)
    try:
        return ScenarioConfig.for_prevalence(scenario, args.prevalence, **overrides)
    except ValueError as error:
        parser.error(str(error))


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.from_manifest is not None:
        try:
            return RunManifest.from_dict(table_emitter.load_manifest(args.from_manifest))
        except (OSError, ValueError, TypeError) as error:
            parser.error("Can't read manifest from {0}: {1}".format(args.from_manifest, error))
    if args.command is None:
        parser.error("a command is required: {0}".format(", ".join(AVAILABLE_CMDS)))

    settings = {key: value for key, value in vars(args).items()
                if key in {f.name for f in fields(RunManifest)} and value is not None}
    if args.command in (CMD_SIMULATE, CMD_GENERATE):
        settings["config"] = _scenario_config(parser, args)
    if any(hr <= 0 for hr in settings.get("target_hrs", [1.0])):
        parser.error("hazard ratios must be positive")
    if any(not 0 < p < 1 for p in settings.get("prevalences", [0.5])):
        parser.error("prevalences must lie in (0, 1)")
    manifest = RunManifest(**settings)

    if manifest.command == CMD_SIMULATE:
        if manifest.event == "stacked" and manifest.config.scenario != Scenario.INDEPENDENT_GAPS:
            parser.error("--event stacked is only fitted in the {0} scenario".format(Scenario.INDEPENDENT_GAPS))
    if manifest.command == CMD_GENERATE and len(manifest.target_hrs) != 1:
        parser.error("generate takes a single --target-hr")
    if manifest.command in (CMD_SIMULATE, CMD_GENERATE) and not manifest.recalibrate:
        for hr in manifest.target_hrs:
            try:
                lookup_entry(hr, cached_calibration())
            except ValueError as error:
                if manifest.command == CMD_GENERATE:
                    parser.error(str(error))
                parser.error("{0}; pass --recalibrate to compute it".format(error))
    return manifest


def _calibration_entries(manifest):
    if manifest.command == CMD_SIMULATE and not manifest.recalibrate:
        cached = cached_calibration()
        return [lookup_entry(hr, cached) for hr in sorted(manifest.target_hrs)]
    return calibration_table(manifest.target_hrs, manifest.tolerance, manifest.oracle_n, manifest.oracle_seed)


def run_calibrate(manifest):
    entries = _calibration_entries(manifest)
    table_emitter.emit_calibration(entries, manifest.output_format, manifest.output_path, manifest.as_dict())


def run_simulate(manifest):
    rows = []
    for entry in _calibration_entries(manifest):
        summary = run_simulation(manifest.config, entry, manifest.n_reps, manifest.master_seed)
        rows.append(summary[manifest.event_code])
    table_emitter.emit_table(rows, manifest.output_format, manifest.output_path, manifest.as_dict())


def run_generate(manifest):
    entry = lookup_entry(manifest.target_hrs[0], cached_calibration())
    config = manifest.config.with_updates(beta_c=entry.beta_c)
    cohort = gen_dataset(config, RngStream(manifest.master_seed))
    preamble = table_emitter.manifest_header(manifest.as_dict())
    if manifest.output_path is None:
        sys.stdout.write(preamble)
        cohort.to_frame().to_csv(sys.stdout, index=False, float_format="%.17g")
    else:
        cohort.write_csv(manifest.output_path, preamble=preamble)


def run_intercepts(manifest):
    records = []
    for prevalence in sorted(manifest.prevalences):
        first = ScenarioConfig(scenario=Scenario.INDEPENDENT_GAPS)
        alpha0 = calibrate_intercept(first, 1, prevalence, manifest.oracle_n, manifest.oracle_seed)
        second = ScenarioConfig(scenario=Scenario.TV_TREATMENT)
        gamma0 = calibrate_intercept(second, 2, prevalence, manifest.oracle_n, manifest.oracle_seed)
        records.append({"prevalence": prevalence, "alpha0": alpha0, "gamma0": gamma0})
    table_emitter.emit_records(
        records, ["prevalence", "alpha0", "gamma0"], ["Prevalence", "alpha0 (scenarios 1-2)", "gamma0 (scenario 3)"],
        manifest.output_format, manifest.output_path, manifest.as_dict())


COMMANDS = {
    CMD_CALIBRATE: run_calibrate,
    CMD_SIMULATE: run_simulate,
    CMD_GENERATE: run_generate,
    CMD_INTERCEPTS: run_intercepts,
}


def configure_logging(conf_as_dict):
    level = logging.WARNING
    if conf_as_dict.get("LOG_LEVEL") == "DEBUG":
        level = logging.DEBUG
    elif conf_as_dict.get("LOG_LEVEL") == "INFO":
        level = logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")


def main(argv=None):
    configure_logging(os.environ)
    manifest = parse_args(argv)
    if manifest.command not in COMMANDS:
        raise ValueError("{0} isn't an available command".format(manifest.command))
    logger.info("Running %s" % manifest.command)
    try:
        COMMANDS[manifest.command](manifest)
    except (EstimationError, SimulationAborted, BracketError, OSError) as error:
        logger.error("%s failed: %s" % (manifest.command, error))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
