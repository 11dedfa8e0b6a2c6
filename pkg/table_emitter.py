import io
import json
import logging
import math
import sys

import pandas as pd
import tabulate
import toml

from harness import BIAS_ABSOLUTE, SummaryRow

FORMAT_CSV = "csv"
FORMAT_MD = "md"
FORMAT_JSON = "json"
AVAILABLE_FORMATS = (FORMAT_CSV, FORMAT_MD, FORMAT_JSON)

SUMMARY_COLUMNS = [
    "scenario", "prevalence", "tau", "true_log_hr", "true_hr", "est_log_hr", "est_hr",
    "bias_pct", "ase", "ese", "rse", "n", "reps", "seed", "failed"]
CALIBRATION_COLUMNS = ["beta_m1", "hr_m1", "beta_c", "beta_m2", "hr_m2"]

SUMMARY_HEADERS = [
    "Scenario", "Prevalence", "Tau", "True log HR", "True HR", "Est. log HR", "Est. HR",
    "Bias", "ASE", "ESE", "RSE", "N", "Reps", "Seed", "Failed"]
CALIBRATION_HEADERS = ["True log HR (event 1)", "True HR", "Conditional log HR",
                       "True log HR (event 2)", "True HR (event 2)"]

MANIFEST_PREFIX = "# "
NONE_MARKER = "none"

logger = logging.getLogger("TableEmitter")


def _real(value):
    if value is None:
        return ""
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return "%.4f" % value


def _bias(row):
    if row.bias_kind == BIAS_ABSOLUTE:
        return "abs:" + _real(row.bias_pct)
    return _real(row.bias_pct)


def summary_record(row):
    return {
        "scenario": row.scenario,
        "prevalence": _real(row.prevalence),
        "tau": _real(row.tau),
        "true_log_hr": _real(row.true_beta_m),
        "true_hr": _real(row.true_hr),
        "est_log_hr": _real(row.mean_beta_hat),
        "est_hr": _real(row.mean_hr),
        "bias_pct": _bias(row),
        "ase": _real(row.ase),
        "ese": _real(row.ese),
        "rse": _real(row.rse),
        "n": str(row.n_subjects),
        "reps": str(row.n_reps),
        "seed": "" if row.seed is None else str(row.seed),
        "failed": str(row.n_failed),
    }


def calibration_record(entry):
    return {
        "beta_m1": _real(entry.beta_m1),
        "hr_m1": _real(entry.true_hr_m1),
        "beta_c": _real(entry.beta_c),
        "beta_m2": _real(entry.beta_m2),
        "hr_m2": _real(entry.true_hr_m2),
    }


def manifest_header(manifest):
    text = toml.dumps({key: NONE_MARKER if value is None else value for key, value in manifest.items()})
    return "".join(MANIFEST_PREFIX + line + "\n" for line in text.splitlines() if line.strip())


def load_manifest(path):
    lines = []
    with open(path) as table_file:
        content = table_file.read()
    if content.lstrip().startswith("{"):
        return json.loads(content)["manifest"]
    for line in content.splitlines():
        if line.startswith(MANIFEST_PREFIX):
            lines.append(line[len(MANIFEST_PREFIX):])
        elif line.strip() in ("", "<!--", "-->"):
            continue
        else:
            break
    manifest = toml.loads("\n".join(lines))
    return {key: None if value == NONE_MARKER else value for key, value in manifest.items()}


def _render(records, columns, headers, fmt, manifest, json_rows):
    if fmt == FORMAT_CSV:
        buffer = io.StringIO()
        pd.DataFrame(records, columns=columns).to_csv(buffer, index=False)
        return manifest_header(manifest) + buffer.getvalue()
    if fmt == FORMAT_MD:
        table = tabulate.tabulate([[record[c] for c in columns] for record in records],
                                  headers=headers, tablefmt="pipe", disable_numparse=True)
        return "<!--\n" + manifest_header(manifest) + "-->\n\n" + table + "\n"
    if fmt == FORMAT_JSON:
        return json.dumps({"manifest": manifest, "rows": json_rows}, indent=2) + "\n"
    raise ValueError("{0} isn't an available format. Choose one of {1}".format(fmt, ", ".join(AVAILABLE_FORMATS)))


def _write(text, path):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w") as table_file:
            table_file.write(text)
    except OSError as error:
        raise OSError("Can't write table to {0}: {1}".format(path, error)) from error
    logger.info("Wrote %s" % path)


def emit_table(rows, fmt=FORMAT_CSV, path=None, manifest=None):
    rows = list(rows)
    if not rows:
        raise ValueError("No rows to emit")
    records = [summary_record(row) for row in rows]
    text = _render(records, SUMMARY_COLUMNS, SUMMARY_HEADERS, fmt, manifest or {},
                   [row.as_dict() for row in rows])
    _write(text, path)
    return text


def emit_calibration(entries, fmt=FORMAT_CSV, path=None, manifest=None):
    entries = sorted(entries, key=lambda entry: entry.beta_m1)
    if not entries:
        raise ValueError("No calibration entries to emit")
    records = [calibration_record(entry) for entry in entries]
    text = _render(records, CALIBRATION_COLUMNS, CALIBRATION_HEADERS, fmt, manifest or {},
                   [entry.as_dict() for entry in entries])
    _write(text, path)
    return text


def emit_records(records, columns, headers, fmt=FORMAT_CSV, path=None, manifest=None):
    records = list(records)
    if not records:
        raise ValueError("No records to emit")
    rendered = [{column: _real(record[column]) if isinstance(record[column], float) else str(record[column])
                 for column in columns} for record in records]
    text = _render(rendered, columns, headers, fmt, manifest or {}, records)
    _write(text, path)
    return text


def load_rows(path):
    with open(path) as table_file:
        return [SummaryRow(**fields) for fields in json.load(table_file)["rows"]]
