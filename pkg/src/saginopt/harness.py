"""Experiment runner and command-line interface.

Subcommands: ``run`` (Monte Carlo sweep to CSV), ``validate`` (scenario config
check), ``trace`` (single optimization with per-block logging). Rain and UE
placement derive from the seed alone, so records are paired across schemes
and sweep points. The default CSV omits wall-clock timings so repeated runs
are byte-identical; pass ``--timings`` to include them.
"""

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .bcd import (BcdOptions, InitializationInfeasible, SCHEMES, check_feasibility,
                  optimize)
from .channel import build_channels, sample_rain
from .scenario import (ConfigError, dbm_to_watts, default_scenario,
                       scenario_from_config, validate)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3

SWEEP_PARAMS = ("none", "bs_power", "num_ues")

CSV_COLUMNS = ("scheme", "sweep_param", "sweep_value", "seed", "iteration",
               "final", "weighted_sum_rate", "es_rates", "ue_rates", "feasible")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario_path: str = None
    sweep_param: str = "none"
    sweep_values: tuple = ()
    seeds: tuple = (0,)
    scheme: str = "proposed"
    out_path: str = "records.csv"
    workers: int = 1
    timings: bool = False
    options: BcdOptions = field(default_factory=BcdOptions)

    def check(self):
        if not self.seeds:
            raise ConfigError("seed list must not be empty")
        if self.scheme not in SCHEMES:
            raise ConfigError("scheme must be one of %s" % (SCHEMES,))
        if self.sweep_param not in SWEEP_PARAMS:
            raise ConfigError("sweep must be one of %s" % (SWEEP_PARAMS,))
        if self.sweep_param != "none":
            if not self.sweep_values:
                raise ConfigError("sweep value list must not be empty")
            if list(self.sweep_values) != sorted(self.sweep_values):
                raise ConfigError("sweep values must be sorted ascending")
        if self.sweep_param == "num_ues" and self.scenario_path is not None:
            raise ConfigError("num_ues sweeps regenerate UE placement and cannot "
                              "start from a fixed scenario file")


@dataclass(frozen=True)
class ExperimentRecord:
    scheme: str
    seed: int
    sweep_value: float
    iteration: int
    final: bool
    weighted_sum_rate: float
    rates_es: tuple
    rates_ue: tuple
    feasible: bool
    runtime_ms: float


def _load_base_scenario(config):
    if config.scenario_path is None:
        return None
    with open(config.scenario_path, "r", encoding="utf-8") as fh:
        scenario = scenario_from_config(fh.read())
    problems = validate(scenario)
    if problems:
        raise ConfigError("scenario file invalid: " + "; ".join(problems))
    return scenario


def _cell_scenario(config, base, sweep_value, seed):
    if config.sweep_param == "num_ues":
        return default_scenario(seed=seed, num_ues_per_cell=int(sweep_value))
    scenario = base if base is not None else default_scenario(seed=seed)
    if config.sweep_param == "bs_power":
        scenario = replace(scenario, p_bs_max=dbm_to_watts(float(sweep_value)))
    return scenario


def run_cell(config, base, sweep_value, seed):
    """One (scheme, sweep value, seed) optimization; returns its record rows."""
    scenario = _cell_scenario(config, base, sweep_value, seed)
    options = replace(config.options, scheme=config.scheme)
    vars_, traces = optimize(scenario, seed, options)
    records = []
    for tr in traces:
        records.append(ExperimentRecord(
            scheme=config.scheme, seed=seed, sweep_value=sweep_value,
            iteration=tr.iteration, final=False,
            weighted_sum_rate=tr.weighted_sum_rate,
            rates_es=tuple(float(x) for x in tr.rates_es),
            rates_ue=tuple(float(x) for x in np.asarray(tr.rates_ue).ravel()),
            feasible=tr.feasible, runtime_ms=tr.wall_time_s * 1e3))
    last = traces[-1]
    rain = sample_rain(scenario.rain_mu, scenario.rain_sigma, seed, scenario.num_cells)
    channels = build_channels(scenario, vars_.ris_frames, rain)
    if config.scheme == "no_ris":
        channels = channels.without_ris()
    report = check_feasibility(scenario, channels, vars_)
    records.append(ExperimentRecord(
        scheme=config.scheme, seed=seed, sweep_value=sweep_value,
        iteration=last.iteration, final=True,
        weighted_sum_rate=last.weighted_sum_rate,
        rates_es=tuple(float(x) for x in last.rates_es),
        rates_ue=tuple(float(x) for x in np.asarray(last.rates_ue).ravel()),
        feasible=report.all_passed,
        runtime_ms=sum(t.wall_time_s for t in traces) * 1e3))
    return records


def _run_cell_star(args):
    return run_cell(*args)


def run(config):
    """Execute the whole experiment matrix and write the CSV.

    Returns the flat record list (per-iteration rows plus one final row per
    cell, ordered by (sweep value, seed, iteration)).
    """
    config.check()
    base = _load_base_scenario(config)
    values = list(config.sweep_values) if config.sweep_param != "none" else [float("nan")]
    cells = [(config, base, value, seed) for value in values for seed in config.seeds]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_cell_star, cells))
    else:
        results = [run_cell(*cell) for cell in cells]
    records = [rec for cell_records in results for rec in cell_records]
    write_csv(records, config.out_path, sweep_param=config.sweep_param,
              timings=config.timings)
    return records


def write_csv(records, path, sweep_param="none", timings=False):
    columns = CSV_COLUMNS + (("runtime_ms",) if timings else ())
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for rec in records:
            row = [rec.scheme, sweep_param,
                   repr(float(rec.sweep_value)), rec.seed, rec.iteration,
                   int(rec.final), repr(rec.weighted_sum_rate),
                   ";".join(repr(x) for x in rec.rates_es),
                   ";".join(repr(x) for x in rec.rates_ue),
                   int(rec.feasible)]
            if timings:
                row.append("%.3f" % rec.runtime_ms)
            writer.writerow(row)


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def _parse_seeds(text):
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise ConfigError("seeds must be a comma-separated integer list")


def _parse_sweep(text):
    if text is None or text == "none":
        return "none", ()
    param, _, values = text.partition("=")
    if param not in SWEEP_PARAMS:
        raise ConfigError("unknown sweep parameter %r" % param)
    if not values:
        raise ConfigError("sweep needs values, e.g. bs_power=20,25,30,35")
    try:
        vals = tuple(float(tok) for tok in values.split(",") if tok.strip())
    except ValueError:
        raise ConfigError("sweep values must be numeric")
    return param, vals


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="saginopt",
        description="RIS-UAV assisted downlink weighted sum-rate experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment sweep and write CSV")
    p_run.add_argument("--config", default=None, help="scenario config file")
    p_run.add_argument("--out", default="records.csv", help="output CSV path")
    p_run.add_argument("--seeds", default="0", help="comma-separated seed list")
    p_run.add_argument("--scheme", default="proposed", choices=SCHEMES)
    p_run.add_argument("--sweep", default="none",
                       help="none | bs_power=20,25,30 | num_ues=1,2,3")
    p_run.add_argument("--workers", type=int, default=1)
    p_run.add_argument("--timings", action="store_true",
                       help="include wall-clock column (breaks byte reproducibility)")

    p_val = sub.add_parser("validate", help="validate a scenario config file")
    p_val.add_argument("--config", required=True)

    p_tr = sub.add_parser("trace", help="single run with per-block logging")
    p_tr.add_argument("--config", default=None)
    p_tr.add_argument("--seed", type=int, default=0)
    p_tr.add_argument("--scheme", default="proposed", choices=SCHEMES)
    p_tr.add_argument("--out", default=None, help="optional CSV path")
    return parser


def _cmd_run(args):
    config = ExperimentConfig(scenario_path=args.config, out_path=args.out,
                              seeds=_parse_seeds(args.seeds), scheme=args.scheme,
                              sweep_param=_parse_sweep(args.sweep)[0],
                              sweep_values=_parse_sweep(args.sweep)[1],
                              workers=args.workers, timings=args.timings)
    try:
        records = run(config)
    except InitializationInfeasible as exc:
        print("infeasible: %s" % exc, file=sys.stderr)
        return EXIT_INFEASIBLE
    finals = [r for r in records if r.final]
    if any(not r.feasible for r in finals):
        print("warning: %d final record(s) failed feasibility certification"
              % sum(not r.feasible for r in finals), file=sys.stderr)
        return EXIT_INFEASIBLE
    print("wrote %d records (%d cells) to %s"
          % (len(records), len(finals), config.out_path))
    return EXIT_OK


def _cmd_validate(args):
    with open(args.config, "r", encoding="utf-8") as fh:
        scenario = scenario_from_config(fh.read())
    problems = validate(scenario)
    if problems:
        for p in problems:
            print("violation: %s" % p)
        return EXIT_CONFIG
    print("scenario ok (K=%d, L=%d)" % (scenario.num_cells, scenario.num_ues_per_cell))
    return EXIT_OK


def _cmd_trace(args):
    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            scenario = scenario_from_config(fh.read())
    else:
        scenario = default_scenario(seed=args.seed)
    options = BcdOptions(scheme=args.scheme)
    try:
        vars_, traces = optimize(scenario, args.seed, options)
    except InitializationInfeasible as exc:
        print("infeasible: %s" % exc, file=sys.stderr)
        return EXIT_INFEASIBLE
    for tr in traces:
        print("iter %2d  rate %.6f  surrogate %.6f  %s  (%.0f ms)"
              % (tr.iteration, tr.weighted_sum_rate, tr.wmmse_objective,
                 " ".join("%s=%s" % kv for kv in sorted(tr.statuses.items())),
                 tr.wall_time_s * 1e3))
    rain = sample_rain(scenario.rain_mu, scenario.rain_sigma, args.seed,
                       scenario.num_cells)
    channels = build_channels(scenario, vars_.ris_frames, rain)
    if args.scheme == "no_ris":
        channels = channels.without_ris()
    report = check_feasibility(scenario, channels, vars_)
    for chk in report.checks:
        print("constraint %-24s %s  margin %.3e"
              % (chk.constraint, "pass" if chk.passed else "FAIL", chk.margin))
    if args.out:
        records = []
        for tr in traces:
            records.append(ExperimentRecord(
                scheme=args.scheme, seed=args.seed, sweep_value=float("nan"),
                iteration=tr.iteration, final=tr is traces[-1],
                weighted_sum_rate=tr.weighted_sum_rate,
                rates_es=tuple(float(x) for x in tr.rates_es),
                rates_ue=tuple(float(x) for x in np.asarray(tr.rates_ue).ravel()),
                feasible=tr.feasible, runtime_ms=tr.wall_time_s * 1e3))
        write_csv(records, args.out, timings=True)
    return EXIT_OK if report.all_passed else EXIT_INFEASIBLE


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": _cmd_run, "validate": _cmd_validate, "trace": _cmd_trace}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
