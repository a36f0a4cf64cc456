"""Command-line interface: fit, simulate, predict, curves.

Exit codes are a stable contract: 0 success (fit converged), 1 input or
usage error, 2 numerical non-convergence (the report is still written, with
the iteration trace summary).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .basis import SHAPE_LABELS, CovariateSpec, KnotStrategy, ModelSpec
from .dataio import CsvFormatError, load_covariate_csv, load_survival_csv
from .exceptions import ProfileError, ShapeCoxError
from .inference import lr_standard_error
from .report import build_report, load_report, model_from_report, write_report
from .simulate import (
    TRUE_Z_COEFFICIENT,
    EXPERIMENTS,
    ExperimentConfig,
    export_component_curve,
    run_experiment,
)
from .solver import FitOptions, fit

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_CONVERGED = 2


class CliError(Exception):
    def __init__(self, message, code=EXIT_INPUT):
        super().__init__(message)
        self.code = code


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="shapecox",
        description="Shape-restricted additive Cox proportional-hazards regression",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a model to CSV survival data")
    p_fit.add_argument("--data", required=True, help="CSV with time,event,covariates")
    p_fit.add_argument("--spec", required=True, help="JSON model spec file")
    p_fit.add_argument("--out", required=True, help="output report path (JSON)")
    p_fit.add_argument("--tol", type=float, default=None, help="KKT tolerance")
    p_fit.add_argument("--max-iter", type=int, default=None, help="max working-set updates")
    p_fit.add_argument("--no-lr", action="store_true",
                       help="skip likelihood-ratio intervals for linear terms")
    p_fit.add_argument("--no-plots", action="store_true", help="skip figure output")

    p_sim = sub.add_parser("simulate", help="run a benchmark experiment")
    p_sim.add_argument("experiment", type=int, help="experiment id, 1-7")
    p_sim.add_argument("n", type=int, help="sample size per replication")
    p_sim.add_argument("replications", type=int)
    p_sim.add_argument("seed", type=int, nargs="?", default=0)
    p_sim.add_argument("--seed", dest="seed_flag", type=int, default=None,
                       help="overrides the positional seed")
    p_sim.add_argument("--out", required=True,
                       help="output stem; writes <stem>.txt and <stem>.json")
    p_sim.add_argument("--knots", default="quantiles:10",
                       help="knot strategy for the shaped covariate")
    p_sim.add_argument("--threads", type=int, default=1,
                       help="parallel workers for replications")
    p_sim.add_argument("--tol", type=float, default=None)
    p_sim.add_argument("--max-iter", type=int, default=None)

    p_pred = sub.add_parser("predict", help="predict from a fit report")
    p_pred.add_argument("--model", required=True, help="fit report path")
    p_pred.add_argument("--data", required=True, help="CSV with the model's covariates")
    p_pred.add_argument("--out", required=True, help="output TSV path")
    p_pred.add_argument("--times", default=None,
                        help="comma-separated times for survival probabilities")

    p_cur = sub.add_parser("curves", help="export a fitted component curve")
    p_cur.add_argument("--model", required=True, help="fit report path")
    p_cur.add_argument("--covariate", required=True, help="shaped covariate name")
    p_cur.add_argument("--out", required=True, help="output TSV path")
    p_cur.add_argument("--grid-min", type=float, default=None)
    p_cur.add_argument("--grid-max", type=float, default=None)
    p_cur.add_argument("--grid-points", type=int, default=201)
    p_cur.add_argument("--no-plots", action="store_true", help="skip figure output")
    return parser


def _load_model_spec(path):
    try:
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
    except FileNotFoundError:
        raise CliError(f"spec file not found: {path}")
    except json.JSONDecodeError as exc:
        raise CliError(f"spec file is not valid JSON: {exc}")

    entries = raw.get("covariates")
    if not entries:
        raise CliError("spec file must declare a nonempty 'covariates' list")
    covariates = []
    for entry in entries:
        name = entry.get("name")
        shape = entry.get("shape")
        if not name or shape is None:
            raise CliError("every covariate needs a 'name' and a 'shape'")
        if shape not in SHAPE_LABELS:
            raise CliError(
                f"unknown shape {shape!r} for covariate {name!r}; "
                f"valid labels: {', '.join(SHAPE_LABELS)}"
            )
        knots = None
        if shape != "l" and "knots" in entry:
            try:
                knots = KnotStrategy.parse(str(entry["knots"]))
            except ValueError as exc:
                raise CliError(f"covariate {name!r}: {exc}")
        covariates.append(CovariateSpec(name, shape, knots))
    spec = ModelSpec(tuple(covariates))

    solver = raw.get("solver", {})
    options = FitOptions()
    if "tol" in solver:
        options.kkt_tol = float(solver["tol"])
    if "max_iter" in solver:
        options.max_outer = int(solver["max_iter"])
    return spec, options


def _figure_path(out_path, suffix):
    out = Path(out_path)
    return out.with_name(out.stem + suffix + ".png")


def cmd_fit(args):
    spec, options = _load_model_spec(args.spec)
    if args.tol is not None:
        options.kkt_tol = args.tol
    if args.max_iter is not None:
        options.max_outer = args.max_iter

    try:
        loaded = load_survival_csv(args.data, spec.names)
    except FileNotFoundError:
        raise CliError(f"data file not found: {args.data}")
    except CsvFormatError as exc:
        raise CliError(f"{args.data}: {exc}")

    result = fit(loaded.dataset, spec, options)

    lr_intervals = {}
    if not args.no_lr:
        for j, (_, name) in enumerate(result.expansion.linear):
            try:
                lr_intervals[name] = lr_standard_error(
                    loaded.dataset, spec, result, j, options
                )
            except (ProfileError, ShapeCoxError) as exc:
                print(f"warning: LR interval for {name!r} failed: {exc}",
                      file=sys.stderr)

    report = build_report(result, spec, loaded.dataset,
                          n_dropped_missing=loaded.n_dropped_missing,
                          lr_intervals=lr_intervals)
    write_report(args.out, report)

    if report["component_curves"] and not args.no_plots:
        from .plots import save_component_figure

        save_component_figure(report["component_curves"],
                              _figure_path(args.out, "_components"))

    if not result.converged:
        print("warning: fit did not meet the KKT tolerance; see the report trace",
              file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _summary_text(summary, config):
    design = config.design
    lines = [
        f"Experiment {config.experiment} "
        f"(x ~ {design.x_distribution}, truth shape {design.r_shape}, "
        f"declared constraint {design.constraint})",
        f"n={config.n} replications={config.replications} seed={config.seed} "
        f"knots={config.knots.describe()}",
        "",
        f"{'method':<8}{'mean':>12}{'std':>12}{'failures':>10}",
        f"{'SR-Cox':<8}{summary.sr_mean:>12.4f}{summary.sr_std:>12.4f}"
        f"{summary.sr_failures:>10d}",
        f"{'Cox':<8}{summary.cox_mean:>12.4f}{summary.cox_std:>12.4f}"
        f"{summary.cox_failures:>10d}",
        "",
        f"reported quantity: fitted z coefficient (true value {TRUE_Z_COEFFICIENT:g})",
        "",
    ]
    return "\n".join(lines)


def cmd_simulate(args):
    if args.experiment not in EXPERIMENTS:
        raise CliError(f"experiment id must be in 1..7, got {args.experiment}")
    seed = args.seed_flag if args.seed_flag is not None else args.seed
    try:
        knots = KnotStrategy.parse(args.knots)
    except ValueError as exc:
        raise CliError(str(exc))
    config = ExperimentConfig(
        experiment=args.experiment, n=args.n, replications=args.replications,
        seed=seed, knots=knots,
    )
    options = FitOptions()
    if args.tol is not None:
        options.kkt_tol = args.tol
    if args.max_iter is not None:
        options.max_outer = args.max_iter

    summary = run_experiment(config, options=options, workers=max(1, args.threads))

    stem = Path(args.out)
    stem.parent.mkdir(parents=True, exist_ok=True)
    text = _summary_text(summary, config)
    stem.with_suffix(".txt").write_text(text, encoding="utf-8")
    machine = {
        "experiment": summary.experiment,
        "n": summary.n,
        "replications": summary.replications,
        "seed": summary.seed,
        "knots": config.knots.describe(),
        "sr_cox": {
            "mean": summary.sr_mean, "std": summary.sr_std,
            "failures": summary.sr_failures,
            "values": [None if not np.isfinite(v) else float(v)
                       for v in summary.sr_values],
        },
        "cox": {
            "mean": summary.cox_mean, "std": summary.cox_std,
            "failures": summary.cox_failures,
            "values": [None if not np.isfinite(v) else float(v)
                       for v in summary.cox_values],
        },
        "true_value": TRUE_Z_COEFFICIENT,
    }
    with open(stem.with_suffix(".json"), "w", encoding="utf-8") as handle:
        json.dump(machine, handle, indent=2)
        handle.write("\n")
    sys.stdout.write(text)
    return EXIT_OK


def _load_model(path):
    try:
        report = load_report(path)
    except FileNotFoundError:
        raise CliError(f"model report not found: {path}")
    except (ValueError, KeyError) as exc:
        raise CliError(f"cannot read model report: {exc}")
    return model_from_report(report)


def cmd_predict(args):
    model = _load_model(args.model)
    times = None
    if args.times is not None:
        try:
            times = [float(t) for t in args.times.split(",") if t.strip() != ""]
        except ValueError:
            raise CliError(f"--times must be comma-separated numbers, got {args.times!r}")

    try:
        covariates, dropped = load_covariate_csv(args.data, model.covariate_names)
    except FileNotFoundError:
        raise CliError(f"data file not found: {args.data}")
    except CsvFormatError as exc:
        raise CliError(f"{args.data}: {exc}")
    if dropped:
        print(f"note: skipped {dropped} row(s) with missing covariate values",
              file=sys.stderr)

    eta = model.expansion.expand_rows(covariates) @ model.coefficients
    columns = ["linear_predictor"]
    table = [eta]
    if times:
        cumhaz = model.baseline.cumulative_at(np.asarray(times, dtype=float))
        for t, L in zip(times, np.atleast_1d(cumhaz)):
            columns.append(f"survival@{t:g}")
            table.append(np.exp(-L * np.exp(eta)))

    with open(args.out, "w", encoding="utf-8") as handle:
        handle.write("\t".join(columns) + "\n")
        for row in np.column_stack(table):
            handle.write("\t".join(repr(float(v)) for v in row) + "\n")
    return EXIT_OK


def cmd_curves(args):
    model = _load_model(args.model)
    try:
        index = model.covariate_index(args.covariate)
    except ValueError:
        raise CliError(f"model has no covariate named {args.covariate!r}")
    try:
        block = model.expansion.block_for(index)
    except KeyError:
        raise CliError(
            f"covariate {args.covariate!r} is linear; curves exist only for "
            "shape-restricted covariates (pick one declared in/de/cvx*/ccv*)"
        )

    lo = args.grid_min if args.grid_min is not None else float(block.declared_knots[0])
    hi = args.grid_max if args.grid_max is not None else float(block.declared_knots[-1])
    if args.grid_points < 2 or hi <= lo:
        raise CliError("need grid-max > grid-min and at least 2 grid points")
    grid = np.union1d(np.linspace(lo, hi, args.grid_points), block.declared_knots)
    grid = grid[(grid >= lo) & (grid <= hi)]

    x, value, is_knot = export_component_curve(model, index, grid)
    with open(args.out, "w", encoding="utf-8") as handle:
        handle.write("x\tvalue\tis_knot\n")
        for xi, vi, ki in zip(x, value, is_knot):
            handle.write(f"{float(xi)!r}\t{float(vi)!r}\t{int(ki)}\n")

    if not args.no_plots:
        from .plots import save_curve_figure

        save_curve_figure(x, value, is_knot, args.covariate,
                          _figure_path(args.out, ""))
    return EXIT_OK


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "fit": cmd_fit,
        "simulate": cmd_simulate,
        "predict": cmd_predict,
        "curves": cmd_curves,
    }
    try:
        return handlers[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ShapeCoxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
