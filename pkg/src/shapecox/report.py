"""Fit reports: one JSON document that round-trips everything prediction
needs.

A report embeds the expansion (knots, layout, mask), the coefficient
vector, the component centering constants and the Breslow baseline, so a
reloaded model reproduces the fit's linear predictors exactly; the training
predictors are logged in the report for that check. Tables for humans
(coefficients, knots with usage flags, baseline, component curves) ride
along.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .basis import BasisExpansion, ComponentFunction, KnotStrategy
from .survival import BaselineHazard

REPORT_FORMAT = "shapecox-fit-report"
REPORT_VERSION = 1


def build_report(fit, spec, data, n_dropped_missing=0, lr_intervals=None,
                 curve_points=81):
    """Assemble the report dictionary for a fitted model."""
    expansion = fit.expansion
    lr_intervals = lr_intervals or {}

    covariates = []
    for cov in spec.covariates:
        entry = {"name": cov.name, "shape": cov.shape}
        if cov.shape != "l":
            entry["knots"] = cov.strategy.describe()
        covariates.append(entry)

    coef_table = []
    for j, label in enumerate(expansion.labels):
        row = {"label": _label_text(label), "value": float(fit.coefficients[j])}
        if label[0] == "linear" and label[1] in lr_intervals:
            iv = lr_intervals[label[1]]
            row.update(lr_lower=iv.lower, lr_upper=iv.upper, lr_se=iv.se)
        coef_table.append(row)

    knots_table = []
    for block in expansion.blocks:
        weights = fit.coefficients[block.start:block.start + block.size]
        knots_table.append({
            "covariate": block.name,
            "shape": block.shape,
            "knots": [float(k) for k in block.knots],
            "weights": [float(w) for w in weights],
            "used": [bool(w != 0.0) for w in weights],
        })

    curves = []
    for component in fit.components:
        i = component.covariate_index
        sample = data.covariates[:, i]
        grid = np.union1d(
            np.linspace(sample.min(), sample.max(), curve_points),
            expansion.block_for(i).declared_knots,
        )
        values = component.centered(grid)
        declared = expansion.block_for(i).declared_knots
        curves.append({
            "covariate": component.name,
            "x": [float(v) for v in grid],
            "value": [float(v) for v in values],
            "is_knot": [bool(v) for v in np.isin(grid, declared)],
        })

    eta = fit.design.columns @ fit.coefficients
    return {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "model": {
            "covariates": covariates,
            "expansion": expansion.to_dict(),
            "coefficients": [float(v) for v in fit.coefficients],
            "centering_constants": {
                c.name: float(c.centering_constant) for c in fit.components
            },
        },
        "fit": {
            "log_likelihood": float(fit.log_likelihood),
            "converged": bool(fit.converged),
            "working_set": [int(j) for j in fit.working_set],
            "iterations": len(fit.trace),
            "actions": fit.trace.summary(),
        },
        "data": {
            "n_used": int(data.n),
            "n_events": int(data.n_events),
            "n_dropped_missing": int(n_dropped_missing),
            "linear_predictors": [float(v) for v in eta],
        },
        "coefficients": coef_table,
        "lr_intervals": {
            name: {"point": iv.point, "lower": iv.lower, "upper": iv.upper, "se": iv.se}
            for name, iv in lr_intervals.items()
        },
        "baseline": {
            "time": [float(t) for t in fit.baseline.jump_times],
            "cumulative_hazard": [float(v) for v in fit.baseline.cumulative_values],
        },
        "component_curves": curves,
    }


def _label_text(label):
    if label[0] == "linear":
        return f"linear:{label[1]}"
    return f"basis:{label[1]}@{label[2]:g}"


def write_report(path, report):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(report, handle, indent=2)
        handle.write("\n")


@dataclass
class FittedModel:
    """A reloaded fit: everything prediction and curve export need.

    Mirrors the prediction-facing surface of ``FitResult`` (``expansion``,
    ``coefficients``, ``baseline``, ``components``), so the same inference
    functions work on either object and reproduce the original arithmetic.
    """

    covariate_names: tuple
    expansion: BasisExpansion
    coefficients: np.ndarray
    baseline: BaselineHazard
    components: tuple
    log_likelihood: float
    converged: bool
    training_predictors: np.ndarray

    def component_for(self, covariate_index):
        for c in self.components:
            if c.covariate_index == covariate_index:
                return c
        raise KeyError(f"covariate {covariate_index} has no fitted component")

    def covariate_index(self, name):
        return self.covariate_names.index(name)


def load_report(path):
    with open(path, encoding="utf-8") as handle:
        report = json.load(handle)
    if report.get("format") != REPORT_FORMAT:
        raise ValueError(f"{path} is not a {REPORT_FORMAT} document")
    return report


def model_from_report(report):
    """Rebuild a predictable model from a report dictionary."""
    expansion = BasisExpansion.from_dict(report["model"]["expansion"])
    coefficients = np.asarray(report["model"]["coefficients"], dtype=float)
    centering = report["model"]["centering_constants"]
    baseline = BaselineHazard(
        jump_times=np.asarray(report["baseline"]["time"], dtype=float),
        cumulative_values=np.asarray(report["baseline"]["cumulative_hazard"], dtype=float),
    )
    components = tuple(
        ComponentFunction(
            covariate_index=block.covariate_index,
            name=block.name,
            shape=block.shape,
            knots=block.knots,
            weights=coefficients[block.start:block.start + block.size],
            centering_constant=float(centering[block.name]),
        )
        for block in expansion.blocks
    )
    names = tuple(entry["name"] for entry in report["model"]["covariates"])
    return FittedModel(
        covariate_names=names,
        expansion=expansion,
        coefficients=coefficients,
        baseline=baseline,
        components=components,
        log_likelihood=float(report["fit"]["log_likelihood"]),
        converged=bool(report["fit"]["converged"]),
        training_predictors=np.asarray(report["data"]["linear_predictors"], dtype=float),
    )
