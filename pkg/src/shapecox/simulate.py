"""Data generation and the Monte Carlo harness for the seven benchmark
experiments.

Failure times follow a Weibull baseline with shape 2 (cumulative baseline
hazard ``t**2``) under the proportional-hazards predictor
``eta = 2*z*beta_z + 2*r(x)`` with ``beta_z = -1``, right-censored by an
independent Uniform(0, 5) threshold. Because the factor 2 is folded into
the generator, the fitted coefficient on ``z`` estimates ``2*beta_z = -2``
directly and is the quantity each experiment reports.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .basis import CovariateSpec, KnotStrategy, ModelSpec
from .solver import FitOptions, fit
from .survival import SurvivalDataset

CENSOR_UPPER = 5.0
TRUE_Z_COEFFICIENT = -2.0


def _r_log(x):
    return -3.0 * np.log(x)


def _r_square(x):
    return -np.square(x)


def _r_abs(x):
    return -np.abs(x)


def _r_linear(x):
    return -2.0 * x


@dataclass(frozen=True)
class ExperimentDesign:
    x_distribution: str  # "exponential" | "normal"
    r_function: object
    r_shape: str
    constraint: str


# experiment id -> (x law, true component, its shape, declared constraint)
EXPERIMENTS = {
    1: ExperimentDesign("exponential", _r_log, "cvxde", "cvxde"),
    2: ExperimentDesign("exponential", _r_log, "cvxde", "de"),
    3: ExperimentDesign("normal", _r_square, "ccv", "ccv"),
    4: ExperimentDesign("normal", _r_square, "ccv", "cvx"),
    5: ExperimentDesign("normal", _r_abs, "ccv", "ccv"),
    6: ExperimentDesign("normal", _r_linear, "l", "ccv"),
    7: ExperimentDesign("normal", _r_linear, "l", "de"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One benchmark run: the experiment id fixes the generating design."""

    experiment: int
    n: int
    replications: int
    seed: int
    knots: KnotStrategy = field(default_factory=lambda: KnotStrategy.quantiles(10))

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment id must be in 1..7, got {self.experiment}")
        if self.replications < 1:
            raise ValueError("need at least one replication")

    @property
    def design(self):
        return EXPERIMENTS[self.experiment]


@dataclass(frozen=True)
class ExperimentSummary:
    """Monte Carlo mean/std of the fitted z coefficient per method.

    Statistics cover successful replications only; ``*_failures`` count the
    excluded ones. The per-replication values are kept (NaN where a fit
    failed) so downstream checks can compare methods replication by
    replication.
    """

    experiment: int
    n: int
    replications: int
    seed: int
    sr_values: np.ndarray
    cox_values: np.ndarray

    @staticmethod
    def _mean(values):
        good = values[np.isfinite(values)]
        return float(good.mean()) if good.size else float("nan")

    @staticmethod
    def _std(values):
        good = values[np.isfinite(values)]
        return float(good.std(ddof=1)) if good.size > 1 else float("nan")

    @property
    def sr_mean(self):
        return self._mean(self.sr_values)

    @property
    def sr_std(self):
        return self._std(self.sr_values)

    @property
    def cox_mean(self):
        return self._mean(self.cox_values)

    @property
    def cox_std(self):
        return self._std(self.cox_values)

    @property
    def sr_failures(self):
        return int(np.sum(~np.isfinite(self.sr_values)))

    @property
    def cox_failures(self):
        return int(np.sum(~np.isfinite(self.cox_values)))


def _draw_positive(draw, rng, n):
    """Sample with the (measure-zero) exact zeros redrawn."""
    out = draw(rng, n)
    while True:
        bad = out == 0.0
        if not bad.any():
            return out
        out[bad] = draw(rng, int(bad.sum()))


def weibull_failure_times(u, eta):
    """Invert the Weibull(shape 2) survival function at uniforms ``u``.

    Under cumulative hazard ``t**2 * exp(eta)``, solving ``S(t) = u`` gives
    ``t = sqrt(-log(u) * exp(-eta))``.
    """
    u = np.asarray(u, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return np.sqrt(-np.log(u) * np.exp(-eta))


def generate_dataset(config, replication):
    """Generate one replication of the configured experiment.

    The stream is derived from ``(config.seed, replication)`` through a
    splittable seed sequence, so any replication can be regenerated alone
    and parallel execution cannot change the data.
    """
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, replication)))
    design = config.design
    n = config.n

    z = rng.standard_normal(n)
    if design.x_distribution == "exponential":
        x = _draw_positive(lambda r, k: r.exponential(1.0, k), rng, n)
    else:
        x = rng.standard_normal(n)

    eta = -2.0 * z + 2.0 * design.r_function(x)
    u = _draw_positive(lambda r, k: r.random(k), rng, n)
    failure = weibull_failure_times(u, eta)
    censor = _draw_positive(lambda r, k: r.uniform(0.0, CENSOR_UPPER, k), rng, n)
    time = np.minimum(failure, censor)
    event = failure <= censor
    return SurvivalDataset(time, event, np.column_stack([z, x]), names=("z", "x"))


def fit_pair(dataset, constraint, knots, options=None):
    """Fit the shape-restricted and the all-linear model on one dataset.

    Returns ``(sr_fit, cox_fit)``; the reported quantity of each is the
    coefficient on ``z``. A constraint of ``"l"`` makes the two model specs
    identical, which is the degenerate sanity case.
    """
    x_spec = CovariateSpec("x", constraint, knots if constraint != "l" else None)
    sr_spec = ModelSpec((CovariateSpec("z", "l"), x_spec))
    cox_spec = ModelSpec((CovariateSpec("z", "l"), CovariateSpec("x", "l")))
    sr_fit = fit(dataset, sr_spec, options)
    cox_fit = fit(dataset, cox_spec, options)
    return sr_fit, cox_fit


def _run_replication(config, replication, options=None):
    sr_value = cox_value = float("nan")
    try:
        dataset = generate_dataset(config, replication)
    except Exception:
        return sr_value, cox_value
    try:
        sr_fit, cox_fit = fit_pair(dataset, config.design.constraint, config.knots, options)
        if sr_fit.converged:
            sr_value = sr_fit.coefficient("z")
        if cox_fit.converged:
            cox_value = cox_fit.coefficient("z")
    except Exception:
        # one method may still have succeeded before the failure
        try:
            cox_spec = ModelSpec((CovariateSpec("z", "l"), CovariateSpec("x", "l")))
            cox_fit = fit(dataset, cox_spec, options)
            if cox_fit.converged:
                cox_value = cox_fit.coefficient("z")
        except Exception:
            pass
    return sr_value, cox_value


def run_experiment(config, options=None, workers=1):
    """Monte Carlo summary of one experiment.

    Replications are independent; with ``workers > 1`` they run in separate
    processes but are aggregated in replication order, so the summary is
    identical either way. A replication whose fit fails is excluded from the
    statistics and counted, never substituted.
    """
    reps = range(config.replications)
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replication_task,
                                    [(config, r, options) for r in reps],
                                    chunksize=max(1, config.replications // (8 * workers))))
    else:
        results = [_run_replication(config, r, options) for r in reps]

    sr = np.array([a for a, _ in results])
    cox = np.array([b for _, b in results])
    return ExperimentSummary(
        experiment=config.experiment,
        n=config.n,
        replications=config.replications,
        seed=config.seed,
        sr_values=sr,
        cox_values=cox,
    )


def _replication_task(args):
    config, replication, options = args
    return _run_replication(config, replication, options)


def export_component_curve(fit_result, covariate_index, grid):
    """Tabulate the centered fitted component of one covariate on a grid.

    Returns ``(x, value, is_knot)`` arrays; ``is_knot`` marks grid points
    coinciding with declared knot locations.
    """
    grid = np.asarray(grid, dtype=float)
    component = fit_result.component_for(covariate_index)
    values = component.centered(grid)
    declared = fit_result.expansion.block_for(covariate_index).declared_knots
    is_knot = np.isin(grid, declared)
    return grid, values, is_knot
