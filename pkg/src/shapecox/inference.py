"""Post-fit statistics: profile-likelihood intervals and prediction.

The likelihood-ratio standard error of a linear coefficient is half the
width of the interval where the profile deviance ``2*(llmax - ll(c))``
crosses 1; all remaining parameters, shape constraints included, are refit
at each fixed value of the target coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .exceptions import ProfileError
from .solver import FitOptions, _maximize_bounded
from .survival import information

DEVIANCE_TARGET = 1.0
_BRACKET_WIDTH = 4.0  # initial half-bracket in Wald standard errors
_MAX_BRACKET_GROWTH = 8


@dataclass(frozen=True)
class LrInterval:
    """Deviance-1 profile interval for one linear coefficient."""

    index: int
    point: float
    lower: float
    upper: float

    @property
    def se(self):
        return 0.5 * (self.upper - self.lower)


def lr_standard_error(data, spec, fit, target, options=None, deviance_tol=1e-4):
    """Likelihood-ratio interval and standard error for a linear coefficient.

    Parameters
    ----------
    data, spec : the dataset and model spec the fit came from
    fit : FitResult
    target : int
        Design-column index of an unconstrained (linear) coefficient.
    deviance_tol : float
        Acceptable residual ``|deviance - 1|`` at each crossing.

    Returns
    -------
    LrInterval

    Raises
    ------
    ProfileError
        If the profile deviance never reaches 1 within the search window.
    """
    options = options or FitOptions()
    expansion = fit.expansion
    if target >= expansion.n_columns or expansion.constraint_mask[target]:
        raise ValueError("target must index an unconstrained column")
    if target >= expansion.d_z:
        raise ValueError("target must index a linear covariate column")

    X = fit.design.columns
    ll_max = fit.log_likelihood
    point = float(fit.coefficients[target])
    se_wald = _wald_se(X, fit, data, target)

    def profile_deviance(c):
        beta0 = fit.coefficients.copy()
        beta0[target] = c
        _, ll, _, _, converged = _maximize_bounded(
            X, expansion.constraint_mask, data, options,
            frozen={target: float(c)}, beta0=beta0, working0=fit.working_set,
        )
        if not converged:
            raise ProfileError(f"profile refit did not converge at {c:.6g}")
        return 2.0 * (ll_max - ll)

    upper = _find_crossing(profile_deviance, point, se_wald, +1, deviance_tol)
    lower = _find_crossing(profile_deviance, point, se_wald, -1, deviance_tol)
    return LrInterval(index=target, point=point, lower=lower, upper=upper)


def _wald_se(X, fit, data, target):
    cols = np.asarray(fit.working_set, dtype=int)
    info = information(X[:, cols], fit.coefficients[cols], data)
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(info)
    pos = int(np.flatnonzero(cols == target)[0])
    var = cov[pos, pos]
    return float(np.sqrt(var)) if var > 0 else 1.0


def _find_crossing(deviance, point, scale, direction, deviance_tol):
    width = _BRACKET_WIDTH * scale
    far = point + direction * width
    for _ in range(_MAX_BRACKET_GROWTH):
        if deviance(far) >= DEVIANCE_TARGET:
            break
        far += direction * width
    else:
        raise ProfileError(
            f"profile deviance never reached 1 out to {far:.6g}; "
            "the coefficient may be unidentified"
        )
    lo, hi = (point, far) if direction > 0 else (far, point)
    root = brentq(lambda c: deviance(c) - DEVIANCE_TARGET, lo, hi,
                  xtol=1e-6 * max(scale, 1e-12), rtol=8.9e-16)
    if abs(deviance(root) - DEVIANCE_TARGET) > 10 * deviance_tol:
        raise ProfileError("deviance crossing did not meet the tolerance")
    return float(root)


def linear_predictor(fit, covariates):
    """Linear predictor at new covariate rows, on the training scale.

    Uses the uncentered components; the centering constants cancel against
    the baseline, which was estimated from the same uncentered predictors.
    Accepts one row (returns a float) or a matrix (returns a vector).
    """
    covariates = np.asarray(covariates, dtype=float)
    single = covariates.ndim == 1
    rows = fit.expansion.expand_rows(covariates)
    eta = rows @ fit.coefficients
    return float(eta[0]) if single else eta


def survival_curve(fit, covariates):
    """Predicted survival function ``t -> S(t)`` for one covariate row.

    ``S(t) = exp(-cumhaz(t) * exp(eta))`` with the Breslow baseline from the
    fit: a right-continuous, nonincreasing step function with ``S(0) = 1``.
    """
    eta = linear_predictor(fit, np.asarray(covariates, dtype=float))
    baseline = fit.baseline
    risk = np.exp(eta)

    def curve(t):
        values = np.exp(-baseline.cumulative_at(np.asarray(t, dtype=float)) * risk)
        return values if np.ndim(t) else float(values)

    return curve
