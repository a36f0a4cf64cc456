"""Right-censored survival data and the Cox partial-likelihood machinery.

The partial log-likelihood uses the Breslow convention for tied times: the
risk set at an event time ``t`` is every subject with observed time ``>= t``,
tied events included. All exponentials are computed after subtracting the
maximum linear predictor, which leaves every likelihood quantity unchanged
but keeps the sums representable.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceError, NumericalOverflowError

logger = logging.getLogger(__name__)

DEFAULT_NEWTON_TOL = 1e-8
MAX_NEWTON_ITER = 100
MAX_STEP_HALVINGS = 30
# relative slack when accepting a line-search step; near the optimum the
# true improvement is far below float resolution of the log-likelihood
_ACCEPT_SLACK = 1e-10
# maximum spread of the linear predictor a line search will accept; beyond
# this the risk-set ratios exp(eta_i - eta_j) overflow double precision
_MAX_ETA_SPAN = 600.0


@dataclass(frozen=True)
class Subject:
    """A single right-censored observation.

    ``event`` is True when the failure was observed at ``time`` and False
    when the observation was censored there. ``covariates`` concatenates the
    linear covariates with the shape-restricted ones.
    """

    time: float
    event: bool
    covariates: np.ndarray

    def __post_init__(self):
        if not self.time > 0:
            raise ValueError(f"subject time must be positive, got {self.time}")


class SurvivalDataset:
    """A right-censored sample with precomputed risk-set structure.

    Parameters
    ----------
    time : array_like, shape (n,)
        Positive observed follow-up times.
    event : array_like, shape (n,)
        Failure indicators; truthy entries are observed failures.
    covariates : array_like, shape (n, d)
        One row of covariate values per subject.
    names : sequence of str, optional
        Covariate names, one per column.

    Notes
    -----
    Subjects are indexed internally by descending time so that risk sets are
    prefixes of the sorted order; tied times form a single group that shares
    one risk set.
    """

    def __init__(self, time, event, covariates, names=None):
        time = np.asarray(time, dtype=float)
        event = np.asarray(event, dtype=bool)
        covariates = np.atleast_2d(np.asarray(covariates, dtype=float))
        if covariates.shape[0] != time.shape[0]:
            covariates = covariates.T
        n = time.shape[0]
        if n == 0:
            raise ValueError("dataset must contain at least one subject")
        if time.ndim != 1 or event.shape != (n,) or covariates.shape[0] != n:
            raise ValueError("time, event and covariates must have matching lengths")
        if not np.all(time > 0):
            raise ValueError("all observed times must be positive")
        if not event.any():
            raise ValueError("dataset must contain at least one observed event")
        if names is not None and len(names) != covariates.shape[1]:
            raise ValueError("names must match the number of covariate columns")

        self.time = time
        self.event = event
        self.covariates = covariates
        self.names = tuple(names) if names is not None else None

        # descending-time order; stable so equal times keep input order
        self.sort_index = np.argsort(-time, kind="stable")
        t_sorted = time[self.sort_index]
        self._event_sorted = event[self.sort_index]
        change = np.flatnonzero(np.diff(t_sorted)) + 1
        self._group_ends = np.concatenate([change, [n]])
        counts = np.diff(np.concatenate([[0], self._group_ends]))
        self._group_of = np.repeat(np.arange(len(counts)), counts)
        self._group_events = np.add.reduceat(
            self._event_sorted.astype(np.int64), np.concatenate([[0], change])
        )
        self._group_times = t_sorted[self._group_ends - 1]

    @classmethod
    def from_subjects(cls, subjects, names=None):
        """Build a dataset from an ordered list of :class:`Subject`."""
        if not subjects:
            raise ValueError("dataset must contain at least one subject")
        d = len(np.atleast_1d(subjects[0].covariates))
        for s in subjects:
            if len(np.atleast_1d(s.covariates)) != d:
                raise ValueError("all subjects must share the covariate length")
        return cls(
            [s.time for s in subjects],
            [s.event for s in subjects],
            np.vstack([np.atleast_1d(s.covariates) for s in subjects]),
            names=names,
        )

    @property
    def n(self):
        return self.time.shape[0]

    @property
    def n_events(self):
        return int(self.event.sum())


@dataclass(frozen=True)
class DesignMatrix:
    """Expanded design: ``columns`` is n x P, ``labels`` names each column.

    Labels are ``("linear", name)`` for untransformed columns and
    ``("basis", name, knot_value)`` for basis columns. No column may be
    identically zero; such columns carry no information and make the
    restricted information matrix singular.
    """

    columns: np.ndarray
    labels: tuple

    def __post_init__(self):
        if self.columns.ndim != 2:
            raise ValueError("design columns must form a 2-d array")
        if len(self.labels) != self.columns.shape[1]:
            raise ValueError("one label required per design column")
        dead = ~np.any(self.columns != 0.0, axis=0)
        if dead.any():
            bad = [self.labels[j] for j in np.flatnonzero(dead)]
            raise ValueError(f"design contains identically-zero columns: {bad}")

    @property
    def n_columns(self):
        return self.columns.shape[1]


@dataclass(frozen=True)
class BaselineHazard:
    """Breslow step estimate of the cumulative baseline hazard.

    ``jump_times`` are the distinct event times in ascending order and
    ``cumulative_values[k]`` is the estimate evaluated at ``jump_times[k]``.
    """

    jump_times: np.ndarray
    cumulative_values: np.ndarray

    def __post_init__(self):
        if self.jump_times.shape != self.cumulative_values.shape:
            raise ValueError("jump_times and cumulative_values must align")
        if self.jump_times.size:
            if np.any(np.diff(self.jump_times) <= 0):
                raise ValueError("jump times must be strictly increasing")
            if np.any(np.diff(self.cumulative_values) < 0) or self.cumulative_values[0] < 0:
                raise ValueError("cumulative values must be nonnegative and nondecreasing")

    @property
    def jumps(self):
        """Jump sizes at each event time."""
        return np.diff(np.concatenate([[0.0], self.cumulative_values]))

    def cumulative_at(self, t):
        """Evaluate the right-continuous step function at time(s) ``t``."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.jump_times, t, side="right")
        padded = np.concatenate([[0.0], self.cumulative_values])
        out = padded[idx]
        return out if out.ndim else float(out)


def _design_columns(W):
    return W.columns if isinstance(W, DesignMatrix) else np.asarray(W, dtype=float)


def _log_likelihood_raw(data, eta):
    """Partial log-likelihood from a linear-predictor vector.

    Returns ``-inf`` (rather than raising) when the stabilised risk sums
    underflow, so line searches can reject the candidate point.
    """
    es = eta[data.sort_index]
    m = es.max()
    if not np.isfinite(m):
        return float("nan")
    rel = np.exp(es - m)
    s0 = np.cumsum(rel)[data._group_ends - 1]
    has_event = data._group_events > 0
    s0e = s0[has_event]
    if np.any(s0e <= 0.0):
        return float("-inf")
    d = data._group_events[has_event]
    value = es[data._event_sorted].sum() - np.sum(d * (m + np.log(s0e)))
    return float(value)


def _event_weights(data, eta):
    """Per-subject pieces shared by the score and information.

    Returns ``(rel, cumhaz)`` in sorted order: ``rel`` is ``exp(eta - max)``
    and ``cumhaz[j]`` accumulates ``d_g / S0_g`` over the event groups whose
    risk set contains subject ``j``; the stabilising shift cancels in the
    product ``rel * cumhaz``.
    """
    es = eta[data.sort_index]
    m = es.max()
    rel = np.exp(es - m)
    s0 = np.cumsum(rel)[data._group_ends - 1]
    h = np.zeros_like(s0)
    has_event = data._group_events > 0
    if np.any(s0[has_event] <= 0.0):
        raise NumericalOverflowError("risk-set sums underflowed; rescale or shrink the step")
    with np.errstate(over="ignore"):
        h[has_event] = data._group_events[has_event] / s0[has_event]
        cumhaz = np.cumsum(h[::-1])[::-1][data._group_of]
    if not np.all(np.isfinite(cumhaz)):
        raise NumericalOverflowError("risk-set ratios overflowed; rescale or shrink the step")
    return rel, cumhaz


def _score_raw(data, eta, X_sorted):
    rel, cumhaz = _event_weights(data, eta)
    resid = data._event_sorted.astype(float) - rel * cumhaz
    return X_sorted.T @ resid


def _information_raw(data, eta, X_sorted):
    rel, cumhaz = _event_weights(data, eta)
    term1 = X_sorted.T @ (X_sorted * (rel * cumhaz)[:, None])
    has_event = data._group_events > 0
    ends = data._group_ends[has_event]
    s0 = np.cumsum(rel)[ends - 1]
    s1 = np.cumsum(rel[:, None] * X_sorted, axis=0)[ends - 1]
    mu = s1 / s0[:, None]
    d = data._group_events[has_event]
    term2 = (mu * d[:, None]).T @ mu
    info = term1 - term2
    return 0.5 * (info + info.T)


def partial_log_likelihood(W, beta, data):
    """Cox partial log-likelihood at ``beta``.

    Parameters
    ----------
    W : DesignMatrix or array_like, shape (n, P)
    beta : array_like, shape (P,)
    data : SurvivalDataset

    Raises
    ------
    NumericalOverflowError
        If the value is not finite (extreme linear predictors).
    """
    X = _design_columns(W)
    beta = np.asarray(beta, dtype=float)
    if X.shape != (data.n, beta.shape[0]):
        raise ValueError("beta length must match the design column count")
    value = _log_likelihood_raw(data, X @ beta)
    if not np.isfinite(value):
        raise NumericalOverflowError("partial log-likelihood is not finite at this beta")
    return value


def score(W, beta, data):
    """Gradient of :func:`partial_log_likelihood` with respect to ``beta``."""
    X = _design_columns(W)
    beta = np.asarray(beta, dtype=float)
    out = _score_raw(data, X @ beta, X[data.sort_index])
    if not np.all(np.isfinite(out)):
        raise NumericalOverflowError("score is not finite at this beta")
    return out


def information(W, beta, data):
    """Negative Hessian of the partial log-likelihood; positive semidefinite."""
    X = _design_columns(W)
    beta = np.asarray(beta, dtype=float)
    out = _information_raw(data, X @ beta, X[data.sort_index])
    if not np.all(np.isfinite(out)):
        raise NumericalOverflowError("information is not finite at this beta")
    return out


def newton_fit(W, data, active_columns, init=None, tol=DEFAULT_NEWTON_TOL,
               max_iter=MAX_NEWTON_ITER):
    """Maximise the partial log-likelihood over a subset of columns.

    Components outside ``active_columns`` are left at their initial values
    (exactly zero in the standard flow, where ``init`` is zero outside the
    working set). The restricted problem is unconstrained: negative
    components are permitted and handled by the caller.

    Parameters
    ----------
    W : DesignMatrix or array_like
    data : SurvivalDataset
    active_columns : sequence of int
        Nonempty list of column indices to optimise over.
    init : array_like, shape (P,), optional
        Starting point; defaults to all zeros.
    tol : float
        Convergence threshold on the max-norm of the restricted score.

    Returns
    -------
    numpy.ndarray, shape (P,)

    Raises
    ------
    ConvergenceError
        After ``max_iter`` Newton iterations, with the iteration trace attached.

    Notes
    -----
    When a coefficient diverges (separation), the likelihood flattens below
    float resolution while the score stays positive; the solver then returns
    the best representable point, which may not meet ``tol``. Callers that
    need a certificate should recheck the score on the result.
    """
    beta, _, _ = _newton_restricted(W, data, active_columns, init, tol, max_iter)
    return beta


def _newton_restricted(W, data, active_columns, init, tol, max_iter):
    X = _design_columns(W)
    cols = np.asarray(list(active_columns), dtype=int)
    if cols.size == 0:
        raise ValueError("active_columns must be nonempty")
    P = X.shape[1]
    beta = np.zeros(P) if init is None else np.array(init, dtype=float)
    if beta.shape != (P,):
        raise ValueError("init must have one entry per design column")

    Xr = X[:, cols]
    Xr_sorted = Xr[data.sort_index]
    base_eta = X @ beta - Xr @ beta[cols]
    br = beta[cols].copy()

    eta0 = base_eta + Xr @ br
    ll = _log_likelihood_raw(data, eta0)
    if not np.isfinite(ll) or eta0.max() - eta0.min() > _MAX_ETA_SPAN:
        raise NumericalOverflowError("initial point has non-finite log-likelihood")

    trace = []
    flat_run = 0
    for iteration in range(max_iter):
        eta = base_eta + Xr @ br
        grad = _score_raw(data, eta, Xr_sorted)
        gmax = float(np.max(np.abs(grad)))
        trace.append((iteration, ll, gmax))
        if gmax <= tol:
            beta[cols] = br
            return beta, ll, trace

        info = _information_raw(data, eta, Xr_sorted)
        br, ll_new, ok = _damped_newton_step(data, base_eta, Xr, br, ll, grad, info)
        if not ok:
            raise ConvergenceError(
                f"Newton line search failed at iteration {iteration} "
                f"(|score|_max={gmax:.3e})",
                trace=trace,
            )
        # a diverging coefficient (separation) flattens the likelihood below
        # float resolution while the score stays positive; stop at the best
        # representable point and let the caller's KKT check flag the fit
        if ll_new - ll <= _ACCEPT_SLACK * (1.0 + abs(ll)):
            flat_run += 1
            if flat_run >= 3:
                logger.warning(
                    "likelihood flat at float resolution with |score|_max=%.3e; "
                    "a coefficient may be diverging", gmax,
                )
                beta[cols] = br
                return beta, ll_new, trace
        else:
            flat_run = 0
        ll = ll_new

    raise ConvergenceError(
        f"Newton did not reach |score|_max <= {tol:g} in {max_iter} iterations",
        trace=trace,
    )


def _damped_newton_step(data, base_eta, Xr, br, ll, grad, info):
    """One ascent step: Newton direction, escalating the ridge on failure.

    A singular information matrix yields giant steps along its null space
    that no amount of halving repairs; growing the ridge bends the direction
    toward the gradient, which ascends for a small enough step.
    """
    p = grad.shape[0]
    trace_scale = np.trace(info) / p
    base_ridge = 1e-8 * (trace_scale if trace_scale > 0 else 1.0)
    ridge = 0.0
    for escalation in range(10):
        try:
            step = np.linalg.solve(info + ridge * np.eye(p) if ridge else info, grad)
        except np.linalg.LinAlgError:
            step = None
        if step is not None and np.all(np.isfinite(step)) and grad @ step > 0.0:
            # near-singular solves produce steps too long for halving to
            # repair; cap the length and let the next iteration re-solve
            cap = 10.0 * (1.0 + float(np.abs(br).max()))
            longest = float(np.abs(step).max())
            if longest > cap:
                step = step * (cap / longest)
            scale = 1.0
            for _ in range(MAX_STEP_HALVINGS + 1):
                cand = br + scale * step
                eta_cand = base_eta + Xr @ cand
                if eta_cand.max() - eta_cand.min() <= _MAX_ETA_SPAN:
                    ll_new = _log_likelihood_raw(data, eta_cand)
                    if np.isfinite(ll_new) and ll_new >= ll - _ACCEPT_SLACK * (1.0 + abs(ll)):
                        return cand, ll_new, True
                scale *= 0.5
        ridge = base_ridge if ridge == 0.0 else ridge * 100.0
        if escalation == 0:
            logger.warning(
                "Newton step rejected; damping the information matrix (ridge %.3e)",
                ridge,
            )
    return br, ll, False


def breslow_baseline(data, eta):
    """Breslow estimate of the cumulative baseline hazard.

    The jump at an event time ``t`` is the number of events at ``t`` divided
    by the sum of ``exp(eta)`` over every subject still at risk (``t_j >= t``).
    """
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (data.n,):
        raise ValueError("eta must hold one linear predictor per subject")
    return breslow_from_arrays(data.time, data.event, eta)


def breslow_from_arrays(time, event, eta):
    """Breslow baseline from raw arrays; tolerates samples with no events."""
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=bool)
    eta = np.asarray(eta, dtype=float)
    order = np.argsort(-time, kind="stable")
    t_sorted = time[order]
    es = eta[order]
    m = es.max()
    rel = np.exp(es - m)
    n = time.shape[0]
    change = np.flatnonzero(np.diff(t_sorted)) + 1
    ends = np.concatenate([change, [n]])
    d = np.add.reduceat(event[order].astype(np.int64), np.concatenate([[0], change]))
    s0 = np.cumsum(rel)[ends - 1]
    has_event = d > 0
    # jump = d / sum(exp(eta)) computed in log space to dodge the shift
    with np.errstate(divide="ignore"):
        log_jumps = np.log(d[has_event]) - m - np.log(s0[has_event])
    jump_times = t_sorted[ends - 1][has_event][::-1]
    jumps = np.exp(log_jumps)[::-1]
    return BaselineHazard(jump_times=jump_times, cumulative_values=np.cumsum(jumps))
