"""Primal active-set solver for the bound-constrained partial likelihood.

The expanded problem maximises the Cox partial log-likelihood subject to
nonnegativity on the masked coefficients. The solver keeps a working set of
columns allowed to move, alternating three moves until the KKT conditions
hold:

* solve the unconstrained Newton subproblem restricted to the working set;
* if the candidate violates a bound, interpolate back to the last feasible
  iterate until the first blocking coordinate hits zero exactly, and drop
  that coordinate from the working set;
* once feasible and optimal on the working set, admit the excluded masked
  column with the largest score component, or stop when none exceeds the
  tolerance.

Every move is an ascent step, so the negative log-likelihood decreases
monotonically and the loop terminates in finitely many working sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import center_component, expand_design, reconstruct_component
from .survival import (
    DEFAULT_NEWTON_TOL,
    MAX_NEWTON_ITER,
    _log_likelihood_raw,
    _newton_restricted,
    _score_raw,
    breslow_baseline,
)


@dataclass
class FitOptions:
    """Tolerances and iteration limits for :func:`fit`.

    ``kkt_tol`` bounds the score components at termination; ``newton_tol``
    is the inner solver's threshold on the restricted score. ``max_outer``
    defaults to ``10 * P`` working-set updates.
    """

    kkt_tol: float = 1e-6
    newton_tol: float = DEFAULT_NEWTON_TOL
    max_newton_iter: int = MAX_NEWTON_ITER
    max_outer: int | None = None


class WorkingSet:
    """Ordered set of design columns currently allowed to be nonzero.

    Always contains every unconstrained column; masked columns come and go
    as the algorithm adds and drops them.
    """

    def __init__(self, indices):
        self._indices = list(dict.fromkeys(int(i) for i in indices))
        self._members = set(self._indices)

    def __contains__(self, index):
        return index in self._members

    def __len__(self):
        return len(self._indices)

    def __iter__(self):
        return iter(self._indices)

    @property
    def indices(self):
        return tuple(self._indices)

    def add(self, index):
        index = int(index)
        if index in self._members:
            raise ValueError(f"column {index} is already in the working set")
        self._indices.append(index)
        self._members.add(index)

    def remove(self, index):
        index = int(index)
        self._indices.remove(index)
        self._members.remove(index)


@dataclass(frozen=True)
class TraceRecord:
    working_size: int
    objective: float  # negative partial log-likelihood
    action: str  # "subproblem" | "restore" | "add" | "terminate"
    index: int | None = None
    step_ratio: float | None = None


@dataclass
class IterationTrace:
    """Chronological record of solver actions; objectives never increase."""

    records: list[TraceRecord] = field(default_factory=list)

    def append(self, **kwargs):
        self.records.append(TraceRecord(**kwargs))

    def __len__(self):
        return len(self.records)

    @property
    def objectives(self):
        return np.array([r.objective for r in self.records])

    def summary(self):
        counts = {}
        for r in self.records:
            counts[r.action] = counts.get(r.action, 0) + 1
        return counts


@dataclass
class FitResult:
    """Outcome of a shape-restricted fit.

    ``coefficients`` is feasible over the full expanded layout, with every
    column outside the final working set exactly zero. ``components`` hold
    the mean-centered shaped effects; the baseline is estimated from the
    uncentered linear predictors, so prediction is unaffected by centering.
    """

    coefficients: np.ndarray
    log_likelihood: float
    working_set: tuple[int, ...]
    design: "DesignMatrix"
    expansion: "BasisExpansion"
    baseline: "BaselineHazard"
    components: tuple
    trace: IterationTrace
    converged: bool

    def coefficient(self, name):
        """Coefficient of a linear covariate, by name."""
        return float(self.coefficients[self.expansion.linear_column(name)])

    def component_for(self, covariate_index):
        for c in self.components:
            if c.covariate_index == covariate_index:
                return c
        raise KeyError(f"covariate {covariate_index} has no fitted component")


def initialize_working_set(expansion):
    """Start from every unconstrained column: the linear coefficients plus
    the free first basis column of each plain convex/concave covariate."""
    return WorkingSet(np.flatnonzero(~expansion.constraint_mask))


def feasibility_ratio(current, candidate, mask):
    """Largest step toward ``candidate`` that stays feasible.

    Returns ``(1.0, None)`` when the candidate already satisfies the bounds.
    Otherwise returns the crossing ratio ``p = beta / (beta - beta_hat)``
    minimised over masked coordinates driven negative, together with the
    blocking coordinate attaining it; the interpolated point
    ``(1 - p) * current + p * candidate`` has that coordinate exactly zero.
    """
    current = np.asarray(current, dtype=float)
    candidate = np.asarray(candidate, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    violated = mask & (candidate < 0.0)
    if not violated.any():
        return 1.0, None
    idx = np.flatnonzero(violated)
    ratios = current[idx] / (current[idx] - candidate[idx])
    k = int(np.argmin(ratios))
    return float(ratios[k]), int(idx[k])


def select_entering_index(score_vector, working, mask, tol):
    """Excluded masked column with the largest score, or None at the optimum.

    Only a score component above ``tol`` justifies growing the working set;
    when none exceeds it, the KKT conditions hold and the fit is done.
    """
    score_vector = np.asarray(score_vector, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    candidates = [j for j in np.flatnonzero(mask) if j not in working]
    if not candidates:
        return None
    candidates = np.asarray(candidates)
    best = candidates[int(np.argmax(score_vector[candidates]))]
    return int(best) if score_vector[best] > tol else None


def _maximize_bounded(X, mask, data, options, frozen=None, beta0=None, working0=None):
    """Run the active-set loop over design columns ``X`` with bound mask.

    ``frozen`` maps column indices to fixed values excluded from the search
    (profile likelihood uses this). Returns
    ``(beta, log_likelihood, working_set, trace, converged)``.
    """
    P = X.shape[1]
    mask = np.asarray(mask, dtype=bool)
    frozen = dict(frozen) if frozen else {}
    X_sorted = X[data.sort_index]

    if beta0 is not None:
        beta = np.array(beta0, dtype=float)
    else:
        beta = np.zeros(P)
    for j, v in frozen.items():
        beta[j] = v

    if working0 is not None:
        working = WorkingSet(j for j in working0 if j not in frozen)
    else:
        working = WorkingSet(
            j for j in np.flatnonzero(~mask) if j not in frozen
        )
    if len(working) == 0:
        raise ValueError("no unconstrained columns to initialise the working set")

    max_outer = options.max_outer if options.max_outer is not None else max(30, 10 * P)
    trace = IterationTrace()
    converged = False
    ll = _log_likelihood_raw(data, X @ beta)

    for _ in range(max_outer):
        candidate, ll_cand, _ = _newton_restricted(
            X, data, working.indices, beta, options.newton_tol, options.max_newton_iter
        )
        p, blocking = feasibility_ratio(beta, candidate, mask)
        if blocking is not None:
            beta = (1.0 - p) * beta + p * candidate
            beta[blocking] = 0.0
            # rounding in the interpolation can leave -1e-17 residue elsewhere
            beta[mask & (beta < 0.0)] = 0.0
            working.remove(blocking)
            ll = _log_likelihood_raw(data, X @ beta)
            trace.append(
                working_size=len(working), objective=-ll, action="restore",
                index=blocking, step_ratio=p,
            )
            continue

        beta = candidate
        ll = ll_cand
        trace.append(working_size=len(working), objective=-ll, action="subproblem")

        grad = _score_raw(data, X @ beta, X_sorted)
        entering = select_entering_index(grad, working, mask, options.kkt_tol)
        if entering is None:
            # certify rather than trust the subproblem: a diverging
            # coefficient can leave residual score on a working column
            wcols = np.asarray(working.indices, dtype=int)
            converged = bool(np.max(np.abs(grad[wcols])) <= options.kkt_tol)
            trace.append(working_size=len(working), objective=-ll, action="terminate")
            break
        working.add(entering)
        trace.append(
            working_size=len(working), objective=-ll, action="add", index=entering
        )

    return beta, ll, working, trace, converged


def fit(data, spec, options=None):
    """Fit the shape-restricted additive Cox model.

    Parameters
    ----------
    data : SurvivalDataset
    spec : ModelSpec
        One shape label (and knot strategy where shaped) per covariate.
    options : FitOptions, optional

    Returns
    -------
    FitResult

    Raises
    ------
    ConvergenceError
        If the inner Newton solver stalls; the outer trace is attached.
    """
    options = options or FitOptions()
    design, expansion = expand_design(data, spec)
    beta, ll, working, trace, converged = _maximize_bounded(
        design.columns, expansion.constraint_mask, data, options
    )

    eta = design.columns @ beta
    baseline = breslow_baseline(data, eta)
    components = tuple(
        center_component(
            reconstruct_component(b.covariate_index, beta, expansion),
            data.covariates[:, b.covariate_index],
        )
        for b in expansion.blocks
    )
    return FitResult(
        coefficients=beta,
        log_likelihood=ll,
        working_set=working.indices,
        design=design,
        expansion=expansion,
        baseline=baseline,
        components=components,
        trace=trace,
        converged=converged,
    )
