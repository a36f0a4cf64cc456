"""Shape taxonomy, knot selection, and basis expansion of the design matrix.

Each shape-restricted covariate is replaced by step or wedge basis columns
anchored at a knot set; the shape constraint then reduces to nonnegativity
bounds on the basis coefficients, except that the first basis coefficient of
a plain convex or concave covariate stays free so the component can change
direction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import DegenerateCovariateError
from .survival import DesignMatrix

SHAPE_LABELS = ("l", "in", "de", "cvx", "cvxin", "cvxde", "ccv", "ccvin", "ccvde")
# shapes whose first basis coefficient is unconstrained
FREE_FIRST_SHAPES = ("cvx", "ccv")

ORDER_STATISTICS = "order_statistics"
QUANTILES = "quantiles"
CUSTOM = "custom"


@dataclass(frozen=True)
class KnotStrategy:
    """How to pick candidate knots for one covariate.

    Use the classmethod constructors; ``parse`` understands the CLI strings
    ``order_statistics``, ``quantiles:<m>`` and ``custom:[v1,v2,...]``.
    """

    kind: str
    count: int | None = None
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind == QUANTILES:
            if self.count is None or self.count < 2:
                raise ValueError("quantile knot count must be at least 2")
        elif self.kind == CUSTOM:
            if not self.values:
                raise ValueError("custom knots require at least one value")
            if np.any(np.diff(self.values) <= 0):
                raise ValueError("custom knots must be strictly ascending")
        elif self.kind != ORDER_STATISTICS:
            raise ValueError(f"unknown knot strategy {self.kind!r}")

    @classmethod
    def order_statistics(cls):
        return cls(ORDER_STATISTICS)

    @classmethod
    def quantiles(cls, count):
        return cls(QUANTILES, count=int(count))

    @classmethod
    def custom(cls, values):
        return cls(CUSTOM, values=tuple(float(v) for v in values))

    @classmethod
    def parse(cls, text):
        text = text.strip()
        if text == ORDER_STATISTICS:
            return cls.order_statistics()
        if text.startswith("quantiles:"):
            return cls.quantiles(int(text.split(":", 1)[1]))
        if text.startswith("custom:"):
            body = text.split(":", 1)[1].strip()
            if body.startswith("[") and body.endswith("]"):
                body = body[1:-1]
            return cls.custom([float(v) for v in body.split(",") if v.strip()])
        raise ValueError(
            f"unknown knot strategy {text!r}; expected order_statistics, "
            "quantiles:<m> or custom:[v1,v2,...]"
        )

    def describe(self):
        if self.kind == QUANTILES:
            return f"quantiles:{self.count}"
        if self.kind == CUSTOM:
            return "custom:[" + ",".join(repr(v) for v in self.values) + "]"
        return ORDER_STATISTICS


@dataclass(frozen=True)
class KnotSet:
    """Ascending, deduplicated knots for one covariate."""

    covariate_index: int
    knots: np.ndarray

    @property
    def count(self):
        return self.knots.shape[0]


@dataclass(frozen=True)
class CovariateSpec:
    """Declared shape (and knot strategy, when shaped) for one covariate."""

    name: str
    shape: str
    knots: KnotStrategy | None = None

    def __post_init__(self):
        if self.shape not in SHAPE_LABELS:
            raise ValueError(
                f"unknown shape {self.shape!r} for covariate {self.name!r}; "
                f"valid labels: {', '.join(SHAPE_LABELS)}"
            )
        if self.shape == "l" and self.knots is not None:
            raise ValueError(f"linear covariate {self.name!r} takes no knot strategy")

    @property
    def strategy(self):
        """Effective knot strategy; shaped covariates default to order statistics."""
        return self.knots if self.knots is not None else KnotStrategy.order_statistics()


@dataclass(frozen=True)
class ModelSpec:
    """Per-covariate shapes defining the expansion; order fixes the layout."""

    covariates: tuple[CovariateSpec, ...]

    def __post_init__(self):
        names = [c.name for c in self.covariates]
        if len(set(names)) != len(names):
            raise ValueError("covariate names must be unique")
        if not self.covariates:
            raise ValueError("model spec needs at least one covariate")

    @property
    def d_z(self):
        return sum(1 for c in self.covariates if c.shape == "l")

    @property
    def d_x(self):
        return sum(1 for c in self.covariates if c.shape != "l")

    @property
    def names(self):
        return tuple(c.name for c in self.covariates)


def select_knots(values, strategy, covariate_index=0):
    """Choose the candidate knot set for one covariate.

    Order statistics keep every distinct observed value. The quantile rule
    takes levels ``0, 1/m, ..., 1`` as lower empirical quantiles: level 0 is
    the minimum and level ``k/m`` is the order statistic of rank
    ``ceil(k*n/m)`` (computed in integer arithmetic). Duplicates are merged
    in every case.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("cannot select knots from an empty sample")
    distinct = np.unique(values)
    if distinct.size < 2 and strategy.kind != CUSTOM:
        raise DegenerateCovariateError(
            f"covariate has {distinct.size} distinct value(s); need at least 2"
        )
    if strategy.kind == ORDER_STATISTICS:
        knots = distinct
    elif strategy.kind == QUANTILES:
        srt = np.sort(values)
        n = srt.shape[0]
        m = strategy.count
        idx = [0] + [-(-(k * n) // m) - 1 for k in range(1, m + 1)]
        knots = np.unique(srt[idx])
    else:
        knots = np.unique(np.asarray(strategy.values, dtype=float))
        lo, hi = distinct[0], distinct[-1]
        if knots[0] < lo or knots[-1] > hi:
            warnings.warn(
                f"custom knots extend outside the observed range [{lo:g}, {hi:g}]",
                stacklevel=2,
            )
    if knots.size < 1:
        raise DegenerateCovariateError("knot selection produced an empty set")
    return KnotSet(covariate_index=covariate_index, knots=knots)


def basis_value(shape, knot, x):
    """Evaluate the basis function of ``shape`` anchored at ``knot``.

    Total in ``x``; monotone shapes give unit steps, the others wedges. The
    boundary at ``x == knot`` is closed exactly as each indicator is written
    (``de`` alone uses the strict inequality ``x < knot``).
    """
    x = np.asarray(x, dtype=float)
    if shape == "in":
        out = (knot <= x).astype(float)
    elif shape == "de":
        out = (x < knot).astype(float)
    elif shape in ("cvx", "cvxin"):
        out = (x - knot) * (knot <= x)
    elif shape == "cvxde":
        out = (knot - x) * (x <= knot)
    elif shape in ("ccv", "ccvde"):
        out = (knot - x) * (knot <= x)
    elif shape == "ccvin":
        out = (x - knot) * (x <= knot)
    else:
        raise ValueError(f"no basis function for shape {shape!r}")
    return out if out.ndim else float(out)


def _basis_matrix(shape, knots, x):
    x = np.asarray(x, dtype=float)[:, None]
    k = np.asarray(knots, dtype=float)[None, :]
    if shape == "in":
        return (k <= x).astype(float)
    if shape == "de":
        return (x < k).astype(float)
    if shape in ("cvx", "cvxin"):
        return (x - k) * (k <= x)
    if shape == "cvxde":
        return (k - x) * (x <= k)
    if shape in ("ccv", "ccvde"):
        return (k - x) * (k <= x)
    if shape == "ccvin":
        return (x - k) * (x <= k)
    raise ValueError(f"no basis function for shape {shape!r}")


@dataclass(frozen=True)
class ComponentBlock:
    """Design-column block for one shape-restricted covariate.

    ``declared_knots`` is the full selected knot set; ``knots`` keeps only
    those whose basis column is not identically zero on the sample (e.g. the
    wedge anchored at the sample maximum vanishes everywhere).
    """

    covariate_index: int
    name: str
    shape: str
    declared_knots: np.ndarray
    knots: np.ndarray
    start: int

    @property
    def size(self):
        return self.knots.shape[0]

    @property
    def free_first(self):
        return self.shape in FREE_FIRST_SHAPES and self.knots[0] == self.declared_knots[0]

    def to_dict(self):
        return {
            "covariate_index": self.covariate_index,
            "name": self.name,
            "shape": self.shape,
            "declared_knots": [float(v) for v in self.declared_knots],
            "knots": [float(v) for v in self.knots],
            "start": self.start,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            covariate_index=int(d["covariate_index"]),
            name=d["name"],
            shape=d["shape"],
            declared_knots=np.asarray(d["declared_knots"], dtype=float),
            knots=np.asarray(d["knots"], dtype=float),
            start=int(d["start"]),
        )


@dataclass(frozen=True)
class BasisExpansion:
    """Layout of the expanded design: linear columns first, then one block
    per shaped covariate in declaration order with knots ascending.

    ``constraint_mask[j]`` is True when coefficient ``j`` is bound to be
    nonnegative; linear columns and the first basis column of each plain
    convex/concave covariate are unconstrained.
    """

    linear: tuple[tuple[int, str], ...]  # (covariate_index, name) per linear column
    blocks: tuple[ComponentBlock, ...]
    constraint_mask: np.ndarray
    labels: tuple

    @property
    def n_columns(self):
        return self.constraint_mask.shape[0]

    @property
    def d_z(self):
        return len(self.linear)

    @property
    def knot_sets(self):
        return tuple(
            KnotSet(covariate_index=b.covariate_index, knots=b.declared_knots)
            for b in self.blocks
        )

    @property
    def shapes(self):
        return tuple(b.shape for b in self.blocks)

    def linear_column(self, name):
        """Design-column index of a linear covariate, by name."""
        for j, (_, nm) in enumerate(self.linear):
            if nm == name:
                return j
        raise KeyError(f"no linear covariate named {name!r}")

    def block_for(self, covariate_index):
        for b in self.blocks:
            if b.covariate_index == covariate_index:
                return b
        raise KeyError(f"covariate {covariate_index} is not shape-restricted")

    def expand_rows(self, covariates):
        """Expand raw covariate rows into design rows (prediction path).

        Uses exactly the training-time arithmetic, so training rows
        reproduce the fitted design bit for bit.
        """
        covariates = np.atleast_2d(np.asarray(covariates, dtype=float))
        parts = [covariates[:, [idx]] for idx, _ in self.linear]
        for b in self.blocks:
            parts.append(_basis_matrix(b.shape, b.knots, covariates[:, b.covariate_index]))
        return np.hstack(parts) if parts else np.empty((covariates.shape[0], 0))

    def to_dict(self):
        return {
            "linear": [[idx, name] for idx, name in self.linear],
            "blocks": [b.to_dict() for b in self.blocks],
            "constraint_mask": [bool(v) for v in self.constraint_mask],
        }

    @classmethod
    def from_dict(cls, d):
        linear = tuple((int(i), str(n)) for i, n in d["linear"])
        blocks = tuple(ComponentBlock.from_dict(b) for b in d["blocks"])
        mask = np.asarray(d["constraint_mask"], dtype=bool)
        labels = _build_labels(linear, blocks)
        return cls(linear=linear, blocks=blocks, constraint_mask=mask, labels=labels)


def _build_labels(linear, blocks):
    labels = [("linear", name) for _, name in linear]
    for b in blocks:
        labels.extend(("basis", b.name, float(k)) for k in b.knots)
    return tuple(labels)


def expand_design(data, spec):
    """Expand a dataset under a model spec.

    Returns the design matrix (linear columns, then covariate-major,
    knot-minor basis columns) together with the expansion metadata holding
    the nonnegativity mask. Basis columns identically zero on the sample are
    dropped; their coefficients could never move anyway.
    """
    if len(spec.covariates) != data.covariates.shape[1]:
        raise ValueError(
            f"spec declares {len(spec.covariates)} covariates but data has "
            f"{data.covariates.shape[1]} columns"
        )
    linear = []
    mask_parts = []
    for i, cov in enumerate(spec.covariates):
        if cov.shape == "l":
            linear.append((i, cov.name))
            mask_parts.append(np.zeros(1, dtype=bool))

    blocks = []
    start = len(linear)
    for i, cov in enumerate(spec.covariates):
        if cov.shape == "l":
            continue
        column = data.covariates[:, i]
        knot_set = select_knots(column, cov.strategy, covariate_index=i)
        B = _basis_matrix(cov.shape, knot_set.knots, column)
        keep = np.any(B != 0.0, axis=0)
        if not keep.any():
            raise DegenerateCovariateError(
                f"every basis column for covariate {cov.name!r} is zero on the sample"
            )
        block = ComponentBlock(
            covariate_index=i,
            name=cov.name,
            shape=cov.shape,
            declared_knots=knot_set.knots,
            knots=knot_set.knots[keep],
            start=start,
        )
        if cov.shape in FREE_FIRST_SHAPES and not block.free_first:
            warnings.warn(
                f"first knot column of {cov.name!r} was dropped; the "
                f"{cov.shape} component has no unconstrained direction",
                stacklevel=2,
            )
        blocks.append(block)
        bmask = np.ones(block.size, dtype=bool)
        if block.free_first:
            bmask[0] = False
        mask_parts.append(bmask)
        start += block.size

    expansion = BasisExpansion(
        linear=tuple(linear),
        blocks=tuple(blocks),
        constraint_mask=np.concatenate(mask_parts) if mask_parts else np.zeros(0, bool),
        labels=_build_labels(tuple(linear), tuple(blocks)),
    )
    design = DesignMatrix(columns=expansion.expand_rows(data.covariates),
                          labels=expansion.labels)
    return design, expansion


@dataclass(frozen=True)
class ComponentFunction:
    """One fitted shape-restricted component.

    ``evaluate`` returns the raw function used inside the linear predictor;
    ``centered`` subtracts ``centering_constant``, the constant reported so
    displayed components have mean zero over the training sample. Beyond the
    outermost knots the basis functions extrapolate naturally: step shapes
    stay constant, wedge shapes continue linearly.
    """

    covariate_index: int
    name: str
    shape: str
    knots: np.ndarray
    weights: np.ndarray
    centering_constant: float = 0.0

    def evaluate(self, x):
        out = _basis_matrix(self.shape, self.knots, np.atleast_1d(x)) @ self.weights
        return out if np.ndim(x) else float(out[0])

    def centered(self, x):
        return self.evaluate(x) - self.centering_constant

    @property
    def used_knots(self):
        """Knots carrying strictly positive weight (first knot of cvx/ccv
        counts as used whenever its free weight is nonzero)."""
        return self.knots[self.weights != 0.0]


def reconstruct_component(covariate_index, coefficients, expansion):
    """Rebuild the fitted component function for one shaped covariate."""
    block = expansion.block_for(covariate_index)
    weights = np.asarray(coefficients, dtype=float)[block.start:block.start + block.size]
    bound = expansion.constraint_mask[block.start:block.start + block.size]
    if np.any(weights[bound] < 0):
        raise ValueError("masked coefficients must be nonnegative")
    return ComponentFunction(
        covariate_index=covariate_index,
        name=block.name,
        shape=block.shape,
        knots=block.knots,
        weights=weights,
    )


def center_component(component, sample_values):
    """Fix the reporting constant so the component has sample mean zero."""
    sample_values = np.asarray(sample_values, dtype=float)
    constant = float(component.evaluate(sample_values).mean()) if sample_values.size else 0.0
    return replace(component, centering_constant=constant)
