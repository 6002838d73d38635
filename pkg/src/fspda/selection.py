"""Greedy choice of control units and its exhaustive cross-check.

Forward selection adds one control per step, the one whose inclusion
maximizes the R-squared of the pre-treatment fit given everything already
chosen; nothing is ever dropped. Candidate scoring runs on an incrementally
orthogonalized copy of the control block (one rank-one sweep per step), so a
full pass over N candidates costs O(t1 * N); per-step coefficients come from
a triangular backsolve and agree with a from-scratch fit to near machine
precision. A modified information criterion picks the stopping step, and an
exhaustive best-subset search (feasible only at small N) provides the
reference point the greedy path is measured against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.linalg import solve_triangular

from .exceptions import (
    CombinatorialExplosionError,
    EmptyPathError,
    IndexOutOfRangeError,
    InfeasibleError,
    RankDeficientError,
)
from .panel import PanelData
from .regression import DesignMatrix, ols_fit

DEFAULT_R_MAX_CAP = 50
ZERO_VARIANCE_TOL = 1e-24
_MONOTONE_SLACK = 1e-9

STOP_RANK_DEFICIENT = "rank_deficient"
STOP_R_MAX = "r_max"


@dataclass(frozen=True, eq=False)
class SelectionStep:
    """One greedy step: the chosen unit and the fit after adding it."""

    chosen_index: int
    r_squared: float
    sigma2_hat: float
    coefficients: np.ndarray


@dataclass(frozen=True, eq=False)
class SelectionPath:
    """Ordered greedy trajectory with the reason it ended.

    ``stopped_early`` is set when the path ended before the requested
    number of steps because every remaining candidate was collinear with
    the current selection; ``stop_reason`` is "rank_deficient" in that
    case and "r_max" otherwise.
    """

    steps: tuple[SelectionStep, ...]
    stopped_early: bool
    stop_reason: str

    def __post_init__(self):
        steps = tuple(self.steps)
        seen = set()
        prev: SelectionStep | None = None
        for step in steps:
            if step.chosen_index in seen:
                raise ValueError(f"unit {step.chosen_index} selected twice")
            seen.add(step.chosen_index)
            if prev is not None:
                slack = _MONOTONE_SLACK * max(1.0, prev.sigma2_hat)
                if step.sigma2_hat > prev.sigma2_hat + slack:
                    raise ValueError("sigma2_hat must be nonincreasing along the path")
                if step.r_squared < prev.r_squared - _MONOTONE_SLACK:
                    raise ValueError("r_squared must be nondecreasing along the path")
            prev = step
        object.__setattr__(self, "steps", steps)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def chosen_indices(self) -> tuple[int, ...]:
        return tuple(step.chosen_index for step in self.steps)

    @property
    def sigma2_path(self) -> tuple[float, ...]:
        return tuple(step.sigma2_hat for step in self.steps)


@dataclass(frozen=True, eq=False)
class FittedModel:
    """Final selected set with its pre-treatment OLS fit."""

    selected: tuple[int, ...]
    coefficients: np.ndarray
    sigma2_hat: float
    r_squared: float
    r_hat: int
    has_intercept: bool

    @property
    def intercept(self) -> float:
        return float(self.coefficients[0]) if self.has_intercept else 0.0

    @property
    def slopes(self) -> np.ndarray:
        return self.coefficients[1:] if self.has_intercept else self.coefficients


def default_r_max(panel: PanelData) -> int:
    """Path-length cap when the caller supplies none.

    Anchored to the rate the selection depth must respect relative to the
    pre-treatment length, 3 * (t1 / log N)^(1/3), and kept inside bounds
    that leave the per-step fits well-posed. With very few controls the
    log is guarded away from zero.
    """
    t1 = panel.t1
    n = panel.n_units
    rate_cap = math.ceil(3.0 * (t1 / max(math.log(n), 1.0)) ** (1.0 / 3.0))
    return max(1, min(n, rate_cap, math.ceil(t1 / 2), DEFAULT_R_MAX_CAP))


def forward_select(panel: PanelData, r_max: int | None = None) -> SelectionPath:
    """Greedy forward selection of control units on the pre-treatment rows.

    At each step the candidate maximizing the R-squared of the enlarged
    regression is added; exact ties break toward the smallest column index.
    Candidates that are numerically collinear with the current selection
    are discarded permanently, and the path stops early once none remain.
    The effective number of steps is capped at
    min(r_max, N, t1 - intercept - 2).
    """
    if r_max is None:
        r_max = default_r_max(panel)
    if r_max < 1:
        raise ValueError(f"r_max must be >= 1, got {r_max}")

    t1 = panel.t1
    n = panel.n_units
    y = panel.pre_treated.copy()
    X = panel.pre_controls
    cap = min(int(r_max), n, t1 - int(panel.intercept) - 2)

    # Orthonormal basis of the selected design (intercept first), the
    # triangular factor, and Q'y, all grown one column per step.
    q_basis = np.empty((t1, cap + 1))
    r_tri = np.zeros((cap + 1, cap + 1))
    qty = np.empty(cap + 1)
    m = 0

    y_work = y.copy()
    x_work = X.copy()
    if panel.intercept:
        q0 = np.full(t1, 1.0 / math.sqrt(t1))
        q_basis[:, 0] = q0
        r_tri[0, 0] = math.sqrt(t1)
        qty[0] = q0 @ y_work
        y_work -= q0 * qty[0]
        x_work -= np.outer(q0, q0 @ x_work)
        m = 1
        sst = float(y_work @ y_work)
    else:
        sst = float(y @ y)

    norm2_orig = np.einsum("ij,ij->j", X, X)
    tol2 = (t1 * np.finfo(np.float64).eps) ** 2
    dead = np.zeros(n, dtype=bool)

    steps: list[SelectionStep] = []
    stopped_early = False
    stop_reason = STOP_R_MAX
    for _ in range(cap):
        den = np.einsum("ij,ij->j", x_work, x_work)
        dead |= den <= tol2 * norm2_orig
        if dead.all():
            stopped_early = True
            stop_reason = STOP_RANK_DEFICIENT
            break
        num = x_work.T @ y_work
        gains = np.where(dead, -np.inf, num * num / np.where(den > 0, den, 1.0))
        j = int(np.argmax(gains))

        # Orthogonalize the winner against the basis once more before
        # normalizing; keeps Q'Q near identity over long paths.
        q_new = x_work[:, j].copy()
        if m > 0:
            q_new -= q_basis[:, :m] @ (q_basis[:, :m].T @ q_new)
        nrm = float(np.linalg.norm(q_new))
        q_new /= nrm
        if m > 0:
            r_tri[:m, m] = q_basis[:, :m].T @ X[:, j]
        r_tri[m, m] = nrm
        q_basis[:, m] = q_new
        qty[m] = q_new @ y_work
        y_work -= q_new * qty[m]
        x_work -= np.outer(q_new, q_new @ x_work)
        dead[j] = True
        m += 1

        ssr = float(y_work @ y_work)
        sigma2_hat = ssr / t1
        if sst <= 0.0:
            r_squared = 1.0 if ssr <= 1e-30 else 0.0
        else:
            r_squared = float(np.clip(1.0 - ssr / sst, 0.0, 1.0))
        coefficients = solve_triangular(r_tri[:m, :m], qty[:m])
        steps.append(
            SelectionStep(
                chosen_index=j,
                r_squared=r_squared,
                sigma2_hat=sigma2_hat,
                coefficients=coefficients,
            )
        )
    return SelectionPath(steps=tuple(steps), stopped_early=stopped_early, stop_reason=stop_reason)


class BicChoice(int):
    """Stopping step chosen by the modified BIC.

    Behaves as the selected step count; ``zero_variance`` flags the
    short-circuit taken when some step already fits perfectly (the log
    objective is undefined there, and a perfect fit cannot be improved).
    ``objectives`` holds the evaluated criterion per step, or None when
    short-circuited.
    """

    zero_variance: bool
    objectives: tuple[float, ...] | None

    def __new__(cls, r_hat, zero_variance=False, objectives=None):
        obj = super().__new__(cls, r_hat)
        obj.zero_variance = bool(zero_variance)
        obj.objectives = objectives
        return obj


def modified_bic_r(
    path: SelectionPath,
    n_units: int,
    t1: int,
    penalty_constant: float = 1.0,
) -> BicChoice:
    """Stopping step minimizing log(sigma2) + c * loglog(N) * r * log(t1)/t1.

    Ties break toward the smaller step count. If some step already has
    (numerically) zero residual variance, the first such step is returned
    with ``zero_variance`` set instead of evaluating an undefined log.
    """
    if len(path) == 0:
        raise EmptyPathError("selection path has no steps")
    sigma2 = path.sigma2_path
    for r, s2 in enumerate(sigma2, start=1):
        if s2 <= ZERO_VARIANCE_TOL:
            return BicChoice(r, zero_variance=True)
    if n_units < 2:
        # loglog is undefined; a one-unit pool has a one-step path anyway
        return BicChoice(1)
    per_step = penalty_constant * math.log(math.log(n_units)) * math.log(t1) / t1
    objectives = tuple(
        math.log(s2) + per_step * r for r, s2 in enumerate(sigma2, start=1)
    )
    r_hat = 1 + int(np.argmin(objectives))
    return BicChoice(r_hat, zero_variance=False, objectives=objectives)


def fit_selected(panel: PanelData, path: SelectionPath, r_hat: int) -> FittedModel:
    """Fresh pre-treatment OLS fit on the first ``r_hat`` selected units."""
    if not 1 <= r_hat <= len(path):
        raise IndexOutOfRangeError(
            f"r_hat must lie in [1, {len(path)}], got {r_hat}"
        )
    selected = path.chosen_indices[:r_hat]
    design = DesignMatrix(
        panel.pre_controls[:, list(selected)], has_intercept=panel.intercept
    )
    fit = ols_fit(panel.pre_treated, design)
    return FittedModel(
        selected=selected,
        coefficients=fit.coefficients,
        sigma2_hat=fit.sigma2_hat,
        r_squared=fit.r_squared,
        r_hat=int(r_hat),
        has_intercept=panel.intercept,
    )


def _count_models(n: int, u: int) -> int:
    return sum(math.comb(n, s) for s in range(1, u + 1))


def best_subset_oracle(
    panel: PanelData,
    u: int,
    criterion: str = "min_sigma2",
    max_models: int = 10**6,
) -> tuple[tuple[int, ...], float]:
    """Exhaustive search over all control subsets of size at most ``u``.

    Returns the subset minimizing the chosen criterion on pre-treatment
    OLS fits, and its value. ``min_sigma2`` targets the residual variance
    itself; ``aic`` and ``aicc`` add the usual complexity penalties, with
    k counting the intercept when present:

        aic  = t1 * log(sigma2) + 2k
        aicc = t1 * log(sigma2) + 2k * t1 / (t1 - k - 1)

    Rank-deficient subsets are skipped. The total number of candidate
    models is guarded by ``max_models``.
    """
    n = panel.n_units
    if u < 1:
        raise ValueError(f"subset size must be >= 1, got {u}")
    u = min(u, n)
    if u > panel.t1 - int(panel.intercept) - 2:
        raise ValueError(
            f"subset size {u} too large for t1={panel.t1} pre-treatment rows"
        )
    if criterion not in ("min_sigma2", "aic", "aicc"):
        raise ValueError(f"unknown criterion {criterion!r}")
    n_models = _count_models(n, u)
    if n_models > max_models:
        raise CombinatorialExplosionError(
            f"{n_models} candidate subsets exceed guard of {max_models}"
        )

    t1 = panel.t1
    y = panel.pre_treated
    X = panel.pre_controls
    best_subset: tuple[int, ...] | None = None
    best_value = math.inf
    for size in range(1, u + 1):
        k = size + int(panel.intercept)
        for subset in combinations(range(n), size):
            try:
                fit = ols_fit(y, DesignMatrix(X[:, list(subset)], has_intercept=panel.intercept))
            except RankDeficientError:
                continue
            sigma2 = max(fit.sigma2_hat, 1e-300)
            if criterion == "min_sigma2":
                value = sigma2
            elif criterion == "aic":
                value = t1 * math.log(sigma2) + 2 * k
            else:
                value = t1 * math.log(sigma2) + 2 * k * t1 / (t1 - k - 1)
            if value < best_value:
                best_value = value
                best_subset = subset
    if best_subset is None:
        raise InfeasibleError("every candidate subset was rank deficient")
    return best_subset, float(best_value)
