"""Dense least-squares kernel used by every other module.

All fits go through a singular-value solve with an explicit rank check:
forward selection needs a crisp "this candidate is collinear" signal, so a
rank-deficient design raises instead of silently pseudo-inverting. The
residual variance uses divisor T (a plain sample variance of residuals),
and R-squared is centered exactly when an intercept is present.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .exceptions import (
    DimensionMismatchError,
    EmptySetError,
    InvalidIndexError,
    RankDeficientError,
)
from .panel import PanelData


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Regressor block for a single OLS fit.

    ``values`` has one row per period and one column per regressor. When
    ``has_intercept`` is set, a constant column is implicitly prepended at
    fit time and the leading coefficient slot is the intercept.
    """

    values: np.ndarray
    has_intercept: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DimensionMismatchError("design values must be 2-d (rows = periods)")
        if not np.all(np.isfinite(values)):
            raise DimensionMismatchError("design matrix contains non-finite entries")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "has_intercept", bool(self.has_intercept))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_columns(self) -> int:
        """Number of estimated coefficients, intercept included."""
        return self.values.shape[1] + (1 if self.has_intercept else 0)

    def augmented(self) -> np.ndarray:
        """Values with the constant column materialized in front, if any."""
        if not self.has_intercept:
            return self.values
        ones = np.ones((self.values.shape[0], 1))
        return np.hstack([ones, self.values])


@dataclass(frozen=True, eq=False)
class OlsFit:
    """Result of one least-squares fit.

    ``coefficients`` carries the intercept in slot 0 when the design had
    one. ``sigma2_hat`` is the mean squared residual (divisor T), and
    ``r_squared`` is 1 - sigma2_hat / response variance, centered when an
    intercept is present and uncentered otherwise.
    """

    coefficients: np.ndarray
    residuals: np.ndarray
    sigma2_hat: float
    r_squared: float
    has_intercept: bool

    @property
    def intercept(self) -> float:
        return float(self.coefficients[0]) if self.has_intercept else 0.0

    @property
    def slopes(self) -> np.ndarray:
        return self.coefficients[1:] if self.has_intercept else self.coefficients


def rank_tolerance(n_rows: int, n_cols: int) -> float:
    """Relative singular-value cutoff: max(T, k) times machine epsilon."""
    return max(n_rows, n_cols) * np.finfo(np.float64).eps


def ols_fit(y: np.ndarray, X: DesignMatrix) -> OlsFit:
    """Least-squares fit of ``y`` on the design, with a hard rank check.

    Parameters
    ----------
    y : array, shape (T,)
        Response series.
    X : DesignMatrix
        Regressors; a constant column is prepended when ``has_intercept``.

    Returns
    -------
    OlsFit

    Raises
    ------
    DimensionMismatchError
        If shapes disagree or T < number of coefficients + 1.
    RankDeficientError
        If the smallest singular value of the (augmented) design falls
        below max(T, k) * eps times the largest singular value.
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(y)):
        raise DimensionMismatchError("response contains non-finite values")
    if y.shape[0] != X.n_rows:
        raise DimensionMismatchError(
            f"response has {y.shape[0]} rows but design has {X.n_rows}"
        )
    n_coef = X.n_columns
    t = y.shape[0]
    if t < n_coef + 1:
        raise DimensionMismatchError(
            f"need at least {n_coef + 1} rows to fit {n_coef} coefficients, got {t}"
        )

    design = X.augmented()
    if n_coef == 0:
        coefficients = np.empty(0)
        residuals = y.copy()
    else:
        coefficients, _, rank, _ = np.linalg.lstsq(
            design, y, rcond=rank_tolerance(t, n_coef)
        )
        if rank < n_coef:
            raise RankDeficientError(
                f"design has numerical rank {rank} < {n_coef} columns"
            )
        residuals = y - design @ coefficients

    ssr = float(residuals @ residuals)
    sigma2_hat = ssr / t
    if X.has_intercept:
        centered = y - y.mean()
        sst = float(centered @ centered)
    else:
        sst = float(y @ y)
    if sst <= 0.0:
        r_squared = 1.0 if ssr <= 1e-30 else 0.0
    else:
        r_squared = float(np.clip(1.0 - ssr / sst, 0.0, 1.0))
    return OlsFit(
        coefficients=coefficients,
        residuals=residuals,
        sigma2_hat=sigma2_hat,
        r_squared=r_squared,
        has_intercept=X.has_intercept,
    )


def gram_min_eigenvalue(panel: PanelData, unit_set: Iterable[int]) -> float:
    """Minimum eigenvalue of the pre-treatment sample Gram matrix.

    The Gram matrix is (1/t1) * sum over pre-treatment rows of the outer
    product of the selected control outcomes. A value near zero flags a
    collinear selection; permuting ``unit_set`` does not change the result.
    """
    units = list(unit_set)
    if len(units) == 0:
        raise EmptySetError("unit_set must be nonempty")
    n = panel.n_units
    for j in units:
        if not (isinstance(j, (int, np.integer)) and 0 <= int(j) < n):
            raise InvalidIndexError(f"unit index {j!r} not in [0, {n})")
    block = panel.pre_controls[:, [int(j) for j in units]]
    gram = block.T @ block / panel.t1
    smallest = float(np.linalg.eigvalsh(gram)[0])
    return max(smallest, 0.0)
