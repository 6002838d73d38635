"""L1-penalized regression baseline with a tuned penalty path.

The objective is the mean squared pre-treatment residual plus lam * ||beta||_1,
minimized by cyclic coordinate descent. Columns are standardized internally
to unit sample second moment (centered as well when the panel carries an
intercept) so every coordinate sees a comparable scale; the soft-threshold
level implied by this objective is lam / 2. Coefficients are reported on the
original scale. Note the convention gap this creates: the penalty is applied
to the standardized columns, so on the original scale each coordinate is
effectively penalized by lam divided by its column scale. The reported
penalty value is the one in the objective above.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .panel import PanelData

CD_TOL = 1e-7
CD_MAX_SWEEPS = 10_000
LAMBDA_MIN_RATIO = 1e-3


class ConvergenceWarning(RuntimeWarning):
    """Coordinate descent returned a capped, not fully converged iterate."""


@njit(cache=True)
def _sweep(gram, corr, beta, g, threshold, indices):
    """One cyclic pass over ``indices``; updates beta and g in place.

    Returns the largest absolute coefficient change of the pass.
    """
    n = gram.shape[0]
    max_delta = 0.0
    for idx in range(indices.shape[0]):
        j = indices[idx]
        rho = corr[j] - g[j] + beta[j]
        if rho > threshold:
            new = rho - threshold
        elif rho < -threshold:
            new = rho + threshold
        else:
            new = 0.0
        delta = new - beta[j]
        if delta != 0.0:
            for i in range(n):
                g[i] += gram[i, j] * delta
            beta[j] = new
            if abs(delta) > max_delta:
                max_delta = abs(delta)
    return max_delta


@dataclass(frozen=True, eq=False)
class LassoFit:
    """Solution of the penalized problem at one penalty level.

    ``coefficients`` has one entry per control unit on the original data
    scale; coordinate descent produces exact zeros, and ``active_count``
    counts the nonzero entries. ``converged`` is False when the sweep cap
    was hit before the maximum coefficient change fell below tolerance.
    """

    lam: float
    coefficients: np.ndarray
    intercept: float
    active_count: int
    sigma2_hat: float
    converged: bool
    n_sweeps: int

    @property
    def active_indices(self) -> np.ndarray:
        return np.nonzero(self.coefficients)[0]


def _standardize(panel: PanelData):
    """Scale pre-treatment columns to unit sample second moment.

    With an intercept, columns and the response are centered first and the
    scale is the (divisor t1) standard deviation; without one the scale is
    the root mean square. Columns with zero scale are flagged invalid and
    pinned at coefficient zero.
    """
    X = panel.pre_controls
    y = panel.pre_treated
    t1 = panel.t1
    if panel.intercept:
        x_mean = X.mean(axis=0)
        y_mean = float(y.mean())
        xc = X - x_mean
        yc = y - y_mean
    else:
        x_mean = np.zeros(X.shape[1])
        y_mean = 0.0
        xc = X.copy()
        yc = y.copy()
    scale = np.sqrt(np.einsum("ij,ij->j", xc, xc) / t1)
    valid = scale > 0.0
    safe_scale = np.where(valid, scale, 1.0)
    xt = xc / safe_scale
    return xt, yc, safe_scale, valid, x_mean, y_mean


def _cd_solve(gram, corr, y2, valid, lam, beta0, trace=None):
    """Cyclic coordinate descent on the standardized problem.

    ``gram`` is X'X / t1 with unit diagonal on valid columns, ``corr`` is
    X'y / t1 and ``y2`` is y'y / t1. Convergence requires a full sweep
    whose largest coefficient change is below tolerance; between full
    sweeps the loop cycles over the active set only, which does not change
    the minimizer. Returns (beta, converged, sweeps).
    """
    beta = beta0.copy()
    g = np.ascontiguousarray(gram @ beta)
    gram = np.ascontiguousarray(gram)
    threshold = lam / 2.0
    all_idx = np.nonzero(valid)[0]

    def record_objective():
        if trace is not None:
            quad = float(beta @ g)
            trace.append(
                y2 - 2.0 * float(corr @ beta) + quad + lam * float(np.abs(beta).sum())
            )

    sweeps = 0
    converged = False
    while sweeps < CD_MAX_SWEEPS:
        max_delta = _sweep(gram, corr, beta, g, threshold, all_idx)
        sweeps += 1
        record_objective()
        if max_delta < CD_TOL:
            converged = True
            break
        # Between full passes, cycle over the active coordinates only;
        # the closing full pass above certifies the zero coordinates.
        active = np.nonzero(beta)[0]
        while sweeps < CD_MAX_SWEEPS and active.size:
            max_delta = _sweep(gram, corr, beta, g, threshold, active)
            sweeps += 1
            record_objective()
            if max_delta < CD_TOL:
                break
    return beta, converged, sweeps


def lasso_fit(panel: PanelData, lam: float, trace: list | None = None) -> LassoFit:
    """Solve the penalized regression at one penalty level.

    ``trace``, when given a list, receives the penalized objective after
    every sweep (on the standardized scale); it is nonincreasing. A fit
    that hits the sweep cap is returned as-is with ``converged=False`` and
    a warning.
    """
    if lam < 0:
        raise ValueError(f"penalty must be nonnegative, got {lam}")
    xt, yc, scale, valid, x_mean, y_mean = _standardize(panel)
    t1 = panel.t1
    gram = xt.T @ xt / t1
    corr = xt.T @ yc / t1
    beta_std, converged, sweeps = _cd_solve(
        gram, corr, float(yc @ yc) / t1, valid, lam, np.zeros(xt.shape[1]), trace=trace
    )
    return _assemble_fit(panel, lam, beta_std, converged, sweeps, xt, yc, scale, x_mean, y_mean)


def _assemble_fit(panel, lam, beta_std, converged, sweeps, xt, yc, scale, x_mean, y_mean):
    if not converged:
        warnings.warn(
            f"coordinate descent hit the sweep cap at penalty {lam:g}",
            ConvergenceWarning,
        )
    resid = yc - xt @ beta_std
    sigma2_hat = float(resid @ resid) / panel.t1
    coefficients = beta_std / scale
    intercept = y_mean - float(coefficients @ x_mean) if panel.intercept else 0.0
    return LassoFit(
        lam=float(lam),
        coefficients=coefficients,
        intercept=intercept,
        active_count=int(np.count_nonzero(beta_std)),
        sigma2_hat=sigma2_hat,
        converged=converged,
        n_sweeps=sweeps,
    )


def lambda_max(panel: PanelData) -> float:
    """Smallest penalty at which the all-zero solution is optimal.

    Zero is optimal iff every |X'y| / t1 correlation sits below lam / 2 on
    the standardized scale, so this is twice the largest absolute
    correlation.
    """
    xt, yc, _, valid, _, _ = _standardize(panel)
    if not valid.any():
        return 0.0
    corr = xt.T @ yc / panel.t1
    return 2.0 * float(np.max(np.abs(corr[valid])))


def lambda_grid(panel: PanelData, grid_size: int = 100) -> np.ndarray:
    """Log-spaced descending penalty grid from lambda_max down by 1e-3."""
    if grid_size < 2:
        raise ValueError(f"grid_size must be >= 2, got {grid_size}")
    top = lambda_max(panel)
    if top <= 0.0:
        return np.zeros(grid_size)
    return np.geomspace(top, LAMBDA_MIN_RATIO * top, grid_size)


def lasso_path_bic(
    panel: PanelData,
    grid_size: int = 100,
    penalty_constant: float = 2.0,
) -> tuple[LassoFit, float]:
    """Warm-started penalty path tuned by the modified information criterion.

    The criterion is log(sigma2) + penalty_constant * loglog(N) * k *
    log(t1)/t1 with k the number of nonzero coefficients, evaluated at
    every grid penalty; ties break toward the larger penalty (the sparser
    model). Returns the winning fit and its penalty.
    """
    grid = lambda_grid(panel, grid_size)
    t1 = panel.t1
    n = panel.n_units
    # loglog is undefined for a single unit; the complexity term is moot there
    per_unit = (
        penalty_constant * math.log(math.log(n)) * math.log(t1) / t1 if n >= 2 else 0.0
    )

    xt, yc, scale, valid, x_mean, y_mean = _standardize(panel)
    gram = xt.T @ xt / t1
    corr = xt.T @ yc / t1
    y2 = float(yc @ yc) / t1

    beta = np.zeros(n)
    best_fit: LassoFit | None = None
    best_lam = 0.0
    best_value = math.inf
    for lam in grid:
        beta, converged, sweeps = _cd_solve(gram, corr, y2, valid, float(lam), beta)
        fit = _assemble_fit(
            panel, float(lam), beta, converged, sweeps, xt, yc, scale, x_mean, y_mean
        )
        value = math.log(max(fit.sigma2_hat, 1e-300)) + per_unit * fit.active_count
        if value < best_value:
            best_value = value
            best_fit = fit
            best_lam = float(lam)
    assert best_fit is not None
    return best_fit, best_lam
