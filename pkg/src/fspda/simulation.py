"""Factor-model data generation and the Monte Carlo experiment runner.

Outcomes follow a 4-factor model: unit j at time t is loading_j' f_t plus
idiosyncratic noise. The treated unit and the first few controls carry
strong loadings, the rest weak ones, so a handful of controls span the
factor space. Post-treatment the treated unit receives an additive effect
drawn from one of seven treatment processes (D1-D3 have zero mean, D4-D7
nonzero). Replications are seeded independently from (seed, rep) via a
splittable scheme, so results are bit-identical regardless of how many
workers run them.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .exceptions import (
    ConfigError,
    EmptyPathError,
    InfeasibleError,
    NonPositiveLrvError,
    RankDeficientError,
)
from .inference import ate_test
from .lasso import ConvergenceWarning, LassoFit, lasso_path_bic
from .panel import PanelData
from .selection import FittedModel, fit_selected, forward_select, modified_bic_r

FACTOR_MODES = ("iid", "dynamic")
TREATMENTS = ("D1", "D2", "D3", "D4", "D5", "D6", "D7")
NULL_TREATMENTS = ("D1", "D2", "D3")
METHODS = ("forward", "lasso")

TREATMENT_BURN_IN = 50

FORWARD_BIC_CONSTANT = 1.0
LASSO_BIC_CONSTANT = 2.0
LASSO_GRID_SIZE = 100


@dataclass(frozen=True)
class DgpConfig:
    """One simulation scenario.

    ``n_strong_units`` counts units with loadings drawn from the strong
    range, treated unit included; the remaining units draw from the weak
    range. ``f2_lag`` picks the lag in the second dynamic factor's
    autoregression (the recursion is written with lag 2; set 1 for a
    conventional first-order version).
    """

    n_units: int = 100
    t1: int = 100
    t2: int = 100
    factor_mode: str = "iid"
    treatment: str = "D1"
    n_factors: int = 4
    strong_loading_range: tuple[float, float] = (1.0, 2.0)
    weak_loading_range: tuple[float, float] = (-0.1, 0.1)
    n_strong_units: int = 5
    idio_sd: float = 0.5
    burn_in: int = 200
    seed: int = 0
    f2_lag: int = 2

    def __post_init__(self):
        if self.factor_mode not in FACTOR_MODES:
            raise ConfigError(f"factor_mode must be one of {FACTOR_MODES}, got {self.factor_mode!r}")
        if self.treatment not in TREATMENTS:
            raise ConfigError(f"treatment must be one of {TREATMENTS}, got {self.treatment!r}")
        if self.n_units < 1:
            raise ConfigError("n_units must be positive")
        if self.t1 < 3 or self.t2 < 2:
            raise ConfigError(f"need t1 >= 3 and t2 >= 2, got t1={self.t1}, t2={self.t2}")
        if not 0 <= self.n_strong_units <= self.n_units + 1:
            raise ConfigError("n_strong_units must lie in [0, n_units + 1]")
        if self.idio_sd <= 0:
            raise ConfigError("idio_sd must be positive")
        if self.burn_in < 0:
            raise ConfigError("burn_in must be nonnegative")
        if self.factor_mode == "dynamic" and self.n_factors != 4:
            raise ConfigError("dynamic factor_mode defines exactly 4 factors")
        if self.f2_lag not in (1, 2):
            raise ConfigError(f"f2_lag must be 1 or 2, got {self.f2_lag}")


@dataclass(frozen=True, eq=False)
class SimulatedPanel:
    """Generated panel plus the quantities only a simulation knows.

    ``true_counterfactual`` is the treated unit's no-treatment outcome
    (common component plus its own idiosyncratic shock); the post-treatment
    treated rows equal it plus ``true_effects`` exactly.
    ``systematic_counterfactual`` is the common component alone, the
    predictable part of the counterfactual: prediction error is benchmarked
    against it, since no regression on other units can anticipate the
    treated unit's own shock.
    """

    panel: PanelData
    true_counterfactual: np.ndarray
    true_effects: np.ndarray
    systematic_counterfactual: np.ndarray
    factors: np.ndarray


@dataclass(frozen=True)
class MonteCarloReport:
    """Aggregated metrics over completed replications.

    ``n_replications`` counts completed replications (the denominator of
    ``rejection_rate``); replications that errored are counted in
    ``n_failed`` and excluded. ``rmpse`` is the square root of the mean,
    across replications, of the per-replication mean squared prediction
    error of the counterfactual.
    """

    method: str
    treatment: str
    n_replications: int
    n_failed: int
    median_selected: float
    rmpse: float
    rejection_rate: float


def generate_factors(
    mode: str,
    t_total: int,
    burn_in: int,
    rng: np.random.Generator,
    f2_lag: int = 2,
    n_factors: int = 4,
) -> np.ndarray:
    """Draw the common-factor block, one column per factor.

    iid mode: column l is N(0, l^2), no burn-in involved. dynamic mode:
    column 1 is white noise, column 2 an autoregression with coefficient
    0.9 at lag ``f2_lag``, column 3 a second-order moving average with
    weights (0.8, 0.4), column 4 an ARMA with both coefficients 0.5; all
    recursions start from zero and the first ``burn_in`` rows are dropped.
    """
    if mode == "iid":
        scales = np.arange(1, n_factors + 1, dtype=np.float64)
        return rng.standard_normal((t_total, n_factors)) * scales
    total = burn_in + t_total
    u = rng.standard_normal((total, 4))
    f = np.empty((total, 4))
    f[:, 0] = u[:, 0]
    ar2 = [1.0, -0.9] if f2_lag == 1 else [1.0, 0.0, -0.9]
    f[:, 1] = lfilter([1.0], ar2, u[:, 1])
    f[:, 2] = lfilter([1.0, 0.8, 0.4], [1.0], u[:, 2])
    f[:, 3] = lfilter([1.0, 0.5], [1.0, -0.5], u[:, 3])
    return f[burn_in:]


def _treatment_effects(kind: str, t2: int, rng: np.random.Generator) -> np.ndarray:
    """Per-period effects for one replication.

    The autoregressive processes (D3, D6, D7) start at their stationary
    mean and run a 50-period burn-in before the kept window.
    """
    if kind == "D1":
        return np.zeros(t2)
    if kind == "D2":
        return rng.normal(0.0, 1.0, t2)
    if kind == "D4":
        return rng.normal(0.5, 1.0, t2)
    if kind == "D5":
        return rng.normal(1.0, 1.0, t2)
    drift = {"D3": 0.0, "D6": 0.35, "D7": 0.7}[kind]
    phi = 0.3
    w = rng.standard_normal(TREATMENT_BURN_IN + t2)
    x = drift / (1.0 - phi)
    out = np.empty(t2)
    for t in range(TREATMENT_BURN_IN + t2):
        x = drift + phi * x + w[t]
        if t >= TREATMENT_BURN_IN:
            out[t - TREATMENT_BURN_IN] = x
    return out


def _generate_panel(config: DgpConfig, rng: np.random.Generator) -> SimulatedPanel:
    t_total = config.t1 + config.t2
    factors = generate_factors(
        config.factor_mode, t_total, config.burn_in, rng, config.f2_lag, config.n_factors
    )
    n_total = config.n_units + 1
    n_strong = config.n_strong_units
    strong = rng.uniform(*config.strong_loading_range, (n_strong, config.n_factors))
    weak = rng.uniform(*config.weak_loading_range, (n_total - n_strong, config.n_factors))
    loadings = np.vstack([strong, weak])
    noise = rng.normal(0.0, config.idio_sd, (t_total, n_total))
    outcomes = factors @ loadings.T + noise

    effects = _treatment_effects(config.treatment, config.t2, rng)
    treated = outcomes[:, 0].copy()
    true_counterfactual = treated[config.t1 :].copy()
    treated[config.t1 :] = true_counterfactual + effects
    systematic = (factors @ loadings[0])[config.t1 :]
    panel = PanelData(
        treated=treated,
        controls=outcomes[:, 1:],
        t1=config.t1,
        labels=tuple(f"unit{j}" for j in range(1, n_total)),
        intercept=False,
    )
    return SimulatedPanel(
        panel=panel,
        true_counterfactual=true_counterfactual,
        true_effects=effects,
        systematic_counterfactual=systematic,
        factors=factors,
    )


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    """Independent stream for one replication, split from the master seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep,)))


def generate_panel(config: DgpConfig) -> SimulatedPanel:
    """Generate one panel from the scenario's master seed."""
    return _generate_panel(config, np.random.default_rng(np.random.SeedSequence(config.seed)))


def generate_replication(config: DgpConfig, rep: int) -> SimulatedPanel:
    """Generate the panel for replication ``rep`` of the scenario."""
    return _generate_panel(config, replication_rng(config.seed, rep))


def lasso_as_model(fit: LassoFit, panel: PanelData) -> FittedModel:
    """View a penalized fit as a selected-set model for prediction.

    The selected set is the active set and the coefficients are the
    penalized ones (no refit), so predictions reproduce the full
    coefficient vector applied to all units.
    """
    active = tuple(int(j) for j in fit.active_indices)
    slopes = fit.coefficients[list(active)]
    if panel.intercept:
        coefficients = np.concatenate([[fit.intercept], slopes])
    else:
        coefficients = slopes
    y = panel.pre_treated
    sst = float(((y - y.mean()) ** 2).sum()) if panel.intercept else float(y @ y)
    ssr = fit.sigma2_hat * panel.t1
    r_squared = float(np.clip(1.0 - ssr / sst, 0.0, 1.0)) if sst > 0 else 1.0
    return FittedModel(
        selected=active,
        coefficients=coefficients,
        sigma2_hat=fit.sigma2_hat,
        r_squared=r_squared,
        r_hat=len(active),
        has_intercept=panel.intercept,
    )


_REP_FAILURES = (NonPositiveLrvError, InfeasibleError, RankDeficientError, EmptyPathError)


def _run_replication(config: DgpConfig, method: str, alpha: float, rep: int):
    """One replication: generate, select, fit, predict, test.

    Returns (n_selected, mspe, reject, z_stat) or None when the
    replication errored out.
    """
    sim = generate_replication(config, rep)
    panel = sim.panel
    try:
        if method == "forward":
            path = forward_select(panel)
            choice = modified_bic_r(
                path, panel.n_units, panel.t1, penalty_constant=FORWARD_BIC_CONSTANT
            )
            model = fit_selected(panel, path, int(choice))
            n_selected = model.r_hat
        else:
            # The dense tail of the penalty grid routinely hits the sweep
            # cap; that is expected per-replication behavior, not a failure.
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConvergenceWarning)
                fit, _ = lasso_path_bic(
                    panel, grid_size=LASSO_GRID_SIZE, penalty_constant=LASSO_BIC_CONSTANT
                )
            model = lasso_as_model(fit, panel)
            n_selected = fit.active_count
        report = ate_test(panel, model, alpha=alpha)
    except _REP_FAILURES:
        return None
    gap = sim.systematic_counterfactual - report.counterfactual
    mspe = float(gap @ gap) / panel.t2
    return n_selected, mspe, bool(report.reject), float(report.z_stat)


def _collect_replications(config, method, alpha, n_reps, workers):
    if method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {method!r}")
    if n_reps < 1:
        raise ConfigError(f"n_reps must be positive, got {n_reps}")
    reps = range(n_reps)
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunk = max(1, n_reps // (8 * workers))
            results = list(
                pool.map(_run_replication_args, [(config, method, alpha, r) for r in reps], chunksize=chunk)
            )
    else:
        results = [_run_replication(config, method, alpha, r) for r in reps]
    return results


def _run_replication_args(args):
    return _run_replication(*args)


def run_monte_carlo(
    config: DgpConfig,
    method: str = "forward",
    n_reps: int = 1000,
    alpha: float = 0.05,
    workers: int | None = None,
) -> MonteCarloReport:
    """Replicate the scenario and aggregate selection, prediction and test metrics.

    Forward selection is tuned by the modified information criterion with
    constant 1, the penalized baseline with constant 2. Failed
    replications (degenerate variance, infeasible fits) are excluded from
    every aggregate and counted in ``n_failed``.
    """
    results = _collect_replications(config, method, alpha, n_reps, workers)
    completed = [r for r in results if r is not None]
    n_failed = n_reps - len(completed)
    if not completed:
        raise ConfigError("every replication failed; nothing to aggregate")
    counts = np.array([r[0] for r in completed])
    mspes = np.array([r[1] for r in completed])
    rejects = np.array([r[2] for r in completed])
    return MonteCarloReport(
        method=method,
        treatment=config.treatment,
        n_replications=len(completed),
        n_failed=n_failed,
        median_selected=float(np.median(counts)),
        rmpse=float(math.sqrt(mspes.mean())),
        rejection_rate=float(rejects.mean()),
    )


def zstat_sample(
    config: DgpConfig,
    n_reps: int,
    method: str = "forward",
    alpha: float = 0.05,
    workers: int | None = None,
) -> np.ndarray:
    """Realized test statistics across replications under a null scenario."""
    if config.treatment not in NULL_TREATMENTS:
        raise ConfigError(
            f"z-statistic sampling requires a null treatment {NULL_TREATMENTS}, "
            f"got {config.treatment!r}"
        )
    results = _collect_replications(config, method, alpha, n_reps, workers)
    return np.array([r[3] for r in results if r is not None])
