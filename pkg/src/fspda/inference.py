"""Counterfactual prediction and the average-effect test.

The counterfactual for each post-treatment period is the selected-unit
regression extrapolated forward; per-period effects are observed minus
counterfactual. The long-run variance of their mean uses the truncated
(uniform) kernel exactly as defined, which is not guaranteed positive:
a degenerate estimate raises, and a Bartlett-weighted fallback is exposed
for callers that opt in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .exceptions import IndexOutOfRangeError, NonPositiveLrvError
from .panel import PanelData
from .selection import FittedModel

LRV_FLOOR = 1e-12

KERNEL_TRUNCATED = "truncated"
KERNEL_BARTLETT = "bartlett"


@dataclass(frozen=True, eq=False)
class EffectReport:
    """Per-period effects, their average, and the test decision."""

    effects: np.ndarray
    counterfactual: np.ndarray
    ate: float
    lrv: float
    tau: int
    z_stat: float
    p_value: float
    alpha: float
    reject: bool
    selected: tuple[int, ...]
    kernel: str = KERNEL_TRUNCATED

    @property
    def reject_05(self) -> bool:
        return abs(self.z_stat) > ndtri(0.975)


def predict_counterfactual(model: FittedModel, panel: PanelData) -> np.ndarray:
    """Extrapolate the fitted combination over the post-treatment rows."""
    n = panel.n_units
    for j in model.selected:
        if not 0 <= j < n:
            raise IndexOutOfRangeError(f"selected unit {j} not in [0, {n})")
    block = panel.post_controls[:, list(model.selected)]
    return model.intercept + block @ model.slopes


def default_lag(t2: int) -> int:
    """Rule-of-thumb truncation lag floor(4 * (t2/100)^(2/9)), clamped to [1, t2-1]."""
    if t2 < 2:
        raise ValueError(f"need at least 2 post-treatment periods, got {t2}")
    lag = math.floor(4.0 * (t2 / 100.0) ** (2.0 / 9.0))
    return max(1, min(lag, t2 - 1))


def _check_lrv_args(effects: np.ndarray, tau: int) -> np.ndarray:
    effects = np.asarray(effects, dtype=np.float64).reshape(-1)
    t2 = effects.shape[0]
    if t2 < 2:
        raise ValueError(f"need at least 2 effects, got {t2}")
    if not 0 <= tau <= t2 - 1:
        raise ValueError(f"lag must lie in [0, {t2 - 1}], got {tau}")
    return effects


def hac_lrv(effects: np.ndarray, tau: int) -> float:
    """Truncated-kernel long-run variance of the effect series.

    Computes (1/t2) * sum over pairs (t, s) with |t - s| <= tau of the
    demeaned products. Raises when the estimate is not positive, since the
    uniform kernel admits negative values.
    """
    effects = _check_lrv_args(effects, tau)
    t2 = effects.shape[0]
    d = effects - effects.mean()
    total = float(d @ d)
    for k in range(1, tau + 1):
        total += 2.0 * float(d[:-k] @ d[k:])
    lrv = total / t2
    if lrv <= LRV_FLOOR:
        raise NonPositiveLrvError(
            f"long-run variance {lrv:.3e} is not positive; "
            "inference is degenerate (consider the bartlett kernel)"
        )
    return lrv


def bartlett_lrv(effects: np.ndarray, tau: int) -> float:
    """Bartlett-weighted long-run variance, 1 - |t-s|/(tau+1) weights.

    Positive semi-definite alternative for the cases where the truncated
    kernel turns negative; still raises if the series has no variation.
    """
    effects = _check_lrv_args(effects, tau)
    t2 = effects.shape[0]
    d = effects - effects.mean()
    total = float(d @ d)
    for k in range(1, tau + 1):
        total += 2.0 * (1.0 - k / (tau + 1.0)) * float(d[:-k] @ d[k:])
    lrv = total / t2
    if lrv <= LRV_FLOOR:
        raise NonPositiveLrvError(f"long-run variance {lrv:.3e} is not positive")
    return lrv


def ate_test(
    panel: PanelData,
    model: FittedModel,
    tau: int | None = None,
    alpha: float = 0.05,
    kernel: str = KERNEL_TRUNCATED,
) -> EffectReport:
    """Average-effect test over the post-treatment window.

    Predicts the counterfactual, forms per-period effects, estimates the
    long-run variance at lag ``tau`` (rule-of-thumb when omitted) and
    compares sqrt(t2) * mean / sqrt(lrv) against the two-sided normal
    critical value at size ``alpha``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if kernel not in (KERNEL_TRUNCATED, KERNEL_BARTLETT):
        raise ValueError(f"unknown kernel {kernel!r}")
    counterfactual = predict_counterfactual(model, panel)
    effects = panel.post_treated - counterfactual
    t2 = panel.t2
    if tau is None:
        tau = default_lag(t2)
    estimator = hac_lrv if kernel == KERNEL_TRUNCATED else bartlett_lrv
    lrv = estimator(effects, tau)
    ate = float(effects.mean())
    z_stat = math.sqrt(t2) * ate / math.sqrt(lrv)
    p_value = 2.0 * (1.0 - float(ndtr(abs(z_stat))))
    reject = abs(z_stat) > float(ndtri(1.0 - alpha / 2.0))
    return EffectReport(
        effects=effects,
        counterfactual=counterfactual,
        ate=ate,
        lrv=lrv,
        tau=int(tau),
        z_stat=z_stat,
        p_value=p_value,
        alpha=alpha,
        reject=reject,
        selected=tuple(model.selected),
        kernel=kernel,
    )
