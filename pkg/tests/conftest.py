import numpy as np
import pytest

from fspda import PanelData


def make_panel(treated, controls, t1, intercept=False, labels=None):
    controls = np.asarray(controls, dtype=float)
    if labels is None:
        labels = tuple(f"u{j}" for j in range(controls.shape[1]))
    return PanelData(
        treated=np.asarray(treated, dtype=float),
        controls=controls,
        t1=t1,
        labels=labels,
        intercept=intercept,
    )


def random_panel(seed, t1=40, t2=20, n_units=8, intercept=False, beta=None, noise_sd=0.3):
    """Panel whose treated series is a fixed linear combination plus noise."""
    rng = np.random.default_rng(seed)
    controls = rng.normal(0.0, 1.0, (t1 + t2, n_units))
    if beta is None:
        beta = np.zeros(n_units)
        beta[: min(3, n_units)] = (1.5, -0.8, 0.5)[: min(3, n_units)]
    treated = controls @ beta + rng.normal(0.0, noise_sd, t1 + t2)
    return make_panel(treated, controls, t1, intercept=intercept)


@pytest.fixture
def small_panel():
    return random_panel(seed=1234)
