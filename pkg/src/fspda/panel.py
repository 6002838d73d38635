"""Panel container: one treated unit plus a block of control units,
split into pre- and post-treatment windows at row ``t1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidPanelError

MIN_PRE_ROWS = 3
MIN_POST_ROWS = 2


@dataclass(frozen=True, eq=False)
class PanelData:
    """Observed outcomes for one treated unit and N control units.

    Rows are time periods; the first ``t1`` rows are pre-treatment, the
    remaining rows post-treatment. ``intercept`` records whether fits on
    this panel should include a constant term.

    Parameters
    ----------
    treated : array, shape (t1 + t2,)
        Outcome series of the treated unit.
    controls : array, shape (t1 + t2, n_units)
        Outcome series of the control units, one column per unit.
    t1 : int
        Number of pre-treatment rows (>= 3); at least 2 rows must follow.
    labels : sequence of str
        Distinct unit names, one per control column.
    intercept : bool
        Include a constant in regressions on this panel.
    """

    treated: np.ndarray
    controls: np.ndarray
    t1: int
    labels: tuple[str, ...]
    intercept: bool = False

    def __post_init__(self):
        treated = np.asarray(self.treated, dtype=np.float64).reshape(-1)
        controls = np.asarray(self.controls, dtype=np.float64)
        if controls.ndim != 2:
            raise InvalidPanelError("controls must be a 2-d array (rows = periods)")
        if controls.shape[0] != treated.shape[0]:
            raise InvalidPanelError(
                f"treated has {treated.shape[0]} rows but controls has {controls.shape[0]}"
            )
        labels = tuple(str(s) for s in self.labels)
        if len(labels) != controls.shape[1]:
            raise InvalidPanelError(
                f"{len(labels)} labels for {controls.shape[1]} control columns"
            )
        if len(set(labels)) != len(labels):
            raise InvalidPanelError("control labels must be distinct")
        t1 = int(self.t1)
        if t1 < MIN_PRE_ROWS:
            raise InvalidPanelError(f"need at least {MIN_PRE_ROWS} pre-treatment rows, got {t1}")
        if treated.shape[0] - t1 < MIN_POST_ROWS:
            raise InvalidPanelError(
                f"need at least {MIN_POST_ROWS} post-treatment rows, got {treated.shape[0] - t1}"
            )
        if not np.all(np.isfinite(treated)):
            raise InvalidPanelError("treated series contains non-finite values")
        if not np.all(np.isfinite(controls)):
            raise InvalidPanelError("control matrix contains non-finite values")
        object.__setattr__(self, "treated", treated)
        object.__setattr__(self, "controls", controls)
        object.__setattr__(self, "t1", t1)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "intercept", bool(self.intercept))

    @property
    def n_units(self) -> int:
        return self.controls.shape[1]

    @property
    def t2(self) -> int:
        return self.treated.shape[0] - self.t1

    @property
    def pre_treated(self) -> np.ndarray:
        return self.treated[: self.t1]

    @property
    def post_treated(self) -> np.ndarray:
        return self.treated[self.t1 :]

    @property
    def pre_controls(self) -> np.ndarray:
        return self.controls[: self.t1]

    @property
    def post_controls(self) -> np.ndarray:
        return self.controls[self.t1 :]
