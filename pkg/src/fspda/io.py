"""CSV panel ingestion, scenario files, and JSON report assembly.

Panels travel as wide CSV: first row headers, first column period labels,
every other column one unit. The treatment is specified by the period
label of the first post-treatment row. Scenario files are flat key = value
text mirroring the simulation config. Reports are JSON documents under a
versioned schema; all numbers are emitted in shortest round-trip form, so
loading a written file reproduces every value bit for bit.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .exceptions import (
    ConfigError,
    MissingColumnError,
    NonFiniteValueError,
    ParseError,
    TooFewRowsError,
    TreatmentMarkerNotFoundError,
)
from .inference import KERNEL_TRUNCATED, ate_test
from .panel import MIN_POST_ROWS, MIN_PRE_ROWS, PanelData
from .regression import gram_min_eigenvalue
from .selection import (
    FittedModel,
    SelectionPath,
    best_subset_oracle,
    default_r_max,
    fit_selected,
    forward_select,
    modified_bic_r,
)
from .simulation import (
    METHODS,
    DgpConfig,
    generate_replication,
    run_monte_carlo,
)

SCHEMA_VERSION = 1

MISSING_TOKENS = {"", "na", "n/a", "nan", "null", "none"}


# --- CSV panel ------------------------------------------------------------

def _read_rows(path):
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
    except FileNotFoundError:
        raise ParseError(f"input file not found: {path}") from None
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path} is not valid UTF-8: {exc}") from None
    if not rows:
        raise ParseError(f"{path} is empty")
    return rows


def read_panel_csv(
    path,
    treated_column: str,
    treatment_marker: str,
    excluded: tuple[str, ...] = (),
    intercept: bool = False,
) -> tuple[PanelData, list[str]]:
    """Parse a wide CSV into a panel; also returns the period labels.

    The marker names the first post-treatment period. Excluded columns are
    dropped from the control pool. Cell errors carry the file location:
    recognized missing tokens and non-finite numbers raise
    NonFiniteValueError, anything unparseable raises ParseError.
    """
    rows = _read_rows(path)
    header = [h.strip() for h in rows[0]]
    if len(header) < 3:
        raise ParseError("need a period column and at least two unit columns")
    if len(set(header)) != len(header):
        dupes = sorted({h for h in header if header.count(h) > 1})
        raise ParseError(f"duplicate column header(s): {', '.join(dupes)}")
    unit_names = header[1:]
    if treated_column not in unit_names:
        raise MissingColumnError(f"treated column {treated_column!r} not in header")
    for name in excluded:
        if name not in unit_names:
            raise MissingColumnError(f"excluded column {name!r} not in header")
    if treated_column in excluded:
        raise ConfigError(f"treated column {treated_column!r} cannot be excluded")

    periods: list[str] = []
    values: list[list[float]] = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(f"row {i} has {len(row)} cells, expected {len(header)}")
        periods.append(row[0].strip())
        parsed = []
        for name, cell in zip(unit_names, row[1:]):
            text = cell.strip()
            if text.lower() in MISSING_TOKENS:
                raise NonFiniteValueError(
                    f"missing value in row {i}, column {name!r}"
                )
            try:
                number = float(text)
            except ValueError:
                raise ParseError(
                    f"cannot parse {text!r} in row {i}, column {name!r}"
                ) from None
            if not math.isfinite(number):
                raise NonFiniteValueError(
                    f"non-finite value {text!r} in row {i}, column {name!r}"
                )
            parsed.append(number)
        values.append(parsed)

    if treatment_marker not in periods:
        raise TreatmentMarkerNotFoundError(
            f"treatment period {treatment_marker!r} not found in the first column"
        )
    t1 = periods.index(treatment_marker)
    n_rows = len(periods)
    if t1 < MIN_PRE_ROWS or n_rows - t1 < MIN_POST_ROWS:
        raise TooFewRowsError(
            f"treatment at row {t1 + 1} of {n_rows} leaves {t1} pre and "
            f"{n_rows - t1} post rows; need >= {MIN_PRE_ROWS} and >= {MIN_POST_ROWS}"
        )

    matrix = np.array(values)
    treated_pos = unit_names.index(treated_column)
    keep = [
        k for k, name in enumerate(unit_names)
        if k != treated_pos and name not in excluded
    ]
    panel = PanelData(
        treated=matrix[:, treated_pos],
        controls=matrix[:, keep],
        t1=t1,
        labels=tuple(unit_names[k] for k in keep),
        intercept=intercept,
    )
    return panel, periods


def load_panel(
    path,
    treated_column: str,
    treatment_marker: str,
    excluded: tuple[str, ...] = (),
    intercept: bool = False,
) -> PanelData:
    """Parse a wide CSV into a panel (see ``read_panel_csv``)."""
    return read_panel_csv(path, treated_column, treatment_marker, excluded, intercept)[0]


def write_panel(
    panel: PanelData,
    path,
    treated_name: str = "treated",
    periods: list[str] | None = None,
) -> str:
    """Write a panel as wide CSV, returning the treatment-marker label.

    Values are written in shortest round-trip form, so reading the file
    back reproduces the panel exactly.
    """
    n_rows = panel.treated.shape[0]
    if periods is None:
        width = len(str(n_rows - 1))
        periods = [f"t{idx:0{width}d}" for idx in range(n_rows)]
    if len(periods) != n_rows:
        raise ConfigError(f"{len(periods)} period labels for {n_rows} rows")
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["period", treated_name, *panel.labels])
        for idx in range(n_rows):
            writer.writerow(
                [periods[idx], repr(float(panel.treated[idx]))]
                + [repr(float(v)) for v in panel.controls[idx]]
            )
    return periods[panel.t1]


# --- estimate -------------------------------------------------------------

@dataclass(frozen=True)
class EstimateRequest:
    """Everything one estimation run needs, as parsed from the CLI."""

    input_path: str
    treated_column: str
    treatment_marker: str
    output_path: str | None = None
    plot_path: str | None = None
    excluded: tuple[str, ...] = ()
    r_max: int | None = None
    bic_constant: float = 1.0
    tau: int | None = None
    kernel: str = KERNEL_TRUNCATED
    intercept: bool = True
    alpha: float = 0.05
    no_meta: bool = False


def _meta(command: str, extra: dict | None = None) -> dict:
    payload = {
        "command": command,
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    if extra:
        payload.update(extra)
    return payload


def _selection_section(path: SelectionPath, panel: PanelData, choice) -> dict:
    return {
        "steps": [
            {
                "index": int(step.chosen_index),
                "label": panel.labels[step.chosen_index],
                "r_squared": float(step.r_squared),
                "sigma2_hat": float(step.sigma2_hat),
            }
            for step in path.steps
        ],
        "stopped_early": bool(path.stopped_early),
        "stop_reason": path.stop_reason,
        "r_hat": int(choice),
        "zero_variance_stop": bool(choice.zero_variance),
    }


def _model_section(model: FittedModel, panel: PanelData) -> dict:
    return {
        "selected_indices": [int(j) for j in model.selected],
        "selected_labels": [panel.labels[j] for j in model.selected],
        "intercept": float(model.intercept) if model.has_intercept else None,
        "coefficients": {
            panel.labels[j]: float(b) for j, b in zip(model.selected, model.slopes)
        },
        "r_squared": float(model.r_squared),
        "sigma2_hat": float(model.sigma2_hat),
    }


def cmd_estimate(req: EstimateRequest) -> dict:
    """Run the full estimation pipeline and emit the report document.

    Loads the panel, runs forward selection with the modified-criterion
    stop, extrapolates the counterfactual and tests the average effect.
    Writes the JSON report to ``output_path`` and tidy plot data (period,
    actual, counterfactual, effect over all rows) next to it.
    """
    panel, periods = read_panel_csv(
        req.input_path,
        req.treated_column,
        req.treatment_marker,
        req.excluded,
        req.intercept,
    )
    path = forward_select(panel, req.r_max)
    choice = modified_bic_r(
        path, panel.n_units, panel.t1, penalty_constant=req.bic_constant
    )
    model = fit_selected(panel, path, int(choice))
    report = ate_test(panel, model, tau=req.tau, alpha=req.alpha, kernel=req.kernel)

    fitted_pre = model.intercept + panel.pre_controls[:, list(model.selected)] @ model.slopes
    counterfactual_full = np.concatenate([fitted_pre, report.counterfactual])
    effect_full = panel.treated - counterfactual_full

    document = {
        "schema_version": SCHEMA_VERSION,
    }
    if not req.no_meta:
        document["meta"] = _meta("estimate", {"input": str(req.input_path)})
    document.update(
        {
            "request": {
                "treated": req.treated_column,
                "treatment_at": req.treatment_marker,
                "excluded": list(req.excluded),
                "r_max": req.r_max if req.r_max is not None else default_r_max(panel),
                "bic_constant": req.bic_constant,
                "kernel": req.kernel,
                "intercept": req.intercept,
                "alpha": req.alpha,
            },
            "selection": _selection_section(path, panel, choice),
            "model": _model_section(model, panel),
            "effects": {
                "periods": periods[panel.t1 :],
                "actual": [float(v) for v in panel.post_treated],
                "counterfactual": [float(v) for v in report.counterfactual],
                "effect": [float(v) for v in report.effects],
            },
            "ate": float(report.ate),
            "lrv": float(report.lrv),
            "tau": int(report.tau),
            "z_stat": float(report.z_stat),
            "p_value": float(report.p_value),
            "alpha": float(report.alpha),
            "reject": bool(report.reject),
            "diagnostics": {
                "gram_min_eigenvalue": gram_min_eigenvalue(panel, model.selected),
                "warnings": _estimate_warnings(path, choice),
            },
        }
    )
    if req.output_path:
        write_json(document, req.output_path)
        plot_path = req.plot_path or _default_plot_path(req.output_path)
        _write_plot_csv(plot_path, periods, panel, counterfactual_full, effect_full)
    return document


def _estimate_warnings(path: SelectionPath, choice) -> list[str]:
    notes = []
    if path.stopped_early:
        notes.append("selection stopped early: every remaining candidate was collinear")
    if choice.zero_variance:
        notes.append("stopping rule short-circuited at a perfect pre-treatment fit")
    return notes


def _default_plot_path(output_path) -> str:
    out = Path(output_path)
    return str(out.with_name(out.stem + "_plot.csv"))


def _write_plot_csv(path, periods, panel, counterfactual_full, effect_full) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["period", "actual", "counterfactual", "effect"])
        for idx, label in enumerate(periods):
            writer.writerow(
                [
                    label,
                    repr(float(panel.treated[idx])),
                    repr(float(counterfactual_full[idx])),
                    repr(float(effect_full[idx])),
                ]
            )


def write_json(document: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(document, handle, indent=2)
        handle.write("\n")


# --- scenario files --------------------------------------------------------

_SCENARIO_INT_KEYS = {
    "n_units", "t1", "t2", "n_factors", "n_strong_units", "burn_in", "seed",
    "f2_lag", "n_reps", "r_max",
}
_SCENARIO_FLOAT_KEYS = {"idio_sd", "alpha"}
_SCENARIO_RANGE_KEYS = {"strong_loading_range", "weak_loading_range"}
_SCENARIO_STR_KEYS = {"factor_mode", "method"}
_SCENARIO_KEYS = (
    _SCENARIO_INT_KEYS
    | _SCENARIO_FLOAT_KEYS
    | _SCENARIO_RANGE_KEYS
    | _SCENARIO_STR_KEYS
    | {"treatment"}
)


@dataclass(frozen=True)
class Scenario:
    """Parsed scenario: one simulation config per requested treatment."""

    configs: tuple[DgpConfig, ...]
    method: str = "forward"
    n_reps: int = 1000
    alpha: float = 0.05
    r_max: int | None = None

    @property
    def base_config(self) -> DgpConfig:
        return self.configs[0]


def parse_scenario(path) -> Scenario:
    """Read a key = value scenario file into simulation configs.

    Unknown keys and unparseable values raise ConfigError naming the
    field. ``treatment`` accepts a comma-separated list; every other key
    maps straight onto the config or runner arguments.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"scenario file not found: {path}") from None
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if key not in _SCENARIO_KEYS:
            raise ConfigError(f"unknown scenario key {key!r} (line {lineno})")
        if key in raw:
            raise ConfigError(f"duplicate scenario key {key!r} (line {lineno})")
        raw[key] = value.strip()

    fields: dict = {}
    for key, value in raw.items():
        if key in _SCENARIO_INT_KEYS:
            try:
                fields[key] = int(value)
            except ValueError:
                raise ConfigError(f"{key} must be an integer, got {value!r}") from None
        elif key in _SCENARIO_FLOAT_KEYS:
            try:
                fields[key] = float(value)
            except ValueError:
                raise ConfigError(f"{key} must be a number, got {value!r}") from None
        elif key in _SCENARIO_RANGE_KEYS:
            parts = [p.strip() for p in value.split(",")]
            if len(parts) != 2:
                raise ConfigError(f"{key} must be 'low,high', got {value!r}")
            try:
                fields[key] = (float(parts[0]), float(parts[1]))
            except ValueError:
                raise ConfigError(f"{key} must be 'low,high', got {value!r}") from None
        else:
            fields[key] = value

    method = fields.pop("method", "forward")
    if method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {method!r}")
    n_reps = fields.pop("n_reps", 1000)
    if n_reps < 1:
        raise ConfigError(f"n_reps must be positive, got {n_reps}")
    alpha = fields.pop("alpha", 0.05)
    if not 0 < alpha < 1:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    r_max = fields.pop("r_max", None)

    treatments = [t.strip() for t in fields.pop("treatment", "D1").split(",")]
    configs = tuple(DgpConfig(treatment=t, **fields) for t in treatments)
    return Scenario(configs=configs, method=method, n_reps=n_reps, alpha=alpha, r_max=r_max)


def _scenario_echo(scenario: Scenario) -> dict:
    base = scenario.base_config
    return {
        "n_units": base.n_units,
        "t1": base.t1,
        "t2": base.t2,
        "factor_mode": base.factor_mode,
        "treatment": [c.treatment for c in scenario.configs],
        "n_factors": base.n_factors,
        "strong_loading_range": list(base.strong_loading_range),
        "weak_loading_range": list(base.weak_loading_range),
        "n_strong_units": base.n_strong_units,
        "idio_sd": base.idio_sd,
        "burn_in": base.burn_in,
        "seed": base.seed,
        "f2_lag": base.f2_lag,
        "method": scenario.method,
        "n_reps": scenario.n_reps,
        "alpha": scenario.alpha,
    }


def cmd_simulate(
    scenario_path,
    output_path=None,
    workers: int | None = None,
    no_meta: bool = False,
) -> dict:
    """Run the scenario's Monte Carlo and emit one JSON document.

    When the scenario lists several treatments, each gets its own report
    under the same seed and method.
    """
    scenario = parse_scenario(scenario_path)
    started = time.perf_counter()
    reports = []
    for config in scenario.configs:
        report = run_monte_carlo(
            config,
            method=scenario.method,
            n_reps=scenario.n_reps,
            alpha=scenario.alpha,
            workers=workers,
        )
        reports.append(
            {
                "treatment": report.treatment,
                "method": report.method,
                "n_replications": report.n_replications,
                "n_failed": report.n_failed,
                "median_selected": report.median_selected,
                "rmpse": report.rmpse,
                "rejection_rate": report.rejection_rate,
            }
        )
    document = {"schema_version": SCHEMA_VERSION}
    if not no_meta:
        document["meta"] = _meta(
            "simulate",
            {
                "scenario": str(scenario_path),
                "wall_time_seconds": time.perf_counter() - started,
            },
        )
    document["scenario"] = _scenario_echo(scenario)
    document["reports"] = reports
    if output_path:
        write_json(document, output_path)
    return document


def cmd_oracle_check(
    scenario_path,
    subset_size: int,
    delta: float,
    output_path=None,
    no_meta: bool = False,
) -> dict:
    """Compare the greedy path's final variance against the best subset.

    For each replication, runs forward selection to the scenario's r_max
    and exhaustively finds the minimum residual variance over subsets of
    size at most ``subset_size``; reports how often the greedy variance is
    within ``delta`` of that optimum, and the gap distribution.
    """
    scenario = parse_scenario(scenario_path)
    config = scenario.base_config
    r_max = scenario.r_max

    gaps = []
    n_failed = 0
    for rep in range(scenario.n_reps):
        sim = generate_replication(config, rep)
        panel = sim.panel
        path = forward_select(panel, r_max)
        if len(path) == 0:
            n_failed += 1
            continue
        greedy_sigma2 = path.steps[-1].sigma2_hat
        _, best_sigma2 = best_subset_oracle(panel, subset_size, criterion="min_sigma2")
        gaps.append(greedy_sigma2 - best_sigma2)

    if not gaps:
        raise ConfigError("every replication failed; nothing to aggregate")
    gaps_arr = np.array(gaps)
    frequency = float((gaps_arr <= delta).mean())
    document = {"schema_version": SCHEMA_VERSION}
    if not no_meta:
        document["meta"] = _meta("oracle-check", {"scenario": str(scenario_path)})
    document.update(
        {
            "scenario": _scenario_echo(scenario),
            "subset_size": int(subset_size),
            "delta": float(delta),
            "r_max": r_max,
            "n_replications": len(gaps),
            "n_failed": n_failed,
            "frequency": frequency,
            "gap": {
                "min": float(gaps_arr.min()),
                "q25": float(np.quantile(gaps_arr, 0.25)),
                "median": float(np.median(gaps_arr)),
                "q75": float(np.quantile(gaps_arr, 0.75)),
                "max": float(gaps_arr.max()),
                "mean": float(gaps_arr.mean()),
            },
        }
    )
    if output_path:
        write_json(document, output_path)
    return document
