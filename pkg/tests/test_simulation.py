import numpy as np
import pytest

from fspda import (
    ConfigError,
    DgpConfig,
    generate_factors,
    generate_panel,
    generate_replication,
    run_monte_carlo,
    zstat_sample,
)


def acf1(x):
    x = x - x.mean()
    return float(x[:-1] @ x[1:]) / float(x @ x)


class TestGenerateFactors:
    def test_iid_variances(self):
        rng = np.random.default_rng(200)
        f = generate_factors("iid", 20000, 0, rng)
        for col in range(4):
            target = (col + 1) ** 2
            assert np.var(f[:, col]) == pytest.approx(target, rel=0.10)

    def test_dynamic_second_factor_variance(self):
        rng = np.random.default_rng(201)
        f = generate_factors("dynamic", 5000, 200, rng)
        # lag-2 autoregression with coefficient 0.9: variance 1 / (1 - 0.81)
        assert np.var(f[:, 1]) == pytest.approx(1.0 / (1.0 - 0.81), rel=0.15)

    def test_dynamic_fourth_factor_autocorrelation(self):
        rng = np.random.default_rng(202)
        f = generate_factors("dynamic", 5000, 200, rng)
        # ARMA(1,1) with both coefficients 0.5:
        # rho_1 = (1 + phi theta)(phi + theta) / (1 + 2 phi theta + theta^2)
        assert acf1(f[:, 3]) == pytest.approx(1.25 / 1.75, rel=0.10)

    def test_second_factor_lag_switch(self):
        rng = np.random.default_rng(203)
        lag2 = generate_factors("dynamic", 5000, 200, rng, f2_lag=2)
        rng = np.random.default_rng(203)
        lag1 = generate_factors("dynamic", 5000, 200, rng, f2_lag=1)
        assert abs(acf1(lag2[:, 1])) < 0.1  # odd-lag autocorrelation vanishes
        assert acf1(lag1[:, 1]) == pytest.approx(0.9, abs=0.05)

    def test_burn_in_changes_early_rows(self):
        rng = np.random.default_rng(204)
        with_burn = generate_factors("dynamic", 100, 200, rng)
        rng = np.random.default_rng(204)
        without = generate_factors("dynamic", 100, 0, rng)
        assert not np.allclose(with_burn[:10], without[:10])

    def test_third_factor_moving_average_variance(self):
        rng = np.random.default_rng(205)
        f = generate_factors("dynamic", 8000, 200, rng)
        assert np.var(f[:, 2]) == pytest.approx(1.0 + 0.64 + 0.16, rel=0.10)


class TestGeneratePanel:
    def test_null_treatment_is_identity(self):
        sim = generate_panel(DgpConfig(n_units=20, t1=30, t2=20, treatment="D1", seed=5))
        assert np.all(sim.true_effects == 0.0)
        assert np.array_equal(sim.panel.post_treated, sim.true_counterfactual)

    def test_constructed_identity_is_exact(self):
        sim = generate_panel(DgpConfig(n_units=15, t1=20, t2=25, treatment="D2", seed=6))
        assert np.array_equal(
            sim.panel.post_treated, sim.true_counterfactual + sim.true_effects
        )

    def test_mean_shift_treatment(self):
        sim = generate_panel(DgpConfig(n_units=10, t1=10, t2=4000, treatment="D5", seed=7))
        assert sim.true_effects.mean() == pytest.approx(1.0, abs=3.0 / np.sqrt(4000))

    def test_dynamic_treatment_stationary_mean(self):
        sim = generate_panel(DgpConfig(n_units=10, t1=10, t2=8000, treatment="D7", seed=8))
        # drift 0.7, coefficient 0.3: mean 1, long-run sd of the mean
        se = np.sqrt((1.0 / 0.7**2) / 8000)
        assert sim.true_effects.mean() == pytest.approx(1.0, abs=3.0 * se)

    def test_panel_shape_and_flags(self):
        cfg = DgpConfig(n_units=12, t1=18, t2=9, seed=9)
        sim = generate_panel(cfg)
        assert sim.panel.n_units == 12
        assert sim.panel.t1 == 18
        assert sim.panel.t2 == 9
        assert not sim.panel.intercept
        assert sim.factors.shape == (27, 4)
        assert sim.systematic_counterfactual.shape == (9,)

    def test_systematic_part_ignores_own_shock(self):
        cfg = DgpConfig(n_units=10, t1=10, t2=2000, treatment="D1", seed=10)
        sim = generate_panel(cfg)
        own_shock = sim.true_counterfactual - sim.systematic_counterfactual
        assert own_shock.std() == pytest.approx(0.5, rel=0.1)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            DgpConfig(factor_mode="garch")
        with pytest.raises(ConfigError):
            DgpConfig(treatment="D8")
        with pytest.raises(ConfigError):
            DgpConfig(idio_sd=0.0)
        with pytest.raises(ConfigError):
            DgpConfig(f2_lag=3)
        with pytest.raises(ConfigError):
            DgpConfig(n_strong_units=200, n_units=50)


class TestDeterminism:
    def test_same_seed_same_panel(self):
        cfg = DgpConfig(n_units=25, t1=30, t2=15, factor_mode="dynamic", seed=42)
        a, b = generate_panel(cfg), generate_panel(cfg)
        assert np.array_equal(a.panel.treated, b.panel.treated)
        assert np.array_equal(a.panel.controls, b.panel.controls)

    def test_replications_are_distinct_streams(self):
        cfg = DgpConfig(n_units=10, t1=12, t2=8, seed=42)
        a = generate_replication(cfg, 0)
        b = generate_replication(cfg, 1)
        assert not np.allclose(a.panel.treated, b.panel.treated)

    def test_worker_count_does_not_change_results(self):
        cfg = DgpConfig(n_units=20, t1=25, t2=20, seed=77)
        serial = run_monte_carlo(cfg, "forward", n_reps=12, workers=None)
        parallel = run_monte_carlo(cfg, "forward", n_reps=12, workers=2)
        assert serial == parallel


class TestMonteCarlo:
    def test_report_fields(self):
        cfg = DgpConfig(n_units=15, t1=30, t2=20, seed=3)
        report = run_monte_carlo(cfg, "forward", n_reps=20)
        assert report.method == "forward"
        assert report.treatment == "D1"
        assert report.n_replications + report.n_failed == 20
        assert 0.0 <= report.rejection_rate <= 1.0
        count = report.rejection_rate * report.n_replications
        assert count == pytest.approx(round(count), abs=1e-9)
        assert report.rmpse >= 0.0

    def test_power_ordering(self):
        base = dict(n_units=40, t1=50, t2=50, seed=101)
        rates = {
            t: run_monte_carlo(DgpConfig(treatment=t, **base), "forward", n_reps=150).rejection_rate
            for t in ("D4", "D5", "D6", "D7")
        }
        assert rates["D5"] >= rates["D4"]
        assert rates["D7"] >= rates["D6"]

    def test_lasso_method_runs(self):
        cfg = DgpConfig(n_units=15, t1=30, t2=20, seed=4)
        report = run_monte_carlo(cfg, "lasso", n_reps=5)
        assert report.method == "lasso"
        assert report.n_replications == 5

    def test_unknown_method(self):
        with pytest.raises(ConfigError):
            run_monte_carlo(DgpConfig(seed=1), "ridge", n_reps=2)


class TestZstatSample:
    def test_requires_null_treatment(self):
        with pytest.raises(ConfigError):
            zstat_sample(DgpConfig(treatment="D5", seed=1), n_reps=3)

    def test_returns_z_statistics(self):
        cfg = DgpConfig(n_units=20, t1=40, t2=40, seed=11)
        zs = zstat_sample(cfg, n_reps=40)
        # degenerate-variance replications are excluded, not imputed
        assert 38 <= zs.shape[0] <= 40
        assert np.all(np.isfinite(zs))

    def test_serially_correlated_null_has_heavier_tails(self):
        base = dict(n_units=40, t1=50, t2=50, seed=303)
        z1 = zstat_sample(DgpConfig(treatment="D1", **base), n_reps=800, workers=2)
        z3 = zstat_sample(DgpConfig(treatment="D3", **base), n_reps=800, workers=2)
        rate1 = np.mean(np.abs(z1) > 1.959964)
        rate3 = np.mean(np.abs(z3) > 1.959964)
        assert rate3 > rate1
