import math

import numpy as np
import pytest
from scipy.stats import spearmanr

from mixrates.errors import InsufficientData, UnsupportedModel
from mixrates.experiments import (
    CSV_HEADER,
    DESK_N_GRID,
    ExperimentConfig,
    ExperimentRecord,
    build_model,
    epsilon_n,
    fit_slope,
    g_star_model_c,
    read_records,
    records_to_csv,
    run_experiment,
    write_records,
)
from mixrates.losses import loss_wtilde


class TestBuildModel:
    def test_model_a_parameters(self):
        g0, spec = build_model("A", 2, 3, 1000)
        np.testing.assert_allclose(g0.means, [[0.0, 0.0], [0.2, 0.2]])
        np.testing.assert_allclose(g0.weights, [0.5, 0.5])
        np.testing.assert_allclose(g0.fixed_covariance, 0.01 * np.eye(2))
        assert spec.loss_name == "d" and spec.scale_mode == "fixed"

    def test_model_b_parameters(self):
        g0, spec = build_model("B", 3, 4, 1000)
        np.testing.assert_allclose(
            g0.means, [[0.0, 0.3], [0.1, -0.4], [0.5, 0.2]]
        )
        np.testing.assert_allclose(
            g0.covariances()[1], [[0.0175, -0.0125], [-0.0125, 0.0175]]
        )
        # printed weights (1/3, 1/4, 1/3) renormalized to sum 1
        np.testing.assert_allclose(g0.weights, [4 / 11, 3 / 11, 4 / 11])
        assert spec.loss_name == "dbar" and spec.scale_mode == "free"

    def test_model_c_epsilon_and_atoms(self):
        assert epsilon_n(10**6, 3) == pytest.approx(0.1)
        g0, spec = build_model("C", 3, 3, 10**6)
        np.testing.assert_allclose(g0.means.ravel(), [0.0, 0.3, 0.6])
        np.testing.assert_allclose(g0.weights, [1 / 3] * 3)
        assert spec.loss_name == "wtilde"
        np.testing.assert_allclose(spec.g_star.means.ravel(), [0.0, 0.2])

    def test_model_c_k0_four(self):
        g0, _ = build_model("C", 4, 4, 10**6)
        eps = epsilon_n(10**6, 4)
        np.testing.assert_allclose(
            g0.means.ravel(), [0.0, 0.2 + eps, 0.2 + 4 * eps, 0.2 - 1.5 * eps]
        )
        np.testing.assert_allclose(g0.weights, [0.25] * 4)

    def test_unsupported_combinations(self):
        with pytest.raises(UnsupportedModel):
            build_model("A", 2, 7, 100)
        with pytest.raises(UnsupportedModel):
            build_model("B", 2, 4, 100)
        with pytest.raises(UnsupportedModel):
            build_model("D", 2, 3, 100)

    def test_model_c_anchoring_decreases(self):
        g_star = g_star_model_c()
        values = []
        for n in DESK_N_GRID:
            g0n, _ = build_model("C", 3, 3, n)
            values.append(loss_wtilde(g0n, g_star, g_star))
        assert all(b < a for a, b in zip(values, values[1:]))


def tiny_config(**kwargs):
    defaults = dict(
        model_name="A", k0=2, k=3, n_grid=(100,), replicates=1, base_seed=7
    )
    defaults.update(kwargs)
    return ExperimentConfig(**defaults)


class TestRunExperiment:
    def test_single_record_contract(self):
        records = run_experiment(tiny_config())
        assert len(records) == 1
        r = records[0]
        assert r.model == "A" and r.n == 100 and r.loss_name == "d"
        assert math.isfinite(r.loss_value) and r.loss_value >= 0

    def test_record_count(self):
        cfg = tiny_config(n_grid=(100, 200, 400), replicates=3)
        records = run_experiment(cfg)
        assert len(records) == 9
        assert [(r.n, r.replicate) for r in records] == [
            (n, rep) for n in (100, 200, 400) for rep in range(3)
        ]

    def test_determinism(self):
        cfg = tiny_config(n_grid=(100, 300), replicates=2)
        first = run_experiment(cfg)
        second = run_experiment(cfg)
        for a, b in zip(first, second):
            assert (a.seed, a.loss_value, a.em_iters, a.converged) == (
                b.seed, b.loss_value, b.em_iters, b.converged
            )

    def test_parallel_matches_serial(self):
        # All fields except wall-clock timing must agree byte-for-byte.
        def strip(recs):
            return [
                (r.model, r.k, r.k0, r.n, r.replicate, r.seed,
                 r.loss_name, r.loss_value, r.em_iters, r.converged)
                for r in recs
            ]

        serial = run_experiment(tiny_config(n_grid=(100, 200), replicates=2))
        parallel = run_experiment(
            tiny_config(n_grid=(100, 200), replicates=2, workers=2)
        )
        assert strip(serial) == strip(parallel)

    def test_mean_loss_decreases_in_n(self):
        cfg = tiny_config(n_grid=(200, 1000, 5000), replicates=4)
        records = run_experiment(cfg)
        slope = fit_slope(records)
        ns = sorted(slope.per_n_mean)
        rho, _ = spearmanr(ns, [slope.per_n_mean[n] for n in ns])
        assert rho <= -0.5

    def test_invalid_grid_rejected(self):
        with pytest.raises(ValueError):
            tiny_config(n_grid=(100, 100))
        with pytest.raises(ValueError):
            tiny_config(replicates=0)


class TestFitSlope:
    def _records(self, ns, losses, reps=1):
        out = []
        for n, loss in zip(ns, losses):
            for rep in range(reps):
                out.append(
                    ExperimentRecord("A", 3, 2, n, rep, 0, "d", loss, 5, True, 1.0)
                )
        return out

    def test_exact_power_law(self):
        ns = [100, 300, 1000, 3000, 10000]
        records = self._records(ns, [2.0 * n**-0.5 for n in ns])
        slope = fit_slope(records)
        assert slope.slope == pytest.approx(-0.5, abs=1e-12)
        assert slope.intercept == pytest.approx(np.log(2.0), abs=1e-12)

    def test_two_point_difference_quotient(self):
        records = self._records([100, 1000], [0.1, 0.03])
        slope = fit_slope(records)
        expected = (np.log(0.03) - np.log(0.1)) / (np.log(1000) - np.log(100))
        assert slope.slope == pytest.approx(expected, rel=1e-12)

    def test_noisy_power_law_within_three_stderr(self):
        rng = np.random.default_rng(123)
        ns = np.unique(np.geomspace(100, 10**5, 50).astype(int))
        losses = [3.0 * n**-0.5 * np.exp(rng.normal(0, 0.1)) for n in ns]
        slope = fit_slope(self._records(list(ns), losses))
        assert abs(slope.slope - (-0.5)) <= 3 * slope.slope_stderr

    def test_nonconverged_excluded(self):
        records = self._records([100, 1000], [0.1, 0.03])
        records.append(
            ExperimentRecord("A", 3, 2, 100, 9, 0, "d", float("nan"), 0, False, 1.0)
        )
        slope = fit_slope(records)
        assert slope.per_n_mean[100] == pytest.approx(0.1)

    def test_insufficient_data(self):
        with pytest.raises(InsufficientData):
            fit_slope(self._records([100], [0.1]))


class TestCsv:
    def test_header_and_round_trip(self, tmp_path):
        records = run_experiment(tiny_config(n_grid=(100, 200), replicates=2))
        path = tmp_path / "records.csv"
        write_records(records, str(path))
        text = path.read_text(encoding="utf-8")
        assert text.splitlines()[0] == ",".join(CSV_HEADER)
        assert "\r" not in text
        back = read_records(str(path))
        assert back == records

    def test_floats_round_trip_exactly(self):
        r = ExperimentRecord(
            "A", 3, 2, 100, 0, 7, "d", 0.1 + 0.2, 12, True, 1.23456789012345
        )
        text = records_to_csv([r])
        value = text.splitlines()[1].split(",")[7]
        assert float(value) == 0.1 + 0.2
