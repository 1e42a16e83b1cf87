import numpy as np
import pytest

from mixrates.errors import MetricMismatch, SingularCovariance
from mixrates.measure import (
    Atom,
    MixingMeasure,
    ParameterSpace,
    density,
    sample,
    voronoi_cells,
)

from oracles import direct_density


def measure_1d(atoms, weights, var=1.0):
    return MixingMeasure.from_points(
        [[a] for a in atoms], weights, fixed_covariance=[[var]]
    )


class TestParameterSpace:
    def test_diameter_floor_at_one(self):
        space = ParameterSpace(2, 0.0, 0.5)
        assert space.diameter == 1.0

    def test_diameter_of_unit_square(self):
        space = ParameterSpace(2, 0.0, 1.0)
        assert space.diameter == pytest.approx(np.sqrt(2.0))

    def test_rejects_bad_bounds(self):
        with pytest.raises(ValueError):
            ParameterSpace(1, 1.0, 1.0)
        with pytest.raises(ValueError):
            ParameterSpace(1, 0.0, 1.0, eig_lower=0.0)


class TestMixingMeasure:
    def test_weights_normalized(self):
        g = measure_1d([0.0, 1.0], [0.5, 0.5])
        assert abs(g.weights.sum() - 1.0) < 1e-12

    def test_tiny_weights_dropped_and_renormalized(self):
        g = measure_1d([0.0, 1.0, 2.0], [0.5, 0.5 - 1e-13, 1e-13])
        assert g.order == 2
        assert abs(g.weights.sum() - 1.0) < 1e-12

    def test_exact_order_rejects_duplicates(self):
        with pytest.raises(ValueError):
            MixingMeasure.from_points(
                [[0.0], [0.0]], [0.5, 0.5], exact_order=True
            )

    def test_mean_outside_box_rejected(self):
        space = ParameterSpace(1, 0.0, 1.0)
        with pytest.raises(ValueError):
            MixingMeasure.from_points([[2.0]], [1.0], space=space)

    def test_json_round_trip(self):
        g = MixingMeasure.from_points(
            [[0.0, 0.3], [0.1, -0.4]],
            [0.4, 0.6],
            covariances=[0.02 * np.eye(2), 0.03 * np.eye(2)],
        )
        g2 = MixingMeasure.from_json(g.to_json())
        np.testing.assert_allclose(g2.weights, g.weights)
        np.testing.assert_allclose(g2.means, g.means)
        np.testing.assert_allclose(g2.covariances(), g.covariances())


class TestVoronoiCells:
    def test_nearest_atom_assignment(self):
        g_ref = measure_1d([0.0, 0.2], [0.5, 0.5])
        g = measure_1d([0.01, 0.19, 0.25], [1 / 3, 1 / 3, 1 / 3])
        part = voronoi_cells(g, g_ref)
        assert part.cells == (frozenset({0}), frozenset({1, 2}))

    def test_identity_case(self):
        g_ref = measure_1d([0.0, 0.2, 0.7], [0.2, 0.3, 0.5])
        part = voronoi_cells(g_ref, g_ref)
        assert part.cells == (frozenset({0}), frozenset({1}), frozenset({2}))

    def test_tie_breaks_to_smallest_reference_index(self):
        g_ref = measure_1d([0.0, 0.2], [0.5, 0.5])
        g = measure_1d([0.1], [1.0])
        part = voronoi_cells(g, g_ref)
        assert part.cells == (frozenset({0}), frozenset())

    def test_partition_property_random(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            k, k0 = rng.integers(1, 9), rng.integers(1, 5)
            g = MixingMeasure.from_points(
                rng.uniform(0, 1, (k, 2)), rng.dirichlet(np.ones(k))
            )
            g_ref = MixingMeasure.from_points(
                rng.uniform(0, 1, (k0, 2)), rng.dirichlet(np.ones(k0))
            )
            cells = voronoi_cells(g, g_ref).cells
            all_indices = sorted(i for c in cells for i in c)
            assert all_indices == list(range(g.order))

    def test_permutation_invariance_up_to_relabeling(self):
        rng = np.random.default_rng(3)
        g = MixingMeasure.from_points(
            rng.uniform(0, 1, (5, 2)), rng.dirichlet(np.ones(5))
        )
        g_ref = MixingMeasure.from_points(
            rng.uniform(0, 1, (3, 2)), rng.dirichlet(np.ones(3))
        )
        perm = [3, 1, 4, 0, 2]
        cells = voronoi_cells(g, g_ref).cells
        cells_perm = voronoi_cells(g.permuted(perm), g_ref).cells
        # new index i holds the old atom perm[i]
        expected = tuple(
            frozenset(i for i in range(5) if perm[i] in cell) for cell in cells
        )
        assert cells_perm == expected

    def test_composite_metric_requires_covariances(self):
        g = measure_1d([0.0], [1.0])
        g_plain = MixingMeasure.from_points([[0.0]], [1.0])
        with pytest.raises(MetricMismatch):
            voronoi_cells(g_plain, g, metric_kind="mean+cov")


class TestDensity:
    def test_standard_normal_at_mode(self):
        g = measure_1d([0.0], [1.0])
        assert density(g, [0.0]) == pytest.approx(1 / np.sqrt(2 * np.pi), rel=1e-12)

    def test_duplicate_atom_convexity(self):
        g = MixingMeasure.from_points(
            [[0.0], [0.0]], [0.5, 0.5], fixed_covariance=[[1.0]]
        )
        assert density(g, [0.0]) == pytest.approx(1 / np.sqrt(2 * np.pi), rel=1e-12)

    def test_model_a_against_direct_sum(self):
        from mixrates.experiments import build_model

        g0, _ = build_model("A", 2, 3, 100)
        covs = [0.01 * np.eye(2)] * 2
        expected = direct_density(g0.weights, g0.means, covs, np.zeros(2))
        assert density(g0, [0.0, 0.0]) == pytest.approx(expected, rel=1e-12)

    def test_integrates_to_one_1d(self):
        rng = np.random.default_rng(11)
        for _ in range(3):
            k = int(rng.integers(1, 5))
            g = measure_1d(rng.uniform(-1, 1, k), rng.dirichlet(np.ones(k)), var=0.05)
            from mixrates.measure import log_density

            xs = np.linspace(-6, 6, 10**6)
            vals = np.exp(log_density(g, xs[:, None]))
            integral = np.trapezoid(vals, xs)
            assert abs(integral - 1.0) < 0.01

    def test_singular_covariance_raises(self):
        g = MixingMeasure.from_points(
            [[0.0, 0.0]], [1.0], covariances=[np.zeros((2, 2))]
        )
        with pytest.raises(SingularCovariance):
            density(g, [0.0, 0.0])


class TestSample:
    def test_determinism(self):
        g = measure_1d([0.0, 1.0], [0.3, 0.7], var=0.5)
        x1 = sample(g, 1000, seed=42)
        x2 = sample(g, 1000, seed=42)
        assert np.array_equal(x1, x2)

    def test_single_row(self):
        g = measure_1d([0.0], [1.0])
        x = sample(g, 1, seed=5)
        assert x.shape == (1, 1) and np.all(np.isfinite(x))

    def test_clt_mean_bound(self):
        g = measure_1d([0.0], [1.0])
        n = 10**5
        x = sample(g, n, seed=123)
        assert abs(x.mean()) < 4.0 / np.sqrt(n)

    def test_different_seeds_differ(self):
        g = measure_1d([0.0], [1.0])
        assert not np.array_equal(sample(g, 10, 1), sample(g, 10, 2))
