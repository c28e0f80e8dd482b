import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphbss.graphs import (AdjacencyMatrix, GraphError, erdos_renyi,
                             geometric_graph, graph_error, load_edge_list, power,
                             save_edge_list, sbm_two_block)


def assert_valid(w):
    a = w.data
    assert np.array_equal(a, a.T)
    assert np.all(np.diag(a) == 0)
    assert np.all((a == 0) | (a == 1))


def edge_counts(make, seeds=200):
    return np.array([make(np.random.default_rng(s)).edge_count() for s in range(seeds)])


def disk_square_edge_prob(r):
    # P(|U - V| < r) for U, V uniform on the unit square, r <= 1
    return np.pi * r ** 2 - 8 * r ** 3 / 3 + r ** 4 / 2


class TestValidation:
    @pytest.mark.parametrize("data", [
        [[0, 1], [0, 0]],
        [[1, 0], [0, 0]],
        [[0, 2], [2, 0]],
        [[0, 1, 0]],
    ])
    def test_rejects_bad_matrices(self, data):
        with pytest.raises(GraphError):
            AdjacencyMatrix(data)

    def test_data_is_read_only(self):
        w = AdjacencyMatrix([[0, 1], [1, 0]])
        with pytest.raises(ValueError):
            w.data[0, 1] = 0

    @pytest.mark.parametrize("call", [
        lambda r: erdos_renyi(0, 0.5, r),
        lambda r: erdos_renyi(4, 1.5, r),
        lambda r: erdos_renyi(4, -0.1, r),
        lambda r: sbm_two_block(5, 0.5, 0.1, r),
        lambda r: sbm_two_block(4, 0.5, 2.0, r),
        lambda r: geometric_graph(4, 0.0, r),
        lambda r: graph_error(AdjacencyMatrix(np.zeros((3, 3))), 0.1, 1.1, r),
    ])
    def test_parameter_errors(self, call):
        with pytest.raises(GraphError):
            call(np.random.default_rng(0))


class TestErdosRenyi:
    def test_extremes(self, rng):
        assert erdos_renyi(4, 0.0, rng).edge_count() == 0
        full = erdos_renyi(4, 1.0, rng).data
        assert np.array_equal(full, 1 - np.eye(4))

    def test_mean_edge_count(self):
        counts = edge_counts(lambda r: erdos_renyi(250, 0.07, r))
        pairs = 250 * 249 / 2
        mean, sd = 0.07 * pairs, np.sqrt(pairs * 0.07 * 0.93)
        assert abs(counts.mean() - mean) < 3 * sd / np.sqrt(counts.size)


class TestSbm:
    def test_extremes(self, rng):
        a = sbm_two_block(4, 1.0, 0.0, rng).data
        expected = np.array([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
        assert np.array_equal(a, expected)
        assert sbm_two_block(4, 0.0, 0.0, rng).edge_count() == 0

    def test_mean_edge_count(self):
        counts = edge_counts(lambda r: sbm_two_block(250, 0.13, 0.01, r))
        n_in, n_out = 2 * 125 * 124 / 2, 125 ** 2
        mean = n_in * 0.13 + n_out * 0.01
        var = n_in * 0.13 * 0.87 + n_out * 0.01 * 0.99
        assert abs(counts.mean() - mean) < 3 * np.sqrt(var / counts.size)


class TestGeometric:
    def test_extremes(self, rng):
        assert geometric_graph(2, np.sqrt(2) + 1e-9, rng).edge_count() == 1
        assert geometric_graph(5, 1e-12, rng).edge_count() == 0

    def test_area_formula_matches_monte_carlo(self):
        rng = np.random.default_rng(1)
        u, v = rng.random((2, 400_000, 2))
        mc = np.mean(np.linalg.norm(u - v, axis=1) < 0.16)
        assert abs(mc - disk_square_edge_prob(0.16)) < 5e-4

    def test_mean_degree(self):
        degs = [geometric_graph(250, 0.16, np.random.default_rng(s)).degrees().mean()
                for s in range(200)]
        target = 249 * disk_square_edge_prob(0.16)
        assert abs(np.mean(degs) - target) < 0.1 * target


class TestGraphError:
    def test_identity_and_complement(self, rng):
        w = erdos_renyi(30, 0.2, rng)
        assert graph_error(w, 0.0, 0.0, rng) == w
        comp = graph_error(w, 1.0, 1.0, rng).data
        assert np.array_equal(comp, 1 - np.eye(30) - w.data)

    def test_mean_edge_count(self, rng):
        w = erdos_renyi(120, 0.1, rng)
        e = w.edge_count()
        pairs = 120 * 119 // 2
        counts = edge_counts(lambda r: graph_error(w, 0.19, 0.01, r))
        mean = e * 0.81 + (pairs - e) * 0.01
        var = e * 0.19 * 0.81 + (pairs - e) * 0.01 * 0.99
        assert abs(counts.mean() - mean) < 3 * np.sqrt(var / counts.size)


class TestPower:
    def test_path_and_identity_power(self):
        w = AdjacencyMatrix([[0, 1], [1, 0]])
        assert np.array_equal(power(w, 2), np.eye(2))
        assert np.array_equal(power(w, 1), w.data)

    def test_cycle_walk_counts(self):
        w = AdjacencyMatrix.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
        w2 = power(w, 2)
        # length-2 walks in C4: back and forth (2 per node) or to the opposite node
        walks = np.zeros((4, 4), dtype=int)
        for i in range(4):
            for j in range(4):
                walks[i, j] = sum(w.data[i, m] * w.data[m, j] for m in range(4))
        assert np.array_equal(w2, walks)
        assert np.all(np.diag(w2) == 2)

    def test_zero_power_rejected(self):
        with pytest.raises(GraphError):
            power(AdjacencyMatrix(np.zeros((2, 2))), 0)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 5))
    @settings(max_examples=30, deadline=None)
    def test_matches_repeated_product(self, seed, k):
        w = erdos_renyi(12, 0.3, np.random.default_rng(seed))
        ref = np.eye(12, dtype=np.int64)
        for _ in range(k):
            ref = ref @ w.data.astype(np.int64)
        assert np.array_equal(power(w, k), ref)
        assert power(w, k) is power(w, k)


class TestProperties:
    def test_generators_valid_over_many_seeds(self):
        for s in range(1000):
            rng = np.random.default_rng(s)
            for w in (erdos_renyi(9, 0.4, rng), sbm_two_block(8, 0.6, 0.2, rng),
                      geometric_graph(9, 0.4, rng)):
                assert_valid(w)
            assert_valid(graph_error(w, 0.3, 0.2, rng))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_seed_determinism(self, seed):
        for make in (lambda r: erdos_renyi(20, 0.3, r),
                     lambda r: sbm_two_block(20, 0.3, 0.1, r),
                     lambda r: geometric_graph(20, 0.3, r)):
            a = make(np.random.default_rng(seed))
            b = make(np.random.default_rng(seed))
            assert a == b

    @given(st.integers(0, 2**32 - 1), st.integers(1, 25))
    @settings(max_examples=25, deadline=None)
    def test_edge_list_round_trip(self, tmp_path_factory, seed, n):
        w = erdos_renyi(n, 0.3, np.random.default_rng(seed))
        path = tmp_path_factory.mktemp("g") / "w.txt"
        save_edge_list(w, path)
        assert load_edge_list(path) == w
