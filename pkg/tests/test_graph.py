import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from gdtm.graph import (
    HETEROGENEOUS, Edge, Graph, GraphError, aggregate, build_chain_adjacency,
    build_heterogeneous_adjacency, chain_graph, homogeneous_adjacency, load_graph, save_graph,
    scale_edges, spring_scale_matrix, AdjacencySet,
)
from gdtm.oracle import assemble_matrices, scaled_system, uniform_chain


def test_chain_adjacency_single_grounded_mass():
    assert_array_equal(build_chain_adjacency(1).stacked[0], [[1.0]])


@pytest.mark.parametrize("n, expected", [
    (2, [[2, -1], [-1, 1]]),
    (3, [[2, -1, 0], [-1, 2, -1], [0, -1, 1]]),
])
def test_chain_adjacency_matches_stiffness_pattern(n, expected):
    adj = build_chain_adjacency(n, grounded=True)
    assert adj.N == 1
    assert_array_equal(adj.stacked[0], expected)


def test_chain_adjacency_rejects_zero_vertices():
    with pytest.raises(GraphError):
        build_chain_adjacency(0)


@pytest.mark.parametrize("n", [1, 4, 10, 30])
def test_uniform_chain_stiffness_equals_k_times_adjacency(n):
    k = 2.4e5
    _, _, K = assemble_matrices(uniform_chain(n, stiffness=k))
    assert_allclose(K, k * build_chain_adjacency(n).stacked[0], rtol=0, atol=0)


def test_heterogeneous_single_type_reduces_to_homogeneous_plus_identity():
    g = Graph(2, (Edge(0, 1, 0),), grounded_vertices=(0,), ground_type=0)
    adj = build_heterogeneous_adjacency(g)
    assert adj.N == 2
    assert_array_equal(adj.matrices[0], [[2, -1], [-1, 1]])
    assert_array_equal(adj.matrices[1], np.eye(2))


def test_heterogeneous_alternating_types():
    g = Graph(3, (Edge(0, 1, 0), Edge(1, 2, 1)), grounded_vertices=(0,), ground_type=0)
    adj = build_heterogeneous_adjacency(g)
    assert adj.N == 3
    assert_array_equal(adj.matrices[0], [[2, -1, 0], [-1, 1, 0], [0, 0, 0]])
    assert_array_equal(adj.matrices[1], [[0, 0, 0], [0, 1, -1], [0, -1, 1]])
    assert_array_equal(adj.matrices[2], np.eye(3))


@pytest.mark.parametrize("n, types", [(4, [0, 1]), (7, [0, 1, 2]), (2, [1])])
def test_heterogeneous_last_matrix_is_identity(n, types):
    adj = build_heterogeneous_adjacency(chain_graph(n, types=types))
    assert adj.kind == HETEROGENEOUS
    assert_array_equal(adj.matrices[-1], np.eye(n))
    # type matrices sum back to the homogeneous layout
    hom = homogeneous_adjacency(chain_graph(n, types=types)).stacked[0]
    assert_allclose(sum(adj.coupling_matrices), hom)


def test_heterogeneous_empty_graph_rejected():
    with pytest.raises(GraphError):
        build_heterogeneous_adjacency(Graph(3))


def test_aggregate_identity_leaves_features():
    adj = AdjacencySet("homogeneous", (np.eye(4),))
    f = np.arange(8.0).reshape(4, 2)
    assert_array_equal(aggregate(adj, f), f)


@pytest.mark.parametrize("disp, expected", [([1, 1, 1], [1, 0, 0]), ([0, 1, 0], [-1, 2, -1])])
def test_aggregate_chain_displacement(disp, expected):
    adj = build_chain_adjacency(3)
    f = np.column_stack([np.zeros(3), disp])
    out = aggregate(adj, f)
    assert_array_equal(out[:, 1], expected)
    assert_array_equal(out[:, 0], 0.0)


def test_aggregate_heterogeneous_width():
    adj = build_heterogeneous_adjacency(chain_graph(5, types=[0, 1]))
    out = aggregate(adj, np.ones((7, 5, 2)))
    assert out.shape == (7, 5, 2 * adj.N)


def test_aggregate_shape_mismatch():
    with pytest.raises(GraphError):
        aggregate(build_chain_adjacency(3), np.ones((4, 2)))


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 8), a=st.floats(-10, 10), b=st.floats(-10, 10), seed=st.integers(0, 2**16))
def test_aggregate_is_linear(n, a, b, seed):
    rng = np.random.default_rng(seed)
    adj = build_heterogeneous_adjacency(chain_graph(n, types=[0, 1]))
    x, y = rng.normal(size=(2, n, 2))
    assert_allclose(aggregate(adj, a * x + b * y), a * aggregate(adj, x) + b * aggregate(adj, y),
                    atol=1e-9)


def test_scale_edges_unit_factor_is_identity():
    adj = build_heterogeneous_adjacency(chain_graph(6, types=[0, 1]))
    assert_array_equal(scale_edges(adj, 1.0).stacked, adj.stacked)


def test_scale_edges_global_factor_matches_scaled_stiffness():
    adj = build_chain_adjacency(10)
    _, _, K = assemble_matrices(uniform_chain(10, stiffness=0.1 * 2.4e5))
    assert_allclose(2.4e5 * scale_edges(adj, 0.1).stacked[0], K, rtol=1e-12)


def test_scale_edges_never_touches_self_matrix():
    adj = build_heterogeneous_adjacency(chain_graph(4, types=[0, 1]))
    assert_array_equal(scale_edges(adj, 0.3).matrices[-1], np.eye(4))


def test_scale_edges_per_spring_matches_assembled_system():
    rng = np.random.default_rng(3)
    n = 10
    factors = rng.uniform(0.5, 1.5, n)
    adj = scale_edges(build_chain_adjacency(n), spring_scale_matrix(n, factors))
    _, _, K = assemble_matrices(scaled_system(uniform_chain(n), factors))
    assert_allclose(2.4e5 * adj.stacked[0], K, rtol=1e-12)


@pytest.mark.parametrize("bad", [0.0, -1.0, np.nan])
def test_scale_edges_rejects_nonpositive(bad):
    with pytest.raises(GraphError):
        scale_edges(build_chain_adjacency(3), bad)


def test_graph_validation():
    with pytest.raises(GraphError):
        Graph(2, (Edge(0, 2),))
    with pytest.raises(GraphError):
        Graph(2, (Edge(1, 1),))
    with pytest.raises(GraphError):
        Graph(2, (Edge(0, 1), Edge(1, 0)))
    with pytest.raises(GraphError):
        Graph(0)


def test_graph_file_round_trip(tmp_path):
    g = chain_graph(5, types=[1, 0, 2], weights=[1.0, 0.5, 2.0])
    save_graph(g, tmp_path / "g.txt")
    assert load_graph(tmp_path / "g.txt") == g


def test_graph_file_parsing(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("# three masses\nvertex_count=3\ngrounded=0\n\nedge=0,1,0,1.0\nedge=1,2,1,2.5\n")
    g = load_graph(p)
    assert g.vertex_count == 3 and g.grounded_vertices == (0,)
    assert g.edges[1] == Edge(1, 2, 1, 2.5)
    assert g.neighbors(1) == [0, 2]
    p.write_text("vertex_count=3\nweird=1\n")
    with pytest.raises(GraphError):
        load_graph(p)
    p.write_text("edge=0,1,0,1\n")
    with pytest.raises(GraphError):
        load_graph(p)
