import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qwo.model import (
    FIXTURES,
    Dag,
    DiGraph,
    GraphError,
    LigamModel,
    Permutation,
    ancestors,
    d_separated,
    edge_count,
    format_edges,
    graph_of,
    is_compatible,
    load_fixture,
    oracle_gpi,
    parents,
    read_edges,
    write_edges,
)
from qwo.synth import sample_er_dag, sample_ligam

from oracles import gpi_from_covariance, model_covariance, partial_corr


@st.composite
def dag_and_perm(draw, max_n=7):
    n = draw(st.integers(2, max_n))
    seed = draw(st.integers(0, 10_000))
    deg = draw(st.floats(0.0, min(3.0, n - 1)))
    g = sample_er_dag(n, deg, seed)
    pi = draw(st.permutations(range(n)))
    return g, Permutation(pi)


# --- graph_of -------------------------------------------------------------

def test_graph_of_zero_matrix_is_empty():
    assert graph_of(np.zeros((4, 4))).edge_count == 0


def test_graph_of_reads_support_of_transpose():
    B = np.zeros((3, 3))
    B[1, 0] = B[2, 1] = 1.0
    assert graph_of(B, 0.0).edges == {(0, 1), (1, 2)}


def test_graph_of_threshold_suppresses_small_entries():
    B = np.zeros((3, 3))
    B[1, 0] = 0.05
    assert graph_of(B, 0.1).edge_count == 0


def test_graph_of_cyclic_support_is_reported():
    B = np.array([[0.0, 1.0], [1.0, 0.0]])
    g = graph_of(B)
    assert not g.is_acyclic
    assert not isinstance(g, Dag)


# --- compatibility ---------------------------------------------------------

def test_is_compatible_examples(chain):
    assert is_compatible(chain, [0, 1, 2])
    assert not is_compatible(chain, [2, 1, 0])
    assert is_compatible(Dag(3), [2, 0, 1])


def test_is_compatible_size_mismatch(chain):
    with pytest.raises(GraphError):
        is_compatible(chain, [0, 1])


# --- d-separation ------------------------------------------------------------

def test_d_separation_chain_and_collider(chain):
    assert d_separated(chain, 0, 2, {1})
    assert not d_separated(chain, 0, 2, set())
    collider = Dag(3, [(0, 1), (2, 1)])
    assert not d_separated(collider, 0, 2, {1})
    assert d_separated(collider, 0, 2, set())


def test_d_separation_rejects_bad_queries(chain):
    with pytest.raises(GraphError):
        d_separated(chain, 0, 0)
    with pytest.raises(GraphError):
        d_separated(chain, 0, 2, {0})
    with pytest.raises(GraphError):
        d_separated(chain, 0, 7)


@given(dag_and_perm(max_n=6), st.data())
def test_d_separation_matches_vanishing_partial_correlation(gp, data):
    # for generic weights, d-separation <=> zero partial correlation
    g, _ = gp
    n = g.n
    model = sample_ligam(g, data.draw(st.integers(0, 999)))
    cov = model_covariance(model.B, model.sigma)
    i, j = data.draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
    rest = [v for v in range(n) if v not in (i, j)]
    S = data.draw(st.lists(st.sampled_from(rest), unique=True)) if rest else []
    zero = abs(partial_corr(cov, i, j, S)) < 1e-9
    assert d_separated(g, i, j, S) == zero
    assert d_separated(g, j, i, S) == d_separated(g, i, j, S)


# --- oracle_gpi --------------------------------------------------------------

def test_oracle_gpi_examples(chain):
    assert oracle_gpi(chain, [0, 1, 2]).edges == {(0, 1), (1, 2)}
    assert oracle_gpi(chain, [1, 0, 2]).edges == {(1, 0), (1, 2)}
    assert oracle_gpi(chain, [0, 2, 1]).edges == {(0, 2), (0, 1), (2, 1)}


@given(dag_and_perm())
def test_oracle_gpi_is_compatible(gp):
    g, pi = gp
    assert is_compatible(oracle_gpi(g, pi), pi)


@given(dag_and_perm())
def test_oracle_gpi_returns_graph_for_topological_orders(gp):
    g, _ = gp
    assert oracle_gpi(g, g.topological_order()) == g


@given(dag_and_perm(max_n=6), st.integers(0, 999))
def test_oracle_gpi_agrees_with_covariance_oracle(gp, seed):
    g, pi = gp
    model = sample_ligam(g, seed)
    cov = model_covariance(model.B, model.sigma)
    assert oracle_gpi(g, pi).edges == gpi_from_covariance(cov, list(pi), tol=1e-9)


# --- small helpers ---------------------------------------------------------

def test_ancestors_parents_edge_count(chain):
    assert ancestors(chain, 2) == {0, 1}
    assert parents(chain, 2) == {1}
    assert edge_count(Dag(4)) == 0
    with pytest.raises(GraphError):
        parents(chain, 3)


def test_dag_rejects_cycles_and_self_loops():
    with pytest.raises(GraphError):
        Dag(3, [(0, 1), (1, 2), (2, 0)])
    with pytest.raises(GraphError):
        Dag(2, [(1, 1)])
    assert not DiGraph(2, [(0, 1), (1, 0)]).is_acyclic


def test_topological_order_is_compatible():
    g = Dag(5, [(3, 0), (0, 4), (2, 4), (1, 2)])
    assert is_compatible(g, g.topological_order())


def test_permutation_inverse_and_validation():
    p = Permutation([2, 0, 1])
    assert [p.position(v) for v in range(3)] == [1, 2, 0]
    assert p.swap(0, 2).order == (1, 0, 2)
    assert Permutation.identity(3).order == (0, 1, 2)
    for bad in ([0, 0, 1], [0, 1, 3], [-1, 0, 1]):
        with pytest.raises(GraphError):
            Permutation(bad)


@given(st.permutations(range(9)))
def test_permutation_inverse_roundtrip(order):
    p = Permutation(order)
    assert all(p.order[p.inverse[v]] == v for v in range(9))


def test_ligam_model_validation():
    with pytest.raises(ValueError):
        LigamModel(np.zeros((2, 2)), [1.0, 0.0])
    with pytest.raises(GraphError):
        LigamModel(np.zeros((2, 3)), [1.0, 1.0])


def test_model_covariance_of_chain(chain_model):
    expected = np.array([[1.0, 1, 1], [1, 2, 2], [1, 2, 3]])
    np.testing.assert_allclose(chain_model.covariance(), expected, atol=1e-12)
    assert chain_model.graph.edges == {(0, 1), (1, 2)}


# --- edge lists and fixtures ---------------------------------------------

def test_edge_list_roundtrip(tmp_path, chain):
    path = tmp_path / "g.edges"
    write_edges(chain, path)
    assert path.read_text() == "n 3\n1 2\n2 3\n"
    assert read_edges(path) == chain


def test_edge_list_errors(tmp_path):
    p = tmp_path / "bad.edges"
    for text in ("", "3\n1 2\n", "n 3\n1 2 3\n", "n 3\n1 x\n", "n 2\n1 3\n"):
        p.write_text(text)
        with pytest.raises(GraphError):
            read_edges(p)


def test_edge_list_comments(tmp_path):
    p = tmp_path / "c.edges"
    p.write_text("# header\nn 2\n1 2  # the only edge\n")
    assert read_edges(p).edges == {(0, 1)}


@pytest.mark.parametrize("name,n,m", [("cancer", 5, 4), ("survey", 6, 6), ("asia", 8, 8), ("sachs", 11, 17)])
def test_fixtures(name, n, m):
    g = load_fixture(name)
    assert (g.n, g.edge_count) == (n, m)
    assert name in FIXTURES
    assert format_edges(g).startswith(f"n {n}\n")


def test_unknown_fixture():
    with pytest.raises(KeyError):
        load_fixture("alarm")


def test_dag_equality_and_hash():
    a = Dag(3, [(0, 1)])
    b = Dag.from_adjacency(np.array([[0, 1, 0], [0, 0, 0], [0, 0, 0]]))
    assert a == b and hash(a) == hash(b)
    assert a != Dag(3, [(1, 0)])
    assert len({a, b}) == 1


def test_all_small_dags_acyclic_by_construction():
    # every DAG on 3 nodes: topological order exists and is compatible
    count = 0
    pairs = [(0, 1), (0, 2), (1, 2)]
    for choice in itertools.product((0, 1, 2), repeat=3):
        edges = [(u, v) if c == 1 else (v, u) for (u, v), c in zip(pairs, choice) if c]
        g = DiGraph(3, edges)
        if g.is_acyclic:
            count += 1
            assert is_compatible(g, Dag(3, edges).topological_order())
    assert count == 25
