import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lossy_diffusion.topology import (
    build_from_adjacency,
    complete,
    neighborhood,
    random_geometric,
    read_adjacency,
    star,
    write_positions,
)


def test_two_node_graph():
    t = build_from_adjacency([[0, 1], [1, 0]])
    assert t.n == 2 and t.num_links == 1
    assert list(t.degrees) == [2, 2]  # closed neighborhood cardinalities
    assert neighborhood(t, 0) == {0, 1}


def test_empty_graph_allowed():
    t = build_from_adjacency(np.zeros((3, 3), dtype=int))
    assert t.num_links == 0
    assert all(t.neighborhood(k) == {k} for k in range(3))
    assert not t.is_connected()


@pytest.mark.parametrize(
    "adj, needle",
    [
        ([[0, 1], [0, 0]], "symmetric"),
        ([[0, 2], [2, 0]], "binary"),
        ([[1, 0], [0, 0]], "diagonal"),
        ([[0, 1, 0], [1, 0, 1]], "square"),
    ],
)
def test_invalid_adjacency_named(adj, needle):
    with pytest.raises(ValueError, match=needle):
        build_from_adjacency(adj)


def test_invalid_entry_location_reported():
    with pytest.raises(ValueError, match=r"\(1, 2\)|\(2, 1\)|1,2|2,1"):
        build_from_adjacency([[0, 0, 0], [0, 0, 1], [0, 0, 0]])


def test_invalid_node_id():
    t = star(4)
    with pytest.raises(IndexError):
        t.neighborhood(4)
    with pytest.raises(IndexError):
        t.neighborhood(-1)


def test_star_center_sees_everyone():
    t = star(6)
    assert t.neighborhood(0) == set(range(6))
    assert t.degrees[0] == 6


def test_isolated_node():
    t = random_geometric(1, 10.0, 5.0, seed=0)
    assert t.n == 1 and t.num_links == 0 and t.neighborhood(0) == {0}


def test_reference_scale_graphs_reproducible():
    a = random_geometric(7, 100.0, 50.0, seed=11)
    b = random_geometric(7, 100.0, 50.0, seed=11)
    assert np.array_equal(a.adjacency, b.adjacency)
    assert np.array_equal(a.positions, b.positions)
    big = random_geometric(30, 100.0, 25.0, seed=5)
    assert big.n == 30 and big.num_links > 0
    assert np.all((big.positions >= 0) & (big.positions <= 100))


def test_edge_iff_strictly_closer_than_range():
    t = random_geometric(25, 100.0, 30.0, seed=2)
    d = np.linalg.norm(t.positions[:, None] - t.positions[None], axis=-1)
    expected = (d < 30.0) & ~np.eye(25, dtype=bool)
    assert np.array_equal(t.adjacency.astype(bool), expected)


def test_distance_tie_gives_no_edge():
    from lossy_diffusion.topology import _geometric_adjacency

    pos = np.array([[0.0, 0.0], [3.0, 4.0]])  # exactly 5 apart
    assert _geometric_adjacency(pos, 5.0).sum() == 0
    assert _geometric_adjacency(pos, 5.0 + 1e-12).sum() == 2


def test_complete_when_range_covers_diagonal():
    t = random_geometric(9, 10.0, 10.0 * np.sqrt(2) + 1e-9, seed=4)
    assert t.num_links == 9 * 8 // 2


def test_adjacency_file_and_positions_csv(tmp_path):
    f = tmp_path / "adj.txt"
    f.write_text("0 1 1\n1 0 0\n1 0 0\n")
    t = read_adjacency(f)
    assert t.num_links == 2 and list(t.degrees) == [3, 2, 2]
    g = random_geometric(4, 10.0, 6.0, seed=1)
    out = tmp_path / "pos.csv"
    write_positions(g, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "node,x,y" and len(lines) == 5
    back = np.array([[float(v) for v in ln.split(",")[1:]] for ln in lines[1:]])
    assert np.array_equal(back, g.positions)


adjacencies = st.integers(1, 9).flatmap(
    lambda n: st.lists(st.booleans(), min_size=n * n, max_size=n * n).map(
        lambda bits: np.triu(np.array(bits, dtype=int).reshape(n, n), 1)
    )
)


@settings(max_examples=60, deadline=None)
@given(adjacencies)
def test_structural_invariants(upper):
    t = build_from_adjacency(upper + upper.T)
    for k in range(t.n):
        assert k in t.neighborhood(k)
        for l in t.neighborhood(k):
            assert k in t.neighborhood(l)
    assert t.degrees.sum() == t.n + 2 * t.num_links
    assert 2 * t.num_links == t.adjacency.sum()
    assert len(t.links) == t.num_links


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 20), st.floats(1.0, 200.0), st.floats(0.1, 300.0), st.integers(0, 2**31))
def test_geometric_determinism(n, side, rng_, seed):
    a = random_geometric(n, side, rng_, seed)
    b = random_geometric(n, side, rng_, seed)
    assert np.array_equal(a.adjacency, b.adjacency)


def test_complete_helper():
    assert complete(5).num_links == 10
