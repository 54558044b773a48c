import io

import numpy as np
import pytest
from conftest import B1, B2, U1, U2, U3, edges_from_triples, random_triples
from hypothesis import given, settings
from hypothesis import strategies as st

from ratingnet.errors import GraphError, NodeLookupError, SchemaError, SplitError
from ratingnet.graph import (BUSINESS, USER, build_graph, read_snapshot, snapshot_text,
                             temporal_split)
from ratingnet.ingest import EdgeList


def test_g0_counts(g0):
    assert (g0.n_users, g0.n_businesses, g0.n_edges) == (3, 2, 4)


def test_empty_graph():
    g = build_graph(EdgeList.empty())
    assert (g.n_users, g.n_businesses, g.n_edges) == (0, 0, 0)


def test_duplicate_pair_rejected():
    with pytest.raises(GraphError, match="duplicate"):
        build_graph(EdgeList([0, 0], [1, 1], [3, 4], [1, 2]))


def test_degrees(g0, single_edge):
    assert g0.degree(BUSINESS, B1) == 2
    assert g0.weighted_degree(BUSINESS, B1) == 8
    assert single_edge.weighted_degree(USER, 0) == 4


def test_unknown_node(g0):
    with pytest.raises(NodeLookupError):
        g0.degree(USER, 17)
    with pytest.raises(NodeLookupError):
        g0.neighbors(BUSINESS, 5)


def test_unused_handle_is_unknown():
    g = build_graph(EdgeList([1], [0], [3], [1]), n_users_cap=4)
    with pytest.raises(NodeLookupError):
        g.avg_rating_given(0)


def test_rating_aggregates(g0, single_edge):
    assert g0.avg_rating_given(U1) == 4.5
    assert g0.avg_rating_received(B2) == 3.0
    assert single_edge.avg_rating_given(0) == single_edge.avg_rating_received(0) == 4.0


def test_neighbors(g0, single_edge):
    assert g0.neighbors(USER, U1) == [(B1, 5), (B2, 4)]
    assert g0.neighbors(BUSINESS, B2) == [(U1, 4), (U3, 2)]
    assert single_edge.neighbors(USER, 0) == [(0, 4)]


def test_graph_is_read_only(g0):
    with pytest.raises(ValueError):
        g0.user_stars[0] = 1


def test_has_edges(g0):
    got = g0.has_edges([U1, U2, U3, U2, 9], [B1, B2, B2, B1, 0])
    assert got.tolist() == [True, False, True, True, False]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_mirror_invariant(seed):
    rng = np.random.default_rng(seed)
    triples = random_triples(rng, 8, 6, int(rng.integers(1, 30)))
    g = build_graph(edges_from_triples(triples))
    assert g.user_degree.sum() == g.business_degree.sum() == g.n_edges
    fwd = {(u, b, s) for u in range(g.n_users_cap) if g.has_user(u) for b, s in g.neighbors(USER, u)}
    back = {(u, b, s) for b in range(g.n_businesses_cap) if g.has_business(b)
            for u, s in g.neighbors(BUSINESS, b)}
    assert fwd == back == set(triples)


def test_density(g0):
    assert g0.density() == pytest.approx(4 / 6)


# ---- temporal split --------------------------------------------------------------

def _complete(n_users, n_businesses, stamps):
    """Every user rates every business, with the given timestamps."""
    pairs = [(u, b) for u in range(n_users) for b in range(n_businesses)]
    u, b = zip(*pairs)
    return build_graph(EdgeList(u, b, [3] * len(pairs), stamps))


def test_split_ten_edges():
    g = build_graph(EdgeList(range(10), [0] * 10, [4] * 10, range(10)))
    s = temporal_split(g, 0.8, 0.1)
    assert s.train.n_edges == 8
    assert s.validation.n_edges <= 1 and s.test.n_edges <= 1


def test_split_no_closure_drops():
    # only the first 80 edges form train; shuffle stamps until it covers every node
    for seed in range(200):
        stamps = np.random.default_rng(seed).permutation(100)
        g = _complete(10, 10, stamps)
        s = temporal_split(g)
        if len(s.dropped) == 0:
            break
    assert (s.train.n_edges, s.validation.n_edges, s.test.n_edges) == (80, 10, 10)


def test_split_rejects_empty():
    with pytest.raises(SplitError):
        temporal_split(build_graph(EdgeList.empty()))


@pytest.mark.parametrize("fracs", [(0.0, 0.1), (0.8, 0.0), (0.9, 0.1), (1.2, 0.1)])
def test_split_rejects_bad_fractions(g0, fracs):
    with pytest.raises(SplitError):
        temporal_split(g0, *fracs)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 3))
def test_split_contract(seed, tie_spread):
    rng = np.random.default_rng(seed)
    triples = random_triples(rng, 12, 8, int(rng.integers(5, 60)))
    stamps = rng.integers(0, 20 * tie_spread, len(triples))
    g = build_graph(edges_from_triples(triples, stamps))
    s = temporal_split(g, 0.7, 0.15)
    t1, t2 = s.cuts
    tr, va, te = (p.edges() for p in (s.train, s.validation, s.test))
    assert (tr.timestamp < t1).all()
    assert ((va.timestamp >= t1) & (va.timestamp < t2)).all()
    assert (te.timestamp >= t2).all()
    keys = [set(zip(e.user.tolist(), e.business.tolist())) for e in (tr, va, te, s.dropped)]
    assert sum(len(k) for k in keys) == g.n_edges
    assert set().union(*keys) == {(u, b) for u, b, _ in triples}
    for part in (va, te):
        assert all(s.train.has_user(u) for u in part.user.tolist())
        assert all(s.train.has_business(b) for b in part.business.tolist())


def test_g0_split_drops_unseen_nodes(g0):
    # timestamps 1..4; train = first 2 edges (u1-b1, u2-b1)
    s = temporal_split(g0, 0.5, 0.25)
    assert s.cuts == (3, 4)
    assert s.train.n_edges == 2
    assert s.validation.n_edges == 0 and s.test.n_edges == 0
    assert len(s.dropped) == 2


# ---- snapshot I/O ----------------------------------------------------------------

def test_snapshot_round_trip(g0):
    text = snapshot_text(g0, cuts=(3, 4))
    g, cuts = read_snapshot(io.StringIO(text))
    assert cuts == (3, 4)
    assert g.edges().sorted() == g0.edges().sorted()
    assert snapshot_text(g, cuts) == text


def test_snapshot_keeps_capacity(tmp_path):
    g = build_graph(EdgeList([2], [1], [5], [7]), n_users_cap=10, n_businesses_cap=4)
    path = tmp_path / "g.csv"
    path.write_text(snapshot_text(g))
    again, cuts = read_snapshot(path)
    assert cuts is None
    assert (again.n_users_cap, again.n_businesses_cap) == (10, 4)


def test_snapshot_rejects_foreign_file():
    with pytest.raises(SchemaError):
        read_snapshot(io.StringIO("user,business\n1,2\n"))
