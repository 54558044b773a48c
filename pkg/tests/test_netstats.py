import io

import numpy as np
import pytest
from conftest import edges_from_triples, random_triples
from oracles import bfs_components

from ratingnet.errors import StatError
from ratingnet.graph import BUSINESS, USER, build_graph
from ratingnet.ingest import EdgeList, parse_date
from ratingnet.netstats import (Histogram, coefficient_of_variation, component_sizes,
                                degree_histogram, powerlaw_slope, rating_histogram,
                                reviews_over_time, summary, write_components_csv)


def test_g0_degree_histograms(g0, single_edge):
    assert degree_histogram(g0, USER).as_dict() == {1: 2, 2: 1}
    assert degree_histogram(g0, BUSINESS).as_dict() == {2: 2}
    for side in (USER, BUSINESS):
        assert degree_histogram(single_edge, side).as_dict() == {1: 1}


def test_g0_rating_histogram(g0):
    assert rating_histogram(g0).as_dict() == {1: 0, 2: 1, 3: 1, 4: 1, 5: 1}
    assert rating_histogram(g0).total == g0.n_edges


def test_all_five_star():
    g = build_graph(edges_from_triples([(0, 0, 5), (1, 0, 5), (1, 1, 5)]))
    assert rating_histogram(g).counts == [0, 0, 0, 0, 3]
    per_user = rating_histogram(g, "per-user-average")
    assert per_user.as_dict()[4.75] == 2 and per_user.total == 2


def test_single_review_users_hit_integer_bins(g0):
    h = rating_histogram(g0, "per-user-average").as_dict()
    # u2 averages 3.0 and u3 averages 2.0 from single reviews; u1 averages 4.5
    assert h[3.0] == 1 and h[2.0] == 1 and h[4.5] == 1
    assert sum(h.values()) == 3


def test_bad_mode(g0):
    with pytest.raises(StatError):
        rating_histogram(g0, "median")


def test_empty_graph_rejected():
    g = build_graph(EdgeList.empty())
    for fn in (degree_histogram, rating_histogram, component_sizes):
        with pytest.raises(StatError):
            fn(g)


def test_components(g0):
    assert component_sizes(g0) == [5]
    g = build_graph(edges_from_triples([(0, 0, 3), (1, 1, 3)]))
    assert component_sizes(g) == [2, 2]


def test_components_match_bfs_oracle():
    rng = np.random.default_rng(99)
    for _ in range(50):
        triples = random_triples(rng, 15, 12, int(rng.integers(1, 25)))
        g = build_graph(edges_from_triples(triples))
        sizes = component_sizes(g)
        assert sizes == bfs_components(triples)
        assert sum(sizes) == g.n_nodes


def test_components_csv():
    buf = io.StringIO()
    write_components_csv([5, 2], buf)
    assert buf.getvalue() == "component_rank,size\n1,5\n2,2\n"


def test_reviews_over_time():
    days = [parse_date(d) for d in ("2017-01-02", "2017-01-05", "2017-02-01")]
    e = EdgeList([0, 1, 2], [0, 0, 0], [3, 3, 3], days)
    assert reviews_over_time(e, "day").counts == [1, 1, 1]
    monthly = reviews_over_time(e, "month")
    assert monthly.as_dict() == {"2017-01": 2, "2017-02": 1}
    assert coefficient_of_variation(monthly) == pytest.approx(1 / 3)
    with pytest.raises(StatError):
        reviews_over_time(EdgeList.empty())


def test_histogram_csv():
    buf = io.StringIO()
    Histogram([1, 2], [3, 4]).write_csv(buf)
    assert buf.getvalue() == "key,count\n1,3\n2,4\n"


def test_powerlaw_slope_exact():
    k = np.arange(1, 30)
    h = Histogram(k.tolist(), (1e6 * k ** -2.0).tolist())
    assert powerlaw_slope(h) == pytest.approx(-2.0)


def test_summary(g0):
    s = summary(g0)
    assert (s["users"], s["businesses"], s["nodes"], s["edges"]) == (3, 2, 5, 4)
